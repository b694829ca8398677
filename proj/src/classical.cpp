#include "khs/classical.hpp"

#include <algorithm>
#include <cmath>

#include "khs/thread_pool.hpp"

namespace khs {

namespace {

// x_c + s*eta with s*eta reduced mod 2pi in integer arithmetic:
// s*eta = 2pi * k*s/l, and only (k*(s mod l)) mod l matters.
double kick_phase(long long s, const SystemParams& p) {
    const ResonanceData& res = p.resonance;
    long long sm = s % res.l;
    if (sm < 0) sm += res.l;
    long long m = (sm * (res.k % res.l)) % res.l;
    if (m < 0) m += res.l;
    return p.x_c + kTwoPi * static_cast<double>(m) / static_cast<double>(res.l);
}

double torus_dist2(PhasePoint a, PhasePoint b) {
    double du = std::remainder(a.u - b.u, kTwoPi);
    double dv = std::remainder(a.v - b.v, kTwoPi);
    return du * du + dv * dv;
}

}  // namespace

PhasePoint step_map(PhasePoint z, long long s, const SystemParams& p) {
    double u1 = z.u + p.kappa() * p.potential.force(kick_phase(s, p) - z.v);
    return {z.v, -u1};  // exact multiplication by e^{-i pi/2}
}

PhasePoint step_map_inverse(PhasePoint z, long long s, const SystemParams& p) {
    // Undo the turn: w = z e^{+i pi/2} = (-v, u); the kick changed u only, and
    // v_s = w.v, so the kick phase argument is recoverable exactly.
    PhasePoint w{-z.v, z.u};
    w.u -= p.kappa() * p.potential.force(kick_phase(s, p) - w.v);
    return w;
}

PhasePoint basic_map(PhasePoint z, const SystemParams& p, long long s0) {
    for (long long j = 0; j < p.resonance.r; ++j) z = step_map(z, s0 + j, p);
    return z;
}

Jacobian2 basic_map_jacobian(PhasePoint z, const SystemParams& p, long long s0) {
    const double h = 1e-6;
    PhasePoint up = basic_map({z.u + h, z.v}, p, s0), um = basic_map({z.u - h, z.v}, p, s0);
    PhasePoint vp = basic_map({z.u, z.v + h}, p, s0), vm = basic_map({z.u, z.v - h}, p, s0);
    Jacobian2 J;
    J.a11 = (up.u - um.u) / (2 * h);
    J.a12 = (vp.u - vm.u) / (2 * h);
    J.a21 = (up.v - um.v) / (2 * h);
    J.a22 = (vp.v - vm.v) / (2 * h);
    return J;
}

double displacement_scaling(const SystemParams& p, const std::vector<double>& kappas,
                            const std::vector<PhasePoint>& sample_points) {
    if (kappas.size() < 2 || sample_points.empty())
        throw DegenerateInput("need >= 2 kappa values and >= 1 sample point");
    std::vector<double> lk, ld;
    for (double kap : kappas) {
        SystemParams pk = p.with_kappa(kap);
        double dmax = 0.0;
        for (PhasePoint z : sample_points) {
            PhasePoint w = basic_map(z, pk);
            dmax = std::max(dmax, std::hypot(w.u - z.u, w.v - z.v));
        }
        if (dmax > 1e-14) {
            lk.push_back(std::log(kap));
            ld.push_back(std::log(dmax));
        }
    }
    if (ld.size() < 2) throw DegenerateFit("displacements below noise floor");
    // least-squares slope
    double n = static_cast<double>(lk.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < lk.size(); ++i) {
        sx += lk[i];
        sy += ld[i];
        sxx += lk[i] * lk[i];
        sxy += lk[i] * ld[i];
    }
    double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-12) throw DegenerateFit("kappa values do not span a range");
    return (n * sxy - sx * sy) / denom;
}

FixedPointSearch find_fixed_points(const SystemParams& p,
                                   const std::vector<PhasePoint>& seeds) {
    if (p.kappa() < 1e-12)
        throw DegenerateInput("kappa ~ 0: every point is fixed under the basic map");
    FixedPointSearch out;
    for (PhasePoint seed : seeds) {
        PhasePoint z = seed;
        bool ok = false;
        for (int it = 0; it < 50; ++it) {
            PhasePoint F{basic_map(z, p).u - z.u, basic_map(z, p).v - z.v};
            if (std::abs(F.u) < 1e-12 && std::abs(F.v) < 1e-12) {
                ok = true;
                break;
            }
            Jacobian2 J = basic_map_jacobian(z, p);
            // Solve (J - I) d = -F
            double a = J.a11 - 1.0, b = J.a12, c = J.a21, d = J.a22 - 1.0;
            double det = a * d - b * c;
            if (std::abs(det) < 1e-14) break;
            double du = (-F.u * d + F.v * b) / det;
            double dv = (-a * F.v + c * F.u) / det;
            z = {fold_pi(z.u + du), fold_pi(z.v + dv)};
            if (std::abs(du) > 50.0 || std::abs(dv) > 50.0) break;
        }
        if (!ok) {
            ++out.dropped_seeds;
            continue;
        }
        z = {fold_pi(z.u), fold_pi(z.v)};
        bool dup = false;
        for (const FixedPoint& fp : out.points)
            if (torus_dist2(fp.point, z) < 1e-14) {
                dup = true;
                break;
            }
        if (dup) continue;
        FixedPoint fp;
        fp.point = z;
        fp.residue_trace = basic_map_jacobian(z, p).trace();
        double t = std::abs(fp.residue_trace);
        if (std::abs(t - 2.0) <= 1e-9) fp.kind = FixedPointKind::parabolic;
        else fp.kind = t > 2.0 ? FixedPointKind::hyperbolic : FixedPointKind::elliptic;
        out.points.push_back(fp);
    }
    return out;
}

std::vector<PhasePoint> default_seed_grid(int n) {
    std::vector<PhasePoint> g;
    g.reserve(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            g.push_back({-kPi + kTwoPi * (i + 0.5) / n, -kPi + kTwoPi * (j + 0.5) / n});
    return g;
}

FixedPoint nearest_hyperbolic(const SystemParams& p) {
    FixedPointSearch fps = find_fixed_points(p, default_seed_grid());
    const FixedPoint* best = nullptr;
    for (const FixedPoint& fp : fps.points) {
        if (fp.kind != FixedPointKind::hyperbolic) continue;
        if (!best) {
            best = &fp;
            continue;
        }
        double d = fp.point.u * fp.point.u + fp.point.v * fp.point.v;
        double db = best->point.u * best->point.u + best->point.v * best->point.v;
        if (d < db - 1e-12 ||
            (std::abs(d - db) <= 1e-12 &&
             (fp.point.u < best->point.u - 1e-12 ||
              (std::abs(fp.point.u - best->point.u) <= 1e-12 && fp.point.v < best->point.v))))
            best = &fp;
    }
    if (!best) throw DegenerateInput("no hyperbolic fixed point found from the seed grid");
    return *best;
}

std::vector<PhasePoint> sample_web(const SystemParams& p, PhasePoint start,
                                   long long n_steps) {
    std::vector<PhasePoint> pts;
    pts.reserve(static_cast<size_t>(n_steps));
    PhasePoint z = start;
    for (long long i = 0; i < n_steps; ++i) {
        z = basic_map(z, p);
        pts.push_back({fold_pi(z.u), fold_pi(z.v)});
    }
    return pts;
}

std::vector<PhasePoint> sample_web_unfolded(const SystemParams& p, PhasePoint start,
                                            long long n_steps) {
    std::vector<PhasePoint> pts;
    pts.reserve(static_cast<size_t>(n_steps));
    PhasePoint z = start;
    for (long long i = 0; i < n_steps; ++i) {
        z = basic_map(z, p);
        pts.push_back(z);
    }
    return pts;
}

SpreadSeries classical_spread(const SystemParams& p, PhasePoint center, int n_samples,
                              long long s_max, std::uint64_t seed, int workers) {
    const long long r = p.resonance.r;
    if (s_max % r != 0) throw DegenerateInput("s_max must be a multiple of r");
    const long long n_rec = s_max / r + 1;

    // Draw all initial offsets up front so the ensemble is independent of the
    // worker count; uniform over the disk of radius sqrt(2 hbar).
    const double R = std::sqrt(2.0 * p.hbar());
    std::vector<PhasePoint> z0(static_cast<size_t>(n_samples));
    Rng rng(seed);
    for (auto& z : z0) {
        double rho = R * std::sqrt(rng.uniform01());
        double phi = kTwoPi * rng.uniform01();
        z = {center.u + rho * std::cos(phi), center.v + rho * std::sin(phi)};
    }

    // Fixed-size chunks keep the floating-point reduction order independent of
    // the worker count.
    const int chunk = 256;
    const int n_chunks = (n_samples + chunk - 1) / chunk;
    std::vector<std::vector<double>> partial(static_cast<size_t>(n_chunks),
                                             std::vector<double>(static_cast<size_t>(n_rec), 0.0));
    parallel_for(static_cast<size_t>(n_chunks), workers, [&](size_t ci) {
        auto& acc = partial[ci];
        int lo = static_cast<int>(ci) * chunk;
        int hi = std::min(n_samples, lo + chunk);
        for (int i = lo; i < hi; ++i) {
            PhasePoint z = z0[static_cast<size_t>(i)];
            const PhasePoint zi = z;
            acc[0] += 0.0;
            for (long long rec = 1; rec < n_rec; ++rec) {
                z = basic_map(z, p, (rec - 1) * r);
                double du = z.u - zi.u, dv = z.v - zi.v;
                acc[static_cast<size_t>(rec)] += du * du + dv * dv;
            }
        }
    });

    SpreadSeries out;
    out.times.resize(static_cast<size_t>(n_rec));
    out.values.assign(static_cast<size_t>(n_rec), 0.0);
    for (long long rec = 0; rec < n_rec; ++rec) out.times[static_cast<size_t>(rec)] = rec * r;
    for (int ci = 0; ci < n_chunks; ++ci)
        for (long long rec = 0; rec < n_rec; ++rec)
            out.values[static_cast<size_t>(rec)] += partial[static_cast<size_t>(ci)][static_cast<size_t>(rec)];
    for (double& v : out.values) v /= n_samples;
    return out;
}

}  // namespace khs
