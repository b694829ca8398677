#include "khs/evolution.hpp"

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/FFT>

#include "khs/kick_coeffs.hpp"
#include "khs/thread_pool.hpp"

namespace khs {

namespace {

// x_c + j' eta with the multiple of 2 pi removed in integer arithmetic.
double kick_offset(long long j_prime, const SystemParams& p) {
    const ResonanceData& res = p.resonance;
    long long m = ((j_prime % res.l) * (res.k % res.l)) % res.l;
    if (m < 0) m += res.l;
    return p.x_c + kTwoPi * static_cast<double>(m) / static_cast<double>(res.l);
}

int diag_sign(int j_prime) { return ((j_prime / 2) % 2 == 0) ? 1 : -1; }   // (-1)^{j'/2}
int conv_sign(int j_prime) { return (((j_prime - 1) / 2) % 2 == 0) ? 1 : -1; }  // (-1)^{(j'-1)/2}

// Convolution kernel for odd kick j': K[m + l_trunc] = c_{sign * m}.
std::vector<cdouble> conv_kernel(int j_prime, const SystemParams& p, int l_trunc) {
    std::vector<cdouble> c = kick_fourier_coeffs(p.potential, kick_offset(j_prime, p), p.mu, l_trunc);
    int sgn = conv_sign(j_prime);
    std::vector<cdouble> k(static_cast<size_t>(2 * l_trunc + 1));
    for (int m = -l_trunc; m <= l_trunc; ++m)
        k[static_cast<size_t>(m + l_trunc)] = c[static_cast<size_t>(sgn * m + l_trunc)];
    return k;
}

// out[i] = sum_m K[m] in[i - m], zero-padded edges; |out| == |in|.
void conv_fixed(const std::vector<cdouble>& in, const std::vector<cdouble>& kern, int lt,
                std::vector<cdouble>& out) {
    const long long n = static_cast<long long>(in.size());
    out.assign(in.size(), cdouble(0.0, 0.0));
    for (long long i = 0; i < n; ++i) {
        cdouble acc{0.0, 0.0};
        long long mlo = std::max<long long>(-lt, i - (n - 1));
        long long mhi = std::min<long long>(lt, i);
        for (long long m = mlo; m <= mhi; ++m)
            acc += kern[static_cast<size_t>(m + lt)] * in[static_cast<size_t>(i - m)];
        out[static_cast<size_t>(i)] = acc;
    }
}

int certify_l_trunc(const SystemParams& p) {
    for (int lt = 8; lt <= 64; lt *= 2) {
        try {
            // Tail certification only depends on mu and the potential shape;
            // x_c shifts phases, not magnitudes.
            kick_fourier_coeffs(p.potential, p.x_c, p.mu, lt);
            return lt;
        } catch (const TruncationTooSmall&) {
        }
    }
    throw TruncationTooSmall("no kick-coefficient cutoff up to 64 certifies below 1e-15");
}

struct FiberScratch {
    std::vector<cdouble> buf;
};

void grow_window(FiberState& f, long long pad, long long cap) {
    long long n = static_cast<long long>(f.amp.size());
    if (n + 2 * pad > cap)
        throw WindowTooSmall("fiber window would exceed the site cap " + std::to_string(cap));
    std::vector<cdouble> next(static_cast<size_t>(n + 2 * pad), cdouble(0.0, 0.0));
    std::copy(f.amp.begin(), f.amp.end(), next.begin() + pad);
    f.amp = std::move(next);
    f.l_min -= pad;
}

bool edge_hot(const FiberState& f, int guard, double rel) {
    double peak = 0.0;
    for (const cdouble& a : f.amp) peak = std::max(peak, std::norm(a));
    if (peak == 0.0) return false;
    double thresh = rel * rel * peak;
    long long n = static_cast<long long>(f.amp.size());
    long long g = std::min<long long>(guard, n / 4);
    for (long long i = 0; i < g; ++i)
        if (std::norm(f.amp[static_cast<size_t>(i)]) > thresh ||
            std::norm(f.amp[static_cast<size_t>(n - 1 - i)]) > thresh)
            return true;
    return false;
}

}  // namespace

FiberSet init_coherent_fibers(const FixedPoint& center, const SystemParams& p, int n_beta,
                              int window_half) {
    if (n_beta < 1 || window_half < 4) throw DegenerateInput("bad fiber grid sizes");
    const double hbar = p.hbar();
    const double up = center.point.u, vp = center.point.v;
    const double c0 = std::sqrt(hbar / kTwoPi) * std::pow(kPi * hbar, -0.25);
    const long long center_l = std::llround(vp / hbar);

    FiberSet fs;
    fs.u_center = up;
    fs.v_center = vp;
    fs.fibers.resize(static_cast<size_t>(n_beta));
    for (int i = 0; i < n_beta; ++i) {
        FiberState& f = fs.fibers[static_cast<size_t>(i)];
        f.beta = (i + 0.5) / n_beta;
        f.l_min = center_l - window_half;
        f.amp.resize(static_cast<size_t>(2 * window_half));
        for (long long idx = 0; idx < 2 * window_half; ++idx) {
            double dv = (static_cast<double>(f.l_min + idx) + f.beta) * hbar - vp;
            f.amp[static_cast<size_t>(idx)] =
                c0 * std::exp(-dv * dv / (2.0 * hbar)) * std::polar(1.0, -up * dv / hbar);
        }
        double peak = 0.0, edge = 0.0;
        for (const cdouble& a : f.amp) peak = std::max(peak, std::abs(a));
        edge = std::max(std::abs(f.amp.front()), std::abs(f.amp.back()));
        if (edge > 1e-14 * peak)
            throw WindowTooSmall("initial window clips the coherent state tail");
    }
    return fs;
}

double fiber_norm(const FiberSet& fs) {
    double n = 0.0;
    for (const FiberState& f : fs.fibers)
        for (const cdouble& a : f.amp) n += std::norm(a);
    return n * kTwoPi / static_cast<double>(fs.fibers.size());
}

void kick_diagonal(FiberState& f, int j_prime, const SystemParams& p) {
    if (j_prime % 2 != 0) throw DegenerateInput("diagonal kick index must be even");
    const double hbar = p.hbar();
    const double base = kick_offset(j_prime, p);
    const double sgn = diag_sign(j_prime);
    for (size_t idx = 0; idx < f.amp.size(); ++idx) {
        double v = (static_cast<double>(f.l_min + static_cast<long long>(idx)) + f.beta) * hbar;
        f.amp[idx] *= std::polar(1.0, -p.mu * p.potential(base - sgn * v));
    }
}

void kick_convolution(FiberState& f, int j_prime, const SystemParams& p, int l_trunc) {
    if (j_prime % 2 == 0) throw DegenerateInput("convolution kick index must be odd");
    std::vector<cdouble> kern = conv_kernel(j_prime, p, l_trunc);
    FiberState out;
    out.beta = f.beta;
    out.l_min = f.l_min - l_trunc;
    out.amp.assign(f.amp.size() + 2 * static_cast<size_t>(l_trunc), cdouble(0.0, 0.0));
    const long long n_in = static_cast<long long>(f.amp.size());
    for (long long i = 0; i < static_cast<long long>(out.amp.size()); ++i) {
        long long l = out.l_min + i;
        cdouble acc{0.0, 0.0};
        for (long long m = -l_trunc; m <= l_trunc; ++m) {
            long long src = l - m - f.l_min;
            if (src < 0 || src >= n_in) continue;
            acc += kern[static_cast<size_t>(m + l_trunc)] * f.amp[static_cast<size_t>(src)];
        }
        out.amp[static_cast<size_t>(i)] = acc;
    }
    // Trim numerically empty edges.
    size_t lo = 0, hi = out.amp.size();
    while (lo < hi && std::abs(out.amp[lo]) < 1e-16) ++lo;
    while (hi > lo && std::abs(out.amp[hi - 1]) < 1e-16) --hi;
    if (lo > 0 || hi < out.amp.size()) {
        std::vector<cdouble> trimmed(out.amp.begin() + static_cast<long long>(lo),
                                     out.amp.begin() + static_cast<long long>(hi));
        out.amp = std::move(trimmed);
        out.l_min += static_cast<long long>(lo);
    }
    f = std::move(out);
}

namespace {

struct Moments {
    double norm = 0.0, spread_u = 0.0, spread_v = 0.0, fid = 0.0;
};

Moments measure(const FiberSet& fs, const FiberSet& ref, const SystemParams& p,
                Eigen::FFT<double>& fft) {
    const double hbar = p.hbar();
    const int nb = static_cast<int>(fs.fibers.size());
    const double up = fs.u_center, vp = fs.v_center;
    Moments m;

    cdouble overlap{0.0, 0.0};
    long long l_lo = fs.fibers[0].l_min, l_hi = fs.fibers[0].l_max();
    for (int i = 0; i < nb; ++i) {
        const FiberState& f = fs.fibers[static_cast<size_t>(i)];
        l_lo = std::min(l_lo, f.l_min);
        l_hi = std::max(l_hi, f.l_max());
        for (size_t idx = 0; idx < f.amp.size(); ++idx) {
            double dv = (static_cast<double>(f.l_min + static_cast<long long>(idx)) + f.beta) * hbar - vp;
            double w = std::norm(f.amp[idx]);
            m.norm += w;
            m.spread_v += w * dv * dv;
        }
        // Overlap with the initial state over the window intersection.
        const FiberState& r0 = ref.fibers[static_cast<size_t>(i)];
        long long a = std::max(f.l_min, r0.l_min);
        long long b = std::min(f.l_max(), r0.l_max());
        for (long long l = a; l <= b; ++l)
            overlap += std::conj(r0.amp[static_cast<size_t>(l - r0.l_min)]) *
                       f.amp[static_cast<size_t>(l - f.l_min)];
    }
    const double meas = kTwoPi / nb;
    m.norm *= meas;
    m.spread_v *= meas;
    m.fid = std::abs(overlap) * meas;

    // u-moment: interleave the fibers into the fine v-lattice (index
    // t = (l - l_lo) * nb + i corresponds to v = (g + 1/2) hbar / nb with
    // g = l * nb + i counted from g_lo = l_lo * nb), then one FFT gives
    // |Phi(u_k)| = (1/nb)|Y_k| on u_k = 2 pi k / L_tot, k wrapped to +-M/2.
    const long long l_tot = l_hi - l_lo + 1;
    const long long mm = l_tot * nb;
    std::vector<cdouble> c(static_cast<size_t>(mm), cdouble(0.0, 0.0));
    for (int i = 0; i < nb; ++i) {
        const FiberState& f = fs.fibers[static_cast<size_t>(i)];
        for (size_t idx = 0; idx < f.amp.size(); ++idx) {
            long long t = (f.l_min + static_cast<long long>(idx) - l_lo) * nb + i;
            c[static_cast<size_t>(t)] = f.amp[idx];
        }
    }
    std::vector<cdouble> x;
    fft.fwd(x, c);  // X_k = sum_t c_t e^{-2 pi i k t / mm}
    double su = 0.0;
    for (long long k = 0; k < mm; ++k) {
        // Y_k = sum_t c_t e^{+2 pi i k t / mm} = X_{(mm-k) mod mm}
        long long kx = (mm - k) % mm;
        double mag2 = std::norm(x[static_cast<size_t>(kx)]);
        long long sk = (2 * k < mm) ? k : k - mm;
        double du = kTwoPi * static_cast<double>(sk) / static_cast<double>(l_tot) - up;
        su += mag2 * du * du;
    }
    m.spread_u = su * kTwoPi / (static_cast<double>(l_tot) * nb * nb);
    return m;
}

}  // namespace

EvolutionResult evolve(FiberSet fs, const SystemParams& p, long long s_max,
                       const EvolveOptions& opts) {
    const long long r = p.resonance.r;
    if (s_max % r != 0) throw DegenerateInput("s_max must be a multiple of r");
    if (fs.fibers.empty()) throw DegenerateInput("no fibers");
    const long long cycles = s_max / r;
    const int cadence = std::max(1, opts.record_every_cycles);
    const int lt = opts.l_trunc > 0 ? opts.l_trunc : certify_l_trunc(p);

    // One kernel per odd kick; phases depend on j' only.
    std::vector<std::vector<cdouble>> kernels(static_cast<size_t>(r / 2));
    for (long long j = 1; j < r; j += 2)
        kernels[static_cast<size_t>(j / 2)] = conv_kernel(static_cast<int>(j), p, lt);

    const FiberSet ref = fs;
    Eigen::FFT<double> fft;

    EvolutionResult out;
    out.mu = p.mu;
    out.hbar_s = p.hbar_s.value();
    out.eta = p.eta;
    out.l_prime = p.resonance.l_prime;
    out.potential = p.potential;
    out.meta.u_center = fs.u_center;
    out.meta.v_center = fs.v_center;
    out.meta.n_beta = static_cast<int>(fs.fibers.size());
    out.meta.l_trunc = lt;
    out.meta.window_initial = static_cast<long long>(fs.fibers[0].amp.size());

    const ResonanceData& res = p.resonance;
    const double ceta = cospi(2.0 * static_cast<double>(res.k % res.l) / static_cast<double>(res.l));
    // The scaled time is meaningful only when cos(eta) != 0; fall back to the
    // raw kick count where the drift term vanishes.
    const double tau_scale = std::abs(ceta) > 1e-15 ? 1.0 / (8.0 * std::abs(ceta)) : 1.0;

    auto record = [&](long long s) {
        Moments m = measure(fs, ref, p, fft);
        out.times.push_back(s);
        out.tau.push_back(tau_scale * static_cast<double>(s));
        out.spread.push_back(m.spread_u + m.spread_v);
        out.spread_u.push_back(m.spread_u);
        out.spread_v.push_back(m.spread_v);
        out.fidelity.push_back(m.fid);
        out.norm.push_back(m.norm);
    };
    record(0);
    out.meta.norm_initial = out.norm.front();

    std::vector<FiberScratch> scratch(fs.fibers.size());
    const int guard = std::max(lt, 8);

    for (long long done = 0; done < cycles;) {
        const long long todo = std::min<long long>(cadence, cycles - done);
        parallel_for(fs.fibers.size(), opts.workers, [&](size_t fi) {
            FiberState& f = fs.fibers[fi];
            std::vector<cdouble>& buf = scratch[fi].buf;
            for (long long cyc = 0; cyc < todo; ++cyc) {
                for (long long j = 0; j < r; ++j) {
                    if (j % 2 == 0) {
                        kick_diagonal(f, static_cast<int>(j), p);
                    } else {
                        conv_fixed(f.amp, kernels[static_cast<size_t>(j / 2)], lt, buf);
                        f.amp.swap(buf);
                    }
                }
                if (edge_hot(f, guard, 1e-12))
                    grow_window(f, static_cast<long long>(f.amp.size()) / 2, opts.window_cap);
            }
        });
        done += todo;
        record(done * r);
    }

    out.meta.window_final = 0;
    for (const FiberState& f : fs.fibers)
        out.meta.window_final =
            std::max(out.meta.window_final, static_cast<long long>(f.amp.size()));
    out.meta.norm_final = out.norm.back();
    return out;
}

double universality_collapse(const std::vector<EvolutionResult>& runs) {
    if (runs.size() < 2) return 0.0;
    for (const EvolutionResult& r : runs) {
        if (r.l_prime <= 2) throw IncompatibleRuns("collapse defined for l' > 2");
        if (std::abs(r.mu - runs[0].mu) > 1e-15 || std::abs(r.hbar_s - runs[0].hbar_s) > 1e-15 ||
            !(r.potential == runs[0].potential))
            throw IncompatibleRuns("runs differ in mu, hbar_s or potential");
        if (r.times.size() < 3) throw IncompatibleRuns("run too short for collapse");
    }
    // Common scaled-time range; the coarsest run supplies the comparison grid.
    double tau_hi = runs[0].tau.back();
    size_t coarse = 0;
    for (size_t i = 0; i < runs.size(); ++i) {
        tau_hi = std::min(tau_hi, runs[i].tau.back());
        if (runs[i].times.size() < runs[coarse].times.size()) coarse = i;
    }
    auto interp = [](const EvolutionResult& r, double t) {
        const auto& xs = r.tau;
        auto it = std::lower_bound(xs.begin(), xs.end(), t);
        if (it == xs.begin()) return r.spread.front();
        if (it == xs.end()) return r.spread.back();
        size_t hi = static_cast<size_t>(it - xs.begin());
        size_t lo = hi - 1;
        double f = (t - xs[lo]) / (xs[hi] - xs[lo]);
        return (1.0 - f) * r.spread[lo] + f * r.spread[hi];
    };
    double worst = 0.0;
    for (size_t j = 0; j < runs[coarse].tau.size(); ++j) {
        double t = runs[coarse].tau[j];
        if (t <= 0.0 || t > tau_hi) continue;
        double vmin = 0.0, vmax = 0.0, vsum = 0.0;
        for (size_t i = 0; i < runs.size(); ++i) {
            double v = interp(runs[i], t);
            if (i == 0) vmin = vmax = v;
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
            vsum += v;
        }
        double mean = vsum / static_cast<double>(runs.size());
        if (mean > 1e-12) worst = std::max(worst, (vmax - vmin) / mean);
    }
    return worst;
}

double growth_exponent(const EvolutionResult& run, long long s1, long long s2) {
    std::vector<double> lx, ly;
    double vmin = 0.0, vmax = 0.0;
    for (size_t i = 0; i < run.times.size(); ++i) {
        long long s = run.times[i];
        if (s < s1 || s > s2 || s <= 0) continue;
        double v = run.spread[i];
        if (v <= 0.0) throw DegenerateFit("nonpositive spread in fit window");
        if (lx.empty()) vmin = vmax = v;
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
        lx.push_back(std::log(static_cast<double>(s)));
        ly.push_back(std::log(v));
    }
    if (lx.size() < 2) throw DegenerateFit("fewer than two records in fit window");
    if (vmax - vmin <= 1e-9 * vmax) throw DegenerateFit("spread is constant over the window");
    double n = static_cast<double>(lx.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-12) throw DegenerateFit("records do not span a time range");
    return (n * sxy - sx * sy) / denom;
}

}  // namespace khs
