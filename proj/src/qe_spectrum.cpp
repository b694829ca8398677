#include "khs/qe_spectrum.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "khs/effective_hamiltonian.hpp"
#include "khs/thread_pool.hpp"

namespace khs {

namespace {

// Angle x_c - a*eta reduced with integer arithmetic (a*eta = 2 pi a k / l).
double offset_angle(long long a, const SystemParams& p) {
    const ResonanceData& res = p.resonance;
    long long m = ((a % res.l) * (res.k % res.l)) % res.l;
    if (m < 0) m += res.l;
    return p.x_c - kTwoPi * static_cast<double>(m) / static_cast<double>(res.l);
}

struct RationalHbar {
    long long q, p;
};

RationalHbar exact_hbar(const SystemParams& p) {
    const Fraction& f = p.hbar_s.fraction();  // throws if not exact
    if (f.num < 1) throw DegenerateInput("band structure needs hbar_s = q/p with q >= 1");
    return {f.num, f.den};
}

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

UnitaryMatrix mkh_matrix(int j, BlochPoint w, const SystemParams& par) {
    if (j < 0 || 2 * j >= par.resonance.r) throw DegenerateInput("factor index out of range");
    RationalHbar h = exact_hbar(par);
    const long long p = h.p;
    const double sign = (j % 2 == 0) ? 1.0 : -1.0;  // (-1)^j
    const double base1 = offset_angle(2LL * j + 1, par);
    const double base2 = offset_angle(2LL * j, par);
    const double mu = par.mu;
    const Potential& V = par.potential;

    // c_m = (1/p) sum_s exp[-i mu W2(w2 + 2 pi s/p)] e^{-2 pi i s m / p}
    std::vector<cdouble> w2phase(static_cast<size_t>(p));
    for (long long s = 0; s < p; ++s) {
        double arg = base2 - sign * (w.w2 + kTwoPi * static_cast<double>(s) / static_cast<double>(p));
        w2phase[static_cast<size_t>(s)] = std::polar(1.0, -mu * V(arg));
    }
    std::vector<cdouble> c(static_cast<size_t>(p));
    for (long long m = 0; m < p; ++m) {
        cdouble acc{0.0, 0.0};
        for (long long s = 0; s < p; ++s)
            acc += w2phase[static_cast<size_t>(s)] * cis2pi_frac(-s * m, p);
        c[static_cast<size_t>(m)] = acc / static_cast<double>(p);
    }

    // Column phases exp[-i mu W1(w1 + 2 pi hbar_s d')], hbar_s d' reduced mod 1.
    std::vector<cdouble> colphase(static_cast<size_t>(p));
    for (long long d = 0; d < p; ++d) {
        long long m = (h.q * d) % p;
        double arg = base1 - sign * (w.w1 + kTwoPi * static_cast<double>(m) / static_cast<double>(p));
        colphase[static_cast<size_t>(d)] = std::polar(1.0, -mu * V(arg));
    }

    UnitaryMatrix M(p, p);
    for (long long d = 0; d < p; ++d)
        for (long long dp = 0; dp < p; ++dp) {
            long long m = (dp - d) % p;
            if (m < 0) m += p;
            M(d, dp) = colphase[static_cast<size_t>(dp)] * c[static_cast<size_t>(m)] *
                       std::polar(1.0, -w.w2 * static_cast<double>(dp - d));
        }
    return M;
}

UnitaryMatrix mr_matrix(BlochPoint w, const SystemParams& par) {
    RationalHbar h = exact_hbar(par);
    const int half = static_cast<int>(par.resonance.r / 2);
    UnitaryMatrix M = UnitaryMatrix::Identity(h.p, h.p);
    for (int j = 0; j < half; ++j) M = M * mkh_matrix(j, w, par);
    return M;
}

double unitarity_residual(const UnitaryMatrix& m) {
    UnitaryMatrix d = m.adjoint() * m - UnitaryMatrix::Identity(m.rows(), m.cols());
    return d.cwiseAbs().maxCoeff();
}

std::vector<double> band_eigenphases(const UnitaryMatrix& m) {
    if (m.rows() == 1) {
        double e = -std::arg(m(0, 0));
        if (e <= -kPi) e += kTwoPi;
        return {e};
    }
    Eigen::ComplexEigenSolver<UnitaryMatrix> es(m, /*computeEigenvectors=*/true);
    if (es.info() != Eigen::Success) throw EigenFailure("eigen decomposition failed");
    const auto& lam = es.eigenvalues();
    const auto& vec = es.eigenvectors();
    std::vector<double> phases(static_cast<size_t>(m.rows()));
    for (Eigen::Index b = 0; b < m.rows(); ++b) {
        double resid = (m * vec.col(b) - lam(b) * vec.col(b)).cwiseAbs().maxCoeff();
        if (resid > 1e-10)
            throw EigenFailure("eigenpair residual " + std::to_string(resid) + " above 1e-10");
        double e = -std::arg(lam(b));
        if (e <= -kPi) e += kTwoPi;
        phases[static_cast<size_t>(b)] = e;
    }
    std::sort(phases.begin(), phases.end());
    return phases;
}

BandSpectrum band_spectrum(const SystemParams& par, int n1, int n2) {
    if (n1 < 1 || n2 < 1) throw DegenerateInput("grid dims must be >= 1");
    RationalHbar h = exact_hbar(par);
    BandSpectrum out;
    out.hbar_s = par.hbar_s.fraction();
    out.n1 = n1;
    out.n2 = n2;
    const double span1 = kTwoPi * static_cast<double>(h.q) / static_cast<double>(h.p);
    const double span2 = kTwoPi / static_cast<double>(h.p);
    out.grid.reserve(static_cast<size_t>(n1) * static_cast<size_t>(n2));
    out.phases.reserve(out.grid.capacity());
    for (int i1 = 0; i1 < n1; ++i1)
        for (int i2 = 0; i2 < n2; ++i2) {
            BlochPoint w{span1 * i1 / n1, span2 * i2 / n2};
            out.grid.push_back(w);
            out.phases.push_back(band_eigenphases(mr_matrix(w, par)));
        }
    return out;
}

namespace {

std::string butterfly_cache_key(const Potential& pot, Fraction eta, double x_c, double mu,
                                long long q, long long p, int n1, int n2) {
    std::string s = "band-v1|mu=" + fmt_double(mu) + "|eta=" + eta.to_string() +
                    "|xc=" + fmt_double(x_c) + "|hs=" + std::to_string(q) + "/" +
                    std::to_string(p) + "|grid=" + std::to_string(n1) + "x" +
                    std::to_string(n2) + "|V=";
    for (int g = 1; g <= pot.max_harmonic(); ++g) {
        cdouble c = pot.coeff(g);
        s += fmt_double(c.real()) + "," + fmt_double(c.imag()) + ";";
    }
    return s;
}

bool cache_load(const std::string& dir, const std::string& key, BandSpectrum& spec) {
    namespace fs = std::filesystem;
    char name[64];
    std::snprintf(name, sizeof name, "khs-%016llx.json",
                  static_cast<unsigned long long>(fnv1a64(key)));
    fs::path path = fs::path(dir) / name;
    std::ifstream in(path);
    if (!in) return false;
    nlohmann::json j;
    try {
        in >> j;
    } catch (...) {
        return false;
    }
    if (j.value("key", "") != key) return false;  // hash collision or stale format
    spec.phases.clear();
    spec.grid.clear();
    spec.n1 = j.at("n1").get<int>();
    spec.n2 = j.at("n2").get<int>();
    for (const auto& row : j.at("grid"))
        spec.grid.push_back({row.at(0).get<double>(), row.at(1).get<double>()});
    for (const auto& row : j.at("phases")) spec.phases.push_back(row.get<std::vector<double>>());
    return spec.grid.size() == spec.phases.size() &&
           spec.grid.size() == static_cast<size_t>(spec.n1) * static_cast<size_t>(spec.n2);
}

void cache_store(const std::string& dir, const std::string& key, const BandSpectrum& spec) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    char name[64];
    std::snprintf(name, sizeof name, "khs-%016llx.json",
                  static_cast<unsigned long long>(fnv1a64(key)));
    nlohmann::json j;
    j["key"] = key;
    j["n1"] = spec.n1;
    j["n2"] = spec.n2;
    auto grid = nlohmann::json::array();
    for (const auto& w : spec.grid) grid.push_back({w.w1, w.w2});
    j["grid"] = std::move(grid);
    j["phases"] = spec.phases;
    fs::path path = fs::path(dir) / name;
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        out << j.dump();
    }
    fs::rename(tmp, path, ec);  // atomic publish
    if (ec) fs::remove(tmp, ec);
}

}  // namespace

ButterflyDataset butterfly(const Potential& pot, Fraction eta, double x_c, double mu,
                           int p_max, const ButterflyOptions& opts) {
    if (p_max < 2) throw DegenerateInput("p_max must be >= 2");
    ButterflyDataset out;
    out.mu = mu;
    out.eta = eta;
    out.x_c = x_c;
    out.p_max = p_max;

    std::vector<Fraction> fracs;
    for (long long p = 2; p <= p_max; ++p)
        for (long long q = 1; q < p; ++q)
            if (std::gcd(q, p) == 1) fracs.emplace_back(q, p);

    ResonanceData res = derive_resonance(eta);
    const double ceta = cospi(2.0 * static_cast<double>(res.k % res.l) / static_cast<double>(res.l));

    std::vector<BandSpectrum> specs(fracs.size());
    parallel_for(fracs.size(), opts.workers, [&](size_t i) {
        SystemParams par = make_params(pot, eta, x_c, HbarS::exact(fracs[i]), mu);
        if (!opts.cache_dir.empty()) {
            std::string key = butterfly_cache_key(pot, eta, x_c, mu, fracs[i].num, fracs[i].den,
                                                  opts.grid_n1, opts.grid_n2);
            BandSpectrum spec;
            spec.hbar_s = fracs[i];
            if (cache_load(opts.cache_dir, key, spec)) {
                specs[i] = std::move(spec);
                return;
            }
            specs[i] = band_spectrum(par, opts.grid_n1, opts.grid_n2);
            cache_store(opts.cache_dir, key, specs[i]);
            return;
        }
        specs[i] = band_spectrum(par, opts.grid_n1, opts.grid_n2);
    });

    for (size_t i = 0; i < fracs.size(); ++i) {
        const Fraction& f = fracs[i];
        double eps = mu * sinpi(f.value());
        double scale = 8.0 * ceta / (static_cast<double>(res.r) * mu * eps);
        const BandSpectrum& spec = specs[i];
        for (size_t gidx = 0; gidx < spec.grid.size(); ++gidx)
            for (size_t b = 0; b < spec.phases[gidx].size(); ++b)
                out.points.push_back({f.num, f.den, static_cast<int>(b), spec.grid[gidx].w1,
                                      spec.grid[gidx].w2, spec.phases[gidx][b],
                                      scale * spec.phases[gidx][b]});
    }
    return out;
}

WidthGap width_gap_half(const SystemParams& par, int grid_n) {
    RationalHbar h = exact_hbar(par);
    if (h.q != 1 || h.p != 2) throw ConditionViolated("width/gap defined at hbar_s = 1/2");
    if (par.potential.max_harmonic() != 1 || std::abs(std::abs(par.potential.coeff(1)) - 0.5) > 1e-12)
        throw ConditionViolated("width/gap formulas assume |V_1| = 1/2");
    if (grid_n % 4 != 0) throw DegenerateInput("grid_n must be a multiple of 4");

    auto split = [&](BlochPoint w) {
        std::vector<double> e = band_eigenphases(mr_matrix(w, par));
        return e.back() - e.front();
    };

    WidthGap wg;
    wg.width = split({kPi / 2, kPi / 2});
    wg.gap = split({0.0, 0.0});

    // The matrix is pi-periodic in both w components at hbar_s = 1/2; scanning
    // one pi x pi cell covers the zone.
    wg.grid_min = wg.width;
    wg.grid_max = wg.gap;
    for (int i = 0; i < grid_n; ++i)
        for (int jj = 0; jj < grid_n; ++jj) {
            double d = split({kPi * i / grid_n, kPi * jj / grid_n});
            wg.grid_min = std::min(wg.grid_min, d);
            wg.grid_max = std::max(wg.grid_max, d);
        }
    if (wg.grid_min < wg.gap - 1e-12 || wg.grid_max > wg.width + 1e-12)
        throw ExtremumMismatch("grid scan contradicts symmetry-center extrema");

    const ResonanceData& res = par.resonance;
    double ceta = cospi(2.0 * static_cast<double>(res.k % res.l) / static_cast<double>(res.l));
    double eps = epsilon(par.mu, 0.5);  // = mu at hbar_s = 1/2
    double scale = 2.0 * std::abs(ceta) / (static_cast<double>(res.l_prime) * par.mu * eps);
    wg.width_scaled = scale * wg.width;
    wg.gap_scaled = scale * wg.gap;
    return wg;
}

double trace_symmetry_check(const SystemParams& par, int n_random, std::uint64_t seed) {
    RationalHbar h = exact_hbar(par);
    if (h.q != 1 || h.p != 2) throw ConditionViolated("trace symmetry stated at hbar_s = 1/2");
    if (par.resonance.k == 0 || par.resonance.l_prime % 2 == 0)
        throw ConditionViolated("trace symmetry requires eta != 0 with odd l'");
    const BlochPoint centers[4] = {{0, 0}, {kPi, 0}, {0, kPi}, {kPi, kPi}};
    Rng rng(seed);
    double worst = 0.0;
    for (int i = 0; i < n_random; ++i) {
        BlochPoint w{rng.uniform(0.0, kTwoPi), rng.uniform(0.0, kTwoPi)};
        cdouble t = mr_matrix(w, par).trace();
        for (const BlochPoint& c : centers) {
            cdouble tr = mr_matrix({c.w1 - w.w1, c.w2 - w.w2}, par).trace();
            worst = std::max(worst, std::abs(tr - t));
        }
    }
    return worst;
}

}  // namespace khs
