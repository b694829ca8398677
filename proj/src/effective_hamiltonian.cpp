#include "khs/effective_hamiltonian.hpp"

#include <cmath>

namespace khs {

double epsilon(double mu, double hbar_s) { return mu * sinpi(hbar_s); }

double j_factor(long long a, double hbar_s) {
    if (a == 0) throw DegenerateInput("j_factor needs a != 0");
    double m = std::nearbyint(hbar_s);
    if (std::abs(hbar_s - m) < 1e-12) {
        // sin(a pi h)/sin(pi h) -> a cos(a pi m)/cos(pi m) = a (-1)^{(a-1)m}
        long long mi = static_cast<long long>(m);
        long long par = (a - 1) * mi;
        return (par & 1LL) ? -static_cast<double>(a) : static_cast<double>(a);
    }
    return sinpi(static_cast<double>(a) * hbar_s) / sinpi(hbar_s);
}

FourierSurface effective_h0(const SystemParams& p) {
    const ResonanceData& res = p.resonance;
    const int N = p.potential.max_harmonic();
    FourierSurface s;
    for (int g = -N; g <= N; ++g) {
        if (g == 0) continue;
        // Geometric sum over the r kicks at fixed direction: nonzero (= l')
        // only when l' | k n' g.
        if (((res.k % res.l_prime) * (res.n_prime % res.l_prime) * g) % res.l_prime != 0)
            continue;
        cdouble base = p.potential.coeff(g) * std::polar(1.0, g * p.x_c) *
                       static_cast<double>(res.l_prime);
        for (int nbar = 1; nbar <= 4; ++nbar) {
            cdouble c = base * cis2pi_frac(-static_cast<long long>(g) * nbar * res.k, res.l);
            switch (nbar) {  // e^{-ig v_nbar}, v_1..4 = (u, -v, -u, v)
                case 1: s.add(-g, 0, c); break;
                case 2: s.add(0, g, c); break;
                case 3: s.add(g, 0, c); break;
                case 4: s.add(0, -g, c); break;
            }
        }
    }
    s.prune(0.0);  // drop exact zeros only
    return s;
}

FourierSurface effective_h1(const SystemParams& p) {
    const ResonanceData& res = p.resonance;
    const int N = p.potential.max_harmonic();
    const long long lp = res.l_prime;
    if (lp <= N)
        throw ConditionViolated("closed-form O(eps) surface requires l' > N");
    const double hs = p.hbar_s.value();

    FourierSurface s;
    // Diagonal pairs: -2 l' J(g^2) |V_g|^2 / cos(g eta) on cos g(u+v), cos g(u-v).
    for (int g = 1; g <= N; ++g) {
        double cg = cospi(2.0 * static_cast<double>((static_cast<long long>(g) * res.k) % res.l) /
                          static_cast<double>(res.l));
        cdouble vg = p.potential.coeff(g);
        double c1 = -2.0 * static_cast<double>(lp) *
                    j_factor(static_cast<long long>(g) * g, hs) * std::norm(vg) / cg;
        s.add(g, g, 0.5 * c1);
        s.add(-g, -g, 0.5 * c1);
        s.add(g, -g, 0.5 * c1);
        s.add(-g, g, 0.5 * c1);
    }

    // Cross pairs g + (l'-g) = l', only reachable when l' <= 2N.
    if (lp <= 2LL * N) {
        FourierSurface z;  // accumulates e^{i l' x_c} * sum_g [...] with complex coeffs
        cdouble exc = std::polar(1.0, static_cast<double>(lp) * p.x_c);
        cdouble elp = cis2pi_frac(lp * res.k, res.l);  // e^{+i l' eta}
        for (long long g = lp - N; g <= N; ++g) {
            long long a = lp - g;  // u-mode
            double s2g =
                sinpi(2.0 * static_cast<double>((2LL * g * res.k) % res.l) / static_cast<double>(res.l));
            cdouble pref = exc * j_factor(g * a, hs) *
                           p.potential.coeff(static_cast<int>(g)) *
                           p.potential.coeff(static_cast<int>(a)) / s2g;
            cdouble ege = cis2pi_frac(g * res.k, res.l);  // e^{+i g eta}
            // e^{-i g eta} cos(a u + g v + l' eta):
            cdouble cA = pref * std::conj(ege) * 0.5;
            z.add(static_cast<int>(a), static_cast<int>(g), cA * elp);
            z.add(-static_cast<int>(a), -static_cast<int>(g), cA * std::conj(elp));
            // -e^{+i g eta} cos(a u - g v + l' eta):
            cdouble cB = -pref * ege * 0.5;
            z.add(static_cast<int>(a), -static_cast<int>(g), cB * elp);
            z.add(-static_cast<int>(a), static_cast<int>(g), cB * std::conj(elp));
        }
        FourierSurface im = z.imag_part();
        im *= cdouble(-4.0 * static_cast<double>(lp), 0.0);
        s += im;
    }
    s.prune(0.0);
    return s;
}

bool qar_predicate(const SystemParams& p) {
    double hs = p.hbar_s.value();
    if (std::abs(hs - std::nearbyint(hs)) >= 1e-12) return false;
    return is_swc(p).swc;
}

NearQarScaling near_qar_scaling(double mu, double hbar_s) {
    double h0 = std::nearbyint(hbar_s);
    if (h0 < 1.0) throw OutOfRegime("no integer hbar_s >= 1 nearby");
    double delta = h0 - hbar_s;
    if (delta < 0.0) throw OutOfRegime("hbar_s must approach the integer from below");
    if (delta >= 0.5) throw OutOfRegime("hbar_s too far below the integer");
    double kappa = mu * kTwoPi * hbar_s;
    double hbar = kTwoPi * hbar_s;
    NearQarScaling out;
    out.delta = delta;
    if (delta == 0.0) return out;  // exact antiresonance: frozen, zero effective scales
    out.kappa_prime = kappa * delta / (2.0 * hbar_s);
    out.hbar_prime = hbar * delta / (2.0 * hbar_s);
    return out;
}

}  // namespace khs
