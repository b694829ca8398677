#pragma once
// System parameters for the kicked Hall map at quarter-turn rotation (gamma = pi/2):
// kick potential, Hall phase step eta = 2*pi*k/l, kick offset x_c, scaled Planck
// constant hbar_s (hbar = 2*pi*hbar_s), and kick strength mu (kappa = mu*hbar).

#include <numeric>
#include <optional>

#include "khs/common.hpp"
#include "khs/fraction.hpp"
#include "khs/potential.hpp"

namespace khs {

// Resonance integers for gamma = 2*pi/n with n = 4 and eta = 2*pi*k/l:
//   n' = n/gcd(n,l), l' = l/gcd(n,l), r = lcm(n,l) = n'l = l'n.
struct ResonanceData {
    int n = 4;
    long long k = 0;
    long long l = 1;
    long long n_prime = 4;
    long long l_prime = 1;
    long long r = 4;
};

inline ResonanceData derive_resonance(const Fraction& eta) {
    ResonanceData res;
    res.k = eta.num;
    res.l = eta.den;
    long long g = std::gcd(4LL, res.l);
    res.n_prime = 4LL / g;
    res.l_prime = res.l / g;
    res.r = res.n_prime * res.l;  // lcm(4, l)
    return res;
}

// hbar_s, either an exact rational q/p (needed by the band-structure machinery)
// or a plain real. Conversions are explicit; value() is always available.
class HbarS {
  public:
    static HbarS exact(long long q, long long p) {
        HbarS h;
        h.frac_ = Fraction(q, p);
        h.val_ = h.frac_->value();
        return h;
    }
    static HbarS exact(const Fraction& f) {
        HbarS h;
        h.frac_ = f;
        h.val_ = f.value();
        return h;
    }
    static HbarS real(double v) {
        HbarS h;
        h.val_ = v;
        return h;
    }

    double value() const { return val_; }
    bool is_exact() const { return frac_.has_value(); }
    const Fraction& fraction() const {
        if (!frac_) throw ConditionViolated("hbar_s has no exact rational representation");
        return *frac_;
    }

  private:
    std::optional<Fraction> frac_;
    double val_ = 1.0;
};

struct SystemParams {
    Potential potential;
    Fraction eta;      // eta/(2*pi) = k/l, stored as given
    double x_c = 0.0;
    HbarS hbar_s = HbarS::exact(1, 2);
    double mu = 0.0;
    ResonanceData resonance;

    double eta_angle() const { return kTwoPi * eta.value(); }
    double hbar() const { return kTwoPi * hbar_s.value(); }
    double kappa() const { return mu * hbar(); }

    // Same system with kick strength kappa' at fixed hbar_s (mu rescaled).
    SystemParams with_kappa(double kappa_new) const {
        SystemParams p = *this;
        p.mu = kappa_new / hbar();
        return p;
    }
};

inline SystemParams make_params(Potential pot, Fraction eta, double x_c, HbarS hbar_s,
                                double mu) {
    if (mu < 0.0) throw DegenerateInput("mu must be nonnegative");
    if (hbar_s.value() <= 0.0) throw DegenerateInput("hbar_s must be positive");
    SystemParams p{std::move(pot), eta, x_c, hbar_s, mu, derive_resonance(eta)};
    return p;
}

// Stochastic-web classification: the translationally invariant web requires
// l' > N (all geometric sums over the kick harmonics vanish); the web is
// "superweak" (kappa^2 scale) in the strong sense when l' > 2N.
struct SwcFlags {
    bool swc = false;
    bool strong = false;
};

inline SwcFlags is_swc(const SystemParams& p) {
    long long lp = p.resonance.l_prime;
    long long n = p.potential.max_harmonic();
    return {lp > n, lp > 2 * n};
}

}  // namespace khs
