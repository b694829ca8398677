#pragma once
// Real 2pi-periodic kick potential V(x) = sum_{g != 0} V_g e^{igx}, V_{-g} = conj(V_g).
// Only the g = 1..N coefficients are stored.

#include <complex>
#include <vector>

#include "khs/common.hpp"

namespace khs {

class Potential {
  public:
    Potential() = default;

    // coeffs[g-1] = V_g for g = 1..N. Trailing zero harmonics are kept as
    // given (N is part of the model, not inferred from magnitudes).
    explicit Potential(std::vector<cdouble> coeffs) : c_(std::move(coeffs)) {
        if (c_.empty()) throw DegenerateInput("potential needs at least one harmonic");
    }

    // V(x) = -cos x, i.e. V_1 = -1/2.
    static Potential minus_cos() { return Potential({cdouble(-0.5, 0.0)}); }

    int max_harmonic() const { return static_cast<int>(c_.size()); }

    cdouble coeff(int g) const {
        int a = g < 0 ? -g : g;
        if (g == 0 || a > max_harmonic()) return {0.0, 0.0};
        return g > 0 ? c_[a - 1] : std::conj(c_[a - 1]);
    }

    // V(x); real by the Hermitian pairing, evaluated as such.
    double operator()(double x) const {
        double v = 0.0;
        for (int g = 1; g <= max_harmonic(); ++g) {
            // V_g e^{igx} + c.c. = 2[Re V_g cos(gx) - Im V_g sin(gx)]
            v += 2.0 * (c_[g - 1].real() * std::cos(g * x) - c_[g - 1].imag() * std::sin(g * x));
        }
        return v;
    }

    // Kick force f(x) = -dV/dx.
    double force(double x) const {
        double f = 0.0;
        for (int g = 1; g <= max_harmonic(); ++g) {
            // -d/dx of the g-th pair: 2g[Re V_g sin(gx) + Im V_g cos(gx)]
            f += 2.0 * g * (c_[g - 1].real() * std::sin(g * x) + c_[g - 1].imag() * std::cos(g * x));
        }
        return f;
    }

    bool operator==(const Potential& o) const { return c_ == o.c_; }

  private:
    std::vector<cdouble> c_;
};

}  // namespace khs
