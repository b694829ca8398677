#pragma once
// Phase-space surface H(u,v) = sum_k c_k e^{i(gu*u + gv*v)} over integer modes
// k = (gu, gv). Each stored term is a single exponential, so the map doubles as
// an exact Weyl-ordered operator representation (appropriate here because every
// assembled Hamiltonian term is one exponential of a linear combination of the
// conjugate pair).

#include <complex>
#include <map>
#include <utility>

#include "khs/common.hpp"

namespace khs {

class FourierSurface {
  public:
    using Key = std::pair<int, int>;
    using Map = std::map<Key, cdouble>;

    void add(int gu, int gv, cdouble c) {
        if (c == cdouble(0.0, 0.0)) return;
        terms_[{gu, gv}] += c;
    }

    cdouble coeff(int gu, int gv) const {
        auto it = terms_.find({gu, gv});
        return it == terms_.end() ? cdouble(0.0, 0.0) : it->second;
    }

    const Map& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }

    double max_abs() const {
        double m = 0.0;
        for (const auto& [k, c] : terms_) m = std::max(m, std::abs(c));
        return m;
    }

    bool is_zero(double tol = 1e-14) const { return max_abs() <= tol; }

    // Drop numerically dead terms (exact cancellations leave ~1e-17 residue).
    void prune(double tol) {
        for (auto it = terms_.begin(); it != terms_.end();) {
            if (std::abs(it->second) <= tol) it = terms_.erase(it);
            else ++it;
        }
    }

    // Hermiticity (real surface) means c(-k) = conj(c(k)); returns the worst violation.
    double hermitian_residual() const {
        double r = 0.0;
        for (const auto& [k, c] : terms_)
            r = std::max(r, std::abs(c - std::conj(coeff(-k.first, -k.second))));
        return r;
    }

    // Pointwise value; imaginary part should be roundoff for Hermitian surfaces.
    cdouble value(double u, double v) const {
        cdouble s{0.0, 0.0};
        for (const auto& [k, c] : terms_)
            s += c * std::polar(1.0, k.first * u + k.second * v);
        return s;
    }

    // Operator imaginary part (Z - Z^dagger)/(2i), term by term.
    FourierSurface imag_part() const {
        FourierSurface out;
        const cdouble half_over_i = cdouble(0.0, -0.5);  // 1/(2i)
        for (const auto& [k, c] : terms_) {
            out.add(k.first, k.second, c * half_over_i);
            out.add(-k.first, -k.second, -std::conj(c) * half_over_i);
        }
        return out;
    }

    FourierSurface& operator*=(cdouble z) {
        for (auto& [k, c] : terms_) c *= z;
        return *this;
    }

    FourierSurface& operator+=(const FourierSurface& o) {
        for (const auto& [k, c] : o.terms_) add(k.first, k.second, c);
        return *this;
    }

    // Largest |c_this(k) - c_other(k)| over the union of supports.
    double max_coeff_diff(const FourierSurface& o) const {
        double r = 0.0;
        for (const auto& [k, c] : terms_) r = std::max(r, std::abs(c - o.coeff(k.first, k.second)));
        for (const auto& [k, c] : o.terms_) r = std::max(r, std::abs(coeff(k.first, k.second) - c));
        return r;
    }

  private:
    Map terms_;
};

}  // namespace khs
