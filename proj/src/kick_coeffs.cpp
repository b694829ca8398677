#include "khs/kick_coeffs.hpp"

#include <cmath>

namespace khs {

namespace {

// Kahan-compensated complex accumulator: the certified tail sits near 1e-15,
// well under the naive-summation noise of a few hundred unit-magnitude terms.
struct KahanSum {
    double re = 0.0, im = 0.0, cre = 0.0, cim = 0.0;

    void add(const cdouble& x) {
        double yr = x.real() - cre;
        double tr = re + yr;
        cre = (tr - re) - yr;
        re = tr;
        double yi = x.imag() - cim;
        double ti = im + yi;
        cim = (ti - im) - yi;
        im = ti;
    }

    cdouble value() const { return {re, im}; }
};

}  // namespace

std::vector<cdouble> kick_fourier_coeffs(const Potential& pot, double x, double mu,
                                         int l_max) {
    if (l_max < 1) throw DegenerateInput("l_max must be >= 1");
    int m = 8 * std::max(l_max, 64);
    // Sample exp[-i mu V(x+u)] on a uniform grid; the integrand is entire in u,
    // so the DFT recovers the coefficients to machine precision once m clears
    // the (super-exponentially small) tail.
    std::vector<cdouble> f(static_cast<size_t>(m));
    for (int j = 0; j < m; ++j) {
        double u = kTwoPi * j / m;
        f[static_cast<size_t>(j)] = std::polar(1.0, -mu * pot(x + u));
    }
    std::vector<cdouble> c(static_cast<size_t>(2 * l_max + 1));
    for (int l = -l_max; l <= l_max; ++l) {
        KahanSum acc;
        for (int j = 0; j < m; ++j)
            acc.add(f[static_cast<size_t>(j)] * cis2pi_frac(-static_cast<long long>(l) * j, m));
        c[static_cast<size_t>(l + l_max)] = acc.value() / static_cast<double>(m);
    }
    double edge = std::max(std::abs(c.front()), std::abs(c.back()));
    if (edge > 1e-15)
        throw TruncationTooSmall("kick coefficient tail " + std::to_string(edge) +
                                 " above 1e-15 at |l| = " + std::to_string(l_max));
    return c;
}

}  // namespace khs
