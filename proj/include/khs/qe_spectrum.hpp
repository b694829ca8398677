#pragma once
// Quasienergy band structure at rational hbar_s = q/p (gcd = 1): the one-cycle
// propagator restricted to a Bloch sector w = (w1, w2) is a p x p unitary,
// assembled as a product of r/2 two-kick factors. Eigenvalues e^{-iE_b(w)} give
// p bands over the Brillouin zone 0 <= w1 < 2 pi q/p, 0 <= w2 < 2 pi / p.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "khs/fraction.hpp"
#include "khs/params.hpp"

namespace khs {

struct BlochPoint {
    double w1 = 0.0;
    double w2 = 0.0;
};

using UnitaryMatrix = Eigen::MatrixXcd;

// Two-kick factor j (0 <= j < r/2): entries
//   (M_j)_{d,d'} = (1/p) sum_{s=0}^{p-1} exp[-i mu W1(w1 + 2 pi hbar_s d')
//                                          - i mu W2(w2 + 2 pi s/p)
//                                          - i (w2 + 2 pi s/p)(d' - d)]
// with W2(x) = V(x_c - 2j eta - (-1)^j x), W1(x) = V(x_c - (2j+1) eta - (-1)^j x).
UnitaryMatrix mkh_matrix(int j, BlochPoint w, const SystemParams& p);

// Ordered product M_0 M_1 ... M_{r/2-1} (factor j = 0 leftmost).
UnitaryMatrix mr_matrix(BlochPoint w, const SystemParams& p);

double unitarity_residual(const UnitaryMatrix& m);

// Eigenphases E in (-pi, pi], ascending. Certifies each eigenpair residual
// below 1e-10 (EigenFailure otherwise).
std::vector<double> band_eigenphases(const UnitaryMatrix& m);

struct BandSpectrum {
    Fraction hbar_s{1, 2};
    int n1 = 0, n2 = 0;
    std::vector<BlochPoint> grid;              // row-major over (i1, i2)
    std::vector<std::vector<double>> phases;   // per grid point, sorted
};

BandSpectrum band_spectrum(const SystemParams& p, int n1, int n2);

// One scatter point of the double-butterfly dataset.
struct ButterflyPoint {
    long long q = 0, p = 1;
    int band = 0;
    double w1 = 0.0, w2 = 0.0;
    double e = 0.0;         // eigenphase
    double e_scaled = 0.0;  // 8 cos(eta) E / (r mu eps)
};

struct ButterflyOptions {
    int grid_n1 = 16;
    int grid_n2 = 16;
    int workers = 1;
    std::string cache_dir;  // empty: no caching
};

struct ButterflyDataset {
    double mu = 0.0;
    Fraction eta{0, 1};
    double x_c = 0.0;
    int p_max = 0;
    std::vector<ButterflyPoint> points;  // ordered by (p, q, grid index, band)
};

// Sweep over all reduced q/p with 1 <= q < p <= p_max at fixed mu, eta, x_c.
ButterflyDataset butterfly(const Potential& pot, Fraction eta, double x_c, double mu,
                           int p_max, const ButterflyOptions& opts);

// Width/gap of the two-band spectrum at hbar_s = 1/2 for V with |V_1| = 1/2:
// width = band split at (pi/2, pi/2), gap = split at (0, 0), certified as the
// global extrema by a grid scan (ExtremumMismatch otherwise). Scaled values
// carry 2|cos eta|/(l' mu eps).
struct WidthGap {
    double width = 0.0;
    double gap = 0.0;
    double width_scaled = 0.0;
    double gap_scaled = 0.0;
    double grid_min = 0.0;
    double grid_max = 0.0;
};

WidthGap width_gap_half(const SystemParams& p, int grid_n = 64);

// Largest |Tr M_r(w_t - w) - Tr M_r(w)| over random w and the four symmetry
// centers w_t in {(0,0), (pi,0), (0,pi), (pi,pi)}; hbar_s = 1/2, odd l' only.
double trace_symmetry_check(const SystemParams& p, int n_random, std::uint64_t seed);

}  // namespace khs
