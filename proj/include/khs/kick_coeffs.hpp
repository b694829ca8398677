#pragma once
// Fourier coefficients of one kick factor: exp[-i mu V(x + u)] = sum_l c_l e^{ilu}.
// For V = -cos these are i^l J_l(mu) e^{ilx} (Jacobi-Anger), which serves as the
// independent oracle in tests.

#include <vector>

#include "khs/common.hpp"
#include "khs/potential.hpp"

namespace khs {

// Returns c_l for l = -l_max..l_max (index l + l_max), computed by uniform DFT
// with >= 8*max(l_max, 64) sample points. Throws TruncationTooSmall when either
// edge coefficient exceeds 1e-15 in magnitude (caller must raise l_max).
std::vector<cdouble> kick_fourier_coeffs(const Potential& pot, double x, double mu,
                                         int l_max);

}  // namespace khs
