#pragma once
// One-cycle effective Hamiltonian of the resonant kicked Hall system:
//   U_r = exp(-i mu H_e),  H_e = H_0 + sum_{i>=1} eps^i H_i,  eps = mu sin(pi hbar_s).
// effective_h0 assembles the O(1) surface (vanishes identically in the superweak
// regime l' > N); effective_h1 assembles the closed-form O(eps) surface valid
// for l' > N. Quantum antiresonance: integer hbar_s makes eps = 0, so with
// H_0 = 0 the cycle operator freezes.

#include "khs/fourier_surface.hpp"
#include "khs/params.hpp"

namespace khs {

// eps = mu sin(pi hbar_s); exact zero at integer hbar_s.
double epsilon(double mu, double hbar_s);

// J(a; hbar_s) = sin(a pi hbar_s)/sin(pi hbar_s); continuous limit
// a*(-1)^{(a-1)m} at integer hbar_s = m (taken when within 1e-12 of an integer).
double j_factor(long long a, double hbar_s);

// O(1) surface: sum over kick harmonics g with l' | k n' g of
// l' V_g e^{ig x_c} sum_{nbar=1..4} e^{-ig nbar eta} e^{-ig v_nbar},
// v_1..4 = (u, -v, -u, v). Empty iff the divisibility never holds (generic SWC).
FourierSurface effective_h0(const SystemParams& p);

// O(eps) surface, closed form for l' > N:
//   -2 l' sum_{g=1..N} J(g^2) |V_g|^2 / cos(g eta) [cos g(u+v) + cos g(u-v)]
//   -4 l' Im{ e^{i l' x_c} sum_{g=l'-N..N} J(g(l'-g)) V_g V_{l'-g} / sin(2 g eta)
//             [e^{-i g eta} cos((l'-g)u + g v + l' eta)
//              - e^{+i g eta} cos((l'-g)u - g v + l' eta)] }
// (second sum present only when l' <= 2N). Throws ConditionViolated for l' <= N.
FourierSurface effective_h1(const SystemParams& p);

// True when hbar_s is integer (within 1e-12) and the O(1) surface vanishes by
// the generic divisibility criterion (l' > N): complete freezing of the cycle.
bool qar_predicate(const SystemParams& p);

// Near-antiresonance reduction: for hbar_s = hbar_s0 - delta just below an
// integer hbar_s0 >= 1, the cycle dynamics maps onto an effective kicked system
// with kappa' = kappa delta / (2 hbar_s) and hbar' = hbar delta / (2 hbar_s).
struct NearQarScaling {
    double kappa_prime = 0.0;
    double hbar_prime = 0.0;
    double delta = 0.0;
};

NearQarScaling near_qar_scaling(double mu, double hbar_s);

}  // namespace khs
