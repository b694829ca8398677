#pragma once
// Classical kicked Hall map at gamma = pi/2 in the drift frame:
//   z_{s+1} = [z_s + kappa f(x_c + s eta - v_s)] e^{-i gamma},  z = u + iv,
// f = -dV/dx. The quarter turn is applied exactly as (u,v) -> (v,-u), and the
// kick phase s*eta is reduced with integer arithmetic so arbitrarily long
// orbits neither lose precision nor break the r-step periodicity bitwise.

#include <vector>

#include "khs/params.hpp"
#include "khs/series.hpp"

namespace khs {

struct PhasePoint {
    double u = 0.0;
    double v = 0.0;
};

enum class FixedPointKind { elliptic, hyperbolic, parabolic };

struct FixedPoint {
    PhasePoint point;            // folded into [-pi, pi)^2
    double residue_trace = 0.0;  // trace of the r-step Jacobian
    FixedPointKind kind = FixedPointKind::elliptic;
};

struct FixedPointSearch {
    std::vector<FixedPoint> points;  // deduplicated on the 2pi x 2pi torus
    int dropped_seeds = 0;           // Newton failures, reported not thrown
};

struct Jacobian2 {
    double a11 = 1.0, a12 = 0.0, a21 = 0.0, a22 = 1.0;
    double trace() const { return a11 + a22; }
    double det() const { return a11 * a22 - a12 * a21; }
};

// One kick + quarter turn; s is the absolute kick index entering the Hall phase.
PhasePoint step_map(PhasePoint z, long long s, const SystemParams& p);

// Exact algebraic inverse of step_map.
PhasePoint step_map_inverse(PhasePoint z, long long s, const SystemParams& p);

// r consecutive steps starting at kick index s0 (the basic map of the resonance).
PhasePoint basic_map(PhasePoint z, const SystemParams& p, long long s0 = 0);

// Central-difference Jacobian of the basic map (step 1e-6).
Jacobian2 basic_map_jacobian(PhasePoint z, const SystemParams& p, long long s0 = 0);

// Log-log slope of the max r-step displacement against kappa.
// Throws DegenerateFit if every displacement is below 1e-14.
double displacement_scaling(const SystemParams& p, const std::vector<double>& kappas,
                            const std::vector<PhasePoint>& sample_points);

// Newton refinement of basic-map fixed points from a seed grid.
// Throws DegenerateInput when kappa < 1e-12 (the whole plane is fixed).
FixedPointSearch find_fixed_points(const SystemParams& p,
                                   const std::vector<PhasePoint>& seeds);

std::vector<PhasePoint> default_seed_grid(int n = 16);

// Hyperbolic fixed point nearest the origin; exact ties broken by (u, v).
FixedPoint nearest_hyperbolic(const SystemParams& p);

// Orbit of the basic map, folded into [-pi, pi)^2; n_steps rows.
std::vector<PhasePoint> sample_web(const SystemParams& p, PhasePoint start,
                                   long long n_steps);

// Same orbit but unfolded; used for cell-crossing diagnostics.
std::vector<PhasePoint> sample_web_unfolded(const SystemParams& p, PhasePoint start,
                                            long long n_steps);

// Ensemble mean of (u_s-u_0)^2 + (v_s-v_0)^2 over a uniform disk of radius
// sqrt(2 hbar) centered at `center`, recorded every r kicks (s = 0, r, ..., s_max).
SpreadSeries classical_spread(const SystemParams& p, PhasePoint center, int n_samples,
                              long long s_max, std::uint64_t seed, int workers = 1);

}  // namespace khs
