#pragma once
// Fibrated wave-packet evolution. The cycle operator factorizes into r kicks
// that act fiber-by-fiber on quasi-position ladders v = (l + beta) hbar:
// even kicks j' multiply by exp{-i mu V[x_c + j' eta - (-1)^{j'/2} v]},
// odd kicks j' convolve along l with the Fourier coefficients of
// exp[-i mu V(x_c + j' eta + u)] taken at index (-1)^{(j'-1)/2}(l - l').
// beta is sampled on the midpoint grid beta_i = (i+1/2)/n_beta, which makes the
// union of fiber lattices one uniform v-grid of spacing hbar/n_beta, so a single
// FFT of the interleaved amplitudes evaluates u-space observables.

#include <vector>

#include "khs/classical.hpp"
#include "khs/params.hpp"
#include "khs/series.hpp"

namespace khs {

struct FiberState {
    double beta = 0.0;
    long long l_min = 0;
    std::vector<cdouble> amp;  // site l = l_min + index

    long long l_max() const { return l_min + static_cast<long long>(amp.size()) - 1; }
};

struct FiberSet {
    std::vector<FiberState> fibers;
    double u_center = 0.0;
    double v_center = 0.0;
};

// Coherent state centered at `center`:
//   Phi_0(u) = (pi hbar)^{-1/4} exp[i v' u / hbar - (u - u')^2 / (2 hbar)]
// has the fiber representation (one Gaussian per ladder)
//   Phi0bar(v) = sqrt(hbar/2pi) (pi hbar)^{-1/4} exp[-i u'(v - v')/hbar] exp[-(v - v')^2/(2 hbar)]
// (complete the square in the Fourier integral of Phi_0; the phase winds with
// -u', the width in v equals the width in u). Window spans 2*window_half sites
// per fiber; WindowTooSmall if the Gaussian tail is not below 1e-14 at the edges.
FiberSet init_coherent_fibers(const FixedPoint& center, const SystemParams& p, int n_beta,
                              int window_half);

// Norm under the fibration measure: (2 pi / n_beta) sum_i sum_l |amp|^2.
double fiber_norm(const FiberSet& fs);

// Apply kick j' (even) in place.
void kick_diagonal(FiberState& f, int j_prime, const SystemParams& p);

// Apply kick j' (odd): window grows by l_trunc per side, then edges with
// |amp| < 1e-16 are trimmed.
void kick_convolution(FiberState& f, int j_prime, const SystemParams& p, int l_trunc);

struct EvolveOptions {
    int l_trunc = 0;                 // 0: auto-certify (smallest power-of-two-ish tail cut)
    int record_every_cycles = 1;
    int workers = 1;
    long long window_cap = 1 << 16;  // per-fiber site cap before WindowTooSmall
};

struct EvolveMetadata {
    double u_center = 0.0, v_center = 0.0;
    int n_beta = 0;
    int l_trunc = 0;
    long long window_initial = 0, window_final = 0;
    double norm_initial = 0.0, norm_final = 0.0;
};

struct EvolutionResult {
    // One row per record (s = 0 and every record_every_cycles * r kicks).
    std::vector<long long> times;
    std::vector<double> tau;       // s / (8 |cos eta|)
    std::vector<double> spread;    // <(u-u')^2 + (v-v')^2>
    std::vector<double> spread_u;
    std::vector<double> spread_v;
    std::vector<double> fidelity;  // |<Phi_0|Phi_s>|
    std::vector<double> norm;
    EvolveMetadata meta;
    // Run identity for cross-run comparisons.
    double mu = 0.0;
    double hbar_s = 0.0;
    Fraction eta{0, 1};
    long long l_prime = 1;
    Potential potential;

    SpreadSeries spread_series() const { return {times, spread}; }
};

// Evolve s_max kicks (s_max must be a multiple of r).
EvolutionResult evolve(FiberSet fs, const SystemParams& p, long long s_max,
                       const EvolveOptions& opts = {});

// Worst relative spread between runs on the common scaled-time grid
// (max - min)/mean, maximized over tau; runs must share mu, hbar_s, potential
// and have l' > 2 (IncompatibleRuns otherwise).
double universality_collapse(const std::vector<EvolutionResult>& runs);

// Least-squares slope of log(spread) vs log(s) over records with s1 <= s <= s2.
// DegenerateFit for < 2 usable points or a numerically constant series.
double growth_exponent(const EvolutionResult& run, long long s1, long long s2);

}  // namespace khs
