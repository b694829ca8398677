#pragma once
// Shared numerics: exact-ish trig of rational angles, angle folding, error
// taxonomy, and a seedable counter RNG whose output does not depend on the
// standard library's distribution implementations.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace khs {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

using cdouble = std::complex<double>;

// sin(pi*x), cos(pi*x) with argument reduction done in x (exact for |x| < 2^52),
// so rational multiples of pi behave far better than sin(pi*x) evaluated naively.
inline double sinpi(double x) {
    double n = std::nearbyint(x);
    double r = x - n;  // |r| <= 1/2, exact
    double s = std::sin(kPi * r);
    return (static_cast<long long>(n) & 1LL) ? -s : s;
}

inline double cospi(double x) {
    double n = std::nearbyint(x);
    double r = x - n;
    double c = std::cos(kPi * r);
    return (static_cast<long long>(n) & 1LL) ? -c : c;
}

// exp(2*pi*i*num/den) with the angle reduced modulo den in integer arithmetic.
inline cdouble cis2pi_frac(long long num, long long den) {
    long long m = num % den;
    if (m < 0) m += den;
    double t = 2.0 * static_cast<double>(m) / static_cast<double>(den);
    return {cospi(t), sinpi(t)};
}

// Fold an angle into [-pi, pi).
inline double fold_pi(double x) {
    double y = std::remainder(x, kTwoPi);  // (-pi, pi]
    if (y == kPi) y = -kPi;
    return y;
}

// Error taxonomy. ConfigError maps to CLI exit code 2, everything else derived
// from Error signals a numerical-certification failure (exit code 3).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error { using Error::Error; };
struct DegenerateInput : Error { using Error::Error; };
struct DegenerateFit : Error { using Error::Error; };
struct ConditionViolated : Error { using Error::Error; };
struct OutOfRegime : Error { using Error::Error; };
struct TruncationTooSmall : Error { using Error::Error; };
struct WindowTooSmall : Error { using Error::Error; };
struct EigenFailure : Error { using Error::Error; };
struct ExtremumMismatch : Error { using Error::Error; };
struct IncompatibleRuns : Error { using Error::Error; };

// FNV-1a 64-bit content hash (cache keys, config fingerprints).
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// splitmix64: counter-based, trivially reproducible across platforms.
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits; stdlib-distribution free.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }
};

}  // namespace khs
