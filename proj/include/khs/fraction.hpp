#pragma once
// Exact rational with positive denominator, stored in lowest terms.

#include <numeric>
#include <string>

#include "khs/common.hpp"

namespace khs {

struct Fraction {
    long long num = 0;
    long long den = 1;

    Fraction() = default;

    // Validates: den >= 1 and gcd(|num|, den) == 1. Values are stored as given
    // (4/3 stays 4/3; it is not folded mod 1).
    Fraction(long long n, long long d) : num(n), den(d) {
        if (den < 1) throw DegenerateInput("fraction denominator must be >= 1");
        if (std::gcd(num < 0 ? -num : num, den) != 1)
            throw DegenerateInput("fraction must be in lowest terms: " + to_string());
    }

    static Fraction reduced(long long n, long long d) {
        if (d == 0) throw DegenerateInput("fraction with zero denominator");
        if (d < 0) { n = -n; d = -d; }
        long long g = std::gcd(n < 0 ? -n : n, d);
        if (g > 1) { n /= g; d /= g; }
        return Fraction(n, d);
    }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    bool operator==(const Fraction& o) const { return num == o.num && den == o.den; }
    bool operator!=(const Fraction& o) const { return !(*this == o); }

    std::string to_string() const {
        return std::to_string(num) + "/" + std::to_string(den);
    }
};

}  // namespace khs
