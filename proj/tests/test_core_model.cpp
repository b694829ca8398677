// Parameter plumbing, exact rational helpers, potentials, and the shared
// Fourier-surface container.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <vector>

#include "khs/common.hpp"
#include "khs/fourier_surface.hpp"
#include "khs/fraction.hpp"
#include "khs/params.hpp"
#include "khs/potential.hpp"

using namespace khs;

TEST_CASE("fractions validate and reduce") {
    CHECK(Fraction(2, 3).num == 2);
    CHECK(Fraction(2, 3).den == 3);
    CHECK(Fraction(-2, 3).value() == doctest::Approx(-2.0 / 3.0));
    CHECK_THROWS_AS(Fraction(2, 4), DegenerateInput);   // not in lowest terms
    CHECK_THROWS_AS(Fraction(1, 0), DegenerateInput);
    CHECK_THROWS_AS(Fraction(1, -2), DegenerateInput);  // sign lives in num

    CHECK(Fraction::reduced(2, 4) == Fraction(1, 2));
    CHECK(Fraction::reduced(-2, -4) == Fraction(1, 2));
    CHECK(Fraction::reduced(2, -4) == Fraction(-1, 2));
    CHECK(Fraction::reduced(0, 5) == Fraction(0, 1));
    CHECK_THROWS_AS(Fraction::reduced(1, 0), DegenerateInput);
    CHECK(Fraction(4, 3).to_string() == "4/3");
    CHECK(Fraction(4, 3) != Fraction(1, 3));
}

TEST_CASE("resonance integers from the rotation/drift ratio") {
    auto res = derive_resonance(Fraction(2, 3));
    CHECK(res.n == 4);
    CHECK(res.k == 2);
    CHECK(res.l == 3);
    CHECK(res.n_prime == 4);
    CHECK(res.l_prime == 3);
    CHECK(res.r == 12);

    res = derive_resonance(Fraction(1, 8));
    CHECK(res.n_prime == 1);
    CHECK(res.l_prime == 2);
    CHECK(res.r == 8);

    res = derive_resonance(Fraction(0, 1));
    CHECK(res.l_prime == 1);
    CHECK(res.r == 4);

    // A drift ratio above 1 is stored as given; the derived integers only see
    // the denominator, and kick phases reduce k modulo l downstream.
    res = derive_resonance(Fraction(4, 3));
    CHECK(res.k == 4);
    CHECK(res.l_prime == 3);
    CHECK(res.r == 12);

    res = derive_resonance(Fraction(8, 13));
    CHECK(res.l_prime == 13);
    CHECK(res.r == 52);
}

TEST_CASE("scaled Planck constant forms") {
    HbarS h = HbarS::exact(1, 2);
    CHECK(h.is_exact());
    CHECK(h.value() == 0.5);
    CHECK(h.fraction() == Fraction(1, 2));

    HbarS g = HbarS::real(0.3);
    CHECK(!g.is_exact());
    CHECK(g.value() == 0.3);
    CHECK_THROWS_AS(g.fraction(), ConditionViolated);

    CHECK(HbarS::exact(Fraction(5, 3)).value() == doctest::Approx(5.0 / 3.0));
}

TEST_CASE("system parameter assembly and the kick-strength identity") {
    SystemParams p =
        make_params(Potential::minus_cos(), Fraction(2, 3), 0.7, HbarS::real(0.0861), 0.1);
    CHECK(p.hbar() == doctest::Approx(kTwoPi * 0.0861));
    CHECK(p.kappa() == doctest::Approx(0.1 * kTwoPi * 0.0861));
    CHECK(p.eta_angle() == doctest::Approx(kTwoPi * 2.0 / 3.0));

    SystemParams q = p.with_kappa(0.054);
    CHECK(q.kappa() == doctest::Approx(0.054));
    CHECK(q.hbar_s.value() == p.hbar_s.value());

    CHECK_THROWS_AS(
        make_params(Potential::minus_cos(), Fraction(0, 1), 0.0, HbarS::real(1.0), -0.1),
        DegenerateInput);
    CHECK_THROWS_AS(
        make_params(Potential::minus_cos(), Fraction(0, 1), 0.0, HbarS::real(-1.0), 0.1),
        DegenerateInput);
}

TEST_CASE("potential evaluation, force, and harmonic access") {
    Potential vc = Potential::minus_cos();
    CHECK(vc.max_harmonic() == 1);
    CHECK(vc(0.0) == doctest::Approx(-1.0));
    CHECK(vc(kPi / 2) == doctest::Approx(0.0));
    CHECK(std::abs(vc.force(0.0)) < 1e-15);
    CHECK(vc.force(kPi / 2) == doctest::Approx(-1.0));
    CHECK(vc.coeff(1) == cdouble(-0.5, 0.0));
    CHECK(vc.coeff(-1) == cdouble(-0.5, 0.0));
    CHECK(vc.coeff(0) == cdouble(0.0, 0.0));
    CHECK(vc.coeff(5) == cdouble(0.0, 0.0));

    Potential two({{0.3, 0.0}, {0.0, 0.1}});
    CHECK(two.max_harmonic() == 2);
    CHECK(two.coeff(-2) == std::conj(two.coeff(2)));
    Rng rng(11);
    for (int i = 0; i < 10; ++i) {
        double x = rng.uniform(-8.0, 8.0);
        // Real form against the raw harmonic sum.
        cdouble direct = 0.0;
        for (int g = -2; g <= 2; ++g)
            if (g != 0) direct += two.coeff(g) * std::polar(1.0, g * x);
        CHECK(std::abs(direct.imag()) < 1e-15);
        CHECK(two(x) == doctest::Approx(direct.real()).epsilon(1e-12));
        // Force = -dV/dx against a central difference.
        double h = 1e-6;
        double fd = -(two(x + h) - two(x - h)) / (2 * h);
        CHECK(std::abs(two.force(x) - fd) < 1e-8);
    }

    CHECK_THROWS_AS(Potential(std::vector<cdouble>{}), DegenerateInput);
}

TEST_CASE("superweak-web classification") {
    auto make = [](Fraction eta, Potential pot) {
        return make_params(std::move(pot), eta, 0.0, HbarS::real(1.0), 0.1);
    };
    SwcFlags f = is_swc(make(Fraction(2, 3), Potential::minus_cos()));
    CHECK(f.swc);
    CHECK(f.strong);
    f = is_swc(make(Fraction(0, 1), Potential::minus_cos()));
    CHECK(!f.swc);
    CHECK(!f.strong);
    f = is_swc(make(Fraction(1, 8), Potential::minus_cos()));  // l' = 2, N = 1
    CHECK(f.swc);
    CHECK(!f.strong);
    f = is_swc(make(Fraction(2, 3), Potential({{0.1, 0.0}, {0.2, 0.0}})));  // l' = 3, N = 2
    CHECK(f.swc);
    CHECK(!f.strong);
}

TEST_CASE("reduced-argument trig helpers") {
    CHECK(sinpi(0.5) == 1.0);
    CHECK(sinpi(1.0) == 0.0);
    CHECK(sinpi(123456.0) == 0.0);
    CHECK(std::abs(cospi(0.5)) < 1e-16);
    CHECK(cospi(1.0) == -1.0);
    CHECK(sinpi(1.0 / 3.0) == doctest::Approx(std::sqrt(3.0) / 2).epsilon(1e-15));

    // Integer-reduced unit phasor: periodic in the numerator bitwise.
    for (long long k = -7; k <= 7; ++k) {
        cdouble a = cis2pi_frac(k, 12);
        cdouble b = cis2pi_frac(k + 5 * 12, 12);
        CHECK(a.real() == b.real());
        CHECK(a.imag() == b.imag());
    }
    CHECK(cis2pi_frac(1, 4).imag() == 1.0);
    CHECK(cis2pi_frac(2, 4).real() == -1.0);
    CHECK(std::abs(cis2pi_frac(-1, 4).imag() + 1.0) == 0.0);

    CHECK(fold_pi(kPi) == -kPi);
    CHECK(fold_pi(-kPi) == -kPi);
    CHECK(fold_pi(3 * kPi) == -kPi);
    CHECK(fold_pi(0.3) == doctest::Approx(0.3));
    CHECK(fold_pi(kTwoPi + 0.3) == doctest::Approx(0.3));
    CHECK(fold_pi(-0.4) == doctest::Approx(-0.4));
}

TEST_CASE("content hash and counter RNG are stable") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);

    Rng a(42), b(42), c(43);
    bool same = true, diff = false;
    for (int i = 0; i < 1000; ++i) {
        double x = a.uniform01();
        same = same && (x == b.uniform01());
        diff = diff || (x != c.uniform01());
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
    CHECK(same);
    CHECK(diff);
}

TEST_CASE("Fourier surfaces: accumulation, value, Hermiticity, imaginary part") {
    FourierSurface s;
    CHECK(s.empty());
    s.add(1, 0, {0.5, 0.0});
    s.add(-1, 0, {0.5, 0.0});
    s.add(1, 0, {0.5, 0.0});  // accumulate -> 1.0
    CHECK(s.coeff(1, 0) == cdouble(1.0, 0.0));
    CHECK(s.coeff(3, 3) == cdouble(0.0, 0.0));
    // 1.0 e^{iu} + 0.5 e^{-iu} at u = 0.7.
    cdouble v = s.value(0.7, 0.3);
    cdouble expect = std::polar(1.0, 0.7) + 0.5 * std::polar(1.0, -0.7);
    CHECK(std::abs(v - expect) < 1e-15);

    FourierSurface h;
    h.add(1, 2, {0.3, 0.4});
    h.add(-1, -2, {0.3, -0.4});
    CHECK(h.hermitian_residual() < 1e-16);
    h.add(-1, -2, {0.0, -0.01});
    CHECK(h.hermitian_residual() == doctest::Approx(0.01));

    // Pointwise, the Hermitian part of the coefficient table is Im of the value.
    FourierSurface z;
    z.add(1, 0, {0.2, -0.7});
    z.add(0, 2, {-0.4, 0.1});
    z.add(1, -1, {0.05, 0.3});
    FourierSurface im = z.imag_part();
    Rng rng(5);
    for (int i = 0; i < 10; ++i) {
        double u = rng.uniform(-3.0, 3.0), w = rng.uniform(-3.0, 3.0);
        cdouble iv = im.value(u, w);
        CHECK(std::abs(iv.imag()) < 1e-15);
        CHECK(iv.real() == doctest::Approx(z.value(u, w).imag()).epsilon(1e-12));
    }
    CHECK(im.hermitian_residual() < 1e-16);

    FourierSurface a, b;
    a.add(1, 0, {1.0, 0.0});
    b.add(1, 0, {1.0 + 1e-3, 0.0});
    b.add(2, 0, {5e-4, 0.0});
    CHECK(a.max_coeff_diff(b) == doctest::Approx(1e-3));
    CHECK(b.max_coeff_diff(a) == doctest::Approx(1e-3));

    FourierSurface t;
    t.add(0, 1, {1e-16, 0.0});
    t.add(2, 2, {1.0, 0.0});
    CHECK(!t.is_zero());
    t.prune(1e-12);
    CHECK(t.coeff(0, 1) == cdouble(0.0, 0.0));
    CHECK(t.coeff(2, 2) == cdouble(1.0, 0.0));
    t *= cdouble(0.0, 2.0);
    CHECK(t.coeff(2, 2) == cdouble(0.0, 2.0));
    CHECK(t.max_abs() == doctest::Approx(2.0));
}
