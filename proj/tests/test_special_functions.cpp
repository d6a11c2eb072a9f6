#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include <stochray/special_functions.hpp>

#include "oracles.hpp"

using namespace stochray;

namespace {

double rel(double x, double ref) { return std::abs(x - ref) / std::abs(ref); }

} // namespace

TEST(Bessel, ReferenceValuesAtOne)
{
    EXPECT_NEAR(bessel_k0(1.0), 0.42102443824070833, 1e-16);
    EXPECT_NEAR(bessel_k1(1.0), 0.6019072301972346, 1e-16);
}

TEST(Bessel, OracleAgreesWithReferenceValues)
{
    EXPECT_LT(rel(oracle::bessel_k(0, 1.0), 0.42102443824070833), 1e-14);
    EXPECT_LT(rel(oracle::bessel_k(1, 1.0), 0.6019072301972346), 1e-14);
}

TEST(Bessel, MatchesIntegralRepresentationOverWideRange)
{
    for (double lx = -3.0; lx <= std::log10(700.0); lx += 0.1) {
        const double x = std::pow(10.0, lx);
        EXPECT_LT(rel(bessel_k0_scaled(x), oracle::bessel_k_scaled(0, x)), 1e-12) << "x = " << x;
        EXPECT_LT(rel(bessel_k1_scaled(x), oracle::bessel_k_scaled(1, x)), 1e-12) << "x = " << x;
    }
}

TEST(Bessel, AcrossTheSeriesContinuedFractionSwitch)
{
    for (double x : {1.99, 1.999999, 2.0, 2.000001, 2.01}) {
        EXPECT_LT(rel(bessel_k0(x), oracle::bessel_k(0, x)), 1e-13);
        EXPECT_LT(rel(bessel_k1(x), oracle::bessel_k(1, x)), 1e-13);
    }
}

TEST(Bessel, RandomWalkArgumentAtOneFiftyMeters)
{
    const double z = 2.0 * 150.0 * std::sqrt(0.3 * 0.3 * std::numbers::ln10) / 20.0;
    EXPECT_NEAR(z, 6.8284220822, 1e-9);
    EXPECT_LT(rel(bessel_k0(z), oracle::bessel_k(0, z)), 1e-10);
}

TEST(Bessel, LogFormsDoNotUnderflow)
{
    EXPECT_EQ(bessel_k0(1000.0), 0.0);
    EXPECT_NEAR(log_bessel_k0(1000.0), std::log(oracle::bessel_k_scaled(0, 1000.0)) - 1000.0, 1e-10);
    EXPECT_NEAR(log_bessel_k1(5000.0), std::log(bessel_k1_scaled(5000.0)) - 5000.0, 1e-12);
}

TEST(Bessel, LargeArgumentLimit)
{
    for (double x : {1e3, 1e4, 1e6}) {
        const double lead = std::sqrt(std::numbers::pi / (2.0 * x));
        EXPECT_NEAR(bessel_k0_scaled(x) / lead, 1.0, 0.2 / x);
        EXPECT_NEAR(bessel_k1_scaled(x) / lead, 1.0, 0.5 / x);
    }
}

TEST(Bessel, SmallArgumentLimit)
{
    EXPECT_NEAR(1e-6 * bessel_k1(1e-6), 1.0, 1e-10);
    EXPECT_NEAR(bessel_k0(1e-8) / (-std::log(0.5e-8) - std::numbers::egamma), 1.0, 1e-12);
}

TEST(Bessel, RejectsNonPositiveArgument)
{
    EXPECT_THROW(bessel_k0(0.0), domain_error);
    EXPECT_THROW(bessel_k1(-1.0), domain_error);
    EXPECT_THROW(log_bessel_k0(0.0), domain_error);
    EXPECT_THROW(bessel_k0(std::nan("")), domain_error);
}

TEST(Bessel, PositiveAndDecreasing)
{
    double prev0 = INFINITY, prev1 = INFINITY;
    for (double x = 0.01; x < 80.0; x *= 1.07) {
        const double k0 = bessel_k0(x), k1 = bessel_k1(x);
        EXPECT_GT(k0, 0.0);
        EXPECT_GT(k1, k0);
        EXPECT_LT(k0, prev0);
        EXPECT_LT(k1, prev1);
        prev0 = k0;
        prev1 = k1;
    }
}

TEST(Bessel, AsymptoticFormTracksTheFunction)
{
    EXPECT_LT(rel(asymptotic_k(10.0), bessel_k0(10.0)), 0.02);
    EXPECT_GT(rel(asymptotic_k(1.0), bessel_k0(1.0)), 0.05);
    EXPECT_LT(rel(asymptotic_k(10.0), bessel_k1(10.0)), 0.05);
    EXPECT_NEAR(log_asymptotic_k(10.0), std::log(asymptotic_k(10.0)), 1e-14);
}

TEST(Quadrature, ExponentialOnHalfLine)
{
    const auto q = integrate([](double x) { return std::exp(-x); }, 0.0, INFINITY);
    EXPECT_NEAR(q.value, 1.0, 1e-10);
    EXPECT_GE(q.intervals, 1u);
}

TEST(Quadrature, FiniteInterval)
{
    const auto q = integrate([](double x) { return std::sin(x); }, 0.0, std::numbers::pi);
    EXPECT_NEAR(q.value, 2.0, 1e-12);
    EXPECT_LE(q.error_bound, 1e-9);
}

TEST(Quadrature, IntegrableEndpointSingularity)
{
    const auto q = integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0);
    EXPECT_NEAR(q.value, 2.0, 1e-8);
}

TEST(Quadrature, EmptyIntervalIsZero)
{
    EXPECT_EQ(integrate([](double) { return 1.0; }, 3.0, 3.0).value, 0.0);
}

TEST(Quadrature, BesselIdentityAtUnitParameters)
{
    // int_0^inf exp(-b/x - g x) x^{nu-1} dx = 2 (b/g)^{nu/2} K_nu(2 sqrt(b g))
    const auto q0 = integrate([](double x) { return std::exp(-1.0 / x - x) / x; }, 0.0, INFINITY);
    EXPECT_LT(rel(q0.value, 2.0 * bessel_k0(2.0)), 1e-8);
    const double b = 2.0, g = 0.5;
    const auto q1 = integrate([&](double x) { return std::exp(-b / x - g * x) / (x * x); }, 0.0, INFINITY);
    EXPECT_LT(rel(q1.value, 2.0 * std::sqrt(g / b) * bessel_k1(2.0 * std::sqrt(b * g))), 1e-8);
}

TEST(Quadrature, BesselIdentityOnParameterGrid)
{
    QuadratureSpec spec{1e-300, 1e-11, 4000};
    for (int ib = 0; ib < 5; ++ib) {
        for (int ig = 0; ig < 5; ++ig) {
            const double b = std::pow(10.0, -2.0 + ib), g = std::pow(10.0, -2.0 + ig);
            const double peak[] = {std::sqrt(b / g)};
            const double arg = 2.0 * std::sqrt(b * g);
            const auto q0 = integrate([&](double x) { return std::exp(-b / x - g * x) / x; }, 0.0, INFINITY, spec, peak);
            const auto q1 = integrate([&](double x) { return std::exp(-b / x - g * x) / (x * x); }, 0.0, INFINITY, spec, peak);
            EXPECT_LT(rel(q0.value, 2.0 * bessel_k0(arg)), 1e-6) << b << ' ' << g;
            EXPECT_LT(rel(q1.value, 2.0 * std::sqrt(g / b) * bessel_k1(arg)), 1e-6) << b << ' ' << g;
        }
    }
}

TEST(Quadrature, Deterministic)
{
    auto f = [](double x) { return std::exp(-x * x) * std::cos(3.0 * x); };
    const auto a = integrate(f, -1.0, INFINITY);
    const auto b = integrate(f, -1.0, INFINITY);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.error_bound, b.error_bound);
    EXPECT_EQ(a.intervals, b.intervals);
}

TEST(Quadrature, BudgetExhaustionCarriesEstimate)
{
    auto f = [](double x) { return std::sin(1.0 / x) / x; };
    try {
        integrate(f, 1e-4, 1.0, QuadratureSpec{1e-15, 1e-15, 10});
        FAIL() << "expected non_convergence";
    } catch (const non_convergence& e) {
        EXPECT_TRUE(std::isfinite(e.estimate()));
        EXPECT_GT(e.error_bound(), 0.0);
    }
}

TEST(Quadrature, RejectsBadSpecAndInputs)
{
    auto f = [](double x) { return x; };
    EXPECT_THROW(integrate(f, 0.0, 1.0, QuadratureSpec{0.0, 1e-10, 100}), domain_error);
    EXPECT_THROW(integrate(f, 0.0, 1.0, QuadratureSpec{1e-12, -1.0, 100}), domain_error);
    EXPECT_THROW(integrate(f, 0.0, 1.0, QuadratureSpec{1e-12, 1e-10, 5}), domain_error);
    EXPECT_THROW(integrate(f, 1.0, 0.0), domain_error);
    EXPECT_THROW(integrate(f, -INFINITY, 0.0), domain_error);
    EXPECT_THROW(integrate([](double) { return NAN; }, 0.0, 1.0), domain_error);
}
