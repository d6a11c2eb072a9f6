#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <queue>
#include <span>
#include <vector>

#include "errors.hpp"

namespace stochray {

namespace detail {

// Power series about zero (Abramowitz & Stegun 9.6.13 / 9.6.11 with n = 1),
// used for 0 < x <= 2.
struct k01_pair
{
    double k0;
    double k1;
};

inline k01_pair bessel_k01_series(double x) noexcept
{
    const double q = 0.25 * x * x;
    const double log_half = std::log(0.5 * x);
    constexpr double gamma = std::numbers::egamma;

    // t0_k = q^k / (k!)^2 ;  t1_k = q^k / (k! (k+1)!)
    double t0 = 1.0, t1 = 1.0;
    double harmonic = 0.0;  // H_k
    double i0 = 1.0, i1_over = 1.0;
    double s0 = 0.0;                    // sum H_k t0_k
    double s1 = -2.0 * gamma + 1.0;     // sum (psi(k+1) + psi(k+2)) t1_k, k = 0 term
    for (int k = 1; k < 60; ++k) {
        t0 *= q / (double(k) * double(k));
        t1 *= q / (double(k) * double(k + 1));
        harmonic += 1.0 / k;
        i0 += t0;
        i1_over += t1;
        s0 += harmonic * t0;
        const double psi_sum = -2.0 * gamma + 2.0 * harmonic + 1.0 / (k + 1);
        s1 += psi_sum * t1;
        if (t0 < 1e-18 * i0 && t1 < 1e-18 * i1_over)
            break;
    }
    const double i1 = 0.5 * x * i1_over;
    return {-(log_half + gamma) * i0 + s0, 1.0 / x + log_half * i1 - 0.25 * x * s1};
}

// Steed's continued fraction for K_0 and K_1 (Temme's CF2 at order 0),
// returning e^x K_0(x) and e^x K_1(x).  Converges quickly for x >= 2.
inline k01_pair bessel_k01_scaled_cf(double x)
{
    constexpr double eps = 1e-17;
    constexpr int max_iter = 10000;
    const double a1 = 0.25;
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d, delh = d;
    double q1 = 0.0, q2 = 1.0;
    double q = a1, c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    int i = 2;
    for (; i <= max_iter; ++i) {
        a -= 2.0 * (i - 1);
        c = -a * c / i;
        const double qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        const double dels = q * delh;
        s += dels;
        if (std::abs(dels / s) < eps)
            break;
    }
    if (i > max_iter)
        throw non_convergence("Bessel K continued fraction did not converge", 0.0, 0.0);
    h *= a1;
    const double k0s = std::sqrt(std::numbers::pi / (2.0 * x)) / s;
    return {k0s, k0s * (x + 0.5 - h) / x};
}

inline k01_pair bessel_k01_scaled(double x)
{
    if (!(x > 0.0))
        throw domain_error("modified Bessel K requires x > 0");
    if (x <= 2.0) {
        const auto [k0, k1] = bessel_k01_series(x);
        const double e = std::exp(x);
        return {k0 * e, k1 * e};
    }
    return bessel_k01_scaled_cf(x);
}

} // namespace detail

/// e^x K_0(x); finite for every x > 0.
inline double bessel_k0_scaled(double x) { return detail::bessel_k01_scaled(x).k0; }

/// e^x K_1(x); finite for every x > 0.
inline double bessel_k1_scaled(double x) { return detail::bessel_k01_scaled(x).k1; }

/// Modified Bessel function of the second kind, order 0.  Underflows to 0
/// past x ~ 745.
inline double bessel_k0(double x)
{
    if (x <= 2.0 && x > 0.0)
        return detail::bessel_k01_series(x).k0;
    return bessel_k0_scaled(x) * std::exp(-x);
}

/// Modified Bessel function of the second kind, order 1.
inline double bessel_k1(double x)
{
    if (x <= 2.0 && x > 0.0)
        return detail::bessel_k01_series(x).k1;
    return bessel_k1_scaled(x) * std::exp(-x);
}

/// log K_0(x), valid where K_0 itself underflows.
inline double log_bessel_k0(double x) { return std::log(bessel_k0_scaled(x)) - x; }

inline double log_bessel_k1(double x) { return std::log(bessel_k1_scaled(x)) - x; }

/// Leading large-argument term sqrt(pi/(2x)) e^{-x} shared by K_0 and K_1.
inline double asymptotic_k(double x)
{
    if (!(x > 0.0))
        throw domain_error("asymptotic_k requires x > 0");
    return std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x);
}

inline double log_asymptotic_k(double x)
{
    if (!(x > 0.0))
        throw domain_error("asymptotic_k requires x > 0");
    return 0.5 * std::log(std::numbers::pi / (2.0 * x)) - x;
}

// ---------------------------------------------------------------------------
// Adaptive quadrature

struct QuadratureSpec
{
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    std::size_t max_subdivisions = 2000;

    void validate() const
    {
        if (!(abs_tol > 0.0) || !(rel_tol > 0.0))
            throw domain_error("quadrature tolerances must be positive");
        if (max_subdivisions < 10)
            throw domain_error("max_subdivisions must be at least 10");
    }
};

struct QuadratureResult
{
    double value = 0.0;
    double error_bound = 0.0;
    std::size_t intervals = 0;
};

namespace detail {

struct gk_panel
{
    double lo, hi, value, error;
    bool operator<(const gk_panel& o) const noexcept { return error < o.error; }
};

// 7-point Gauss / 15-point Kronrod pair.  Nodes are interior, so integrable
// endpoint singularities and the t = 1 image of infinity are never sampled.
template <class F>
gk_panel gauss_kronrod15(F& f, double lo, double hi)
{
    static constexpr std::array<double, 8> xk = {
        0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
        0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
        0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
        0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
    static constexpr std::array<double, 8> wk = {
        0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
        0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
        0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
        0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
    static constexpr std::array<double, 4> wg = {
        0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
        0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

    const double center = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    const double fc = f(center);
    double kronrod = wk[7] * fc;
    double gauss = wg[3] * fc;
    for (int j = 0; j < 7; ++j) {
        const double dx = half * xk[j];
        const double sum = f(center - dx) + f(center + dx);
        kronrod += wk[j] * sum;
        if (j % 2 == 1)
            gauss += wg[j / 2] * sum;
    }
    kronrod *= half;
    gauss *= half;
    if (!std::isfinite(kronrod))
        throw domain_error("integrand is not finite on the integration interval");
    return {lo, hi, kronrod, std::abs(kronrod - gauss)};
}

} // namespace detail

/// Globally adaptive Gauss-Kronrod quadrature of f over [lower, upper].
/// `upper` may be +infinity, in which case x = lower + t/(1-t) maps the
/// range onto t in [0, 1).  Optional breakpoints (e.g. the integrand's peak)
/// seed the initial partition.  Stops when the summed error estimate is
/// below max(abs_tol, rel_tol*|I|); otherwise throws non_convergence.
template <class F>
QuadratureResult integrate(F&& f, double lower, double upper, const QuadratureSpec& spec = {},
                           std::span<const double> breakpoints = {})
{
    spec.validate();
    if (!std::isfinite(lower))
        throw domain_error("integration lower limit must be finite");
    if (std::isnan(upper) || upper < lower)
        throw domain_error("integration upper limit must not be below the lower limit");
    if (upper == lower)
        return {};

    const bool infinite = std::isinf(upper);
    auto mapped = [&](double t) -> double {
        const double u = 1.0 - t;
        return f(lower + t / u) / (u * u);
    };
    auto direct = [&](double x) -> double { return f(x); };

    std::vector<double> cuts;
    cuts.push_back(infinite ? 0.0 : lower);
    for (double b : breakpoints) {
        if (!(b > lower && b < upper))
            continue;
        cuts.push_back(infinite ? (b - lower) / (1.0 + b - lower) : b);
    }
    cuts.push_back(infinite ? 1.0 : upper);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    auto panel = [&](double lo, double hi) {
        return infinite ? detail::gauss_kronrod15(mapped, lo, hi) : detail::gauss_kronrod15(direct, lo, hi);
    };

    std::priority_queue<detail::gk_panel> work;
    double total = 0.0, total_err = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        auto p = panel(cuts[k], cuts[k + 1]);
        total += p.value;
        total_err += p.error;
        work.push(p);
    }

    auto converged = [&] { return total_err <= std::max(spec.abs_tol, spec.rel_tol * std::abs(total)); };

    while (!converged()) {
        if (work.size() >= spec.max_subdivisions)
            throw non_convergence("adaptive quadrature exhausted its subdivision budget", total, total_err);
        const auto worst = work.top();
        const double mid = 0.5 * (worst.lo + worst.hi);
        if (!(mid > worst.lo && mid < worst.hi))
            throw non_convergence("adaptive quadrature hit floating-point resolution", total, total_err);
        work.pop();
        const auto left = panel(worst.lo, mid);
        const auto right = panel(mid, worst.hi);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        work.push(left);
        work.push(right);
    }

    // Re-sum from the panels so the running update's rounding does not leak.
    QuadratureResult out;
    out.intervals = work.size();
    while (!work.empty()) {
        out.value += work.top().value;
        out.error_bound += work.top().error;
        work.pop();
    }
    return out;
}

} // namespace stochray
