#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "ray_distributions.hpp"
#include "special_functions.hpp"

namespace stochray {

/// Natural-log counterpart of a per-collision loss in dB: xi = L ln(10) / 10.
inline double xi_from_reflection_loss(double loss_db)
{
    if (!(loss_db >= 0.0))
        throw domain_error("reflection loss L must be non-negative");
    return loss_db * std::numbers::ln10 / 10.0;
}

/// Everything the mean-power routes consume.  xi is always derived from L.
struct ChannelParams
{
    double cell_side = 20.0;          // a, meters
    double open_prob = 0.7;           // p
    double reflection_loss_db = 3.0;  // L, per collision
    double transmit_power = 1.0;      // P_T, watts

    double xi() const { return xi_from_reflection_loss(reflection_loss_db); }
    double mean_obstacle_spacing() const { return stochray::mean_obstacle_spacing(cell_side, open_prob); }

    void validate() const
    {
        if (!(cell_side > 0.0) || !std::isfinite(cell_side))
            throw domain_error("cell side a must be positive");
        if (!(open_prob >= 0.0 && open_prob < 1.0))
            throw domain_error("open probability p must lie in [0, 1)");
        if (!(reflection_loss_db >= 0.0) || !std::isfinite(reflection_loss_db))
            throw domain_error("reflection loss L must be non-negative");
        if (!(transmit_power > 0.0))
            throw domain_error("transmit power must be positive");
    }

    /// Non-fatal advisory: L is normally between 2 and 10 dB.
    std::optional<std::string> warning() const
    {
        if (reflection_loss_db < 2.0 || reflection_loss_db > 10.0)
            return "reflection loss " + std::to_string(reflection_loss_db) + " dB is outside the usual 2-10 dB range";
        return std::nullopt;
    }
};

enum class Route { series, integral, closed_form, asymptotic };

inline constexpr std::string_view to_string(Route r) noexcept
{
    switch (r) {
    case Route::series: return "series";
    case Route::integral: return "integral";
    case Route::closed_form: return "closed";
    case Route::asymptotic: return "asymptotic";
    }
    return "?";
}

/// Smallest Bessel (or Laplace-exponent) argument at which the asymptotic
/// route is considered in its regime.
inline constexpr double asymptotic_argument_floor = 5.0;

struct PowerResult
{
    double r = 0.0;
    RayModel model = RayModel::random_walk();
    Route route = Route::closed_form;
    double log_gain = 0.0;       // ln(P / P_T)
    double power = 0.0;          // P, watts; may underflow where log_gain does not
    double path_loss_db = 0.0;   // -10 log10(P / P_T)
    bool in_regime = true;       // asymptotic route only
    double regime_argument = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline PowerResult make_power(double r, const RayModel& model, Route route, double log_gain,
                              const ChannelParams& params)
{
    PowerResult out;
    out.r = r;
    out.model = model;
    out.route = route;
    out.log_gain = log_gain;
    out.power = params.transmit_power * std::exp(log_gain);
    out.path_loss_db = -10.0 / std::numbers::ln10 * log_gain;
    return out;
}

inline void check_inputs(double r, const ChannelParams& params)
{
    params.validate();
    if (!(r > 1.0))
        throw far_field_violation(r);
}

inline double log_add(double a, double b) noexcept
{
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b), lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

// log of the continuous summand e^{-xi x} Q(D(x)) with D = dbar x^beta.
struct log_summand
{
    double r, xi, log_dbar, beta;
    bool gaussian;

    double log_d(double x) const noexcept { return log_dbar + beta * std::log(x); }

    double operator()(double x) const noexcept
    {
        const double ld = log_d(x);
        if (gaussian) {
            const double u = std::exp(std::log(r) - ld);
            return -xi * x - std::log(std::numbers::pi) - 2.0 * ld - u * u;
        }
        return -xi * x + std::log(2.0 / std::numbers::pi) - 2.0 * ld - 2.0 * std::exp(std::log(r) - ld);
    }

    // d/dx of the log summand times x; strictly decreasing in x.
    double slope_times_x(double x) const noexcept
    {
        const double rd = std::exp(std::log(r) - log_d(x));
        const double dlogq = gaussian ? -2.0 + 2.0 * rd * rd : -2.0 + 2.0 * rd;
        return -xi * x + beta * dlogq;
    }

    double mode() const noexcept
    {
        double lo = -60.0, hi = 60.0;  // log x
        for (int k = 0; k < 200; ++k) {
            const double mid = 0.5 * (lo + hi);
            (slope_times_x(std::exp(mid)) > 0.0 ? lo : hi) = mid;
        }
        return std::exp(0.5 * (lo + hi));
    }
};

inline log_summand make_summand(double r, const RayModel& model, const ChannelParams& params)
{
    return {r, params.xi(), std::log(params.mean_obstacle_spacing()), model.beta(), model.is_random_walk()};
}

} // namespace detail

/// Truncated sum over collision orders, sum_i e^{-xi i} Q_i(r).  Terms are
/// accumulated in log space; summation stops once a rigorous bound on the
/// remaining tail falls below tail_tol times the partial sum.  Two bounds
/// are used: Q_i(r) never exceeds its maximum over D (attained at D = r),
/// and once D_i >= r the terms shrink at least geometrically by e^{-xi}.
inline PowerResult mean_power_series(double r, const RayModel& model, const ChannelParams& params,
                                     double tail_tol = 1e-12, std::size_t max_terms = 50'000'000)
{
    detail::check_inputs(r, params);
    if (!(tail_tol > 0.0))
        throw domain_error("tail tolerance must be positive");
    const double xi = params.xi();
    if (xi == 0.0)
        throw non_convergence("series diverges without per-collision loss (L = 0)", 0.0,
                              std::numeric_limits<double>::infinity());

    const double d_bar = params.mean_obstacle_spacing();
    const double log_geom_tail = -xi - std::log(-std::expm1(-xi));  // log(q / (1 - q)), q = e^{-xi}
    const double log_q_max = model.is_random_walk() ? -std::log(std::numbers::pi * r * r) - 1.0
                                                    : std::log(2.0 / (std::numbers::pi * r * r)) - 2.0;
    const double log_tol = std::log(tail_tol);

    double log_sum = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i <= max_terms; ++i) {
        const double d_i = mean_travel_distance(d_bar, i, model);
        const double log_term = -xi * static_cast<double>(i) + log_pdf(model, {r, 0.0}, d_i);
        log_sum = detail::log_add(log_sum, log_term);

        double log_bound = log_q_max - xi * static_cast<double>(i) + log_geom_tail;
        if (d_i >= r)
            log_bound = std::min(log_bound, log_term + log_geom_tail);
        if (log_bound < log_tol + log_sum)
            return detail::make_power(r, model, Route::series, log_sum, params);
    }
    throw non_convergence("series tail bound not met within the term budget", std::exp(log_sum),
                          std::numeric_limits<double>::quiet_NaN());
}

enum class LowerLimit {
    first_collision,  // x = 1, i.e. y = dbar in the y-forms
    zero              // the limit the closed forms implicitly use
};

/// The sum replaced by an integral over a continuous collision index x,
/// integral_{x0}^inf e^{-xi x} Q(dbar x^beta; r) dx.  With x0 = 1 this is the
/// first line of each model's integral form (random walk in x; generic
/// models after y = dbar x^beta).  The integrand is rescaled by its peak so
/// the quadrature works on O(1) values at any distance.
inline PowerResult mean_power_integral(double r, const RayModel& model, const ChannelParams& params,
                                       LowerLimit lower = LowerLimit::first_collision)
{
    detail::check_inputs(r, params);
    if (params.xi() == 0.0)
        throw non_convergence("integral diverges without per-collision loss (L = 0)", 0.0,
                              std::numeric_limits<double>::infinity());

    const auto log_f = detail::make_summand(r, model, params);
    const double x0 = lower == LowerLimit::first_collision ? 1.0 : 0.0;
    const double peak = log_f.mode();
    const double scale = log_f(std::max(peak, x0 > 0.0 ? x0 : peak));
    auto f = [&](double x) -> double { return x > 0.0 ? std::exp(log_f(x) - scale) : 0.0; };

    const QuadratureSpec spec{std::numeric_limits<double>::min(), 1e-12, 4000};
    const double cuts[] = {peak};
    const auto q = integrate(f, x0, std::numeric_limits<double>::infinity(), spec, cuts);
    if (!(q.value > 0.0))
        throw non_convergence("integral route produced a non-positive value", q.value, q.error_bound);
    return detail::make_power(r, model, Route::integral, scale + std::log(q.value), params);
}

struct IntegralTruncation
{
    PowerResult first_collision_limit;
    PowerResult zero_limit;
    double relative_gap;  // (zero - first_collision) / zero
};

/// Both lower limits side by side; the closed forms drop the finite one.
inline IntegralTruncation integral_truncation_gap(double r, const RayModel& model, const ChannelParams& params)
{
    auto first = mean_power_integral(r, model, params, LowerLimit::first_collision);
    auto zero = mean_power_integral(r, model, params, LowerLimit::zero);
    const double gap = -std::expm1(first.log_gain - zero.log_gain);
    return {first, zero, gap};
}

/// Argument of the Bessel function (random walk: K0; beta = 1: K1) or, for
/// beta = 1/2, the Laplace exponent 3r/y0.
inline double asymptotic_argument(double r, const RayModel& model, const ChannelParams& params)
{
    const double a = params.cell_side, q = 1.0 - params.open_prob, xi = params.xi();
    if (model.is_random_walk())
        return 2.0 * r * std::sqrt(xi * q) / a;
    if (model.is_generic_one())
        return 2.0 * std::sqrt(2.0 * std::sqrt(q) * xi * r / a);
    if (model.is_generic_half())
        return 3.0 * r / std::cbrt(a * a * r / (q * xi));
    throw unsupported_beta(model.beta());
}

/// Laplace point of the beta = 1/2 integrand exponent (1-p) xi y^2/a^2 + 2r/y.
inline double laplace_point(double r, const ChannelParams& params)
{
    return std::cbrt(params.cell_side * params.cell_side * r / ((1.0 - params.open_prob) * params.xi()));
}

namespace detail {

inline void require_damping(const ChannelParams& params)
{
    if (params.xi() == 0.0)
        throw domain_error("closed forms require a positive reflection loss");
}

// Laplace approximation of the beta = 1/2 integral over (0, inf):
// (4 / (a y0)) sqrt((1-p) / (3 pi xi)) exp(-3r/y0).
inline double log_generic_half_laplace(double r, const ChannelParams& params)
{
    const double a = params.cell_side, q = 1.0 - params.open_prob, xi = params.xi();
    const double y0 = laplace_point(r, params);
    return std::log(4.0 / (a * y0)) + 0.5 * std::log(q / (3.0 * std::numbers::pi * xi)) - 3.0 * r / y0;
}

} // namespace detail

/// Closed-form mean power:
///   random walk   (2(1-p)/(pi a^2)) K0(2r sqrt(xi(1-p))/a)
///   beta = 1/2    Laplace approximation about y0 = cbrt(a^2 r/((1-p) xi))
///   beta = 1      2 sqrt(2 xi)/pi (sqrt(1-p)/a)^{3/2} r^{-1/2} K1(2 sqrt(2 sqrt(1-p) xi r/a))
inline PowerResult mean_power_closed(double r, const RayModel& model, const ChannelParams& params)
{
    detail::check_inputs(r, params);
    detail::require_damping(params);
    const double a = params.cell_side, q = 1.0 - params.open_prob, xi = params.xi();
    double log_gain = 0.0;
    if (model.is_random_walk()) {
        log_gain = std::log(2.0 * q / (std::numbers::pi * a * a)) + log_bessel_k0(asymptotic_argument(r, model, params));
    } else if (model.is_generic_one()) {
        const double s = std::sqrt(q) / a;
        log_gain = std::log(2.0 * std::sqrt(2.0 * xi) / std::numbers::pi) + 1.5 * std::log(s) - 0.5 * std::log(r)
                 + log_bessel_k1(asymptotic_argument(r, model, params));
    } else if (model.is_generic_half()) {
        log_gain = detail::log_generic_half_laplace(r, params);
    } else {
        throw unsupported_beta(model.beta());
    }
    return detail::make_power(r, model, Route::closed_form, log_gain, params);
}

/// Large-argument forms.  Random walk and beta = 1 replace K_nu by
/// sqrt(pi/(2z)) e^{-z}; beta = 1/2 is already asymptotic and returns the
/// closed-form value.  Below the argument floor the value is still returned,
/// with in_regime = false.
inline PowerResult mean_power_asymptotic(double r, const RayModel& model, const ChannelParams& params)
{
    detail::check_inputs(r, params);
    detail::require_damping(params);
    const double a = params.cell_side, q = 1.0 - params.open_prob, xi = params.xi();
    const double z = asymptotic_argument(r, model, params);
    double log_gain = 0.0;
    if (model.is_random_walk()) {
        // (1-p)^{3/4} xi^{-1/4} / (a sqrt(pi a r)) e^{-z}
        log_gain = 0.75 * std::log(q) - 0.25 * std::log(xi) - std::log(a) - 0.5 * std::log(std::numbers::pi * a * r) - z;
    } else if (model.is_generic_one()) {
        // (2 xi)^{1/4} / sqrt(pi) (sqrt(1-p)/a)^{5/4} r^{-3/4} e^{-z}
        log_gain = 0.25 * std::log(2.0 * xi) - 0.5 * std::log(std::numbers::pi) + 1.25 * std::log(std::sqrt(q) / a)
                 - 0.75 * std::log(r) - z;
    } else if (model.is_generic_half()) {
        log_gain = detail::log_generic_half_laplace(r, params);
    } else {
        throw unsupported_beta(model.beta());
    }
    auto out = detail::make_power(r, model, Route::asymptotic, log_gain, params);
    out.regime_argument = z;
    out.in_regime = z >= asymptotic_argument_floor;
    return out;
}

inline PowerResult mean_power(Route route, double r, const RayModel& model, const ChannelParams& params)
{
    switch (route) {
    case Route::series: return mean_power_series(r, model, params);
    case Route::integral: return mean_power_integral(r, model, params);
    case Route::closed_form: return mean_power_closed(r, model, params);
    case Route::asymptotic: return mean_power_asymptotic(r, model, params);
    }
    throw domain_error("unknown route");
}

/// One PowerResult per grid point.  The grid must be strictly increasing and
/// lie entirely in the far field.
inline std::vector<PowerResult> path_loss_curve(std::span<const double> r_grid, const RayModel& model,
                                                const ChannelParams& params, Route route)
{
    params.validate();
    for (std::size_t k = 0; k < r_grid.size(); ++k) {
        if (!(r_grid[k] > 1.0))
            throw far_field_violation(r_grid[k]);
        if (k > 0 && !(r_grid[k] > r_grid[k - 1]))
            throw domain_error("distance grid must be strictly increasing");
    }
    std::vector<PowerResult> out;
    out.reserve(r_grid.size());
    for (double r : r_grid)
        out.push_back(mean_power(route, r, model, params));
    return out;
}

enum class GridScale { linear, log };

/// `count` points from start to stop inclusive.
inline std::vector<double> make_grid(double start, double stop, std::size_t count, GridScale scale)
{
    if (count == 0)
        throw domain_error("grid needs at least one point");
    if (!(start > 0.0) || !(stop >= start))
        throw domain_error("grid needs 0 < start <= stop");
    if (count == 1)
        return {start};
    std::vector<double> g(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(count - 1);
        g[k] = scale == GridScale::linear ? start + t * (stop - start)
                                          : std::exp(std::log(start) + t * (std::log(stop) - std::log(start)));
    }
    g.front() = start;
    g.back() = stop;
    return g;
}

inline void write_curve_csv_header(std::ostream& os) { os << "r_m,model,route,power_linear,path_loss_db\n"; }

inline void write_curve_csv_rows(std::ostream& os, const std::vector<PowerResult>& curve)
{
    const auto old = os.precision(17);
    for (const auto& p : curve)
        os << p.r << ',' << p.model.name() << ',' << to_string(p.route) << ',' << p.power << ',' << p.path_loss_db << '\n';
    os.precision(old);
}

inline void write_curve_csv(std::ostream& os, const std::vector<PowerResult>& curve)
{
    write_curve_csv_header(os);
    write_curve_csv_rows(os, curve);
}

} // namespace stochray
