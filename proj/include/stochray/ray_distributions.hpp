#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace stochray {

enum class RayKind { random_walk, generic };

/// Which collision-position density governs the rays, and how the mean
/// travelled distance grows with the collision count (D_i = dbar * i^beta).
/// Random-walk rays always scale diffusively (beta = 1/2).
class RayModel
{
public:
    static RayModel random_walk() noexcept { return RayModel{RayKind::random_walk, 0.5}; }

    static RayModel generic(double beta)
    {
        if (!(beta > 0.0) || !std::isfinite(beta))
            throw domain_error("anomaly exponent beta must be positive");
        return RayModel{RayKind::generic, beta};
    }

    RayKind kind() const noexcept { return kind_; }
    double beta() const noexcept { return beta_; }

    bool is_random_walk() const noexcept { return kind_ == RayKind::random_walk; }
    bool is_generic_half() const noexcept { return kind_ == RayKind::generic && beta_ == 0.5; }
    bool is_generic_one() const noexcept { return kind_ == RayKind::generic && beta_ == 1.0; }

    /// Short name used in CSV output and on the command line: rw, g05, g10,
    /// or g<beta> for other exponents.
    std::string name() const
    {
        if (is_random_walk()) return "rw";
        if (is_generic_half()) return "g05";
        if (is_generic_one()) return "g10";
        std::string s = std::to_string(beta_);
        s.erase(s.find_last_not_of('0') + 1);
        if (!s.empty() && s.back() == '.') s.pop_back();
        return "g" + s;
    }

    friend bool operator==(const RayModel&, const RayModel&) = default;

private:
    RayModel(RayKind k, double b) noexcept : kind_(k), beta_(b) {}

    RayKind kind_;
    double beta_;
};

struct PolarPoint
{
    double r = 0.0;      // meters
    double theta = 0.0;  // radians
};

/// D_i = dbar * i^beta.
inline double mean_travel_distance(double d_bar, std::size_t i, double beta)
{
    if (i == 0)
        throw domain_error("collision index must be at least 1");
    if (!(d_bar > 0.0))
        throw domain_error("mean obstacle spacing must be positive");
    if (!(beta > 0.0))
        throw domain_error("anomaly exponent beta must be positive");
    return d_bar * std::pow(static_cast<double>(i), beta);
}

inline double mean_travel_distance(double d_bar, std::size_t i, const RayModel& model)
{
    return mean_travel_distance(d_bar, i, model.beta());
}

namespace detail {

inline void check_density_args(const PolarPoint& pt, double d_i)
{
    if (!(d_i > 0.0))
        throw domain_error("D_i must be positive");
    if (!(pt.r >= 0.0))
        throw domain_error("radius must be non-negative");
}

} // namespace detail

// Densities are per unit area (1/m^2); integrate against r dr dtheta.

/// log of the exponential-in-r density: log(2/(pi D^2)) - 2r/D.
inline double log_pdf_generic(const PolarPoint& pt, double d_i)
{
    detail::check_density_args(pt, d_i);
    return std::log(2.0 / (std::numbers::pi * d_i * d_i)) - 2.0 * pt.r / d_i;
}

inline double pdf_generic(const PolarPoint& pt, double d_i)
{
    detail::check_density_args(pt, d_i);
    return 2.0 / (std::numbers::pi * d_i * d_i) * std::exp(-2.0 * pt.r / d_i);
}

/// log of the Gaussian density: log(1/(pi D^2)) - r^2/D^2.
inline double log_pdf_random_walk(const PolarPoint& pt, double d_i)
{
    detail::check_density_args(pt, d_i);
    const double u = pt.r / d_i;
    return -std::log(std::numbers::pi * d_i * d_i) - u * u;
}

inline double pdf_random_walk(const PolarPoint& pt, double d_i)
{
    detail::check_density_args(pt, d_i);
    const double u = pt.r / d_i;
    return std::exp(-u * u) / (std::numbers::pi * d_i * d_i);
}

inline double pdf(const RayModel& model, const PolarPoint& pt, double d_i)
{
    return model.is_random_walk() ? pdf_random_walk(pt, d_i) : pdf_generic(pt, d_i);
}

inline double log_pdf(const RayModel& model, const PolarPoint& pt, double d_i)
{
    return model.is_random_walk() ? log_pdf_random_walk(pt, d_i) : log_pdf_generic(pt, d_i);
}

struct DensityPair
{
    double lhs;  // diffusion kernel 1/(4 pi D t) exp(-r^2/(4 D t))
    double rhs;  // Gaussian ray density with D_i = dbar sqrt(i)
};

/// Evaluates the 2D diffusion kernel with D t = dbar^2 i / 4 next to the
/// random-walk ray density; the two agree identically.
inline DensityPair random_walk_equivalence(double r, double d_bar, std::size_t i)
{
    if (i == 0)
        throw domain_error("collision index must be at least 1");
    if (!(d_bar > 0.0))
        throw domain_error("mean obstacle spacing must be positive");
    const double dt = 0.25 * d_bar * d_bar * static_cast<double>(i);
    const double lhs = std::exp(-r * r / (4.0 * dt)) / (4.0 * std::numbers::pi * dt);
    const double rhs = pdf_random_walk({r, 0.0}, mean_travel_distance(d_bar, i, 0.5));
    return {lhs, rhs};
}

struct CollisionProbability
{
    std::size_t i;
    double density;
};

/// Q_i(r) for i = 1..i_max.
inline std::vector<CollisionProbability> collision_profile(double r, const RayModel& model, double d_bar,
                                                           std::size_t i_max)
{
    if (!(r > 0.0))
        throw domain_error("collision profile requires r > 0");
    if (i_max == 0)
        throw domain_error("i_max must be at least 1");
    std::vector<CollisionProbability> out;
    out.reserve(i_max);
    for (std::size_t i = 1; i <= i_max; ++i)
        out.push_back({i, pdf(model, {r, 0.0}, mean_travel_distance(d_bar, i, model))});
    return out;
}

inline void write_collision_profile_csv(std::ostream& os, const std::vector<CollisionProbability>& rows)
{
    const auto old = os.precision(12);
    os << "i,Q_i\n";
    for (const auto& row : rows)
        os << row.i << ',' << row.density << '\n';
    os.precision(old);
}

} // namespace stochray
