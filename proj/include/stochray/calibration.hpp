#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "path_loss.hpp"

namespace stochray {

struct Measurement
{
    double distance_m;
    double path_loss_db;
};

/// Path-loss measurements, optionally normalised at a reference distance.
struct MeasurementSet
{
    std::vector<Measurement> points;
    std::optional<double> calibration_ref_m;

    void validate() const
    {
        for (const auto& m : points)
            if (!(m.distance_m > 0.0))
                throw domain_error("measurement distances must be positive");
        if (calibration_ref_m && !(*calibration_ref_m > 0.0))
            throw domain_error("reference distance must be positive");
    }

    std::vector<double> distances() const
    {
        std::vector<double> d;
        d.reserve(points.size());
        for (const auto& m : points)
            d.push_back(m.distance_m);
        return d;
    }

    std::vector<double> losses_db() const
    {
        std::vector<double> v;
        v.reserve(points.size());
        for (const auto& m : points)
            v.push_back(m.path_loss_db);
        return v;
    }
};

/// What is known about an environment before it is mapped onto a lattice.
/// obstacle_area_fraction is the share of area covered by obstacles, so the
/// lattice open probability is its complement.
struct EnvironmentDescription
{
    double obstacle_area_fraction = 0.3;
    std::optional<double> mean_obstacle_gap_m;  // dbar
    std::optional<double> cell_side_m;          // a, when known directly
    std::string region_note;
};

struct LatticeParams
{
    double cell_side;
    double open_prob;
};

/// p = 1 - obstacle fraction; a = dbar sqrt(1 - p) when the mean gap is
/// known, otherwise the directly supplied cell side.
inline LatticeParams derive_lattice_params(const EnvironmentDescription& env)
{
    if (!(env.obstacle_area_fraction >= 0.0 && env.obstacle_area_fraction < 1.0))
        throw domain_error("obstacle area fraction must lie in [0, 1)");
    const double p = 1.0 - env.obstacle_area_fraction;
    if (env.mean_obstacle_gap_m) {
        if (!(*env.mean_obstacle_gap_m > 0.0))
            throw domain_error("mean obstacle gap must be positive");
        if (env.obstacle_area_fraction == 0.0)
            throw domain_error("no obstacles: cell side cannot be derived from the mean gap");
        return {*env.mean_obstacle_gap_m * std::sqrt(1.0 - p), p};
    }
    if (env.cell_side_m) {
        if (!(*env.cell_side_m > 0.0))
            throw domain_error("cell side must be positive");
        return {*env.cell_side_m, p};
    }
    throw missing_spacing("need either the mean obstacle gap or the cell side");
}

enum class Band { sub6ghz, mmwave };

struct LossRange
{
    double low_db;
    double high_db;

    bool contains(double l) const noexcept { return l >= low_db && l <= high_db; }
};

/// Recommended per-collision loss range.  Random-walk rays start from
/// 2-4 dB below 6 GHz and 5-7 dB at millimetre wave; each step to a
/// flatter model (beta = 1/2, then beta = 1) adds 1 to 2 dB.  Clipped to
/// the physical 2-10 dB window.
inline LossRange suggest_reflection_loss(const RayModel& model, Band band)
{
    int steps = 0;
    if (model.is_generic_half())
        steps = 1;
    else if (model.is_generic_one())
        steps = 2;
    else if (!model.is_random_walk())
        throw unsupported_beta(model.beta());

    double low = band == Band::sub6ghz ? 2.0 : 5.0;
    double high = band == Band::sub6ghz ? 4.0 : 7.0;
    low += 1.0 * steps;
    high += 2.0 * steps;
    return {std::clamp(low, 2.0, 10.0), std::clamp(high, 2.0, 10.0)};
}

/// Root-mean-square difference between two aligned dB sequences.
inline double rms_error(std::span<const double> measured_db, std::span<const double> predicted_db)
{
    if (measured_db.size() != predicted_db.size())
        throw length_mismatch(measured_db.size(), predicted_db.size());
    if (measured_db.size() < 2)
        throw domain_error("RMS scoring needs at least two points");
    double sum = 0.0;
    for (std::size_t k = 0; k < measured_db.size(); ++k) {
        const double d = measured_db[k] - predicted_db[k];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(measured_db.size()));
}

inline double rms_error(const MeasurementSet& measured, std::span<const double> predicted_db)
{
    const auto m = measured.losses_db();
    return rms_error(m, predicted_db);
}

/// Model path loss at every measured distance.  When the set carries a
/// reference distance, the curve is shifted so that it matches the measured
/// loss there (a point at that distance, or 0 dB if the data are already
/// normalised to it).
inline std::vector<double> predict_at(const MeasurementSet& measured, const RayModel& model,
                                      const ChannelParams& params, Route route = Route::closed_form)
{
    measured.validate();
    std::vector<double> out;
    out.reserve(measured.points.size());
    for (const auto& m : measured.points)
        out.push_back(mean_power(route, m.distance_m, model, params).path_loss_db);
    if (measured.calibration_ref_m) {
        const double ref = *measured.calibration_ref_m;
        double measured_ref = 0.0;
        for (const auto& m : measured.points)
            if (std::abs(m.distance_m - ref) <= 1e-9 * ref)
                measured_ref = m.path_loss_db;
        const double offset = measured_ref - mean_power(route, ref, model, params).path_loss_db;
        for (double& v : out)
            v += offset;
    }
    return out;
}

enum class SweptParameter { cell_side, open_prob, reflection_loss };

inline constexpr std::string_view to_string(SweptParameter p) noexcept
{
    switch (p) {
    case SweptParameter::cell_side: return "a";
    case SweptParameter::open_prob: return "p";
    case SweptParameter::reflection_loss: return "L";
    }
    return "?";
}

struct SweepCurve
{
    SweptParameter parameter;
    int direction;   // +1 or -1
    double value;    // perturbed parameter value
    std::vector<double> path_loss_db;
    double max_abs_deviation_db;  // against the base curve
};

struct SensitivityTable
{
    std::vector<double> r_grid;
    std::vector<double> base_db;
    std::vector<SweepCurve> curves;  // a+, a-, p+, p-, L+, L-

    /// Largest deviation over both directions of one parameter.
    double max_deviation(SweptParameter p) const
    {
        double m = 0.0;
        for (const auto& c : curves)
            if (c.parameter == p)
                m = std::max(m, c.max_abs_deviation_db);
        return m;
    }
};

/// Perturbs a, p and L one at a time by +-delta_fraction of their base
/// values and records the path-loss curves.
inline SensitivityTable sensitivity_sweep(const ChannelParams& base, const RayModel& model,
                                          std::span<const double> r_grid, double delta_fraction,
                                          Route route = Route::closed_form)
{
    base.validate();
    if (!(delta_fraction >= 0.0))
        throw domain_error("delta fraction must be non-negative");

    auto curve = [&](const ChannelParams& cp) {
        std::vector<double> pl;
        for (const auto& res : path_loss_curve(r_grid, model, cp, route))
            pl.push_back(res.path_loss_db);
        return pl;
    };

    SensitivityTable table;
    table.r_grid.assign(r_grid.begin(), r_grid.end());
    table.base_db = curve(base);

    for (SweptParameter param : {SweptParameter::cell_side, SweptParameter::open_prob, SweptParameter::reflection_loss}) {
        for (int dir : {+1, -1}) {
            ChannelParams cp = base;
            double* field = param == SweptParameter::cell_side ? &cp.cell_side
                          : param == SweptParameter::open_prob ? &cp.open_prob
                                                               : &cp.reflection_loss_db;
            *field *= 1.0 + dir * delta_fraction;
            if (param == SweptParameter::open_prob && !(cp.open_prob < 1.0))
                throw domain_error("perturbed open probability reaches 1");
            SweepCurve c{param, dir, *field, curve(cp), 0.0};
            for (std::size_t k = 0; k < c.path_loss_db.size(); ++k)
                c.max_abs_deviation_db = std::max(c.max_abs_deviation_db, std::abs(c.path_loss_db[k] - table.base_db[k]));
            table.curves.push_back(std::move(c));
        }
    }
    return table;
}

struct FitResult
{
    double loss_db;
    double sigma_db;
};

/// One-parameter fit of L: a grid scan over [low, high] followed by a
/// golden-section refinement around the best grid point.  Ties go to the
/// smaller L.
inline FitResult fit_reflection_loss(const MeasurementSet& measured, const RayModel& model, double cell_side,
                                     double open_prob, LossRange range, Route route = Route::closed_form,
                                     double grid_step = 0.1)
{
    if (!(range.low_db <= range.high_db))
        throw domain_error("empty reflection-loss range");
    if (range.low_db < 0.5 || range.high_db > 20.0)
        throw domain_error("reflection-loss range must lie within [0.5, 20] dB");
    if (!(grid_step > 0.0))
        throw domain_error("grid step must be positive");
    measured.validate();
    const auto observed = measured.losses_db();

    auto sigma = [&](double l) {
        const ChannelParams cp{cell_side, open_prob, l};
        return rms_error(observed, predict_at(measured, model, cp, route));
    };

    FitResult best{range.low_db, sigma(range.low_db)};
    const auto n_steps = static_cast<std::size_t>(std::floor((range.high_db - range.low_db) / grid_step + 1e-9));
    for (std::size_t k = 1; k <= n_steps + 1; ++k) {
        const double l = std::min(range.low_db + static_cast<double>(k) * grid_step, range.high_db);
        const double s = sigma(l);
        if (s < best.sigma_db)
            best = {l, s};
        if (l == range.high_db)
            break;
    }

    double lo = std::max(range.low_db, best.loss_db - grid_step);
    double hi = std::min(range.high_db, best.loss_db + grid_step);
    constexpr double inv_phi = 0.6180339887498949;
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double f1 = sigma(x1), f2 = sigma(x2);
    while (hi - lo > 1e-10) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = sigma(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = sigma(x2);
        }
    }
    const double refined = 0.5 * (lo + hi);
    const double s = sigma(refined);
    if (s < best.sigma_db)
        best = {refined, s};
    return best;
}

// ---------------------------------------------------------------------------
// Measurement CSV
//
//   # ref=<meters>            optional
//   distance_m,path_loss_db
//   <d>,<pl>
//
// Curve files written by path_loss (r_m,model,route,power_linear,path_loss_db)
// are accepted too; `select` picks one "model:route" group when the file
// holds several.

namespace detail {

inline std::string_view trim(std::string_view s) noexcept
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line)
{
    std::vector<std::string_view> out;
    for (;;) {
        const auto comma = line.find(',');
        out.push_back(trim(line.substr(0, comma)));
        if (comma == std::string_view::npos)
            return out;
        line.remove_prefix(comma + 1);
    }
}

inline double parse_number(std::string_view s, std::size_t line_no, std::string_view what)
{
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
        throw parse_error("invalid " + std::string(what) + " '" + std::string(s) + "'", line_no);
    return v;
}

} // namespace detail

inline MeasurementSet read_measurements_csv(std::istream& is, std::optional<std::string> select = std::nullopt)
{
    MeasurementSet set;
    std::string raw;
    std::size_t line_no = 0;
    enum class Format { unknown, measurement, curve } format = Format::unknown;
    std::optional<std::string> group = select;

    while (std::getline(is, raw)) {
        ++line_no;
        const auto line = detail::trim(raw);
        if (line.empty())
            continue;
        if (line.front() == '#') {
            auto body = detail::trim(line.substr(1));
            if (body.starts_with("ref=")) {
                set.calibration_ref_m = detail::parse_number(detail::trim(body.substr(4)), line_no, "reference distance");
                if (!(*set.calibration_ref_m > 0.0))
                    throw parse_error("reference distance must be positive", line_no);
            }
            continue;
        }
        const auto fields = detail::split_csv(line);
        if (format == Format::unknown) {
            if (fields.size() == 2 && fields[0] == "distance_m" && fields[1] == "path_loss_db")
                format = Format::measurement;
            else if (fields.size() == 5 && fields[0] == "r_m" && fields[4] == "path_loss_db")
                format = Format::curve;
            else
                throw parse_error("expected header 'distance_m,path_loss_db'", line_no);
            continue;
        }
        if (format == Format::measurement) {
            if (fields.size() != 2)
                throw parse_error("expected 2 fields, got " + std::to_string(fields.size()), line_no);
            const double d = detail::parse_number(fields[0], line_no, "distance");
            if (!(d > 0.0))
                throw parse_error("distance must be positive", line_no);
            set.points.push_back({d, detail::parse_number(fields[1], line_no, "path loss")});
        } else {
            if (fields.size() != 5)
                throw parse_error("expected 5 fields, got " + std::to_string(fields.size()), line_no);
            const std::string key = std::string(fields[1]) + ":" + std::string(fields[2]);
            if (!group)
                group = key;
            if (key != *group)
                continue;
            const double d = detail::parse_number(fields[0], line_no, "distance");
            if (!(d > 0.0))
                throw parse_error("distance must be positive", line_no);
            set.points.push_back({d, detail::parse_number(fields[4], line_no, "path loss")});
        }
    }
    if (format == Format::unknown)
        throw parse_error("no header found");
    if (set.points.empty())
        throw parse_error(select ? "no rows for group '" + *select + "'" : "no data rows");
    return set;
}

inline void write_measurements_csv(std::ostream& os, const MeasurementSet& set)
{
    const auto old = os.precision(17);
    if (set.calibration_ref_m)
        os << "# ref=" << *set.calibration_ref_m << '\n';
    os << "distance_m,path_loss_db\n";
    for (const auto& m : set.points)
        os << m.distance_m << ',' << m.path_loss_db << '\n';
    os.precision(old);
}

} // namespace stochray
