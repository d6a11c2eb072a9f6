#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <thread>
#include <type_traits>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "rng.hpp"

namespace stochray {

struct Point2
{
    double x = 0.0;
    double y = 0.0;
};

inline double distance(Point2 a, Point2 b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

enum class Terminal { absorbed, escaped, max_collisions };

struct RayTrace
{
    Point2 source;
    std::vector<Point2> collision_points;
    std::vector<double> cumulative_loss_db;  // after each collision
    Terminal terminal = Terminal::max_collisions;

    std::size_t collision_count() const noexcept { return collision_points.size(); }
};

/// Same loss L (dB) at every collision.
struct DeterministicLoss
{
    double loss_db = 3.0;
};

/// Independent per-collision losses, uniform on [low_db, high_db].
struct UniformLoss
{
    double low_db = 2.0;
    double high_db = 4.0;
};

using LossModel = std::variant<DeterministicLoss, UniformLoss>;

struct SimConfig
{
    std::size_t n_rays = 10000;
    std::size_t max_collisions = 50;
    std::uint64_t seed = 0;
    LossModel loss = DeterministicLoss{};
    /// A ray whose accumulated loss exceeds this is absorbed.
    double absorption_floor_db = std::numeric_limits<double>::infinity();
    /// empirical_power rejects estimates whose 95% half-width exceeds this
    /// fraction of the estimate.
    double max_relative_ci = 0.25;
    /// 0 picks std::thread::hardware_concurrency().  Results do not depend on it.
    unsigned threads = 0;

    void validate() const
    {
        if (n_rays == 0)
            throw domain_error("n_rays must be at least 1");
        if (max_collisions == 0)
            throw domain_error("max_collisions must be at least 1");
        std::visit(
            [](const auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, DeterministicLoss>) {
                    if (!(m.loss_db >= 0.0))
                        throw domain_error("reflection loss must be non-negative");
                } else {
                    if (!(m.low_db >= 0.0 && m.high_db >= m.low_db))
                        throw domain_error("uniform loss needs 0 <= low <= high");
                }
            },
            loss);
    }
};

namespace detail {

inline double sample_loss(const LossModel& model, engine& eng)
{
    if (const auto* d = std::get_if<DeterministicLoss>(&model))
        return d->loss_db;
    const auto& u = std::get<UniformLoss>(model);
    return uniform(eng, u.low_db, u.high_db);
}

// Records one collision; returns false once the ray is absorbed.
inline bool record_collision(RayTrace& trace, Point2 at, const SimConfig& cfg, engine& eng)
{
    const double prev = trace.cumulative_loss_db.empty() ? 0.0 : trace.cumulative_loss_db.back();
    trace.collision_points.push_back(at);
    trace.cumulative_loss_db.push_back(prev + sample_loss(cfg.loss, eng));
    if (trace.cumulative_loss_db.back() > cfg.absorption_floor_db) {
        trace.terminal = Terminal::absorbed;
        return false;
    }
    return true;
}

} // namespace detail

/// Traces one ray through the lattice.  The ray leaves the source at a
/// uniform angle and flies straight until it enters a closed cell; the
/// entry point on that cell's face is the collision.  It then re-radiates
/// at an angle uniform over the half-plane facing back into open space.
/// Cells are visited by exact grid stepping (Amanatides & Woo), so a trace
/// is a deterministic function of the engine state.
inline RayTrace trace_ray(const Lattice& lattice, Point2 source, engine& eng, const SimConfig& cfg)
{
    const double a = lattice.cell_side();
    const auto n = static_cast<std::int64_t>(lattice.size());
    if (!(source.x >= 0.0 && source.y >= 0.0 && source.x < lattice.extent() && source.y < lattice.extent()))
        throw domain_error("source lies outside the lattice");
    std::int64_t cx = static_cast<std::int64_t>(source.x / a);
    std::int64_t cy = static_cast<std::int64_t>(source.y / a);
    if (!lattice.is_open(static_cast<std::size_t>(cy), static_cast<std::size_t>(cx)))
        throw source_in_closed_cell("ray source lies in a closed cell");

    RayTrace trace;
    trace.source = source;
    Point2 pos = source;
    double angle = uniform_angle(eng);

    while (trace.collision_count() < cfg.max_collisions) {
        const double dx = std::cos(angle), dy = std::sin(angle);
        const std::int64_t step_x = dx > 0.0 ? 1 : -1;
        const std::int64_t step_y = dy > 0.0 ? 1 : -1;
        const double inf = std::numeric_limits<double>::infinity();
        const double next_x = static_cast<double>(cx + (step_x > 0 ? 1 : 0)) * a;
        const double next_y = static_cast<double>(cy + (step_y > 0 ? 1 : 0)) * a;
        double t_max_x = dx != 0.0 ? (next_x - pos.x) / dx : inf;
        double t_max_y = dy != 0.0 ? (next_y - pos.y) / dy : inf;
        const double t_delta_x = dx != 0.0 ? a / std::abs(dx) : inf;
        const double t_delta_y = dy != 0.0 ? a / std::abs(dy) : inf;

        for (;;) {
            double t;
            bool crossed_x;
            if (t_max_x < t_max_y) {
                t = t_max_x;
                cx += step_x;
                t_max_x += t_delta_x;
                crossed_x = true;
            } else {
                t = t_max_y;
                cy += step_y;
                t_max_y += t_delta_y;
                crossed_x = false;
            }
            if (cx < 0 || cy < 0 || cx >= n || cy >= n) {
                trace.terminal = Terminal::escaped;
                return trace;
            }
            if (lattice.is_open(static_cast<std::size_t>(cy), static_cast<std::size_t>(cx)))
                continue;

            // Hit the face of a closed cell: step back into the open cell.
            Point2 hit{pos.x + t * dx, pos.y + t * dy};
            double normal;
            if (crossed_x) {
                cx -= step_x;
                hit.x = static_cast<double>(cx + (step_x > 0 ? 1 : 0)) * a;
                normal = step_x > 0 ? std::numbers::pi : 0.0;
            } else {
                cy -= step_y;
                hit.y = static_cast<double>(cy + (step_y > 0 ? 1 : 0)) * a;
                normal = step_y > 0 ? -0.5 * std::numbers::pi : 0.5 * std::numbers::pi;
            }
            pos = hit;
            if (!detail::record_collision(trace, hit, cfg, eng))
                return trace;
            angle = normal + (uniform01(eng) - 0.5) * std::numbers::pi;
            break;
        }
    }
    trace.terminal = Terminal::max_collisions;
    return trace;
}

/// Ray source for lattice runs.
struct LatticeTracer
{
    const Lattice& lattice;
    Point2 source;

    RayTrace operator()(engine& eng, const SimConfig& cfg) const { return trace_ray(lattice, source, eng, cfg); }

    /// Largest radius around the source that stays inside the grid.
    double max_radius() const noexcept
    {
        const double e = lattice.extent();
        return std::min({source.x, source.y, e - source.x, e - source.y});
    }
};

/// Obstacle-free isotropic walk with a fixed flight length between
/// collisions; used to check the Gaussian large-i limit directly.
struct FixedStepWalk
{
    double step = 1.0;

    RayTrace operator()(engine& eng, const SimConfig& cfg) const
    {
        if (!(step > 0.0))
            throw domain_error("walk step must be positive");
        RayTrace trace;
        Point2 pos{};
        trace.collision_points.reserve(cfg.max_collisions);
        trace.cumulative_loss_db.reserve(cfg.max_collisions);
        while (trace.collision_count() < cfg.max_collisions) {
            const double ang = uniform_angle(eng);
            pos.x += step * std::cos(ang);
            pos.y += step * std::sin(ang);
            if (!detail::record_collision(trace, pos, cfg, eng))
                return trace;
        }
        trace.terminal = Terminal::max_collisions;
        return trace;
    }

    double max_radius() const noexcept { return std::numeric_limits<double>::infinity(); }
};

namespace detail {

inline constexpr std::size_t rays_per_block = 1024;

// Runs `visit(acc, trace)` for every ray.  Ray k always draws from
// make_stream(seed, k); blocks of rays fill their own accumulator and the
// accumulators are merged in block order, so the result is independent of
// the thread count and scheduling.
template <class Acc, class Tracer, class Visit>
Acc run_rays(const Tracer& tracer, const SimConfig& cfg, Visit visit)
{
    cfg.validate();
    const std::size_t n_blocks = (cfg.n_rays + rays_per_block - 1) / rays_per_block;
    std::vector<Acc> partial(n_blocks);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;

    auto worker = [&] {
        try {
            for (std::size_t b = next++; b < n_blocks && !failed; b = next++) {
                const std::size_t end = std::min(cfg.n_rays, (b + 1) * rays_per_block);
                for (std::size_t k = b * rays_per_block; k < end; ++k) {
                    engine eng = make_stream(cfg.seed, k);
                    visit(partial[b], tracer(eng, cfg));
                }
            }
        } catch (...) {
            if (!failed.exchange(true))
                error = std::current_exception();
        }
    };

    unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_blocks));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back(worker);
    }
    if (error)
        std::rethrow_exception(error);

    Acc total{};
    for (auto& p : partial)
        total.merge(p);
    return total;
}

} // namespace detail

struct CollisionHistogram
{
    std::vector<double> edges;               // radial bin edges, meters
    std::vector<std::uint64_t> counts;       // per bin
    std::vector<double> density;             // per unit area, conditional on reaching collision i
    std::uint64_t overflow = 0;              // r beyond the last edge
    std::uint64_t underflow = 0;             // r below the first edge
    std::uint64_t reached = 0;               // rays that made collision i
    std::uint64_t escaped_before = 0;
    std::uint64_t absorbed_before = 0;
    double mean_sq_radius = 0.0;             // E r^2 over rays that reached i
    double mean_sq_radius_stderr = 0.0;

    double escape_fraction(std::size_t n_rays) const noexcept
    {
        return static_cast<double>(escaped_before) / static_cast<double>(n_rays);
    }
};

/// Histogram of the distance from the source at the i-th collision,
/// normalised per unit area so it is comparable to Q_i(r).  Rays that
/// escape or are absorbed earlier are dropped and counted separately.
template <class Tracer>
CollisionHistogram empirical_collision_density(const Tracer& tracer, std::size_t i, const SimConfig& cfg,
                                               std::span<const double> edges)
{
    if (i == 0)
        throw domain_error("collision index must be at least 1");
    if (cfg.max_collisions < i)
        throw domain_error("max_collisions is below the requested collision index");
    if (edges.size() < 2 || !(edges.front() >= 0.0))
        throw domain_error("radial bins need at least two non-negative edges");
    for (std::size_t k = 1; k < edges.size(); ++k)
        if (!(edges[k] > edges[k - 1]))
            throw domain_error("radial bin edges must be strictly increasing");
    if (edges.back() > tracer.max_radius())
        throw domain_error("radial bins extend beyond the lattice");

    struct Acc
    {
        std::vector<std::uint64_t> counts;
        std::uint64_t over = 0, under = 0, reached = 0, escaped = 0, absorbed = 0;
        double sum_r2 = 0.0, sum_r4 = 0.0;

        void merge(const Acc& o)
        {
            if (counts.size() < o.counts.size())
                counts.resize(o.counts.size());
            for (std::size_t k = 0; k < o.counts.size(); ++k)
                counts[k] += o.counts[k];
            over += o.over;
            under += o.under;
            reached += o.reached;
            escaped += o.escaped;
            absorbed += o.absorbed;
            sum_r2 += o.sum_r2;
            sum_r4 += o.sum_r4;
        }
    };

    const std::size_t n_bins = edges.size() - 1;
    auto acc = detail::run_rays<Acc>(tracer, cfg, [&](Acc& a, const RayTrace& t) {
        if (a.counts.empty())
            a.counts.assign(n_bins, 0);
        if (t.collision_count() < i) {
            (t.terminal == Terminal::escaped ? a.escaped : a.absorbed)++;
            return;
        }
        const double r = distance(t.collision_points[i - 1], t.source);
        ++a.reached;
        a.sum_r2 += r * r;
        a.sum_r4 += r * r * r * r;
        if (r < edges.front()) {
            ++a.under;
            return;
        }
        const auto it = std::upper_bound(edges.begin(), edges.end(), r);
        if (it == edges.end()) {
            ++a.over;
            return;
        }
        ++a.counts[static_cast<std::size_t>(it - edges.begin()) - 1];
    });

    if (acc.reached < 100)
        throw insufficient_samples("only " + std::to_string(acc.reached) + " rays reached collision " + std::to_string(i));

    CollisionHistogram h;
    h.edges.assign(edges.begin(), edges.end());
    h.counts = acc.counts;
    h.counts.resize(n_bins, 0);
    h.overflow = acc.over;
    h.underflow = acc.under;
    h.reached = acc.reached;
    h.escaped_before = acc.escaped;
    h.absorbed_before = acc.absorbed;
    const double n = static_cast<double>(acc.reached);
    h.mean_sq_radius = acc.sum_r2 / n;
    const double var = std::max(0.0, acc.sum_r4 / n - h.mean_sq_radius * h.mean_sq_radius);
    h.mean_sq_radius_stderr = std::sqrt(var / (n - 1.0));
    h.density.resize(n_bins);
    for (std::size_t k = 0; k < n_bins; ++k) {
        const double area = std::numbers::pi * (edges[k + 1] * edges[k + 1] - edges[k] * edges[k]);
        h.density[k] = static_cast<double>(h.counts[k]) / (n * area);
    }
    return h;
}

struct Annulus
{
    double r = 0.0;      // centre radius, meters
    double width = 1.0;  // radial width
};

struct PowerEstimate
{
    double r = 0.0;
    double power = 0.0;      // relative to P_T
    double std_error = 0.0;
    double ci_low = 0.0;     // 95%
    double ci_high = 0.0;
    std::uint64_t landings = 0;
    std::uint64_t escaped = 0;
    std::uint64_t absorbed = 0;
    std::size_t n_rays = 0;
};

/// Monte Carlo estimate of the mean received power in an annulus: each
/// collision landing inside it adds 10^{-(accumulated loss)/10}; the total is
/// divided by the annulus area and the ray count.  Works with per-collision
/// random losses as well as a fixed L.
template <class Tracer>
PowerEstimate empirical_power(const Tracer& tracer, Annulus rx, const SimConfig& cfg)
{
    if (!(rx.r > 1.0))
        throw far_field_violation(rx.r);
    if (!(rx.width > 0.0) || rx.r - 0.5 * rx.width < 0.0)
        throw domain_error("annulus width must be positive and smaller than 2r");
    if (rx.r + 0.5 * rx.width > tracer.max_radius())
        throw domain_error("receiver annulus extends beyond the lattice");

    const double r_in = rx.r - 0.5 * rx.width, r_out = rx.r + 0.5 * rx.width;

    struct Acc
    {
        double sum = 0.0, sum_sq = 0.0;
        std::uint64_t landings = 0, escaped = 0, absorbed = 0;

        void merge(const Acc& o)
        {
            sum += o.sum;
            sum_sq += o.sum_sq;
            landings += o.landings;
            escaped += o.escaped;
            absorbed += o.absorbed;
        }
    };

    auto acc = detail::run_rays<Acc>(tracer, cfg, [&](Acc& a, const RayTrace& t) {
        double z = 0.0;
        for (std::size_t k = 0; k < t.collision_count(); ++k) {
            const double r = distance(t.collision_points[k], t.source);
            if (r >= r_in && r < r_out) {
                z += std::pow(10.0, -t.cumulative_loss_db[k] / 10.0);
                ++a.landings;
            }
        }
        a.sum += z;
        a.sum_sq += z * z;
        a.escaped += t.terminal == Terminal::escaped;
        a.absorbed += t.terminal == Terminal::absorbed;
    });

    const double n = static_cast<double>(cfg.n_rays);
    const double area = std::numbers::pi * (r_out * r_out - r_in * r_in);
    const double mean = acc.sum / n;
    const double var = n > 1.0 ? std::max(0.0, (acc.sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;

    PowerEstimate est;
    est.r = rx.r;
    est.power = mean / area;
    est.std_error = std::sqrt(var / n) / area;
    est.ci_low = est.power - 1.96 * est.std_error;
    est.ci_high = est.power + 1.96 * est.std_error;
    est.landings = acc.landings;
    est.escaped = acc.escaped;
    est.absorbed = acc.absorbed;
    est.n_rays = cfg.n_rays;
    if (acc.landings == 0 || 1.96 * est.std_error > cfg.max_relative_ci * est.power)
        throw insufficient_samples("power estimate at r = " + std::to_string(rx.r) + " has " +
                                   std::to_string(acc.landings) + " landings; confidence interval too wide");
    return est;
}

struct FreePathStats
{
    double mean = 0.0;
    double std_error = 0.0;
    std::uint64_t segments = 0;
    double escape_fraction = 0.0;
};

/// Mean straight-flight length between consecutive collisions (the first
/// flight from the source is excluded).
template <class Tracer>
FreePathStats mean_free_path(const Tracer& tracer, const SimConfig& cfg)
{
    struct Acc
    {
        double sum = 0.0, sum_sq = 0.0;
        std::uint64_t segments = 0, escaped = 0;

        void merge(const Acc& o)
        {
            sum += o.sum;
            sum_sq += o.sum_sq;
            segments += o.segments;
            escaped += o.escaped;
        }
    };
    auto acc = detail::run_rays<Acc>(tracer, cfg, [](Acc& a, const RayTrace& t) {
        for (std::size_t k = 1; k < t.collision_count(); ++k) {
            const double d = distance(t.collision_points[k], t.collision_points[k - 1]);
            a.sum += d;
            a.sum_sq += d * d;
            ++a.segments;
        }
        a.escaped += t.terminal == Terminal::escaped;
    });
    if (acc.segments < 2)
        throw insufficient_samples("fewer than two free flights observed");
    FreePathStats s;
    const double n = static_cast<double>(acc.segments);
    s.mean = acc.sum / n;
    s.std_error = std::sqrt(std::max(0.0, acc.sum_sq / n - s.mean * s.mean) / (n - 1.0));
    s.segments = acc.segments;
    s.escape_fraction = static_cast<double>(acc.escaped) / static_cast<double>(cfg.n_rays);
    return s;
}

inline void write_histogram_csv(std::ostream& os, const CollisionHistogram& h)
{
    const auto old = os.precision(12);
    os << "r_lo_m,r_hi_m,count,density\n";
    for (std::size_t k = 0; k + 1 < h.edges.size(); ++k)
        os << h.edges[k] << ',' << h.edges[k + 1] << ',' << h.counts[k] << ',' << h.density[k] << '\n';
    os.precision(old);
}

} // namespace stochray
