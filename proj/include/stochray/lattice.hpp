#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace stochray {

/// Critical open probability of 2D square-lattice site percolation.
inline constexpr double percolation_threshold = 0.59275;

/// Geometry and seed of a site-percolation lattice.  `open_prob` is the
/// probability that a cell is empty (open); closed cells are obstacles.
struct LatticeSpec
{
    double cell_side = 1.0;  // a, meters
    double open_prob = 0.5;  // p
    std::size_t size = 1;    // N cells per side
    std::uint64_t seed = 0;

    void validate() const
    {
        if (!(cell_side > 0.0) || !std::isfinite(cell_side))
            throw domain_error("cell side a must be positive");
        if (!(open_prob >= 0.0 && open_prob <= 1.0))
            throw domain_error("open probability p must lie in [0, 1]");
        if (size == 0)
            throw domain_error("grid size N must be at least 1");
    }
};

enum class Cell : std::uint8_t { open, closed };

/// Immutable N x N occupancy grid.  Cell (row, col) covers
/// [col*a, (col+1)*a) x [row*a, (row+1)*a) in lattice coordinates.
class Lattice
{
public:
    Lattice(LatticeSpec spec, std::vector<Cell> cells)
        : spec_(spec), cells_(std::move(cells))
    {
        spec_.validate();
        if (cells_.size() != spec_.size * spec_.size)
            throw domain_error("cell count does not match N*N");
        for (Cell c : cells_)
            open_count_ += (c == Cell::open);
    }

    const LatticeSpec& spec() const noexcept { return spec_; }
    std::size_t size() const noexcept { return spec_.size; }
    double cell_side() const noexcept { return spec_.cell_side; }
    double extent() const noexcept { return spec_.cell_side * static_cast<double>(spec_.size); }

    Cell at(std::size_t row, std::size_t col) const noexcept { return cells_[row * spec_.size + col]; }
    bool is_open(std::size_t row, std::size_t col) const noexcept { return at(row, col) == Cell::open; }

    std::size_t open_count() const noexcept { return open_count_; }
    double realized_open_fraction() const noexcept
    {
        return static_cast<double>(open_count_) / static_cast<double>(cells_.size());
    }

    const std::vector<Cell>& cells() const noexcept { return cells_; }

private:
    LatticeSpec spec_;
    std::vector<Cell> cells_;
    std::size_t open_count_ = 0;
};

/// Fills cells in row-major order; cell k is open iff the k-th uniform draw
/// of mt19937_64(seed) is below p.  A (spec, seed) pair is therefore a
/// portable fixture.
inline Lattice generate_lattice(const LatticeSpec& spec)
{
    spec.validate();
    engine eng{spec.seed};
    std::vector<Cell> cells(spec.size * spec.size);
    for (Cell& c : cells)
        c = uniform01(eng) < spec.open_prob ? Cell::open : Cell::closed;
    return Lattice{spec, std::move(cells)};
}

/// Mean distance between closed clusters, a / sqrt(1 - p).
inline double mean_obstacle_spacing(double cell_side, double open_prob)
{
    if (!(cell_side > 0.0))
        throw domain_error("cell side a must be positive");
    if (!(open_prob >= 0.0 && open_prob <= 1.0))
        throw domain_error("open probability p must lie in [0, 1]");
    if (open_prob == 1.0)
        throw domain_error("mean obstacle spacing diverges at p = 1 (no obstacles)");
    return cell_side / std::sqrt(1.0 - open_prob);
}

enum class Regime { subcritical, supercritical };

struct PercRegime
{
    Regime regime;
    double threshold = percolation_threshold;
};

/// Supercritical iff p > p_c; p == p_c counts as subcritical.
inline PercRegime classify_regime(double open_prob)
{
    if (!(open_prob >= 0.0 && open_prob <= 1.0))
        throw domain_error("open probability p must lie in [0, 1]");
    return {open_prob > percolation_threshold ? Regime::supercritical : Regime::subcritical};
}

inline const char* to_string(Regime r) noexcept
{
    return r == Regime::supercritical ? "supercritical" : "subcritical";
}

// Text fixture:
//   a=<val> p=<val> N=<val> seed=<val>
//   one row per line, '#' closed, '.' open; row 0 first.

inline void write_lattice(std::ostream& os, const Lattice& lat)
{
    const auto& s = lat.spec();
    std::ostringstream header;
    header.precision(17);
    header << "a=" << s.cell_side << " p=" << s.open_prob << " N=" << s.size << " seed=" << s.seed;
    os << header.str() << '\n';
    std::string row(lat.size(), '.');
    for (std::size_t r = 0; r < lat.size(); ++r) {
        for (std::size_t c = 0; c < lat.size(); ++c)
            row[c] = lat.is_open(r, c) ? '.' : '#';
        os << row << '\n';
    }
}

inline Lattice read_lattice(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line))
        throw parse_error("empty lattice fixture", 1);

    LatticeSpec spec;
    bool seen_a = false, seen_p = false, seen_n = false, seen_seed = false;
    std::istringstream header(line);
    std::string tok;
    while (header >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw parse_error("malformed header token '" + tok + "'", 1);
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        try {
            if (key == "a") { spec.cell_side = std::stod(val); seen_a = true; }
            else if (key == "p") { spec.open_prob = std::stod(val); seen_p = true; }
            else if (key == "N") { spec.size = std::stoull(val); seen_n = true; }
            else if (key == "seed") { spec.seed = std::stoull(val); seen_seed = true; }
            else throw parse_error("unknown header key '" + key + "'", 1);
        } catch (const std::logic_error&) {
            throw parse_error("bad value for '" + key + "'", 1);
        }
    }
    if (!(seen_a && seen_p && seen_n && seen_seed))
        throw parse_error("header must carry a, p, N and seed", 1);
    try {
        spec.validate();
    } catch (const domain_error& e) {
        throw parse_error(e.what(), 1);
    }

    std::vector<Cell> cells;
    cells.reserve(spec.size * spec.size);
    for (std::size_t r = 0; r < spec.size; ++r) {
        if (!std::getline(is, line))
            throw parse_error("missing grid row", r + 2);
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.size() != spec.size)
            throw parse_error("row has " + std::to_string(line.size()) + " cells, expected " + std::to_string(spec.size), r + 2);
        for (char ch : line) {
            if (ch == '.') cells.push_back(Cell::open);
            else if (ch == '#') cells.push_back(Cell::closed);
            else throw parse_error(std::string("unexpected cell character '") + ch + "'", r + 2);
        }
    }
    return Lattice{spec, std::move(cells)};
}

} // namespace stochray
