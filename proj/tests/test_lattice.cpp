#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include <stochray/lattice.hpp>

using namespace stochray;

TEST(Lattice, AllOpenAtPOne)
{
    const auto lat = generate_lattice({1.0, 1.0, 10, 7});
    EXPECT_EQ(lat.open_count(), 100u);
    EXPECT_DOUBLE_EQ(lat.realized_open_fraction(), 1.0);
}

TEST(Lattice, AllClosedAtPZero)
{
    const auto lat = generate_lattice({1.0, 0.0, 10, 7});
    EXPECT_EQ(lat.open_count(), 0u);
}

TEST(Lattice, OpenFractionNearP)
{
    const auto lat = generate_lattice({20.0, 0.7, 200, 42});
    // Binomial standard deviation is 0.0023 at N = 200.
    EXPECT_NEAR(lat.realized_open_fraction(), 0.7, 0.013);
}

TEST(Lattice, RejectsBadSpecs)
{
    EXPECT_THROW(generate_lattice({20.0, 0.7, 0, 1}), domain_error);
    EXPECT_THROW(generate_lattice({20.0, 1.2, 10, 1}), domain_error);
    EXPECT_THROW(generate_lattice({20.0, -0.1, 10, 1}), domain_error);
    EXPECT_THROW(generate_lattice({0.0, 0.5, 10, 1}), domain_error);
}

TEST(Lattice, SameSeedSameGrid)
{
    const LatticeSpec spec{5.0, 0.55, 64, 1234};
    EXPECT_EQ(generate_lattice(spec).cells(), generate_lattice(spec).cells());
    auto other = spec;
    other.seed = 1235;
    EXPECT_NE(generate_lattice(spec).cells(), generate_lattice(other).cells());
}

TEST(Lattice, FrozenFixture)
{
    // Guards against accidental changes to the cell-draw order or the
    // uniform mapping; regenerate deliberately if either changes.
    const std::string frozen = "a=1 p=0.5 N=6 seed=1\n"
                               ".....#\n"
                               "..##.#\n"
                               "#....#\n"
                               "...#..\n"
                               "....##\n"
                               "#.#..#\n";
    std::ostringstream os;
    write_lattice(os, generate_lattice({1.0, 0.5, 6, 1}));
    EXPECT_EQ(os.str(), frozen);

    // Same cells straight from the standard engine: top 53 bits below p.
    std::mt19937_64 eng(1);
    std::string rows;
    for (int k = 0; k < 36; ++k) {
        rows += static_cast<double>(eng() >> 11) * 0x1.0p-53 < 0.5 ? '.' : '#';
        if (k % 6 == 5)
            rows += '\n';
    }
    EXPECT_EQ(frozen.substr(frozen.find('\n') + 1), rows);
}

TEST(Lattice, MeanObstacleSpacing)
{
    EXPECT_NEAR(mean_obstacle_spacing(20.0, 0.7), 36.514837167011, 1e-9);
    EXPECT_NEAR(mean_obstacle_spacing(2.0, 0.82), 4.714045207910, 1e-9);
    EXPECT_DOUBLE_EQ(mean_obstacle_spacing(1.0, 0.0), 1.0);
    EXPECT_THROW(mean_obstacle_spacing(20.0, 1.0), domain_error);
}

TEST(Lattice, SpacingMonotoneAndLinearInA)
{
    double prev = 0.0;
    for (double p = 0.0; p < 0.99; p += 0.05) {
        const double d = mean_obstacle_spacing(3.0, p);
        EXPECT_GT(d, prev);
        EXPECT_NEAR(mean_obstacle_spacing(7.5, p) / d, 2.5, 1e-14);
        prev = d;
    }
}

TEST(Lattice, RegimeClassification)
{
    EXPECT_EQ(classify_regime(0.7).regime, Regime::supercritical);
    EXPECT_EQ(classify_regime(0.5).regime, Regime::subcritical);
    EXPECT_EQ(classify_regime(percolation_threshold).regime, Regime::subcritical);
    EXPECT_EQ(classify_regime(std::nextafter(percolation_threshold, 1.0)).regime, Regime::supercritical);
    EXPECT_DOUBLE_EQ(classify_regime(0.1).threshold, 0.59275);
}

TEST(Lattice, OpenFractionUnbiasedAcrossSeeds)
{
    for (double p : {0.3, 0.5, 0.7, 0.9}) {
        double sum = 0.0;
        const int seeds = 40;
        for (int s = 0; s < seeds; ++s)
            sum += generate_lattice({1.0, p, 200, static_cast<std::uint64_t>(s)}).realized_open_fraction();
        // SE of the mean over 40 seeds is below 4e-4.
        EXPECT_NEAR(sum / seeds, p, 0.0015) << "p = " << p;
    }
}

TEST(Lattice, TextRoundTrip)
{
    const auto lat = generate_lattice({2.5, 0.6, 17, 99});
    std::stringstream ss;
    write_lattice(ss, lat);
    const auto back = read_lattice(ss);
    EXPECT_EQ(back.cells(), lat.cells());
    EXPECT_DOUBLE_EQ(back.cell_side(), 2.5);
    EXPECT_EQ(back.size(), 17u);
}

TEST(Lattice, MalformedTextReportsLine)
{
    std::istringstream is("a=1 p=0.5 N=3 seed=0\n.#.\n.x.\n...\n");
    try {
        read_lattice(is);
        FAIL() << "expected parse_error";
    } catch (const parse_error& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    std::istringstream short_rows("a=1 p=0.5 N=3 seed=0\n.#.\n..\n...\n");
    EXPECT_THROW(read_lattice(short_rows), parse_error);
}
