#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include <stochray/calibration.hpp>

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test
{
protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("stochray_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    // Runs the binary with `args`; stdout and stderr land in files.
    int run(const std::string& args)
    {
        const std::string cmd = std::string(STOCHRAY_CLI_PATH) + " " + args + " >" + path("stdout.txt") + " 2>" +
                                path("stderr.txt");
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string slurp(const std::string& name) const
    {
        std::ifstream in(path(name));
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

    fs::path dir_;
};

// Path loss per (model, route) group of a curve CSV must rise strictly with r.
void expect_monotone_groups(const std::string& csv_path, std::size_t expected_groups)
{
    std::ifstream in(csv_path);
    std::string line;
    std::getline(in, line);
    ASSERT_EQ(line, "r_m,model,route,power_linear,path_loss_db");
    std::map<std::string, std::vector<std::pair<double, double>>> groups;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string r, model, route, p, pl;
        std::getline(ss, r, ',');
        std::getline(ss, model, ',');
        std::getline(ss, route, ',');
        std::getline(ss, p, ',');
        std::getline(ss, pl, ',');
        groups[model + ":" + route].push_back({std::stod(r), std::stod(pl)});
    }
    EXPECT_EQ(groups.size(), expected_groups);
    for (const auto& [key, pts] : groups) {
        ASSERT_GT(pts.size(), 2u);
        for (std::size_t k = 1; k < pts.size(); ++k) {
            EXPECT_GT(pts[k].first, pts[k - 1].first) << key;
            EXPECT_GT(pts[k].second, pts[k - 1].second) << key;
        }
    }
}

} // namespace

TEST_F(Cli, OutdoorPresetCurvesAreMonotone)
{
    ASSERT_EQ(run("--preset outdoor-prati predict --out " + path("out.csv")), 0) << slurp("stderr.txt");
    expect_monotone_groups(path("out.csv"), 3);
    EXPECT_NE(slurp("stdout.txt").find("L=3.50"), std::string::npos);
}

TEST_F(Cli, IndoorPresetCalibratedAtReference)
{
    write("ref.csv", "# ref=1.5\ndistance_m,path_loss_db\n1.5,0\n3,9.5\n10,30\n");
    ASSERT_EQ(run("predict --preset indoor-60ghz --route all --measurements " + path("ref.csv") + " --out " +
                  path("in.csv")),
              0)
        << slurp("stderr.txt");
    expect_monotone_groups(path("in.csv"), 12);
    EXPECT_NE(slurp("stdout.txt").find("shifted"), std::string::npos);
}

TEST_F(Cli, FitOnPredictOutputIsExact)
{
    ASSERT_EQ(run("--preset outdoor-prati predict --model g05 --r-start 50 --out " + path("syn.csv")), 0);
    ASSERT_EQ(run("--a 20 --p 0.7 --model g05 --model rw fit --measurements " + path("syn.csv")), 0)
        << slurp("stderr.txt");
    const auto report = slurp("stderr.txt");
    // Ordered by sigma: the generating model first, at its own L.
    const auto first = report.find('\n') + 1;
    EXPECT_EQ(report.substr(first, 3), "g05");
    EXPECT_NE(report.find("5.5000"), std::string::npos);
    std::istringstream row(report.substr(first));
    std::string model;
    double loss = 0.0, sigma = 1.0;
    row >> model >> loss >> sigma;
    EXPECT_NEAR(loss, 5.5, 1e-6);
    EXPECT_LT(sigma, 1e-6);
    EXPECT_NE(slurp("stdout.txt").find("distance_m,measured_db,g05_db,rw_db"), std::string::npos);
}

TEST_F(Cli, ValidateDefaultPasses)
{
    EXPECT_EQ(run("validate"), 0) << slurp("stdout.txt");
    EXPECT_EQ(slurp("stdout.txt").find("FAIL"), std::string::npos);
}

TEST_F(Cli, LatticeFixture)
{
    ASSERT_EQ(run("lattice --a 5 --p 0.6 --N 16 --seed 3 --out " + path("lat.txt")), 0);
    std::ifstream in(path("lat.txt"));
    const auto lat = stochray::read_lattice(in);
    EXPECT_EQ(lat.size(), 16u);
    EXPECT_EQ(lat.cells(), stochray::generate_lattice({5.0, 0.6, 16, 3}).cells());
}

TEST_F(Cli, SimulateWalkHistogram)
{
    ASSERT_EQ(run("simulate --walk --rays 2000 --i 5 --out " + path("h.csv")), 0) << slurp("stderr.txt");
    EXPECT_EQ(slurp("h.csv").substr(0, 27), "r_lo_m,r_hi_m,count,density");
}

TEST_F(Cli, ExitCodes)
{
    EXPECT_EQ(run("--help"), 0);
    // 2: argument and configuration errors
    EXPECT_EQ(run("predict --model nope"), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    write("bad.ini", "a = 20\nnot_a_key = 1\n");
    EXPECT_EQ(run("--config " + path("bad.ini") + " predict"), 2);
    EXPECT_NE(slurp("stderr.txt").find("not_a_key"), std::string::npos);
    // 3: domain errors
    EXPECT_EQ(run("predict --r-start 0.5"), 3);
    EXPECT_NE(slurp("stderr.txt").find("far-field"), std::string::npos);
    EXPECT_EQ(run("predict --p 1.0"), 3);
    // 4: failed checks (near field, where sums are not integrals)
    EXPECT_EQ(run("validate --r-start 20 --r-stop 500"), 4);
    // 5: I/O and malformed input
    EXPECT_EQ(run("fit --measurements " + path("missing.csv")), 5);
    write("bad.csv", "distance_m,path_loss_db\n10,40\n20,x\n");
    EXPECT_EQ(run("fit --measurements " + path("bad.csv")), 5);
    EXPECT_NE(slurp("stderr.txt").find("line 3"), std::string::npos);
    EXPECT_EQ(run("predict --out " + path("no/such/dir/out.csv")), 5);
}

TEST_F(Cli, ConfigFileAndFlagPrecedence)
{
    write("run.ini", "# outdoor\na = 30\np = 0.6\nL = 4\nr-count = 3\n");
    ASSERT_EQ(run("--config " + path("run.ini") + " --p 0.65 predict --model rw"), 0) << slurp("stderr.txt");
    EXPECT_NE(slurp("stderr.txt").find("a=30 m  p=0.65"), std::string::npos);
    EXPECT_NE(slurp("stderr.txt").find("L=4.00"), std::string::npos);
}

TEST_F(Cli, UnusualLossWarns)
{
    EXPECT_EQ(run("predict --L 12 --r-count 3"), 0);
    EXPECT_NE(slurp("stderr.txt").find("warning"), std::string::npos);
}
