#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "hetnet/report.hpp"

namespace fs = std::filesystem;

namespace {

struct Invocation {
    int status = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

class Cli : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / (std::string("hetsim_cli_") + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    Invocation hetsim(const std::string& args, const std::string& env = "") const {
        const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
        const std::string cmd = env + " '" HETSIM_PATH "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
        const int raw = std::system(cmd.c_str());
        Invocation r;
        r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
        r.out = slurp(out);
        r.err = slurp(err);
        return r;
    }

    std::size_t csv_count(const fs::path& d) const {
        std::size_t n = 0;
        for (const auto& e : fs::directory_iterator(d)) n += e.path().extension() == ".csv";
        return n;
    }
};

std::size_t lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST(CsvSchema, GoldenHeaders) {
    EXPECT_EQ(std::string(hetnet::kMetricsHeader),
              "epoch,objective,pf_index,tx_cost,op_cost,weighted_throughput,total_power,energy_efficiency,"
              "active_station_count");
    EXPECT_EQ(std::string(hetnet::kEventsHeader), "epoch,kind,entity,old,new,margin");
    EXPECT_EQ(std::string(hetnet::kSweepHeader),
              "axis,value,policy,seed,objective,pf_index,tx_cost,op_cost,weighted_throughput,total_power,"
              "energy_efficiency,active_station_count");
}

TEST_F(Cli, SchedulingPresetWritesThreeCsvs) {
    const auto r = hetsim("--preset fig-scheduling --seed 1 --horizon 200 --out '" + (dir / "d").string() + "'");
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_EQ(csv_count(dir / "d"), 3u);
    for (const char* p : {"rr", "pf-slow", "pf-fast"}) {
        const auto path = dir / "d" / (std::string("fig-scheduling_") + p + "_seed1.csv");
        ASSERT_TRUE(fs::exists(path)) << path;
        const auto text = slurp(path);
        EXPECT_EQ(first_line(text), hetnet::kMetricsHeader);
        EXPECT_EQ(lines(text), 3u);  // header and two epochs
    }
    EXPECT_EQ(lines(r.out), 3u);
}

TEST_F(Cli, SingleRunPrintsFiniteSummary) {
    const auto r = hetsim("--scenario grid25 --scheduler rr --price 0 --horizon 100 --events --out '" +
                          dir.string() + "'");
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_EQ(lines(r.out), 1u);
    EXPECT_NE(r.out.find("objective="), std::string::npos);
    EXPECT_EQ(r.out.find("inf"), std::string::npos);
    EXPECT_EQ(r.out.find("nan"), std::string::npos);
    const auto metrics = slurp(dir / "grid25_seed1.csv");
    ASSERT_EQ(lines(metrics), 2u);
    const std::string row = metrics.substr(metrics.find('\n') + 1);
    const double objective = std::stod(row.substr(row.find(',') + 1));
    EXPECT_TRUE(std::isfinite(objective));
    EXPECT_EQ(first_line(slurp(dir / "grid25_seed1_events.csv")), hetnet::kEventsHeader);
}

TEST_F(Cli, PriceSweepGivesOneRowPerPricePerPolicy) {
    const auto r = hetsim("--preset fig-large --sweep price --horizon 100 --threads 2 -q --out '" + dir.string() + "'");
    ASSERT_EQ(r.status, 0) << r.err;
    const auto text = slurp(dir / "fig-large_price.csv");
    EXPECT_EQ(first_line(text), hetnet::kSweepHeader);
    EXPECT_EQ(lines(text), 1u + 6u * 4u);
    EXPECT_EQ(csv_count(dir), 1u);
    EXPECT_TRUE(r.out.empty());
}

TEST_F(Cli, SameSeedGivesIdenticalFiles) {
    const std::string common = "--preset fig-association --values 0.02,0.1 --horizon 300 -q --per-run --events ";
    ASSERT_EQ(hetsim(common + "--threads 2 --out '" + (dir / "a").string() + "'").status, 0);
    ASSERT_EQ(hetsim(common + "--threads 1 --out '" + (dir / "b").string() + "'").status, 0);
    std::size_t compared = 0;
    for (const auto& e : fs::directory_iterator(dir / "a")) {
        EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / e.path().filename())) << e.path().filename();
        ++compared;
    }
    EXPECT_EQ(compared, 5u);  // sweep plus two metrics and two events files
}

TEST_F(Cli, OutputDirectoryFromEnvironment) {
    const auto r = hetsim("--scenario assoc-pair --horizon 100 -q", "HETSIM_OUT='" + (dir / "env").string() + "'");
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "env" / "assoc-pair_seed1.csv"));
}

TEST_F(Cli, BadFlagsFailWithUsage) {
    for (const char* args : {"--bogus", "--preset fig-nothing", "--sweep sideways", "--scheduler fifo", "--price -1",
                             "--seed abc"}) {
        const auto r = hetsim(args);
        EXPECT_NE(r.status, 0) << args;
        EXPECT_NE(r.err.find("Usage"), std::string::npos) << args << ": " << r.err;
    }
}

TEST_F(Cli, RuntimeErrorsFailWithMessage) {
    const std::string out = " --out '" + dir.string() + "'";
    for (const std::string args : {"--scenario nowhere", "--values 0.1", "--preset fig-power --sweep price --values -0.5",
                                   "--scenario missing.json"}) {
        const auto r = hetsim(args + out);
        EXPECT_EQ(r.status, 1) << args;
        EXPECT_NE(r.err.find("hetsim: error:"), std::string::npos) << args;
    }
}

TEST_F(Cli, UnwritableOutputFails) {
    std::ofstream(dir / "file") << "x";
    const auto r = hetsim("--scenario assoc-pair --horizon 100 --out '" + (dir / "file" / "sub").string() + "'");
    EXPECT_NE(r.status, 0);
    EXPECT_NE(r.err.find("output directory"), std::string::npos);
}

TEST_F(Cli, ConfigFileAndFlagOverride) {
    std::ofstream(dir / "cfg.json") << R"({"scenario": "assoc-pair", "horizon_frames": 200, "price": 0.1})";
    const auto r = hetsim("--config '" + (dir / "cfg.json").string() + "' --price 0.01 --out '" + dir.string() + "'");
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_EQ(lines(slurp(dir / "assoc-pair_seed1.csv")), 3u);
    EXPECT_NE(r.out.find("active=2"), std::string::npos) << r.out;

    std::ofstream(dir / "bad.json") << R"({"scenario": "assoc-pair", "frames": 10})";
    EXPECT_EQ(hetsim("--config '" + (dir / "bad.json").string() + "' --out '" + dir.string() + "'").status, 1);
}
