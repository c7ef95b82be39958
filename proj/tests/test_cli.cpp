#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "../tools/commands.hpp"

namespace fs = std::filesystem;
using biasaudit::cli::run;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("biasaudit_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path generate(const std::string& kind, const std::string& seed, const std::string& n = "2000") {
        const auto out = dir_ / (kind + seed);
        const auto r = invoke({"generate", "--kind", kind, "--n", n, "--p", "2", "--seed", seed, "--out", out.string()});
        EXPECT_EQ(r.code, 0) << r.err;
        return out;
    }

    Result detect(const fs::path& data_dir, const fs::path& out, std::vector<std::string> extra = {}) {
        std::vector<std::string> args{"detect", "--data", (data_dir / "data.csv").string(), "--schema",
                                      (data_dir / "schema.json").string(), "--out", out.string()};
        args.insert(args.end(), extra.begin(), extra.end());
        return invoke(args);
    }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, NoBiasDataReportsNoBias) {
    const auto data = generate("no-bias", "1");
    const auto r = detect(data, dir_ / "out");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("No Bias Detected"), std::string::npos) << r.out;
}

TEST_F(CliTest, PlantedDataReportsBias) {
    const auto data = generate("planted", "3");
    const auto out = dir_ / "out";
    const auto r = detect(data, out);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.find("Bias Detected"), 0u) << r.out;
    for (const char* f : {"report.json", "tree.json", "tree.dot", "summary.txt", "manifest.json"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    const auto report = nlohmann::json::parse(slurp(out / "report.json"));
    std::size_t flagged = 0;
    for (const auto& nd : report["nodes"]) flagged += nd["detected"].get<bool>();
    EXPECT_GE(flagged, 1u);
}

TEST_F(CliTest, MalformedCsvLeavesNoFiles) {
    const auto data = generate("no-bias", "2", "100");
    {
        std::ofstream f(data / "data.csv", std::ios::app);
        f << "oops,0.5\n";
    }
    const auto out = dir_ / "out";
    const auto r = detect(data, out);
    EXPECT_NE(r.code, 0);
    EXPECT_FALSE(r.err.empty());
    EXPECT_TRUE(!fs::exists(out) || fs::is_empty(out));
}

TEST_F(CliTest, MissingFileIsOperationalError) {
    const auto r = invoke({"detect", "--data", (dir_ / "nope.csv").string(), "--schema",
                           (dir_ / "nope.json").string(), "--out", (dir_ / "out").string()});
    EXPECT_EQ(r.code, 1);
}

TEST_F(CliTest, DetectIsDeterministic) {
    const auto data = generate("planted", "5", "800");
    ASSERT_EQ(detect(data, dir_ / "a", {"--seed", "11"}).code, 0);
    ASSERT_EQ(detect(data, dir_ / "b", {"--seed", "11"}).code, 0);
    for (const char* f : {"report.json", "tree.json", "tree.dot", "summary.txt"})
        EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
}

TEST_F(CliTest, ExportFormats) {
    const auto data = generate("planted", "6", "500");
    ASSERT_EQ(detect(data, dir_ / "out").code, 0);
    const auto tree = (dir_ / "out" / "tree.json").string();
    const auto dot = invoke({"export", "--tree", tree, "--format", "dot"});
    EXPECT_EQ(dot.code, 0);
    EXPECT_EQ(dot.out, slurp(dir_ / "out" / "tree.dot"));
    const auto js = invoke({"export", "--tree", tree, "--format", "json"});
    EXPECT_EQ(js.code, 0);
    EXPECT_EQ(nlohmann::json::parse(js.out), nlohmann::json::parse(slurp(dir_ / "out" / "tree.json")));
    EXPECT_EQ(invoke({"export", "--tree", tree, "--format", "svg"}).code, 2);
}

TEST_F(CliTest, SimulateWritesCsvAndIsDeterministic) {
    const auto grid = dir_ / "grid.json";
    std::ofstream(grid) << R"({"max_depth": [3], "min_samples_leaf": [10], "min_samples_split": [30]})";
    auto sim = [&](const std::string& out) {
        return invoke({"simulate", "cvr", "--kind", "fixed-region", "--p", "2", "--n", "150", "300", "--reps", "3",
                       "--seed", "4", "--grid", grid.string(), "--threads", "1", "--out", (dir_ / out).string()});
    };
    ASSERT_EQ(sim("a").code, 0);
    ASSERT_EQ(sim("b").code, 0);
    const auto csv = slurp(dir_ / "a" / "results.csv");
    EXPECT_EQ(csv.rfind("p,n,mean,ci_low,ci_high,reps\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    for (const char* f : {"results.csv", "manifest.json", "plot_data.json"})
        EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;

    const auto rerun = invoke({"rerun", "--manifest", (dir_ / "a" / "manifest.json").string(), "--out",
                               (dir_ / "c").string()});
    ASSERT_EQ(rerun.code, 0) << rerun.err;
    EXPECT_EQ(slurp(dir_ / "c" / "results.csv"), csv);
}

TEST_F(CliTest, UsageErrors) {
    EXPECT_EQ(invoke({}).code, 2);
    EXPECT_EQ(invoke({"frobnicate"}).code, 2);
    EXPECT_EQ(invoke({"simulate", "xyz"}).code, 2);
    const auto grid = dir_ / "bad.json";
    std::ofstream(grid) << R"({"max_depth": [0]})";
    EXPECT_EQ(invoke({"simulate", "fdr", "--p", "2", "--n", "100", "--reps", "1", "--grid", grid.string(), "--out",
                      (dir_ / "o").string()})
                  .code,
              2);
    EXPECT_EQ(invoke({"--help"}).code, 0);
}
