#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "helpers.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args)
{
    const std::string cmd = std::string(COMPASS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path small_config(const fs::path& dir, const std::string& extra = "")
{
    const auto p = dir / "cfg.json";
    std::ofstream(p) << R"({"cohort": {"n_patients": 3, "fraction_counts": [3, 4, 3]},
                           "pipeline": {"autoencoder": {"epochs": 3}})"
                     << extra << "}";
    return p;
}

} // namespace

TEST(Cli, UsageErrors)
{
    EXPECT_EQ(run(""), 1);
    EXPECT_EQ(run("frobnicate"), 1);
    EXPECT_EQ(run("gen --seed notanumber"), 1);
    EXPECT_EQ(run("plot"), 1); // missing required option
    EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, DataErrors)
{
    const auto dir = testing_util::temp_dir("cli_data");
    EXPECT_EQ(run("lopo --cohort " + (dir / "absent").string() + " --out " + (dir / "o").string()), 2);
    std::ofstream(dir / "bad.csv") << "nope\n";
    EXPECT_EQ(run("plot --trajectories " + (dir / "bad.csv").string() + " --out " + (dir / "p").string()), 2);
    std::ofstream(dir / "bad.json") << "{";
    EXPECT_EQ(run("--config " + (dir / "bad.json").string() + " gen --out " + (dir / "g").string()), 2);
}

TEST(Cli, GenFeaturesLopoPlotHeatmap)
{
    const auto dir = testing_util::temp_dir("cli_flow");
    const auto cfg = small_config(dir);
    const auto cohort = dir / "cohort";
    ASSERT_EQ(run("--seed 5 --config " + cfg.string() + " --out " + cohort.string() + " gen"), 0);
    EXPECT_TRUE(fs::exists(cohort / "cohort.json"));
    EXPECT_TRUE(fs::exists(cohort / "run_config.json"));

    ASSERT_EQ(run("features --cohort " + cohort.string() + " --out " + (dir / "f").string()), 0);
    std::ifstream csv(dir / "f" / "features.csv");
    std::string line;
    int lines = 0;
    while (std::getline(csv, line))
        ++lines;
    EXPECT_EQ(lines, 1 + 3 * 10);
    EXPECT_TRUE(fs::exists(dir / "f" / "run_config.json"));

    ASSERT_EQ(run("--config " + cfg.string() + " lopo --cohort " + cohort.string() + " --out " + (dir / "l").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "l" / "eval_report.json"));
    EXPECT_TRUE(fs::exists(dir / "l" / "fold_2_model.json"));
    const auto echo = nlohmann::json::parse(std::ifstream(dir / "l" / "run_config.json"));
    EXPECT_EQ(echo["pipeline"]["autoencoder"]["epochs"], 3);
    EXPECT_EQ(echo["command"], "lopo");

    ASSERT_EQ(run("plot --trajectories " + (dir / "l" / "trajectories.csv").string() + " --out " +
                  (dir / "p").string()),
              0);
    EXPECT_TRUE(fs::exists(dir / "p" / "trajectories.svg"));

    ASSERT_EQ(run("heatmap --cohort " + cohort.string() + " --patient P02 --organ heart --z 10 --out " +
                  (dir / "h").string()),
              0);
    EXPECT_TRUE(fs::exists(dir / "h" / "heatmap_slice_z10.svg"));
    EXPECT_TRUE(fs::exists(dir / "h" / "run_config.json"));
    EXPECT_EQ(run("heatmap --cohort " + cohort.string() + " --patient P09 --out " + (dir / "h2").string()), 2);
    EXPECT_EQ(run("heatmap --cohort " + cohort.string() + " --patient P01 --z 999 --out " + (dir / "h3").string()), 2);
}

TEST(Cli, NumericalFailureExitCode)
{
    const auto dir = testing_util::temp_dir("cli_num");
    const auto p = dir / "cfg.json";
    std::ofstream(p) << R"({"cohort": {"n_patients": 3, "fraction_counts": [3, 3, 3]},
                           "pipeline": {"autoencoder": {"epochs": 2}, "classifier": {"max_iterations": 1}}})";
    EXPECT_EQ(run("--config " + p.string() + " lopo --out " + (dir / "l").string()), 3);
}
