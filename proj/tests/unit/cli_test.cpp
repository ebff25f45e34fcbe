#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "temp_dir.hpp"
#include "tloss_cli/commands.hpp"
#include "tloss_cli/io.hpp"

namespace tloss::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return files;
}

void gen_small(const fs::path& out, const std::string& spacing = "1") {
  ASSERT_EQ(run_cli({"gen", "--out", out.string(), "--n", "6", "--dims", "12", "--lobes", "1", "--blob-radius",
                     "1", "--spacing", spacing})
                .code,
            kExitOk);
}

TEST(ConfigEcho, DefaultTrainConfigGolden) {
  const nlohmann::json expected = nlohmann::json::parse(R"({
    "lr_theta": 0.001, "lr_r": 0.0001, "lr_sigma": 0.0001,
    "max_epochs": 600, "patience": 20, "min_delta": 1e-05,
    "loss": "tdist", "mode": "pervoxel", "tau": 0.5, "augment": true, "seed": 1,
    "scale_scope": "pervoxel", "hidden": 16, "smooth_sigmas": [1.0, 2.0], "include_coords": true,
    "criterion": "tdist", "r_init": 1.0, "sigma2_init": 1.0, "safeguard": 1e-08
  })");
  const nlohmann::json actual = to_json(TrainConfig{});
  EXPECT_EQ(actual, expected) << actual.dump(2);
  EXPECT_NEAR(actual["r_init"].get<double>(), 1.0, 1e-15);
  EXPECT_NEAR(actual["sigma2_init"].get<double>(), 1.0, 1e-15);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, kExitUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"--help"}).code, kExitOk);
  testing::TempDir dir;
  EXPECT_EQ(run_cli({"gen", "--out", (dir / "d").string(), "--n", "0"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"gen", "--n", "3"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"gen", "--out", (dir / "d").string(), "--dims", "4,4"}).code, kExitUsage);
}

TEST(Cli, MissingDatasetIsIoError) {
  testing::TempDir dir;
  const Result r = run_cli({"train", "--data", (dir / "nope").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, kExitIo);
  EXPECT_NE(r.err.find("manifest"), std::string::npos);
}

TEST(Cli, GenIsByteDeterministic) {
  testing::TempDir dir;
  gen_small(dir / "a");
  gen_small(dir / "b");
  const auto a = tree(dir / "a");
  EXPECT_TRUE(a.count("manifest.json"));
  EXPECT_GT(a.size(), 6u);
  EXPECT_EQ(a, tree(dir / "b"));
}

TEST(Cli, TrainEvalRoundTrip) {
  testing::TempDir dir;
  gen_small(dir / "d");
  const std::vector<std::string> train_args = {"train", "--data", (dir / "d").string(), "--max-epochs", "2",
                                               "--hidden", "4", "--loss", "mse"};
  auto with_out = [&](const std::string& o) {
    auto v = train_args;
    v.push_back("--out");
    v.push_back((dir / o).string());
    return v;
  };
  ASSERT_EQ(run_cli(with_out("t1")).code, kExitOk);
  ASSERT_EQ(run_cli(with_out("t2")).code, kExitOk);
  EXPECT_EQ(tree(dir / "t1"), tree(dir / "t2"));
  const auto report = nlohmann::json::parse(slurp(dir / "t1" / "report.json"));
  EXPECT_EQ(report["config"]["loss"], "mse");
  EXPECT_EQ(report["config"]["max_epochs"], 2);
  EXPECT_EQ(report["stopped_epoch"], 2);

  const std::string params = (dir / "t1" / "best.mprm").string();
  const Result e1 = run_cli({"eval", "--data", (dir / "d").string(), "--params", params, "--part", "all"});
  ASSERT_EQ(e1.code, kExitOk) << e1.err;
  EXPECT_EQ(e1.out.substr(0, e1.out.find('\n')), "sample,dice,iou,acc,pre,sen,spe,hd95,asd");
  EXPECT_EQ(std::count(e1.out.begin(), e1.out.end(), '\n'), 1 + 6 + 2);
  EXPECT_EQ(e1.out, run_cli({"eval", "--data", (dir / "d").string(), "--params", params, "--part", "all"}).out);
}

TEST(Cli, SpacingScalesDistances) {
  testing::TempDir dir;
  gen_small(dir / "d");
  ASSERT_EQ(run_cli({"train", "--data", (dir / "d").string(), "--out", (dir / "t").string(), "--max-epochs", "3",
                     "--hidden", "4", "--loss", "mse"})
                .code,
            kExitOk);
  auto mean_row = [&](const std::string& spacing) {
    std::vector<std::string> args = {"eval", "--data", (dir / "d").string(), "--params",
                                     (dir / "t" / "best.mprm").string(), "--part", "all"};
    if (!spacing.empty()) {
      args.push_back("--spacing");
      args.push_back(spacing);
    }
    const Result r = run_cli(args);
    EXPECT_EQ(r.code, kExitOk);
    const auto pos = r.out.find("\nmean,");
    std::vector<double> cells;
    std::stringstream line(r.out.substr(pos + 6, r.out.find('\n', pos + 1) - pos - 6));
    for (std::string c; std::getline(line, c, ',');) cells.push_back(c.empty() ? -1.0 : std::stod(c));
    return cells;
  };
  const auto unit = mean_row("");
  const auto doubled = mean_row("2");
  ASSERT_EQ(unit.size(), 8u);
  EXPECT_EQ(unit[0], doubled[0]);
  EXPECT_NEAR(doubled[6], 2.0 * unit[6], 1e-9);
  EXPECT_NEAR(doubled[7], 2.0 * unit[7], 1e-9);
}

TEST(Cli, ConfigFileLayering) {
  testing::TempDir dir;
  gen_small(dir / "d");
  write_text(dir / "cfg.json", R"({"max_epochs": 3, "loss": "mae", "hidden": 4})");
  ASSERT_EQ(run_cli({"train", "--data", (dir / "d").string(), "--out", (dir / "t").string(), "--config",
                     (dir / "cfg.json").string(), "--max-epochs", "1"})
                .code,
            kExitOk);
  const auto report = nlohmann::json::parse(slurp(dir / "t" / "report.json"));
  EXPECT_EQ(report["config"]["max_epochs"], 1);
  EXPECT_EQ(report["config"]["loss"], "mae");
  EXPECT_EQ(report["config"]["hidden"], 4);

  write_text(dir / "bad.json", R"({"no_such_flag": 1})");
  EXPECT_EQ(run_cli({"train", "--data", (dir / "d").string(), "--out", (dir / "t").string(), "--config",
                     (dir / "bad.json").string()})
                .code,
            kExitUsage);
  write_text(dir / "broken.json", "{");
  EXPECT_EQ(run_cli({"train", "--data", (dir / "d").string(), "--out", (dir / "t").string(), "--config",
                     (dir / "broken.json").string()})
                .code,
            kExitIo);
}

TEST(Cli, InvalidLossIsUsageError) {
  testing::TempDir dir;
  gen_small(dir / "d");
  const Result r =
      run_cli({"train", "--data", (dir / "d").string(), "--out", (dir / "t").string(), "--loss", "dice"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_EQ(run_cli({"train", "--data", (dir / "d").string(), "--out", (dir / "t").string(), "--mode", "joint"})
                .code,
            kExitUsage);
}

TEST(Cli, GradcheckExitCodes) {
  testing::TempDir dir;
  const Result ok = run_cli({"gradcheck", "--trials", "3", "--out", dir.path().string()});
  EXPECT_EQ(ok.code, kExitOk) << ok.out << ok.err;
  EXPECT_EQ(slurp(dir / "gradcheck.csv").substr(0, 38), "component,trials,max_rel_error,passed\n");
  const Result bad = run_cli({"gradcheck", "--trials", "3", "--inject-fault", "mse"});
  EXPECT_EQ(bad.code, kExitCheckFailed);
  EXPECT_NE(bad.err.find("mse"), std::string::npos);
}

TEST(Cli, FieldestWritesCsv) {
  testing::TempDir dir;
  const std::vector<std::string> args = {"fieldest", "--seeds", "2", "--labels", "4", "--steps", "20",
                                         "--dims", "8", "--losses", "mse,tdist", "--out", dir.path().string()};
  ASSERT_EQ(run_cli(args).code, kExitOk);
  const std::string csv = slurp(dir / "fieldest.csv");
  EXPECT_NE(csv.find("mse"), std::string::npos);
  EXPECT_NE(csv.find("tdist"), std::string::npos);
  const auto first = tree(dir.path());
  ASSERT_EQ(run_cli(args).code, kExitOk);
  EXPECT_EQ(tree(dir.path()), first);
}

}  // namespace
}  // namespace tloss::cli
