#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "alignmeter/cli.hpp"
#include "alignmeter/csv.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;
using alignmeter::cli::run;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("alignmeter_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path simulate(const std::string& preset = "study", std::uint64_t seed = 5) {
    const auto out = dir_ / ("sim_" + preset);
    EXPECT_EQ(run({"simulate", "--seed", std::to_string(seed), "--preset", preset, "--out", out.string()}), 0);
    return out;
  }

  fs::path dir_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::vector<std::string>> rows;
  for (auto& r : alignmeter::csv::read(in)) rows.push_back(std::move(r.fields));
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw std::runtime_error("missing column " + name);
  return static_cast<std::size_t>(it - header.begin());
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST_F(Cli, SimulateWritesBundle) {
  const auto sim = simulate();
  for (const char* f : {"ratings.csv", "outcomes.csv", "metadata.csv", "config.json", "simulate.json"}) {
    EXPECT_TRUE(fs::exists(sim / f)) << f;
  }
  const auto meta = Json::parse(slurp(sim / "simulate.json"))["meta"];
  EXPECT_EQ(meta["seed"], 5);
  EXPECT_EQ(meta["command"], "simulate");
  EXPECT_TRUE(meta.contains("config_hash"));
  EXPECT_TRUE(meta.contains("version"));
}

TEST_F(Cli, AlignOneRowPerSourceAndTask) {
  const auto sim = simulate();
  const auto out = dir_ / "align";
  ASSERT_EQ(run({"align", "--config", (sim / "config.json").string(), "--out", out.string()}), 0);
  const auto rows = read_csv(out / "align_scatter.csv");
  ASSERT_GT(rows.size(), 1u);
  const auto s = column(rows[0], "source"), t = column(rows[0], "task");
  std::set<std::pair<std::string, std::string>> keys;
  for (std::size_t r = 1; r < rows.size(); ++r) EXPECT_TRUE(keys.insert({rows[r][s], rows[r][t]}).second);
  // 3 tasks x (3 models x 2 prompts + 2 ensembles + experience baseline + 1 human)
  EXPECT_EQ(keys.size(), 3u * 10u);
}

TEST_F(Cli, LevelFlagChangesIntervals) {
  const auto sim = simulate();
  const auto a = dir_ / "a95", b = dir_ / "a90";
  ASSERT_EQ(run({"align", "--config", (sim / "config.json").string(), "--out", a.string()}), 0);
  ASSERT_EQ(run({"align", "--config", (sim / "config.json").string(), "--out", b.string(), "--level", "0.90"}), 0);
  const auto ra = read_csv(a / "align_scatter.csv"), rb = read_csv(b / "align_scatter.csv");
  const auto lv = column(rb[0], "level"), lo = column(rb[0], "ci_outcome_low"), hi = column(rb[0], "ci_outcome_high");
  for (std::size_t r = 1; r < rb.size(); ++r) {
    EXPECT_EQ(std::stod(rb[r][lv]), 0.9);
    EXPECT_LT(std::stod(rb[r][hi]) - std::stod(rb[r][lo]), std::stod(ra[r][hi]) - std::stod(ra[r][lo]));
  }
}

TEST_F(Cli, MissingOutcomeFileIsInputError) {
  const auto sim = simulate();
  fs::remove(sim / "outcomes.csv");
  EXPECT_EQ(run({"align", "--config", (sim / "config.json").string(), "--out", (dir_ / "x").string()}), 2);
}

TEST_F(Cli, SeedIsMandatory) {
  const auto sim = simulate();
  auto cfg = Json::parse(slurp(sim / "config.json"));
  cfg.erase("seed");
  write(sim / "noseed.json", cfg.dump());
  EXPECT_EQ(run({"robust", "--config", (sim / "noseed.json").string(), "--out", (dir_ / "x").string()}), 2);
  EXPECT_EQ(run({"simulate", "--out", (dir_ / "y").string()}), 2);
}

TEST_F(Cli, UnknownConfigKeyRejected) {
  const auto sim = simulate();
  auto cfg = Json::parse(slurp(sim / "config.json"));
  cfg["permutatoins"] = 10;
  write(sim / "typo.json", cfg.dump());
  EXPECT_EQ(run({"align", "--config", (sim / "typo.json").string(), "--out", (dir_ / "x").string()}), 2);
}

TEST_F(Cli, UnresolvableRaterFails) {
  const auto sim = simulate();
  auto cfg = Json::parse(slurp(sim / "config.json"));
  cfg["raters"] = Json::array({"model_9|prompt_1"});
  write(sim / "bad.json", cfg.dump());
  EXPECT_NE(run({"align", "--config", (sim / "bad.json").string(), "--out", (dir_ / "x").string()}), 0);
}

TEST_F(Cli, BadFlagIsInputError) {
  EXPECT_EQ(run({"align", "--no-such-flag"}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
}

TEST_F(Cli, DcorTwoRatersOneTask) {
  write(dir_ / "r.csv",
        "rater_id,rater_family,task_id,unit_id,score\n"
        "a,human,t,u1,1\na,human,t,u2,2\na,human,t,u3,3\na,human,t,u4,4\na,human,t,u5,2\na,human,t,u6,5\n"
        "h,human,t,u1,2\nh,human,t,u2,1\nh,human,t,u3,3\nh,human,t,u4,5\nh,human,t,u5,1\nh,human,t,u6,4\n");
  write(dir_ / "o.csv", "unit_id,outcome_id,value\nu1,y,1\nu2,y,2\nu3,y,3\nu4,y,4\nu5,y,5\nu6,y,6\n");
  write(dir_ / "c.json", R"({"seed": 3, "ratings": "r.csv", "outcomes": "o.csv", "outcome": "y", "permutations": 99})");
  const auto out = dir_ / "d";
  ASSERT_EQ(run({"dcor", "--config", (dir_ / "c.json").string(), "--out", out.string(), "--alpha", "0.05"}), 0);
  const auto m = read_csv(out / "dcor_matrix.csv");
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m[0].size(), 3u);
  EXPECT_NEAR(std::stod(m[1][1]), 1.0, 1e-12);
  EXPECT_EQ(m[1][2], m[2][1]);
  EXPECT_TRUE(fs::exists(out / "dcor_significant.csv"));
  EXPECT_TRUE(fs::exists(out / "dcor_pvalues.csv"));
}

TEST_F(Cli, RobustPlantedPositive) {
  const auto sim = simulate("positive");
  const auto out = dir_ / "r";
  ASSERT_EQ(run({"robust", "--config", (sim / "config.json").string(), "--out", out.string(), "--permutations", "200",
                 "--bootstrap", "200"}),
            0);
  const auto text = slurp(out / "robustness.csv");
  EXPECT_NE(text.find("(7/7)"), std::string::npos);
  const auto j = Json::parse(slurp(out / "robustness.json"));
  EXPECT_TRUE(j.contains("footnotes"));
}

TEST_F(Cli, EnsembleReports) {
  const auto sim = simulate();
  const auto out = dir_ / "e";
  ASSERT_EQ(run({"ensemble", "--config", (sim / "config.json").string(), "--out", out.string(), "--bootstrap", "100"}),
            0);
  EXPECT_TRUE(fs::exists(out / "ensemble_ensemble_weighted.csv"));
  EXPECT_TRUE(fs::exists(out / "ensemble_ensemble_unanimous.csv"));
  EXPECT_TRUE(fs::exists(out / "ensemble.json"));
}

TEST_F(Cli, DecomposeBalancedBundle) {
  const auto sim = simulate();
  auto cfg = Json::parse(slurp(sim / "config.json"));
  cfg["decompose"] = {{"allow_unconverged", true}, {"dump_draws", true}};
  write(sim / "dec.json", cfg.dump());
  const auto out = dir_ / "dec";
  ASSERT_EQ(run({"decompose", "--config", (sim / "dec.json").string(), "--out", out.string(), "--chains", "2", "--iters",
                 "400"}),
            0);
  for (const char* f : {"misalignment_residuals.csv", "components_ems.csv", "components_bayes.csv", "shares.json",
                        "posterior_draws.tsv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const auto shares = Json::parse(slurp(out / "shares.json"));
  EXPECT_FALSE(shares.dump().find("controllable") == std::string::npos);
}

TEST_F(Cli, SharedBiasBundleFeedsDcor) {
  const auto sim = simulate("shared-bias");
  EXPECT_EQ(run({"dcor", "--config", (sim / "config.json").string(), "--out", (dir_ / "d").string(), "--permutations",
                 "20"}),
            0);
}

TEST_F(Cli, ByteIdenticalAcrossRunsAndThreads) {
  const auto sim = simulate();
  const auto cfg = (sim / "config.json").string();
  const auto a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(run({"robust", "--config", cfg, "--out", a.string(), "--permutations", "100", "--bootstrap", "100",
                 "--threads", "1"}),
            0);
  ASSERT_EQ(run({"robust", "--config", cfg, "--out", b.string(), "--permutations", "100", "--bootstrap", "100",
                 "--threads", "4"}),
            0);
  EXPECT_EQ(slurp(a / "robustness.csv"), slurp(b / "robustness.csv"));
  EXPECT_EQ(slurp(a / "robustness.json"), slurp(b / "robustness.json"));
}

TEST_F(Cli, HashIgnoresOutputDirectory) {
  const auto sim = simulate();
  const auto cfg = (sim / "config.json").string();
  ASSERT_EQ(run({"align", "--config", cfg, "--out", (dir_ / "a").string()}), 0);
  ASSERT_EQ(run({"align", "--config", cfg, "--out", (dir_ / "b").string()}), 0);
  ASSERT_EQ(run({"align", "--config", cfg, "--out", (dir_ / "c").string(), "--seed", "99"}), 0);
  const auto ha = Json::parse(slurp(dir_ / "a" / "align.json"))["meta"]["config_hash"];
  const auto hb = Json::parse(slurp(dir_ / "b" / "align.json"))["meta"]["config_hash"];
  const auto hc = Json::parse(slurp(dir_ / "c" / "align.json"))["meta"]["config_hash"];
  EXPECT_EQ(ha, hb);
  EXPECT_NE(ha, hc);
}
