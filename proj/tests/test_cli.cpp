#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "mhmm/cli.hpp"
#include "mhmm/io.hpp"
#include "mhmm/log.hpp"

using namespace mhmm;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mhmm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mhmm_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kScenario = R"({
  "model": {"n_states": 3},
  "scenario": {"id": "cell", "population": "sleep", "n_subjects": 10, "n_occasions": 400,
               "zeta": 0.25, "q_var": 0.1, "n_sim": 1},
  "mcmc": {"n_iter": 120, "burn_in": 60, "n_chains": 2}
})";

}  // namespace

TEST(Cli, SimulateWritesGridCornerDataset) {
  const fs::path dir = fresh_dir("sim");
  write(dir / "c.json", kScenario);
  const Result r = run_cli({"simulate", "--config", (dir / "c.json").string(), "--seed", "5", "--out", (dir / "o").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Dataset d = io::read_dataset_csv(dir / "o" / "cell_0.csv");
  EXPECT_EQ(d.n_subjects(), 10);
  EXPECT_EQ(d.subjects[0].obs.rows(), 400);
  EXPECT_EQ(d.n_dep(), 3);
  EXPECT_TRUE(fs::exists(dir / "o" / "cell_0.truth.json"));
  EXPECT_TRUE(fs::exists(dir / "o" / "config.effective.json"));
}

TEST(Cli, MissingSeedNamesField) {
  const fs::path dir = fresh_dir("noseed");
  write(dir / "c.json", kScenario);
  const Result r = run_cli({"simulate", "--config", (dir / "c.json").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("seed"), std::string::npos);
}

TEST(Cli, RerunGivesIdenticalBytes) {
  const fs::path dir = fresh_dir("rerun");
  write(dir / "c.json", kScenario);
  for (const char* o : {"a", "b"})
    ASSERT_EQ(run_cli({"simulate", "--config", (dir / "c.json").string(), "--seed", "9", "--out", (dir / o).string()}).code, 0);
  EXPECT_EQ(slurp(dir / "a" / "cell_0.csv"), slurp(dir / "b" / "cell_0.csv"));
  EXPECT_EQ(slurp(dir / "a" / "cell_0.truth.json"), slurp(dir / "b" / "cell_0.truth.json"));
}

TEST(Cli, EffectiveConfigRoundTrip) {
  auto j = nlohmann::json::parse(kScenario);
  j["seed"] = 3;
  j["study"] = {{"grid", "custom"}, {"axes", {{"n_subjects", {10, 20}}, {"n_occasions", {400}}, {"zeta", {0.25}}, {"q_var", {0.1}}}}};
  const cli::RunConfig c = cli::parse_config(j);
  const nlohmann::json echoed = cli::to_json(c);
  EXPECT_EQ(cli::to_json(cli::parse_config(echoed)), echoed);
  EXPECT_EQ(echoed.at("scenario").at("group").at("n_states"), 3);
}

TEST(Cli, ConfigErrorsNameTheField) {
  auto j = nlohmann::json::parse(kScenario);
  j["mcmc"]["burn_in"] = 500;
  try {
    cli::parse_config(j);
    FAIL();
  } catch (const cli::ConfigError& e) {
    EXPECT_EQ(e.field(), "mcmc.burn_in");
  }
  j = nlohmann::json::parse(kScenario);
  j["scenario"]["zeta"] = "big";
  try {
    cli::parse_config(j);
    FAIL();
  } catch (const cli::ConfigError& e) {
    EXPECT_EQ(e.field(), "scenario.zeta");
  }
  j = nlohmann::json::parse(kScenario);
  j["mcmc"]["n_iters"] = 5;
  EXPECT_THROW(cli::parse_config(j), cli::ConfigError);
}

TEST(Cli, FitWithTwoChainsReportsRhat) {
  set_warnings_enabled(false);
  const fs::path dir = fresh_dir("fit");
  write(dir / "c.json", kScenario);
  ASSERT_EQ(run_cli({"simulate", "--config", (dir / "c.json").string(), "--seed", "5", "--out", (dir / "o").string()}).code, 0);
  const Result r = run_cli({"fit", "--config", (dir / "c.json").string(), "--seed", "6", "--out", (dir / "f").string(),
                            "--data", (dir / "o" / "cell_0.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("R-hat"), std::string::npos);
  EXPECT_NE(r.out.find("MAP (SD)"), std::string::npos);
  EXPECT_NE(r.out.find("95% CCI"), std::string::npos);
  const Chain c = io::read_chain_csv(dir / "f" / "chain_1.csv");
  EXPECT_EQ(c.draws.size(), 60u);
  EXPECT_TRUE(fs::exists(dir / "f" / "chain_2.meta.json"));

  const Result d = run_cli({"diagnose", "--chain", (dir / "f" / "chain_1.csv").string(), "--chain",
                            (dir / "f" / "chain_2.csv").string()});
  ASSERT_EQ(d.code, 0) << d.err;
  EXPECT_NE(d.out.find("emiss_mean.1.1"), std::string::npos);

  const Result p = run_cli({"ppc", "--seed", "1", "--chain", (dir / "f" / "chain_1.csv").string(), "--data",
                            (dir / "o" / "cell_0.csv").string(), "--out", (dir / "f").string()});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(p.out.rfind("statistic,observed,replicate_mean,p_posterior,two_sided_p\n", 0), 0u);
  EXPECT_NE(p.out.find("period_tpm.3.3.3"), std::string::npos);
  EXPECT_NE(p.out.find("total_var.1"), std::string::npos);
}

TEST(Cli, MalformedDatasetReportsLine) {
  const fs::path dir = fresh_dir("bad");
  write(dir / "d.csv", "subject,occasion,state_true,dep_1\n1,1,1,0.5\n1,2,1,oops\n");
  write(dir / "c.json", R"({"model": {"n_states": 2}})");
  const Result r = run_cli({"fit", "--config", (dir / "c.json").string(), "--seed", "1", "--out", (dir / "f").string(),
                            "--data", (dir / "d.csv").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find(":3"), std::string::npos) << r.err;
}

TEST(Cli, PpcShapeMismatch) {
  set_warnings_enabled(false);
  const fs::path dir = fresh_dir("mismatch");
  write(dir / "c.json", kScenario);
  ASSERT_EQ(run_cli({"simulate", "--config", (dir / "c.json").string(), "--seed", "5", "--out", (dir / "o").string()}).code, 0);
  ASSERT_EQ(run_cli({"fit", "--config", (dir / "c.json").string(), "--seed", "6", "--out", (dir / "f").string(), "--data",
                     (dir / "o" / "cell_0.csv").string()})
                .code,
            0);
  write(dir / "d.csv", "subject,occasion,state_true,dep_1\n1,1,1,0.5\n1,2,2,0.4\n");
  const Result r = run_cli({"ppc", "--seed", "1", "--chain", (dir / "f" / "chain_1.csv").string(), "--data",
                            (dir / "d.csv").string()});
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, StudyResumeAndMetrics) {
  set_warnings_enabled(false);
  const fs::path dir = fresh_dir("study");
  write(dir / "c.json", R"({
    "study": {"grid": "custom", "population": "baseline", "n_sim": 2,
              "axes": {"n_subjects": [2], "n_occasions": [40], "zeta": [0.25, 0.5], "q_var": [0.1]}},
    "mcmc": {"n_iter": 60, "burn_in": 20}
  })");
  const Result a = run_cli({"study", "--config", (dir / "c.json").string(), "--seed", "4", "--out", (dir / "s").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  const std::string results = slurp(dir / "s" / "results.csv");
  const Result b = run_cli({"study", "--config", (dir / "c.json").string(), "--seed", "4", "--out", (dir / "s").string(),
                            "--resume", "--parallel", "4"});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_NE(b.out.find("computed 0"), std::string::npos);
  EXPECT_EQ(slurp(dir / "s" / "results.csv"), results);
  const Result m = run_cli({"metrics", "--study-dir", (dir / "s").string()});
  ASSERT_EQ(m.code, 0) << m.err;
  EXPECT_NE(m.out.find("emiss_mean.1.1"), std::string::npos);
}

TEST(Cli, EmpiricalProtocolDrawCount) {
  auto j = nlohmann::json::parse(kScenario);
  j["mcmc"] = {{"n_iter", 20000}, {"burn_in", 10000}, {"thin", 5}};
  EXPECT_EQ(cli::parse_config(j).mcmc.stored_draws(), 2000);
}

TEST(Cli, UnknownSubcommandIsUsageError) { EXPECT_EQ(run_cli({"bogus"}).code, 1); }
