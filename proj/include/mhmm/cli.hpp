#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mhmm/sampler.hpp"
#include "mhmm/simulate.hpp"
#include "mhmm/study.hpp"

namespace mhmm::cli {

/// Invalid configuration value; the message names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct StudySection {
  /// "sleep" (144-cell factorial), "baseline" (the ten baseline scenarios) or
  /// "custom" (factorial over axes using population).
  std::string grid = "custom";
  std::string population = "baseline";
  GridAxes axes;
  bool include_baseline = false;
  int n_sim = 250;
  double gr_fraction = 0.0;
  double gr_threshold = 1.1;
};

struct PpcSection {
  int n_draws = 2000;
  int n_periods = 3;
  double q_var = 0.1;
  std::optional<int> n_subjects;   // default: observed dataset
  std::optional<int> n_occasions;  // default: observed dataset
  bool decode = false;             // decode unannotated data with posterior medians
};

/// Configuration file contents (JSON). All sections are optional; each
/// command checks for the ones it needs.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int parallel = 1;
  std::optional<ModelSpec> model;
  std::optional<ScenarioSpec> scenario;
  McmcConfig mcmc;
  Hyperpriors hyper;
  StudySection study;
  PpcSection ppc;
};

/// Named population: "sleep", "baseline" or "baseline_sleep_tpm".
PopulationSet named_population(const std::string& name);

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
/// Effective configuration; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const RunConfig& c);

/// Scenario list for the study command.
std::vector<ScenarioSpec> study_grid(const RunConfig& c);

/// Entry point shared by the executable and the tests. Returns the exit code:
/// 0 ok, 1 validation error, 2 runtime or numerical failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mhmm::cli
