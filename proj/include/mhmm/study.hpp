#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mhmm/sampler.hpp"
#include "mhmm/simulate.hpp"

namespace mhmm {

struct PopulationSet {
  std::string name;
  MatrixXd means;  // [n_dep x m]
  MatrixXd tpm;    // [m x m]
  double resid_var = 0.1;
};

struct GridAxes {
  std::vector<int> n_subjects;
  std::vector<int> n_occasions;
  std::vector<double> zeta;
  std::vector<double> q_var;
};

/// Full factorial over the axes; ids look like "<name>_N10_T400_z0.25_Q0.1".
std::vector<ScenarioSpec> build_scenario_grid(const PopulationSet& population, const GridAxes& axes, int n_sim,
                                              std::uint64_t seed);

/// The ten baseline scenarios 1A-5A (zeta = 0.25) and 1B-5B (zeta = 0.5),
/// all with q_var = 0.1.
std::vector<ScenarioSpec> baseline_scenarios(int n_sim, std::uint64_t seed);

/// The sleep-data axes: N in {10,20,40,80}, N_T in {400,800,1600},
/// zeta in {0.25,0.5,1,2}, Q in {0.1,0.2,0.4}.
GridAxes sleep_grid_axes();

struct StudyConfig {
  McmcConfig mcmc;         // seed, start and n_chains are set per iteration
  Hyperpriors hyper;       // empty mu0: state-conditional sample means of each dataset
  double gr_fraction = 0.0;   // share of iterations refit with a second chain
  double gr_threshold = 1.1;  // an iteration with max R-hat above this is flagged
};

struct ParameterRecord {
  std::string name;
  double truth = 0.0;
  double estimate = 0.0;  // posterior median
  double post_sd = 0.0;
  double cci_low = 0.0;
  double cci_high = 0.0;
};

struct IterationRecord {
  std::string scenario_id;
  int iteration = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";  // "ok" or "failed"
  std::string reason;
  double wall_time = 0.0;
  bool gr_checked = false;
  double max_rhat = 0.0;
  bool converged = true;
  std::vector<ParameterRecord> params;
};

/// Seed of the MCMC fit for (scenario, iteration).
std::uint64_t iteration_seed(const ScenarioSpec& scenario, int iteration);

/// Truth of every group-level parameter (group_parameter_names with gamma)
/// under the scenario's generating parameters.
std::vector<std::pair<std::string, double>> scenario_truth(const ScenarioSpec& scenario);

/// Simulate, fit, summarize. Sampler failures produce status "failed".
IterationRecord run_iteration(const ScenarioSpec& scenario, int iteration, const StudyConfig& config);

struct ParameterMetrics {
  std::string name;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double percent_bias = 0.0;  // NaN when truth == 0
  bool percent_bias_defined = true;
  double emp_se = 0.0;
  double model_se = 0.0;
  double mse = 0.0;
  double coverage = 0.0;
  double bias_corr_coverage = 0.0;

  double mean_estimate_mcse = 0.0;
  double bias_mcse = 0.0;
  double percent_bias_mcse = 0.0;
  double emp_se_mcse = 0.0;
  double model_se_mcse = 0.0;
  double mse_mcse = 0.0;
  double coverage_mcse = 0.0;
  double bias_corr_coverage_mcse = 0.0;

  bool bias_flag = false;      // |percent bias| > 5
  bool coverage_flag = false;  // coverage outside [0.92, 0.98]
};

struct MetricsReport {
  std::string scenario_id;
  int n_ok = 0;
  int n_failed = 0;
  int n_not_converged = 0;
  std::vector<ParameterMetrics> params;
};

/// Monte Carlo SE of a coverage proportion over S iterations.
double coverage_mcse(double coverage, int n_iterations);

/// Performance measures over the successful records of one scenario. Needs at
/// least two successful iterations.
MetricsReport evaluate_metrics(const std::string& scenario_id, const std::vector<IterationRecord>& records);

struct StudyRunOptions {
  std::filesystem::path out_dir;
  int parallelism = 1;
  bool resume = false;
  bool quiet = true;
};

struct StudyResult {
  std::vector<MetricsReport> reports;
  std::vector<IterationRecord> records;
  int computed = 0;  // cells fitted in this run (not loaded from disk)
};

/// Runs every (scenario, iteration) cell, writing one record file per cell
/// under out_dir/iterations, the ledger (out_dir/ledger.csv) and the metrics
/// table (out_dir/results.csv). With resume, cells whose record file exists
/// are loaded instead of recomputed.
StudyResult run_study(const std::vector<ScenarioSpec>& grid, const StudyConfig& config,
                      const StudyRunOptions& options);

void write_results_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& reports);
void write_ledger_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& records);

/// Record files (JSON) written by run_study.
void write_iteration_record(const std::filesystem::path& path, const IterationRecord& record);
std::optional<IterationRecord> read_iteration_record(const std::filesystem::path& path);
std::filesystem::path iteration_record_path(const std::filesystem::path& out_dir, const std::string& scenario_id,
                                            int iteration);

}  // namespace mhmm
