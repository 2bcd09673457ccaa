#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mhmm/sampler.hpp"
#include "mhmm/simulate.hpp"

namespace mhmm {

struct PpcResult {
  std::string statistic;
  double observed = 0.0;
  VectorXd replicates;        // one value per replicate; NaN where undefined
  double p_posterior = 0.0;   // share of defined replicates >= observed
  double two_sided_p = 0.0;   // min(1, 2 min(p, 1 - p))
  bool defined = true;        // false when the observed statistic is undefined

  double replicate_mean() const;
};

struct PpcConfig {
  int n_draws = 2000;
  int n_subjects = 0;
  int n_occasions = 0;
  /// TPM random-effect variance used when generating replicates.
  double q_var = 0.1;
  int n_periods = 3;
  std::uint64_t seed = 1;
  int parallelism = 1;
};

/// Generating parameters of one replicate: the draw's group values, with the
/// between-subject emission variances averaged across states within each
/// variable and every TPM random-effect variance set to q_var.
GroupParams replicate_params(const GroupParams& draw, double q_var);

/// Indices of the stored draws used for each replicate: without replacement
/// when the chain holds at least n_draws draws, with replacement otherwise.
std::vector<int> select_draws(int n_available, int n_draws, Rng& rng);

/// Replicate r, reproducible from (config.seed, r).
SimulatedData ppc_replicate(const GroupParams& draw, const PpcConfig& config, int r);

std::vector<SimulatedData> ppc_replicates(const std::vector<Draw>& draws, const PpcConfig& config);

/// Row-normalized transition counts; rows with no transitions are NaN and
/// marked undefined.
struct EmpiricalTpm {
  MatrixXd tpm;
  MatrixXd counts;
  std::vector<bool> row_defined;
};
EmpiricalTpm empirical_tpm(const StatePath& states, int n_states);

/// Statistics of one dataset; observed and replicate datasets go through the
/// same functions.
MatrixXd state_means_statistic(const Dataset& data, int n_states);        // [n_dep x m], NaN if unvisited
VectorXd total_variance_statistic(const Dataset& data);                   // [n_dep]
std::vector<MatrixXd> period_tpm_statistic(const Dataset& data, int n_states, int n_periods);

/// One-sided and two-sided posterior predictive proportions.
PpcResult make_ppc_result(std::string name, double observed, VectorXd replicates);

/// Requires observed states (annotated or decoded); throws std::invalid_argument otherwise.
std::vector<PpcResult> ppc_emission_means(const Dataset& observed, const std::vector<Dataset>& replicates,
                                          int n_states);
std::vector<PpcResult> ppc_total_variance(const Dataset& observed, const std::vector<Dataset>& replicates);
std::vector<PpcResult> ppc_tpm_homogeneity(const Dataset& observed, const std::vector<Dataset>& replicates,
                                           int n_states, int n_periods);

/// Streams replicate generation and statistic evaluation over draws without
/// keeping replicate datasets in memory. Output order: emission means, total
/// variance, then period transition probabilities.
std::vector<PpcResult> run_ppc(const Dataset& observed, const std::vector<Draw>& draws, int n_states,
                               const PpcConfig& config);

}  // namespace mhmm
