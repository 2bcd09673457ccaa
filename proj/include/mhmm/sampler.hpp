#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mhmm/inference.hpp"
#include "mhmm/model.hpp"
#include "mhmm/random.hpp"

namespace mhmm {

/// Hyper-priors of the hierarchical model.
///
/// Emission block, per cell (k, m):
///   sigma2_u ~ Inv-Gamma(nu/2, nu*v/2),  beta | sigma2_u ~ N(mu0, sigma2_u / k0),
///   sigma2_eps ~ Inv-Gamma(alpha0, beta0).
/// TPM block, per cell (i, j):
///   alpha_bar ~ N(tpm_int_prior_mean, tpm_int_prior_var),
///   sigma2_psi ~ Inv-Gamma(tpm_var_prior_shape, tpm_var_prior_scale).
struct Hyperpriors {
  MatrixXd mu0;  // [n_dep x m]; empty means "use state sample means of the data"
  double k0 = 1.0;
  double nu = 1.0;
  double v = 1.0;
  double alpha0 = 0.1;
  double beta0 = 0.1;
  double tpm_int_prior_mean = 0.0;
  double tpm_int_prior_var = 10.0;
  double tpm_var_prior_shape = 0.5;
  double tpm_var_prior_scale = 0.5;

  void validate(int n_dep, int n_states) const;
};

struct StartValues {
  MatrixXd emiss_mean;  // [n_dep x m]
  MatrixXd emiss_var;   // [n_dep x m]
  MatrixXd tpm;         // [m x m]

  void validate() const;
};

struct McmcConfig {
  int n_iter = 3250;
  int burn_in = 1250;
  int thin = 1;
  std::uint64_t seed = 1;
  int n_chains = 1;
  /// Explicit start values per chain; chains without one get jittered values
  /// around start_reference (or around data-derived state means).
  std::vector<StartValues> start;
  std::optional<GroupParams> start_reference;
  /// Random-walk proposal scale before adaptation.
  double initial_proposal_sd = 1.0;
  /// Sweeps per adaptation batch during burn-in.
  int adapt_window = 50;
  double target_accept_low = 0.23;
  double target_accept_high = 0.44;
  /// When false the emission densities are treated as flat (prior sampling).
  bool use_emissions = true;

  void validate() const;
  int stored_draws() const { return (n_iter - burn_in) / thin; }
};

/// One stored MCMC draw.
struct Draw {
  GroupParams group;
  std::vector<SubjectParams> subjects;
  double loglik = 0.0;
};

struct ChainMeta {
  int chain_index = 0;
  std::uint64_t seed = 0;
  int n_iter = 0;
  int burn_in = 0;
  int thin = 1;
  StartValues start;
  /// Post-burn-in Metropolis acceptance rate per TPM row (pooled over
  /// subjects and intercepts).
  VectorXd acceptance;
  /// Sweeps in which some state had no occupancy across all subjects.
  int empty_state_sweeps = 0;
  std::string proposal_scheme;
};

struct Chain {
  ModelSpec spec;
  std::vector<Draw> draws;
  ChainMeta meta;
  /// Per subject: [N_T x m] counts of the sampled state over stored draws.
  std::vector<Eigen::MatrixXi> state_counts;
  std::vector<StatePath> last_states;

  std::vector<std::string> parameter_names(bool include_gamma = true) const;
  /// Trace of one group-level parameter over the stored draws.
  VectorXd trace(const std::string& name) const;
};

/// Group-level parameter naming: emiss_mean.k.m, emiss_rand_var.k.m,
/// emiss_resid_var.k.m, alpha.i.j, psi_var.i.j (j = 2..m) and the derived
/// group-level transition probabilities gamma.i.j (j = 1..m). Indices 1-based.
std::vector<std::string> group_parameter_names(int n_dep, int n_states, bool include_gamma);
/// Throws std::out_of_range for unknown names.
double group_parameter_value(const GroupParams& group, const std::string& name);

class SamplerError : public std::runtime_error {
 public:
  SamplerError(int iteration, std::string block, const std::string& what)
      : std::runtime_error("iteration " + std::to_string(iteration) + ", block " + block + ": " + what),
        iteration_(iteration),
        block_(std::move(block)) {}
  int iteration() const { return iteration_; }
  const std::string& block() const { return block_; }

 private:
  int iteration_;
  std::string block_;
};

/// Mutable sampler state of a single chain.
struct SamplerState {
  GroupParams group;
  std::vector<MatrixXd> subj_mean;   // [n_dep x m] per subject
  std::vector<MatrixXd> subj_alpha;  // [m x (m-1)] per subject
  std::vector<StatePath> states;

  MatrixXd subject_tpm(int n) const { return tpm_from_intercepts(subj_alpha[n]); }
};

/// Emission means jittered by U(-0.2, 0.2) around the reference; TPM with
/// diagonal U(0.5, 0.8) and equal off-diagonals.
StartValues generate_start_values(const GroupParams& group_ref, Rng& rng);

/// Per-state sample means and pooled within-state variances. Uses the
/// annotated states when every subject has them, otherwise a deterministic
/// k-means partition of the pooled observations (clusters ordered by the
/// first variable).
struct StateMoments {
  MatrixXd mean;  // [n_dep x m]
  MatrixXd var;   // [n_dep x m]
};
StateMoments state_sample_moments(const Dataset& data, int n_states);

/// Forward filtering, backward sampling: one exact draw of the state path.
StatePath sample_states_ffbs(const MatrixXd& logdens, const MatrixXd& tpm, const VectorXd& delta, Rng& rng);
StatePath sample_states_ffbs(const MatrixXd& obs, const MatrixXd& tpm, const VectorXd& delta,
                             const EmissionPointParams& params, Rng& rng);

struct EmissionUpdateReport {
  int empty_states = 0;
};

/// Gibbs update of subject means, group means, between-subject variances and
/// residual variances given state.states. A state no subject visits gets
/// subject means drawn from the prior predictive and keeps its residual
/// variance.
EmissionUpdateReport update_emission_block(const Dataset& data, const Hyperpriors& hyper, SamplerState& state,
                                           Rng& rng);

/// [m x m] transition counts of one path.
Eigen::MatrixXd transition_counts(const StatePath& path, int n_states);

/// Per-subject, per-intercept random-walk scales and acceptance bookkeeping.
struct MetropolisTuning {
  std::vector<MatrixXd> sd;            // [m x (m-1)] per subject
  std::vector<MatrixXd> window_accept; // accepted proposals in the current batch
  int window_sweeps = 0;
  VectorXd accepted;  // per row, counted while recording
  VectorXd proposed;

  MetropolisTuning() = default;
  MetropolisTuning(int n_subjects, int n_states, double initial_sd);
  /// Batch adaptation toward [low, high]; call once per sweep during burn-in.
  void adapt(int window, double low, double high);
  VectorXd acceptance_rates() const;
};

/// Metropolis update of subject intercepts (multinomial-logit likelihood of
/// the sampled transitions, stationary initial-state term, normal random
/// effect prior), then Gibbs updates of group intercepts and TPM random-effect
/// variances.
void update_tpm_block(const Hyperpriors& hyper, SamplerState& state, MetropolisTuning& tuning, Rng& rng,
                      bool record_acceptance);

/// Full MCMC fit; chains are independent and run concurrently.
std::vector<Chain> run_mcmc(const Dataset& data, const ModelSpec& spec, const Hyperpriors& hyper,
                            const McmcConfig& config);

/// Hyperpriors with mu0 filled in from state_sample_moments when empty.
Hyperpriors resolve_hyperpriors(const Dataset& data, int n_states, Hyperpriors hyper);

}  // namespace mhmm
