#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mhmm/model.hpp"
#include "mhmm/random.hpp"

namespace mhmm {

/// One cell of the simulation design.
///
/// zeta and q_var, when set, overwrite every cell of group.emiss_rand_var and
/// group.tpm_rand_var respectively; leave them unset to use cell-wise values
/// stored in group.
struct ScenarioSpec {
  std::string id;
  GroupParams group;
  int n_subjects = 0;
  int n_occasions = 0;
  std::optional<double> zeta;
  std::optional<double> q_var;
  int n_sim = 1;
  std::uint64_t seed = 0;
  /// Initial state distribution; defaults to the stationary distribution of
  /// each subject's TPM.
  std::optional<VectorXd> delta;

  void validate() const;
  /// group with zeta/q_var applied.
  GroupParams generating_params() const;
};

/// Draws alpha_nij = alpha_bar_ij + psi_nij with psi ~ N(0, tpm_rand_var) and
/// returns the subject TPM.
MatrixXd draw_subject_tpm(const GroupParams& group, Rng& rng);

/// Subject intercepts; draw_subject_tpm is tpm_from_intercepts of this.
MatrixXd draw_subject_intercepts(const GroupParams& group, Rng& rng);

/// Subject emission means beta_km + u_nkm with u ~ N(0, emiss_rand_var).
MatrixXd draw_subject_means(const GroupParams& group, Rng& rng);

/// First state from delta, then Markov transitions from tpm rows.
StatePath simulate_states(const MatrixXd& tpm, int n_occasions, const VectorXd& delta, Rng& rng);

/// Conditionally independent Gaussian observations given the state path.
MatrixXd simulate_observations(const StatePath& states, const SubjectParams& subject,
                               const GroupParams& group, Rng& rng);

struct SimulatedData {
  Dataset data;
  std::vector<SubjectParams> truth;
  /// Number of subjects whose stationary distribution was degenerate and
  /// replaced by a uniform initial distribution.
  int delta_fallbacks = 0;
};

/// Three-step generation for one iteration: subject TPMs and means, then state
/// paths and observations. Each subject uses its own substream derived from
/// (seed, hash(id), iteration, subject), so output is reproducible and
/// independent of evaluation order.
SimulatedData simulate_dataset(const ScenarioSpec& scenario, int iteration);

}  // namespace mhmm
