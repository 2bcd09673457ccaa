#include "mhmm/simulate.hpp"

#include <cmath>
#include <stdexcept>

#include "mhmm/log.hpp"

namespace mhmm {

void ScenarioSpec::validate() const {
  if (n_subjects < 1) throw std::invalid_argument("scenario " + id + ": n_subjects must be >= 1");
  if (n_occasions < 2) throw std::invalid_argument("scenario " + id + ": n_occasions must be >= 2");
  if (zeta && *zeta < 0.0) throw std::invalid_argument("scenario " + id + ": zeta must be >= 0");
  if (q_var && *q_var < 0.0) throw std::invalid_argument("scenario " + id + ": q_var must be >= 0");
  if (n_sim < 1) throw std::invalid_argument("scenario " + id + ": n_sim must be >= 1");
  generating_params().validate(/*allow_zero_rand_var=*/true);
  if (delta) {
    if (delta->size() != group.n_states())
      throw std::invalid_argument("scenario " + id + ": delta has wrong length");
    if ((delta->array() < 0.0).any() || std::abs(delta->sum() - 1.0) > 1e-12)
      throw std::invalid_argument("scenario " + id + ": delta is not a probability vector");
  }
}

GroupParams ScenarioSpec::generating_params() const {
  GroupParams g = group;
  if (zeta) g.emiss_rand_var.setConstant(*zeta);
  if (q_var) g.tpm_rand_var.setConstant(*q_var);
  return g;
}

MatrixXd draw_subject_intercepts(const GroupParams& group, Rng& rng) {
  MatrixXd alpha = group.tpm_intercepts;
  for (Eigen::Index i = 0; i < alpha.rows(); ++i)
    for (Eigen::Index j = 0; j < alpha.cols(); ++j) {
      const double sd = std::sqrt(group.tpm_rand_var(i, j));
      const double z = rng.normal();
      alpha(i, j) += sd * z;
    }
  return alpha;
}

MatrixXd draw_subject_tpm(const GroupParams& group, Rng& rng) {
  return tpm_from_intercepts(draw_subject_intercepts(group, rng));
}

MatrixXd draw_subject_means(const GroupParams& group, Rng& rng) {
  MatrixXd mean = group.emiss_mean;
  for (Eigen::Index m = 0; m < mean.cols(); ++m)
    for (Eigen::Index k = 0; k < mean.rows(); ++k) {
      const double z = rng.normal();
      mean(k, m) += std::sqrt(group.emiss_rand_var(k, m)) * z;
    }
  return mean;
}

StatePath simulate_states(const MatrixXd& tpm, int n_occasions, const VectorXd& delta, Rng& rng) {
  if (auto check = validate_tpm(tpm); !check)
    throw std::invalid_argument("simulate_states: invalid tpm: " + check.message);
  if (delta.size() != tpm.rows()) throw std::invalid_argument("simulate_states: delta has wrong length");
  StatePath states(static_cast<std::size_t>(n_occasions));
  if (n_occasions == 0) return states;
  states[0] = rng.categorical(delta);
  for (int t = 1; t < n_occasions; ++t) states[t] = rng.categorical(tpm.row(states[t - 1]));
  return states;
}

MatrixXd simulate_observations(const StatePath& states, const SubjectParams& subject,
                               const GroupParams& group, Rng& rng) {
  const Eigen::Index n_dep = subject.mean.rows();
  const Eigen::Index m = subject.mean.cols();
  MatrixXd obs(static_cast<Eigen::Index>(states.size()), n_dep);
  for (std::size_t t = 0; t < states.size(); ++t) {
    const int s = states[t];
    if (s < 0 || s >= m) throw std::invalid_argument("simulate_observations: state index out of range");
    for (Eigen::Index k = 0; k < n_dep; ++k) {
      const double z = rng.normal();
      obs(static_cast<Eigen::Index>(t), k) = subject.mean(k, s) + std::sqrt(group.emiss_resid_var(k, s)) * z;
    }
  }
  return obs;
}

SimulatedData simulate_dataset(const ScenarioSpec& scenario, int iteration) {
  scenario.validate();
  const GroupParams group = scenario.generating_params();
  const std::uint64_t id_hash = hash_id(scenario.id);

  SimulatedData out;
  out.data.subjects.reserve(static_cast<std::size_t>(scenario.n_subjects));
  out.truth.reserve(static_cast<std::size_t>(scenario.n_subjects));
  for (int n = 0; n < scenario.n_subjects; ++n) {
    Rng rng(derive_seed(scenario.seed, {id_hash, static_cast<std::uint64_t>(iteration),
                                        static_cast<std::uint64_t>(n)}));
    SubjectParams subject;
    subject.tpm = draw_subject_tpm(group, rng);
    subject.mean = draw_subject_means(group, rng);

    VectorXd delta;
    if (scenario.delta) {
      delta = *scenario.delta;
    } else {
      auto stationary = stationary_distribution(subject.tpm);
      if (stationary.degenerate) {
        ++out.delta_fallbacks;
        warn("scenario " + scenario.id + ": reducible subject TPM, using uniform initial distribution");
      }
      delta = stationary.pi;
    }

    SubjectSeries series;
    series.states = simulate_states(subject.tpm, scenario.n_occasions, delta, rng);
    series.obs = simulate_observations(*series.states, subject, group, rng);
    out.data.subjects.push_back(std::move(series));
    out.truth.push_back(std::move(subject));
  }
  return out;
}

}  // namespace mhmm
