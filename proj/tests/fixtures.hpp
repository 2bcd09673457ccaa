#pragma once

#include "mhmm/model.hpp"
#include "mhmm/random.hpp"
#include "mhmm/simulate.hpp"

namespace fixture {

using namespace mhmm;

// Dataset whose transition matrix switches to `shifted_tpm` during one period
// (0-based). Subject deviations of the intercepts are shared by both regimes.
inline Dataset simulate_period_shift(const GroupParams& g, const MatrixXd& shifted_tpm, int n_subjects,
                                     int n_occasions, int n_periods, int shifted_period, std::uint64_t seed) {
  Dataset out;
  const int len = n_occasions / n_periods;
  const MatrixXd shifted_int = intercepts_from_tpm(shifted_tpm);
  for (int n = 0; n < n_subjects; ++n) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(n)}));
    const MatrixXd dev = draw_subject_intercepts(g, rng) - g.tpm_intercepts;
    const MatrixXd base = tpm_from_intercepts(g.tpm_intercepts + dev);
    const MatrixXd shift = tpm_from_intercepts(shifted_int + dev);
    SubjectParams subj{draw_subject_means(g, rng), base};
    StatePath states;
    for (int p = 0; p < n_periods; ++p) {
      const MatrixXd& tpm = p == shifted_period ? shift : base;
      if (p == 0) {
        states = simulate_states(tpm, len, stationary_distribution(tpm).pi, rng);
      } else {
        VectorXd start = VectorXd::Zero(tpm.rows());
        start(states.back()) = 1.0;
        const StatePath next = simulate_states(tpm, len + 1, start, rng);
        states.insert(states.end(), next.begin() + 1, next.end());
      }
    }
    SubjectSeries s;
    s.obs = simulate_observations(states, subj, g, rng);
    s.states = states;
    out.subjects.push_back(std::move(s));
  }
  return out;
}

}  // namespace fixture
