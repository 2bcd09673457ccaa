#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mhmm/model.hpp"

namespace mhmm {

/// Point values of the Gaussian component distributions, [n_dep x m] each.
struct EmissionPointParams {
  MatrixXd mean;
  MatrixXd var;
};

/// Log density of one observation row under each state, summing univariate
/// normal log densities over the (conditionally independent) variables.
template <typename Derived>
VectorXd emission_logdensity(const Eigen::MatrixBase<Derived>& obs_row, const EmissionPointParams& params) {
  const Eigen::Index n_dep = params.mean.rows();
  const Eigen::Index m = params.mean.cols();
  if (obs_row.size() != n_dep) throw std::invalid_argument("emission_logdensity: observation length mismatch");
  if (!(params.var.array() > 0.0).all())
    throw std::invalid_argument("emission_logdensity: variances must be strictly positive");
  constexpr double half_log_2pi = 0.91893853320467274178;
  VectorXd out = VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index k = 0; k < n_dep; ++k) {
      const double d = static_cast<double>(obs_row(k)) - params.mean(k, i);
      out(i) += -half_log_2pi - 0.5 * std::log(params.var(k, i)) - 0.5 * d * d / params.var(k, i);
    }
  return out;
}

/// [N_T x m] matrix of emission log densities for a whole series.
MatrixXd emission_logdensity_matrix(const MatrixXd& obs, const EmissionPointParams& params);

/// Scaled forward pass over precomputed log densities. No validation; callers
/// must pass a valid tpm and delta.
struct ForwardPass {
  MatrixXd filtered;  // [N_T x m], row t = P(C_t | x_1..x_t)
  double loglik = 0.0;
};
ForwardPass forward_filter(const MatrixXd& logdens, const MatrixXd& tpm, const VectorXd& delta);

/// Throws std::invalid_argument when tpm or delta are not proper probabilities.
void check_chain_inputs(const MatrixXd& tpm, const VectorXd& delta);

/// Exact marginal log-likelihood log P(x_1..x_T).
double forward_loglik(const MatrixXd& obs, const MatrixXd& tpm, const VectorXd& delta,
                      const EmissionPointParams& params);

struct Decoding {
  StatePath path;          // jointly most probable path (Viterbi), 0-based
  MatrixXd posteriors;     // [N_T x m] local state posteriors
  double path_logprob = 0.0;
};

/// Viterbi path plus forward-backward local posteriors. Viterbi ties resolve
/// toward the lower state index.
Decoding decode_states(const MatrixXd& obs, const MatrixXd& tpm, const VectorXd& delta,
                       const EmissionPointParams& params);

}  // namespace mhmm
