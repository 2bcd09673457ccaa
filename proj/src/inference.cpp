#include "mhmm/inference.hpp"

#include <limits>

namespace mhmm {

MatrixXd emission_logdensity_matrix(const MatrixXd& obs, const EmissionPointParams& params) {
  const Eigen::Index n_t = obs.rows();
  const Eigen::Index n_dep = params.mean.rows();
  const Eigen::Index m = params.mean.cols();
  if (obs.cols() != n_dep) throw std::invalid_argument("emission_logdensity_matrix: n_dep mismatch");
  if (!(params.var.array() > 0.0).all())
    throw std::invalid_argument("emission_logdensity_matrix: variances must be strictly positive");
  constexpr double half_log_2pi = 0.91893853320467274178;
  const Eigen::ArrayXXd inv_var = params.var.array().inverse();
  Eigen::RowVectorXd constant = Eigen::RowVectorXd::Zero(m);
  for (Eigen::Index i = 0; i < m; ++i)
    constant(i) = -static_cast<double>(n_dep) * half_log_2pi - 0.5 * params.var.col(i).array().log().sum();

  MatrixXd out(n_t, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::ArrayXd acc = Eigen::ArrayXd::Constant(n_t, constant(i));
    for (Eigen::Index k = 0; k < n_dep; ++k) {
      const Eigen::ArrayXd d = obs.col(k).array() - params.mean(k, i);
      acc -= 0.5 * inv_var(k, i) * d.square();
    }
    out.col(i) = acc.matrix();
  }
  return out;
}

ForwardPass forward_filter(const MatrixXd& logdens, const MatrixXd& tpm, const VectorXd& delta) {
  const Eigen::Index n_t = logdens.rows();
  const Eigen::Index m = logdens.cols();
  ForwardPass out;
  out.filtered.resize(n_t, m);
  Eigen::RowVectorXd prior = delta.transpose();
  for (Eigen::Index t = 0; t < n_t; ++t) {
    if (t > 0) prior = out.filtered.row(t - 1) * tpm;
    const double shift = logdens.row(t).maxCoeff();
    Eigen::RowVectorXd a = prior.array() * (logdens.row(t).array() - shift).exp();
    const double c = a.sum();
    out.filtered.row(t) = a / c;
    out.loglik += std::log(c) + shift;
  }
  return out;
}

void check_chain_inputs(const MatrixXd& tpm, const VectorXd& delta) {
  if (auto check = validate_tpm(tpm); !check) throw std::invalid_argument("invalid tpm: " + check.message);
  if (delta.size() != tpm.rows()) throw std::invalid_argument("delta length differs from tpm size");
  if ((delta.array() < 0.0).any() || std::abs(delta.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("delta is not a probability vector");
}

double forward_loglik(const MatrixXd& obs, const MatrixXd& tpm, const VectorXd& delta,
                      const EmissionPointParams& params) {
  check_chain_inputs(tpm, delta);
  return forward_filter(emission_logdensity_matrix(obs, params), tpm, delta).loglik;
}

Decoding decode_states(const MatrixXd& obs, const MatrixXd& tpm, const VectorXd& delta,
                       const EmissionPointParams& params) {
  check_chain_inputs(tpm, delta);
  const MatrixXd logdens = emission_logdensity_matrix(obs, params);
  const Eigen::Index n_t = logdens.rows();
  const Eigen::Index m = logdens.cols();
  Decoding out;

  // Viterbi in log space.
  const MatrixXd log_tpm = tpm.array().log().matrix();
  MatrixXd score(n_t, m);
  Eigen::MatrixXi back(n_t, m);
  score.row(0) = delta.transpose().array().log() + logdens.row(0).array();
  for (Eigen::Index t = 1; t < n_t; ++t) {
    for (Eigen::Index j = 0; j < m; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double v = score(t - 1, i) + log_tpm(i, j);
        if (v > best) {
          best = v;
          arg = static_cast<int>(i);
        }
      }
      score(t, j) = best + logdens(t, j);
      back(t, j) = arg;
    }
  }
  out.path.resize(static_cast<std::size_t>(n_t));
  Eigen::Index last = 0;
  out.path_logprob = score.row(n_t - 1).maxCoeff(&last);
  // maxCoeff returns the first maximal index, which is the lower state on ties.
  out.path[static_cast<std::size_t>(n_t - 1)] = static_cast<int>(last);
  for (Eigen::Index t = n_t - 1; t > 0; --t)
    out.path[static_cast<std::size_t>(t - 1)] = back(t, out.path[static_cast<std::size_t>(t)]);

  // Scaled forward-backward for local posteriors.
  const ForwardPass fwd = forward_filter(logdens, tpm, delta);
  out.posteriors.resize(n_t, m);
  Eigen::VectorXd beta = Eigen::VectorXd::Ones(m);
  out.posteriors.row(n_t - 1) = fwd.filtered.row(n_t - 1);
  for (Eigen::Index t = n_t - 2; t >= 0; --t) {
    const double shift = logdens.row(t + 1).maxCoeff();
    const Eigen::VectorXd b = (logdens.row(t + 1).array() - shift).exp().transpose();
    beta = tpm * (b.array() * beta.array()).matrix();
    beta /= beta.sum();
    Eigen::RowVectorXd post = fwd.filtered.row(t).array() * beta.transpose().array();
    out.posteriors.row(t) = post / post.sum();
  }
  return out;
}

}  // namespace mhmm
