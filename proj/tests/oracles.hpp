#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline double normal_logpdf(double x, double mu, double var) {
  const double pi = 3.14159265358979323846;
  return -0.5 * std::log(2.0 * pi * var) - (x - mu) * (x - mu) / (2.0 * var);
}

// All m^T state sequences, 0-based.
inline std::vector<std::vector<int>> all_paths(int m, int T) {
  std::vector<std::vector<int>> out;
  std::vector<int> p(T, 0);
  while (true) {
    out.push_back(p);
    int t = T - 1;
    while (t >= 0 && ++p[t] == m) p[t--] = 0;
    if (t < 0) break;
  }
  return out;
}

// log P(path, obs) written out term by term.
inline double path_log_joint(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& tpm, const Eigen::VectorXd& delta,
                             const Eigen::MatrixXd& mean, const Eigen::MatrixXd& var, const std::vector<int>& path) {
  double lp = std::log(delta(path[0]));
  for (std::size_t t = 1; t < path.size(); ++t) lp += std::log(tpm(path[t - 1], path[t]));
  for (std::size_t t = 0; t < path.size(); ++t)
    for (Eigen::Index k = 0; k < obs.cols(); ++k)
      lp += normal_logpdf(obs(t, k), mean(k, path[t]), var(k, path[t]));
  return lp;
}

inline double log_sum_exp(const std::vector<double>& v) {
  double mx = -INFINITY;
  for (double x : v) mx = std::max(mx, x);
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

inline double brute_loglik(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& tpm, const Eigen::VectorXd& delta,
                           const Eigen::MatrixXd& mean, const Eigen::MatrixXd& var) {
  std::vector<double> terms;
  for (const auto& p : all_paths(static_cast<int>(tpm.rows()), static_cast<int>(obs.rows())))
    terms.push_back(path_log_joint(obs, tpm, delta, mean, var, p));
  return log_sum_exp(terms);
}

inline double sample_var(const std::vector<double>& x) {
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - mu) * (v - mu);
  return s / static_cast<double>(x.size() - 1);
}

inline double sample_mean(const std::vector<double>& x) {
  double mu = 0.0;
  for (double v : x) mu += v;
  return mu / static_cast<double>(x.size());
}

}  // namespace oracle
