#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mhmm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Latent state indices are 0-based in memory (0..m-1); files and parameter
/// names use 1-based indices.
using StatePath = std::vector<int>;

struct ModelSpec {
  int n_states = 0;
  int n_dep = 0;
  std::vector<std::string> state_labels;
  std::vector<std::string> dep_labels;

  void validate() const;
  std::string state_label(int i) const;
  std::string dep_label(int k) const;
};

/// Group-level parameters of the multilevel HMM.
///
/// Emission matrices are [n_dep x m]; column m holds the component
/// distribution of state m. TPM matrices are [m x (m-1)]: row i holds the
/// logit intercepts of moving from state i to states 2..m, with state 1 as the
/// baseline category.
struct GroupParams {
  MatrixXd emiss_mean;
  MatrixXd emiss_rand_var;
  MatrixXd emiss_resid_var;
  MatrixXd tpm_intercepts;
  MatrixXd tpm_rand_var;

  int n_states() const { return static_cast<int>(emiss_mean.cols()); }
  int n_dep() const { return static_cast<int>(emiss_mean.rows()); }

  /// Throws std::invalid_argument on shape mismatch or non-positive variances.
  /// Zero between-subject variances are accepted when allow_zero_rand_var is
  /// set (simulation with no heterogeneity).
  void validate(bool allow_zero_rand_var = false) const;

  /// Group-level TPM obtained by applying the multinomial logit to each row of
  /// the intercepts.
  MatrixXd tpm() const;
};

struct SubjectParams {
  MatrixXd mean;  // [n_dep x m]
  MatrixXd tpm;   // [m x m]
};

struct SubjectSeries {
  MatrixXd obs;                       // [N_T x n_dep]
  std::optional<StatePath> states;    // 0-based
};

struct Dataset {
  std::vector<SubjectSeries> subjects;

  int n_subjects() const { return static_cast<int>(subjects.size()); }
  int n_dep() const { return subjects.empty() ? 0 : static_cast<int>(subjects.front().obs.cols()); }
  bool has_states() const;
  void validate(int n_states) const;
};

/// Multinomial-logit map from the m-1 non-baseline intercepts of one TPM row
/// to the m transition probabilities. Evaluated with the max-shift so large
/// intercepts do not overflow.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> mnl_row(
    const Eigen::MatrixBase<Derived>& intercepts) {
  using Scalar = typename Derived::Scalar;
  using std::exp;
  if (!intercepts.allFinite()) throw std::invalid_argument("mnl_row: non-finite intercept");
  const Eigen::Index m = intercepts.size() + 1;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> logits(m);
  logits(0) = Scalar(0);
  for (Eigen::Index j = 1; j < m; ++j) logits(j) = intercepts(j - 1);
  const Scalar shift = logits.maxCoeff();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> p = (logits.array() - shift).exp().matrix();
  return p / p.sum();
}

/// Inverse of mnl_row: log-odds of each non-baseline entry against entry 1.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> intercepts_from_row(
    const Eigen::MatrixBase<Derived>& row) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  using std::log;
  if (row.size() < 2) throw std::invalid_argument("intercepts_from_row: need at least 2 entries");
  if (abs(row.sum() - Scalar(1)) > Scalar(1e-9))
    throw std::invalid_argument("intercepts_from_row: row does not sum to 1");
  if ((row.array() <= Scalar(0)).any())
    throw std::domain_error("intercepts_from_row: entries must be strictly positive");
  const Eigen::Index m = row.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(m - 1);
  for (Eigen::Index j = 1; j < m; ++j) out(j - 1) = log(row(j) / row(0));
  return out;
}

struct TpmCheck {
  bool ok = true;
  std::string message;
  explicit operator bool() const { return ok; }
};

/// Passes iff the matrix is square, entries lie in [0, 1] and every row sums
/// to 1 within tol.
template <typename Derived>
TpmCheck validate_tpm(const Eigen::MatrixBase<Derived>& tpm, double tol = 1e-9) {
  TpmCheck check;
  std::ostringstream msg;
  if (tpm.rows() != tpm.cols()) {
    msg << "tpm is " << tpm.rows() << "x" << tpm.cols() << ", expected square";
    return {false, msg.str()};
  }
  for (Eigen::Index i = 0; i < tpm.rows(); ++i) {
    for (Eigen::Index j = 0; j < tpm.cols(); ++j) {
      const double v = static_cast<double>(tpm(i, j));
      if (!(v >= 0.0 && v <= 1.0)) {
        check.ok = false;
        msg << "entry (" << i + 1 << "," << j + 1 << ") = " << v << " outside [0,1]; ";
      }
    }
    const double s = static_cast<double>(tpm.row(i).sum());
    if (!(std::abs(s - 1.0) <= tol)) {
      check.ok = false;
      msg << "row " << i + 1 << " sums to " << s << "; ";
    }
  }
  check.message = msg.str();
  return check;
}

/// Applies mnl_row to each row of an [m x (m-1)] intercept matrix.
MatrixXd tpm_from_intercepts(const MatrixXd& intercepts);

/// Row-wise intercepts_from_row of a strictly positive stochastic matrix.
MatrixXd intercepts_from_tpm(const MatrixXd& tpm);

struct StationaryResult {
  VectorXd pi;
  bool degenerate = false;  // true when the chain is reducible and uniform was returned
};

/// Stationary distribution from (I - G^T + 1) pi = 1. Falls back to the uniform
/// distribution when the system is singular (reducible chain).
StationaryResult stationary_distribution(const MatrixXd& tpm);

}  // namespace mhmm
