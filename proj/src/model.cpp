#include "mhmm/model.hpp"

#include <algorithm>

namespace mhmm {

namespace {

void require_shape(const MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream msg;
    msg << name << " is " << m.rows() << "x" << m.cols() << ", expected " << rows << "x" << cols;
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

void ModelSpec::validate() const {
  if (n_states < 2) throw std::invalid_argument("ModelSpec: n_states must be >= 2");
  if (n_dep < 1) throw std::invalid_argument("ModelSpec: n_dep must be >= 1");
  if (!state_labels.empty() && static_cast<int>(state_labels.size()) != n_states)
    throw std::invalid_argument("ModelSpec: state_labels length differs from n_states");
  if (!dep_labels.empty() && static_cast<int>(dep_labels.size()) != n_dep)
    throw std::invalid_argument("ModelSpec: dep_labels length differs from n_dep");
}

std::string ModelSpec::state_label(int i) const {
  return state_labels.empty() ? "state" + std::to_string(i + 1) : state_labels[i];
}

std::string ModelSpec::dep_label(int k) const {
  return dep_labels.empty() ? "dep" + std::to_string(k + 1) : dep_labels[k];
}

void GroupParams::validate(bool allow_zero_rand_var) const {
  const Eigen::Index m = emiss_mean.cols();
  const Eigen::Index k = emiss_mean.rows();
  if (m < 2) throw std::invalid_argument("GroupParams: need at least 2 states");
  if (k < 1) throw std::invalid_argument("GroupParams: need at least 1 dependent variable");
  require_shape(emiss_rand_var, k, m, "emiss_rand_var");
  require_shape(emiss_resid_var, k, m, "emiss_resid_var");
  require_shape(tpm_intercepts, m, m - 1, "tpm_intercepts");
  require_shape(tpm_rand_var, m, m - 1, "tpm_rand_var");
  if (!emiss_mean.allFinite() || !tpm_intercepts.allFinite())
    throw std::invalid_argument("GroupParams: non-finite mean or intercept");
  if (!(emiss_resid_var.array() > 0.0).all())
    throw std::invalid_argument("GroupParams: emiss_resid_var must be strictly positive");
  auto bad = [&](const MatrixXd& v) {
    return allow_zero_rand_var ? !(v.array() >= 0.0).all() : !(v.array() > 0.0).all();
  };
  if (bad(emiss_rand_var)) throw std::invalid_argument("GroupParams: invalid emiss_rand_var");
  if (bad(tpm_rand_var)) throw std::invalid_argument("GroupParams: invalid tpm_rand_var");
}

MatrixXd GroupParams::tpm() const { return tpm_from_intercepts(tpm_intercepts); }

bool Dataset::has_states() const {
  return !subjects.empty() &&
         std::all_of(subjects.begin(), subjects.end(), [](const auto& s) { return s.states.has_value(); });
}

void Dataset::validate(int n_states) const {
  if (subjects.empty()) throw std::invalid_argument("Dataset: no subjects");
  const Eigen::Index k = subjects.front().obs.cols();
  if (k < 1) throw std::invalid_argument("Dataset: no dependent variables");
  for (std::size_t n = 0; n < subjects.size(); ++n) {
    const auto& s = subjects[n];
    if (s.obs.cols() != k)
      throw std::invalid_argument("Dataset: subject " + std::to_string(n + 1) + " has a different n_dep");
    if (s.obs.rows() < 1)
      throw std::invalid_argument("Dataset: subject " + std::to_string(n + 1) + " has no occasions");
    if (s.states) {
      if (static_cast<Eigen::Index>(s.states->size()) != s.obs.rows())
        throw std::invalid_argument("Dataset: state path length mismatch for subject " + std::to_string(n + 1));
      for (int st : *s.states)
        if (st < 0 || st >= n_states)
          throw std::invalid_argument("Dataset: state index out of range for subject " + std::to_string(n + 1));
    }
  }
}

MatrixXd tpm_from_intercepts(const MatrixXd& intercepts) {
  const Eigen::Index m = intercepts.rows();
  if (intercepts.cols() != m - 1) throw std::invalid_argument("tpm_from_intercepts: expected m x (m-1)");
  MatrixXd tpm(m, m);
  for (Eigen::Index i = 0; i < m; ++i) tpm.row(i) = mnl_row(intercepts.row(i).transpose()).transpose();
  return tpm;
}

MatrixXd intercepts_from_tpm(const MatrixXd& tpm) {
  const Eigen::Index m = tpm.rows();
  MatrixXd out(m, m - 1);
  for (Eigen::Index i = 0; i < m; ++i) out.row(i) = intercepts_from_row(tpm.row(i).transpose()).transpose();
  return out;
}

StationaryResult stationary_distribution(const MatrixXd& tpm) {
  const Eigen::Index m = tpm.rows();
  const MatrixXd system = MatrixXd::Identity(m, m) - tpm.transpose() + MatrixXd::Ones(m, m);
  Eigen::FullPivLU<MatrixXd> lu(system);
  lu.setThreshold(1e-12);
  if (lu.isInvertible()) {
    VectorXd pi = lu.solve(VectorXd::Ones(m));
    if (pi.allFinite() && (pi.array() >= -1e-12).all()) {
      pi = pi.cwiseMax(0.0);
      return {pi / pi.sum(), false};
    }
  }
  return {VectorXd::Constant(m, 1.0 / static_cast<double>(m)), true};
}

}  // namespace mhmm
