#include "mhmm/population.hpp"

namespace mhmm::population {

MatrixXd sleep_means() {
  MatrixXd m(3, 3);
  m << -0.360, -0.600, 0.700,
        1.010, -1.310, -0.240,
        0.750, -1.310, 0.005;
  return m;
}

MatrixXd baseline_means() {
  MatrixXd m(3, 3);
  m << -3.900, -1.000, 2.400,
        3.050, -3.400, -0.500,
        0.400, 3.500, -2.800;
  return m;
}

MatrixXd sleep_tpm() {
  MatrixXd g(3, 3);
  g << 0.984, 0.003, 0.013,
       0.007, 0.959, 0.034,
       0.012, 0.021, 0.967;
  return g;
}

MatrixXd baseline_tpm() {
  MatrixXd g(3, 3);
  g << 0.800, 0.100, 0.100,
       0.150, 0.700, 0.150,
       0.180, 0.640, 0.180;
  return g;
}

GroupParams make_group(const MatrixXd& means, const MatrixXd& tpm, double zeta, double q_var,
                       double resid_var) {
  GroupParams g;
  const Eigen::Index k = means.rows();
  const Eigen::Index m = means.cols();
  g.emiss_mean = means;
  g.emiss_rand_var = MatrixXd::Constant(k, m, zeta);
  g.emiss_resid_var = MatrixXd::Constant(k, m, resid_var);
  g.tpm_intercepts = intercepts_from_tpm(tpm);
  g.tpm_rand_var = MatrixXd::Constant(m, m - 1, q_var);
  return g;
}

ModelSpec sleep_spec() {
  return {3, 3, {"Awake", "NREM", "REM"}, {"EEG_mean_beta", "EOG_median_theta", "EOG_min_beta"}};
}

ModelSpec baseline_spec() { return {3, 3, {}, {}}; }

}  // namespace mhmm::population
