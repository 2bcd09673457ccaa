#include <gtest/gtest.h>

#include "mhmm/population.hpp"
#include "mhmm/simulate.hpp"
#include "oracles.hpp"

using namespace mhmm;

namespace {

GroupParams sleep_group(double zeta, double q) {
  return population::make_group(population::sleep_means(), population::sleep_tpm(), zeta, q);
}

ScenarioSpec small_scenario(double zeta, double q) {
  ScenarioSpec s;
  s.id = "unit";
  s.group = sleep_group(0.0, 0.0);
  s.zeta = zeta;
  s.q_var = q;
  s.n_subjects = 10;
  s.n_occasions = 400;
  s.seed = 42;
  return s;
}

}  // namespace

TEST(SubjectTpm, ZeroVarianceEqualsGroupTpm) {
  Rng rng(1);
  const GroupParams g = sleep_group(0.25, 0.0);
  const MatrixXd t = draw_subject_tpm(g, rng);
  for (int i = 0; i < 3; ++i) {
    const VectorXd row = mnl_row(g.tpm_intercepts.row(i).transpose());
    for (int j = 0; j < 3; ++j) EXPECT_EQ(t(i, j), row(j));
  }
}

TEST(SubjectTpm, InterceptVarianceMatchesQ) {
  Rng rng(2);
  const GroupParams g = sleep_group(0.25, 0.1);
  std::vector<double> a12;
  for (int n = 0; n < 10000; ++n) a12.push_back(draw_subject_intercepts(g, rng)(0, 0));
  EXPECT_NEAR(oracle::sample_var(a12) / 0.1, 1.0, 0.05);
  EXPECT_NEAR(oracle::sample_mean(a12), std::log(0.003 / 0.984), 0.02);
}

TEST(SubjectTpm, RowsSumToOne) {
  Rng rng(3);
  const GroupParams g = sleep_group(0.25, 0.5);
  for (int n = 0; n < 1000; ++n) {
    const MatrixXd t = draw_subject_tpm(g, rng);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(t.row(i).sum(), 1.0, 1e-12);
  }
}

TEST(SubjectMeans, ZeroVarianceEqualsGroupMeans) {
  Rng rng(4);
  const GroupParams g = sleep_group(0.0, 0.1);
  EXPECT_EQ(draw_subject_means(g, rng), population::sleep_means());
}

TEST(SubjectMeans, MomentsMatchGeneratingNormal) {
  Rng rng(5);
  const GroupParams g = sleep_group(0.25, 0.1);
  std::vector<double> x;
  for (int n = 0; n < 10000; ++n) {
    const MatrixXd mu = draw_subject_means(g, rng);
    ASSERT_EQ(mu.rows(), 3);
    ASSERT_EQ(mu.cols(), 3);
    x.push_back(mu(0, 0));
  }
  EXPECT_NEAR(oracle::sample_mean(x), -0.360, 0.02);
  EXPECT_NEAR(oracle::sample_var(x) / 0.25, 1.0, 0.05);
}

TEST(SimulateStates, AbsorbingChainStaysInStateOne) {
  Rng rng(6);
  const StatePath s = simulate_states(MatrixXd::Identity(3, 3), 500, Eigen::Vector3d(1, 0, 0), rng);
  for (int v : s) EXPECT_EQ(v, 0);
}

TEST(SimulateStates, UniformTpmFrequencies) {
  Rng rng(7);
  const StatePath s = simulate_states(MatrixXd::Constant(3, 3, 1.0 / 3), 30000, Eigen::Vector3d::Constant(1.0 / 3), rng);
  std::vector<double> freq(3, 0.0);
  for (int v : s) freq[v] += 1.0 / 30000;
  for (double f : freq) EXPECT_NEAR(f, 1.0 / 3, 0.01);
}

TEST(SimulateStates, AwakeDwellLengthIsGeometric) {
  Rng rng(8);
  const MatrixXd t = population::sleep_tpm();
  const StatePath s = simulate_states(t, 100000, stationary_distribution(t).pi, rng);
  // complete Awake runs only; runs touching either end are censored
  std::vector<double> dwell;
  const std::size_t n = s.size();
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && s[j] == s[i]) ++j;
    if (s[i] == 0 && i > 0 && j < n) dwell.push_back(static_cast<double>(j - i));
    i = j;
  }
  EXPECT_NEAR(oracle::sample_mean(dwell) / 62.5, 1.0, 0.10);
}

TEST(SimulateStates, InvalidTpmThrows) {
  Rng rng(9);
  MatrixXd t = MatrixXd::Identity(3, 3);
  t(0, 1) = 0.4;
  EXPECT_THROW(simulate_states(t, 10, Eigen::Vector3d(1, 0, 0), rng), std::invalid_argument);
}

TEST(SimulateObservations, ZeroResidualReturnsMeans) {
  Rng rng(10);
  GroupParams g = sleep_group(0.0, 0.0);
  g.emiss_resid_var.setZero();
  const SubjectParams subj{population::sleep_means(), population::sleep_tpm()};
  const StatePath s{0, 1, 2, 2, 1, 0};
  const MatrixXd obs = simulate_observations(s, subj, g, rng);
  for (std::size_t t = 0; t < s.size(); ++t)
    for (int k = 0; k < 3; ++k) EXPECT_EQ(obs(t, k), subj.mean(k, s[t]));
}

TEST(SimulateObservations, ResidualVarianceAndIndependence) {
  Rng rng(11);
  const GroupParams g = sleep_group(0.0, 0.0);
  const SubjectParams subj{population::sleep_means(), population::sleep_tpm()};
  const StatePath s(50000, 0);
  const MatrixXd obs = simulate_observations(s, subj, g, rng);
  for (int k = 0; k < 3; ++k) {
    const VectorXd c = obs.col(k).array() - obs.col(k).mean();
    EXPECT_NEAR(c.squaredNorm() / (obs.rows() - 1) / 0.1, 1.0, 0.05);
  }
  const VectorXd a = obs.col(0).array() - obs.col(0).mean();
  const VectorXd b = obs.col(1).array() - obs.col(1).mean();
  EXPECT_NEAR(a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm()), 0.0, 0.02);
}

TEST(SimulateDataset, Deterministic) {
  const ScenarioSpec s = small_scenario(0.25, 0.1);
  const SimulatedData a = simulate_dataset(s, 3);
  const SimulatedData b = simulate_dataset(s, 3);
  for (int n = 0; n < s.n_subjects; ++n) {
    EXPECT_EQ(a.data.subjects[n].obs, b.data.subjects[n].obs);
    EXPECT_EQ(*a.data.subjects[n].states, *b.data.subjects[n].states);
  }
  const SimulatedData c = simulate_dataset(s, 4);
  EXPECT_NE(a.data.subjects[0].obs, c.data.subjects[0].obs);
}

TEST(SimulateDataset, ShapeOfSmallestGridCell) {
  const SimulatedData d = simulate_dataset(small_scenario(0.25, 0.1), 0);
  ASSERT_EQ(d.data.n_subjects(), 10);
  for (const auto& s : d.data.subjects) {
    EXPECT_EQ(s.obs.rows(), 400);
    EXPECT_EQ(s.obs.cols(), 3);
    ASSERT_TRUE(s.states.has_value());
    EXPECT_EQ(s.states->size(), 400u);
  }
}

TEST(SimulateDataset, NoRandomEffectsMeansSharedParameters) {
  const SimulatedData d = simulate_dataset(small_scenario(0.0, 0.0), 0);
  for (const auto& t : d.truth) {
    EXPECT_EQ(t.mean, d.truth.front().mean);
    EXPECT_EQ(t.tpm, d.truth.front().tpm);
  }
}

TEST(ScenarioSpec, RejectsBadShapes) {
  ScenarioSpec s = small_scenario(0.25, 0.1);
  s.n_occasions = 1;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = small_scenario(-0.1, 0.1);
  EXPECT_THROW(s.validate(), std::invalid_argument);
}
