#include <gtest/gtest.h>

#include "mhmm/inference.hpp"
#include "mhmm/random.hpp"
#include "mhmm/simulate.hpp"
#include "oracles.hpp"

using namespace mhmm;

namespace {

struct Instance {
  MatrixXd obs, tpm, mean, var;
  VectorXd delta;
};

Instance random_instance(Rng& rng, int m, int T, int n_dep) {
  Instance x;
  x.tpm.resize(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) x.tpm(i, j) = rng.uniform(0.05, 1.0);
    x.tpm.row(i) /= x.tpm.row(i).sum();
  }
  x.delta = VectorXd(m);
  for (int i = 0; i < m; ++i) x.delta(i) = rng.uniform(0.05, 1.0);
  x.delta /= x.delta.sum();
  x.mean.resize(n_dep, m);
  x.var.resize(n_dep, m);
  for (int k = 0; k < n_dep; ++k)
    for (int i = 0; i < m; ++i) {
      x.mean(k, i) = rng.normal(0.0, 2.0);
      x.var(k, i) = rng.uniform(0.3, 2.0);
    }
  x.obs.resize(T, n_dep);
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < n_dep; ++k) x.obs(t, k) = rng.normal(0.0, 2.5);
  return x;
}

}  // namespace

TEST(EmissionDensity, StandardNormalMode) {
  const EmissionPointParams p{MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1)};
  EXPECT_NEAR(emission_logdensity(Eigen::VectorXd::Zero(1), p)(0), -0.9189385332046727, 1e-14);
}

TEST(EmissionDensity, ThreeSdFromMean) {
  const EmissionPointParams p{MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1)};
  EXPECT_NEAR(emission_logdensity(Eigen::VectorXd::Constant(1, 3.0), p)(0), -0.9189385332046727 - 4.5, 1e-13);
}

TEST(EmissionDensity, FactorisesOverVariables) {
  MatrixXd mean(2, 2), var(2, 2);
  mean << 0.5, -1.0, 2.0, 0.1;
  var << 1.5, 0.2, 0.7, 3.0;
  const Eigen::Vector2d y(0.3, 1.1);
  const VectorXd joint = emission_logdensity(y, {mean, var});
  for (int i = 0; i < 2; ++i)
    EXPECT_NEAR(joint(i),
                oracle::normal_logpdf(y(0), mean(0, i), var(0, i)) + oracle::normal_logpdf(y(1), mean(1, i), var(1, i)),
                1e-13);
}

TEST(EmissionDensity, NonPositiveVarianceThrows) {
  const EmissionPointParams p{MatrixXd::Zero(1, 2), MatrixXd::Zero(1, 2)};
  EXPECT_THROW(emission_logdensity(Eigen::VectorXd::Zero(1), p), std::invalid_argument);
}

TEST(Forward, SingleStateIsSumOfDensities) {
  Rng rng(1);
  const Instance x = random_instance(rng, 1, 20, 2);
  double expected = 0.0;
  for (int t = 0; t < 20; ++t)
    for (int k = 0; k < 2; ++k) expected += oracle::normal_logpdf(x.obs(t, k), x.mean(k, 0), x.var(k, 0));
  EXPECT_NEAR(forward_loglik(x.obs, MatrixXd::Ones(1, 1), VectorXd::Ones(1), {x.mean, x.var}), expected, 1e-10);
}

TEST(Forward, MatchesPathEnumeration) {
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const Instance x = random_instance(rng, 2, 8, 2);
    EXPECT_NEAR(forward_loglik(x.obs, x.tpm, x.delta, {x.mean, x.var}),
                oracle::brute_loglik(x.obs, x.tpm, x.delta, x.mean, x.var), 1e-10);
  }
}

TEST(Forward, ThreeStateEnumeration) {
  Rng rng(3);
  const Instance x = random_instance(rng, 3, 6, 3);
  EXPECT_NEAR(forward_loglik(x.obs, x.tpm, x.delta, {x.mean, x.var}),
              oracle::brute_loglik(x.obs, x.tpm, x.delta, x.mean, x.var), 1e-10);
}

TEST(Forward, LabelPermutationInvariance) {
  Rng rng(4);
  const Instance x = random_instance(rng, 3, 50, 2);
  Eigen::PermutationMatrix<Eigen::Dynamic> P(3);
  P.indices() << 2, 0, 1;
  const MatrixXd tpm = P * x.tpm * P.transpose();
  const VectorXd delta = P * x.delta;
  const MatrixXd mean = x.mean * P.transpose();
  const MatrixXd var = x.var * P.transpose();
  EXPECT_NEAR(forward_loglik(x.obs, x.tpm, x.delta, {x.mean, x.var}),
              forward_loglik(x.obs, tpm, delta, {mean, var}), 1e-10);
}

TEST(Forward, InvalidInputsThrow) {
  Rng rng(5);
  const Instance x = random_instance(rng, 2, 5, 1);
  MatrixXd bad = x.tpm;
  bad(0, 0) += 0.2;
  EXPECT_THROW(forward_loglik(x.obs, bad, x.delta, {x.mean, x.var}), std::invalid_argument);
  EXPECT_THROW(forward_loglik(x.obs, x.tpm, Eigen::Vector2d(0.7, 0.7), {x.mean, x.var}), std::invalid_argument);
}

TEST(Decode, ViterbiMatchesEnumeration) {
  Rng rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    const Instance x = random_instance(rng, 2, 6, 1);
    const auto paths = oracle::all_paths(2, 6);
    ASSERT_EQ(paths.size(), 64u);
    double best = -INFINITY;
    std::vector<int> arg;
    for (const auto& p : paths) {
      const double lp = oracle::path_log_joint(x.obs, x.tpm, x.delta, x.mean, x.var, p);
      if (lp > best) best = lp, arg = p;
    }
    const Decoding d = decode_states(x.obs, x.tpm, x.delta, {x.mean, x.var});
    EXPECT_EQ(d.path, arg);
    EXPECT_NEAR(d.path_logprob, best, 1e-10);
  }
}

TEST(Decode, PosteriorsMatchEnumeration) {
  Rng rng(7);
  const Instance x = random_instance(rng, 2, 6, 2);
  const auto paths = oracle::all_paths(2, 6);
  std::vector<double> lj;
  for (const auto& p : paths) lj.push_back(oracle::path_log_joint(x.obs, x.tpm, x.delta, x.mean, x.var, p));
  const double z = oracle::log_sum_exp(lj);
  MatrixXd post = MatrixXd::Zero(6, 2);
  for (std::size_t r = 0; r < paths.size(); ++r)
    for (int t = 0; t < 6; ++t) post(t, paths[r][t]) += std::exp(lj[r] - z);
  const Decoding d = decode_states(x.obs, x.tpm, x.delta, {x.mean, x.var});
  EXPECT_LT((d.posteriors - post).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Decode, WellSeparatedMeansRecoverPath) {
  Rng rng(8);
  MatrixXd tpm(3, 3);
  tpm << 0.8, 0.1, 0.1, 0.1, 0.8, 0.1, 0.1, 0.1, 0.8;
  MatrixXd mean(1, 3);
  mean << -6.0, 0.0, 6.0;
  const MatrixXd var = MatrixXd::Ones(1, 3);
  const VectorXd delta = VectorXd::Constant(3, 1.0 / 3);
  const StatePath truth = simulate_states(tpm, 2000, delta, rng);
  MatrixXd obs(2000, 1);
  for (int t = 0; t < 2000; ++t) obs(t, 0) = rng.normal(mean(0, truth[t]), 1.0);
  const Decoding d = decode_states(obs, tpm, delta, {mean, var});
  int hits = 0;
  for (int t = 0; t < 2000; ++t) hits += d.path[t] == truth[t];
  EXPECT_GE(hits, 0.99 * 2000);
}

TEST(Decode, UniformModelGivesUniformPosteriors) {
  const MatrixXd obs = MatrixXd::Random(10, 2);
  const Decoding d = decode_states(obs, MatrixXd::Constant(3, 3, 1.0 / 3), VectorXd::Constant(3, 1.0 / 3),
                                   {MatrixXd::Zero(2, 3), MatrixXd::Ones(2, 3)});
  EXPECT_LT((d.posteriors.array() - 1.0 / 3).abs().maxCoeff(), 1e-12);
  for (int s : d.path) EXPECT_EQ(s, 0);
}
