#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mhmm/log.hpp"
#include "mhmm/population.hpp"
#include "mhmm/ppc.hpp"

using namespace mhmm;

namespace {

GroupParams baseline_group(double zeta = 0.25, double q = 0.1) {
  return population::make_group(population::baseline_means(), population::baseline_tpm(), zeta, q);
}

PpcConfig small_config(int n_draws, int n, int t) {
  PpcConfig c;
  c.n_draws = n_draws;
  c.n_subjects = n;
  c.n_occasions = t;
  c.seed = 17;
  return c;
}

Dataset observed_from(const GroupParams& g, int n, int t, std::uint64_t seed) {
  ScenarioSpec s;
  s.id = "observed";
  s.group = g;
  s.n_subjects = n;
  s.n_occasions = t;
  s.seed = seed;
  return simulate_dataset(s, 0).data;
}

const PpcResult& find(const std::vector<PpcResult>& rs, const std::string& name) {
  for (const auto& r : rs)
    if (r.statistic == name) return r;
  throw std::out_of_range(name);
}

}  // namespace

TEST(PpcReplicates, CountAndShape) {
  const std::vector<Draw> draws(30, Draw{baseline_group(), {}, 0.0});
  const auto reps = ppc_replicates(draws, small_config(2000, 2, 12));
  ASSERT_EQ(reps.size(), 2000u);
  for (const auto& r : reps) {
    ASSERT_EQ(r.data.n_subjects(), 2);
    ASSERT_EQ(r.data.subjects[1].obs.rows(), 12);
    ASSERT_EQ(r.data.subjects[1].obs.cols(), 3);
  }
}

TEST(PpcReplicates, DegenerateDrawGivesIdenticalParameters) {
  const std::vector<Draw> draws(1, Draw{baseline_group(0.0, 0.0), {}, 0.0});
  PpcConfig c = small_config(20, 3, 10);
  c.q_var = 0.0;
  const auto reps = ppc_replicates(draws, c);
  for (const auto& r : reps)
    for (const auto& s : r.truth) {
      EXPECT_EQ(s.mean, population::baseline_means());
      EXPECT_LT((s.tpm - population::baseline_tpm()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(PpcReplicates, FixedSeedReproducible) {
  std::vector<Draw> draws;
  for (int d = 0; d < 10; ++d) {
    GroupParams g = baseline_group();
    g.emiss_mean(0, 0) += 0.1 * d;
    draws.push_back({g, {}, 0.0});
  }
  const auto a = ppc_replicates(draws, small_config(15, 2, 20));
  const auto b = ppc_replicates(draws, small_config(15, 2, 20));
  for (std::size_t r = 0; r < a.size(); ++r) EXPECT_EQ(a[r].data.subjects[0].obs, b[r].data.subjects[0].obs);
}

TEST(PpcReplicates, RandomVariancesAveragedAcrossStates) {
  GroupParams g = baseline_group();
  g.emiss_rand_var.row(1) << 0.1, 0.2, 0.6;
  const GroupParams r = replicate_params(g, 0.1);
  EXPECT_NEAR(r.emiss_rand_var(1, 0), 0.3, 1e-15);
  EXPECT_NEAR(r.emiss_rand_var(1, 2), 0.3, 1e-15);
  EXPECT_EQ(r.emiss_rand_var(0, 0), 0.25);
  EXPECT_EQ(r.tpm_rand_var(2, 1), 0.1);
}

TEST(SelectDraws, WithAndWithoutReplacement) {
  Rng rng(1);
  auto s = select_draws(100, 40, rng);
  std::sort(s.begin(), s.end());
  EXPECT_EQ(std::adjacent_find(s.begin(), s.end()), s.end());
  const auto t = select_draws(5, 40, rng);
  EXPECT_EQ(t.size(), 40u);
  for (int v : t) EXPECT_LT(v, 5);
}

TEST(EmpiricalTpm, ConstantSequence) {
  const EmpiricalTpm e = empirical_tpm({0, 0, 0, 0}, 3);
  EXPECT_EQ(e.tpm(0, 0), 1.0);
  EXPECT_EQ(e.tpm(0, 1), 0.0);
  EXPECT_TRUE(e.row_defined[0]);
  EXPECT_FALSE(e.row_defined[1]);
  EXPECT_FALSE(e.row_defined[2]);
  EXPECT_TRUE(std::isnan(e.tpm(1, 1)));
  EXPECT_EQ(e.counts.sum(), 3.0);
}

TEST(EmpiricalTpm, LongSimulationMatchesGenerator) {
  Rng rng(2);
  const MatrixXd t = population::baseline_tpm();
  const StatePath s = simulate_states(t, 50000, stationary_distribution(t).pi, rng);
  const EmpiricalTpm e = empirical_tpm(s, 3);
  EXPECT_EQ(e.counts.sum(), 49999.0);
  EXPECT_LT((e.tpm - t).cwiseAbs().maxCoeff(), 0.02);
}

TEST(PpcStatistics, PeriodsAreEqualBlocks) {
  SubjectSeries s;
  s.obs = MatrixXd::Zero(1440, 1);
  StatePath st(1440);
  for (int t = 0; t < 1440; ++t) st[t] = t / 480;
  s.states = st;
  Dataset d;
  d.subjects.push_back(s);
  const auto periods = period_tpm_statistic(d, 3, 3);
  ASSERT_EQ(periods.size(), 3u);
  for (int p = 0; p < 3; ++p)
    for (int i = 0; i < 3; ++i) {
      if (i == p) EXPECT_EQ(periods[p](i, i), 1.0);  // the boundary transition is not counted
      else EXPECT_TRUE(std::isnan(periods[p](i, 0)));
    }
}

TEST(PpcResult, ExtremeTail) {
  const PpcResult r = make_ppc_result("x", 100.0, VectorXd::LinSpaced(50, 0.0, 1.0));
  EXPECT_EQ(r.p_posterior, 0.0);
  EXPECT_EQ(r.two_sided_p, 0.0);
}

TEST(PpcResult, MonotoneTransformInvariance) {
  Rng rng(3);
  VectorXd reps(200);
  for (int r = 0; r < 200; ++r) reps(r) = rng.normal();
  const PpcResult a = make_ppc_result("x", 0.3, reps);
  const PpcResult b = make_ppc_result("x", std::exp(0.3), reps.array().exp().matrix());
  EXPECT_EQ(a.p_posterior, b.p_posterior);
  EXPECT_GE(a.p_posterior, 0.0);
  EXPECT_LE(a.p_posterior, 1.0);
  EXPECT_NEAR(a.two_sided_p, std::min(1.0, 2 * std::min(a.p_posterior, 1 - a.p_posterior)), 1e-15);
}

TEST(PpcResult, UndefinedReplicatesExcluded) {
  VectorXd reps(4);
  reps << 1.0, NAN, 3.0, NAN;
  const PpcResult r = make_ppc_result("x", 2.0, reps);
  EXPECT_EQ(r.p_posterior, 0.5);
  EXPECT_EQ(r.replicate_mean(), 2.0);
}

TEST(PpcChecks, MissingStatesAsksForDecoding) {
  Dataset d = observed_from(baseline_group(), 2, 30, 1);
  for (auto& s : d.subjects) s.states.reset();
  try {
    ppc_emission_means(d, {}, 3);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("decode"), std::string::npos);
  }
}

TEST(PpcChecks, ZeroVarianceObservedGivesPOne) {
  Dataset obs = observed_from(baseline_group(), 2, 30, 2);
  for (auto& s : obs.subjects) s.obs.setConstant(1.0);
  std::vector<Dataset> reps;
  for (int r = 0; r < 50; ++r) reps.push_back(observed_from(baseline_group(), 2, 30, 100 + r));
  for (const auto& r : ppc_total_variance(obs, reps)) EXPECT_EQ(r.p_posterior, 1.0);
}

TEST(PpcChecks, InflatedReplicateVarianceIsExtreme) {
  const Dataset obs = observed_from(baseline_group(), 10, 90, 3);
  GroupParams inflated = baseline_group();
  inflated.emiss_resid_var.setConstant(10.0);
  std::vector<Dataset> reps;
  for (int r = 0; r < 200; ++r) reps.push_back(observed_from(inflated, 10, 90, 1000 + r));
  for (const auto& r : ppc_total_variance(obs, reps)) {
    EXPECT_GE(r.p_posterior, 0.98);
    EXPECT_LE(r.two_sided_p, 0.02);
  }
}

TEST(PpcChecks, SelfConsistentPValuesAreCalibrated) {
  // Under the generating model each observed p-value is roughly uniform.
  const GroupParams g = baseline_group();
  const std::vector<Draw> draws(1, Draw{g, {}, 0.0});
  std::vector<double> p_mean, p_var;
  set_warnings_enabled(false);
  for (int rep = 0; rep < 40; ++rep) {
    const Dataset obs = observed_from(g, 5, 90, 500 + rep);
    PpcConfig c = small_config(200, 5, 90);
    c.seed = 900 + rep;
    const auto res = run_ppc(obs, draws, 3, c);
    p_mean.push_back(find(res, "state_mean.1.1").p_posterior);
    p_var.push_back(find(res, "total_var.2").p_posterior);
  }
  set_warnings_enabled(true);
  for (const auto* ps : {&p_mean, &p_var}) {
    double mean = 0.0;
    int extreme = 0;
    for (double p : *ps) {
      mean += p / ps->size();
      extreme += p < 0.01 || p > 0.99;
    }
    EXPECT_NEAR(mean, 0.5, 0.12);
    EXPECT_LE(extreme, 3);
  }
}

TEST(PpcChecks, PeriodShiftIsDetected) {
  const GroupParams g = baseline_group();
  MatrixXd shifted(3, 3);
  shifted << 0.5, 0.25, 0.25, 0.3, 0.4, 0.3, 0.4, 0.3, 0.3;
  const Dataset obs = fixture::simulate_period_shift(g, shifted, 10, 480, 3, 1, 4);
  const std::vector<Draw> draws(1, Draw{g, {}, 0.0});
  const auto res = run_ppc(obs, draws, 3, small_config(300, 10, 480));
  for (int i = 1; i <= 3; ++i) {
    const std::string cell = "period_tpm.2." + std::to_string(i) + "." + std::to_string(i);
    EXPECT_LE(find(res, cell).two_sided_p, 0.05) << cell;
  }
}
