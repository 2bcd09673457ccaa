#include <gtest/gtest.h>

#include "mhmm/diagnostics.hpp"
#include "mhmm/population.hpp"
#include "mhmm/random.hpp"

using namespace mhmm;

namespace {

VectorXd normal_draws(std::uint64_t seed, int n, double mean) {
  Rng rng(seed);
  VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = rng.normal(mean, 1.0);
  return x;
}

Chain constant_chain(double value, int n) {
  Chain c;
  c.spec = population::baseline_spec();
  GroupParams g = population::make_group(population::baseline_means(), population::baseline_tpm(), 0.25, 0.1);
  g.emiss_mean(0, 0) = value;
  c.draws.assign(n, Draw{g, {}, 0.0});
  return c;
}

}  // namespace

TEST(Summary, ConstantChain) {
  const PosteriorSummary s = summarize(constant_chain(2.5, 50), "emiss_mean.1.1");
  EXPECT_EQ(s.median, 2.5);
  EXPECT_EQ(s.sd, 0.0);
  EXPECT_EQ(s.cci_low, 2.5);
  EXPECT_EQ(s.cci_high, 2.5);
}

TEST(Summary, LinearInterpolationQuantiles) {
  VectorXd x(100);
  for (int i = 0; i < 100; ++i) x(i) = 100 - i;
  const PosteriorSummary s = summarize(x);
  EXPECT_NEAR(s.median, 50.5, 1e-12);
  EXPECT_NEAR(s.cci_low, 3.475, 1e-12);
  EXPECT_NEAR(s.cci_high, 97.525, 1e-12);
  EXPECT_NEAR(quantile(x, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(quantile(x, 1.0), 100.0, 1e-15);
}

TEST(Summary, TableFormat) {
  PosteriorSummary s;
  s.median = -5.0219;
  s.sd = 0.2501;
  s.cci_low = -5.5;
  s.cci_high = -4.5555;
  EXPECT_EQ(format_map_sd(s), "-5.022 (0.250)");
  EXPECT_EQ(format_cci(s), "[-5.500, -4.556]");
}

TEST(Summary, UnknownParameterThrows) {
  EXPECT_THROW(summarize(constant_chain(1.0, 5), "nope.1.1"), std::out_of_range);
}

TEST(GelmanRubin, SameDistribution) {
  EXPECT_LT(gelman_rubin({normal_draws(1, 2000, 0.0), normal_draws(2, 2000, 0.0)}), 1.05);
  EXPECT_LT(gelman_rubin({normal_draws(1, 2000, 0.0), normal_draws(2, 2000, 0.0)}, RhatVariant::Split), 1.05);
}

TEST(GelmanRubin, SeparatedMeans) {
  EXPECT_GT(gelman_rubin({normal_draws(3, 2000, 0.0), normal_draws(4, 2000, 5.0)}), 1.5);
}

TEST(GelmanRubin, ClassicFormulaByHand) {
  VectorXd a(10), b(10);
  a << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
  b = a.array() + 1.0;
  // W = var(1..10) = 55/6, B = n * var(5.5, 6.5) = 10 * 0.5 = 5
  const double W = 55.0 / 6.0, B = 5.0, n = 10.0;
  EXPECT_NEAR(gelman_rubin({a, b}), std::sqrt(((n - 1) / n * W + B / n) / W), 1e-12);
}

TEST(GelmanRubin, PreconditionsThrow) {
  EXPECT_THROW(gelman_rubin({normal_draws(1, 100, 0.0)}), std::invalid_argument);
  EXPECT_THROW(gelman_rubin({normal_draws(1, 100, 0.0), normal_draws(2, 90, 0.0)}), std::invalid_argument);
}

TEST(Autocorr, WhiteNoiseBand) {
  const VectorXd x = normal_draws(5, 5000, 0.0);
  const VectorXd acf = autocorr(x, 20);
  EXPECT_EQ(acf(0), 1.0);
  for (int lag = 1; lag <= 20; ++lag) EXPECT_LT(std::abs(acf(lag)), 3.0 / std::sqrt(5000.0));
}

TEST(Autocorr, Ar1) {
  Rng rng(6);
  VectorXd x(10000);
  x(0) = 0.0;
  for (int t = 1; t < 10000; ++t) x(t) = 0.9 * x(t - 1) + rng.normal();
  const VectorXd acf = autocorr(x, 3);
  EXPECT_EQ(acf(0), 1.0);
  EXPECT_NEAR(acf(1), 0.9, 0.05);
  EXPECT_NEAR(acf(2), 0.81, 0.07);
}

TEST(Autocorr, ConstantSeries) {
  const VectorXd acf = autocorr(VectorXd::Constant(30, 4.0), 3);
  EXPECT_EQ(acf(0), 1.0);
  EXPECT_EQ(acf(1), 0.0);
}
