#include "mhmm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace mhmm {

double quantile(const VectorXd& values, double p) {
  if (values.size() == 0) throw std::invalid_argument("quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile: p outside [0, 1]");
  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

PosteriorSummary summarize(const VectorXd& draws) {
  if (draws.size() == 0) throw std::invalid_argument("summarize: no draws");
  PosteriorSummary s;
  s.mean = draws.mean();
  s.sd = draws.size() > 1
             ? std::sqrt((draws.array() - s.mean).square().sum() / static_cast<double>(draws.size() - 1))
             : 0.0;
  s.median = quantile(draws, 0.5);
  s.cci_low = quantile(draws, 0.025);
  s.cci_high = quantile(draws, 0.975);
  return s;
}

PosteriorSummary summarize(const Chain& chain, const std::string& parameter) {
  return summarize(chain.trace(parameter));
}

PosteriorSummary summarize(const std::vector<Chain>& chains, const std::string& parameter) {
  std::vector<VectorXd> traces;
  Eigen::Index total = 0;
  for (const auto& c : chains) {
    traces.push_back(c.trace(parameter));
    total += traces.back().size();
  }
  VectorXd pooled(total);
  Eigen::Index offset = 0;
  for (const auto& t : traces) {
    pooled.segment(offset, t.size()) = t;
    offset += t.size();
  }
  return summarize(pooled);
}

std::string format_map_sd(const PosteriorSummary& s, int decimals) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f (%.*f)", decimals, s.median, decimals, s.sd);
  return buf;
}

std::string format_cci(const PosteriorSummary& s, int decimals) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "[%.*f, %.*f]", decimals, s.cci_low, decimals, s.cci_high);
  return buf;
}

double gelman_rubin(const std::vector<VectorXd>& chains_in, RhatVariant variant) {
  if (chains_in.size() < 2) throw std::invalid_argument("gelman_rubin: need at least two chains");
  const Eigen::Index len = chains_in.front().size();
  for (const auto& c : chains_in)
    if (c.size() != len) throw std::invalid_argument("gelman_rubin: chains differ in length");
  if (len < 10) throw std::invalid_argument("gelman_rubin: chains need at least 10 draws");

  std::vector<VectorXd> chains;
  if (variant == RhatVariant::Split) {
    const Eigen::Index half = len / 2;
    for (const auto& c : chains_in) {
      chains.push_back(c.head(half));
      chains.push_back(c.segment(len - half, half));
    }
  } else {
    chains = chains_in;
  }

  const double n = static_cast<double>(chains.front().size());
  const double n_chains = static_cast<double>(chains.size());
  VectorXd means(static_cast<Eigen::Index>(chains.size()));
  double within = 0.0;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    means(static_cast<Eigen::Index>(c)) = chains[c].mean();
    within += (chains[c].array() - chains[c].mean()).square().sum() / (n - 1.0);
  }
  within /= n_chains;
  const double between = n * (means.array() - means.mean()).square().sum() / (n_chains - 1.0);
  if (within <= 0.0) return between <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double pooled_var = (n - 1.0) / n * within + between / n;
  return std::sqrt(pooled_var / within);
}

double gelman_rubin(const std::vector<Chain>& chains, const std::string& parameter, RhatVariant variant) {
  std::vector<VectorXd> traces;
  for (const auto& c : chains) traces.push_back(c.trace(parameter));
  return gelman_rubin(traces, variant);
}

VectorXd autocorr(const VectorXd& draws, int max_lag) {
  const Eigen::Index n = draws.size();
  if (max_lag < 0 || max_lag >= n) throw std::invalid_argument("autocorr: need 0 <= max_lag < length");
  const Eigen::ArrayXd centered = draws.array() - draws.mean();
  const double c0 = centered.square().sum();
  VectorXd acf = VectorXd::Zero(max_lag + 1);
  acf(0) = 1.0;
  if (c0 <= 0.0) return acf;
  for (int lag = 1; lag <= max_lag; ++lag)
    acf(lag) = (centered.head(n - lag) * centered.tail(n - lag)).sum() / c0;
  return acf;
}

VectorXd autocorr(const Chain& chain, const std::string& parameter, int max_lag) {
  return autocorr(chain.trace(parameter), max_lag);
}

}  // namespace mhmm
