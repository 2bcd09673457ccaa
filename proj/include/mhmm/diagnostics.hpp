#pragma once

#include <string>
#include <vector>

#include "mhmm/sampler.hpp"

namespace mhmm {

struct PosteriorSummary {
  double median = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double cci_low = 0.0;   // 2.5% quantile
  double cci_high = 0.0;  // 97.5% quantile
};

/// Sample quantile with linear interpolation between order statistics
/// (h = (n-1)p, the "type 7" rule).
double quantile(const VectorXd& values, double p);

PosteriorSummary summarize(const VectorXd& draws);
/// Throws std::out_of_range for unknown parameter names.
PosteriorSummary summarize(const Chain& chain, const std::string& parameter);
/// Summary over the pooled draws of several chains.
PosteriorSummary summarize(const std::vector<Chain>& chains, const std::string& parameter);

/// "MAP (SD)" and "[low, high]" cells with the given number of decimals.
std::string format_map_sd(const PosteriorSummary& s, int decimals = 3);
std::string format_cci(const PosteriorSummary& s, int decimals = 3);

enum class RhatVariant { Classic, Split };

/// Potential scale reduction from between/within-chain variances. Requires at
/// least two chains of equal length >= 10 (Split halves each chain first).
double gelman_rubin(const std::vector<VectorXd>& chains, RhatVariant variant = RhatVariant::Classic);
double gelman_rubin(const std::vector<Chain>& chains, const std::string& parameter,
                    RhatVariant variant = RhatVariant::Classic);

/// Sample autocorrelation for lags 0..max_lag, normalized by the lag-0 sum of
/// squares. A constant series gives 1 at lag 0 and 0 elsewhere.
VectorXd autocorr(const VectorXd& draws, int max_lag);
VectorXd autocorr(const Chain& chain, const std::string& parameter, int max_lag);

}  // namespace mhmm
