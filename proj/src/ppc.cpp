#include "mhmm/ppc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mhmm/log.hpp"
#include "mhmm/parallel.hpp"

namespace mhmm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kSelectStream = 0x53454c454354ULL;  // "SELECT"

struct ReplicateStats {
  MatrixXd means;
  VectorXd variance;
  std::vector<MatrixXd> periods;
};

ReplicateStats compute_stats(const Dataset& data, int n_states, int n_periods) {
  return {state_means_statistic(data, n_states), total_variance_statistic(data),
          period_tpm_statistic(data, n_states, n_periods)};
}

void require_states(const Dataset& observed) {
  if (!observed.has_states())
    throw std::invalid_argument("posterior predictive check needs state annotations; decode the states first");
}

std::string idx(int a) { return std::to_string(a + 1); }

std::vector<PpcResult> assemble(const ReplicateStats& obs, const std::vector<ReplicateStats>& reps) {
  std::vector<PpcResult> out;
  const auto n_rep = static_cast<Eigen::Index>(reps.size());
  auto collect = [&](auto&& get) {
    VectorXd v(n_rep);
    for (Eigen::Index r = 0; r < n_rep; ++r) v(r) = get(reps[static_cast<std::size_t>(r)]);
    return v;
  };
  for (Eigen::Index c = 0; c < obs.means.cols(); ++c)
    for (Eigen::Index k = 0; k < obs.means.rows(); ++k)
      out.push_back(make_ppc_result("state_mean." + idx(static_cast<int>(k)) + "." + idx(static_cast<int>(c)),
                                    obs.means(k, c), collect([&](const ReplicateStats& s) { return s.means(k, c); })));
  for (Eigen::Index k = 0; k < obs.variance.size(); ++k)
    out.push_back(make_ppc_result("total_var." + idx(static_cast<int>(k)), obs.variance(k),
                                  collect([&](const ReplicateStats& s) { return s.variance(k); })));
  for (std::size_t p = 0; p < obs.periods.size(); ++p)
    for (Eigen::Index i = 0; i < obs.periods[p].rows(); ++i)
      for (Eigen::Index j = 0; j < obs.periods[p].cols(); ++j)
        out.push_back(make_ppc_result(
            "period_tpm." + idx(static_cast<int>(p)) + "." + idx(static_cast<int>(i)) + "." + idx(static_cast<int>(j)),
            obs.periods[p](i, j), collect([&](const ReplicateStats& s) { return s.periods[p](i, j); })));
  return out;
}

}  // namespace

double PpcResult::replicate_mean() const {
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index r = 0; r < replicates.size(); ++r)
    if (std::isfinite(replicates(r))) {
      sum += replicates(r);
      ++n;
    }
  return n > 0 ? sum / n : kNaN;
}

GroupParams replicate_params(const GroupParams& draw, double q_var) {
  GroupParams g = draw;
  for (Eigen::Index k = 0; k < g.emiss_rand_var.rows(); ++k) g.emiss_rand_var.row(k).setConstant(draw.emiss_rand_var.row(k).mean());
  g.tpm_rand_var.setConstant(q_var);
  return g;
}

std::vector<int> select_draws(int n_available, int n_draws, Rng& rng) {
  if (n_available < 1) throw std::invalid_argument("select_draws: chain has no draws");
  std::vector<int> out(static_cast<std::size_t>(n_draws));
  if (n_available >= n_draws) {
    std::vector<int> pool(static_cast<std::size_t>(n_available));
    std::iota(pool.begin(), pool.end(), 0);
    // Partial Fisher-Yates.
    for (int r = 0; r < n_draws; ++r) {
      const int pick = r + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n_available - r));
      std::swap(pool[r], pool[pick]);
      out[r] = pool[r];
    }
  } else {
    for (auto& o : out) o = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n_available));
  }
  return out;
}

SimulatedData ppc_replicate(const GroupParams& draw, const PpcConfig& config, int r) {
  ScenarioSpec scenario;
  scenario.id = "ppc";
  scenario.group = replicate_params(draw, config.q_var);
  scenario.n_subjects = config.n_subjects;
  scenario.n_occasions = config.n_occasions;
  scenario.seed = config.seed;
  return simulate_dataset(scenario, r);
}

std::vector<SimulatedData> ppc_replicates(const std::vector<Draw>& draws, const PpcConfig& config) {
  Rng select_rng(derive_seed(config.seed, {kSelectStream}));
  const auto chosen = select_draws(static_cast<int>(draws.size()), config.n_draws, select_rng);
  std::vector<SimulatedData> out(chosen.size());
  parallel_for(config.n_draws, config.parallelism,
               [&](int r) { out[r] = ppc_replicate(draws[chosen[r]].group, config, r); });
  return out;
}

EmpiricalTpm empirical_tpm(const StatePath& states, int n_states) {
  EmpiricalTpm out;
  out.counts = transition_counts(states, n_states);
  out.tpm = MatrixXd::Constant(n_states, n_states, kNaN);
  out.row_defined.assign(static_cast<std::size_t>(n_states), false);
  for (int i = 0; i < n_states; ++i) {
    const double total = out.counts.row(i).sum();
    if (total > 0) {
      out.tpm.row(i) = out.counts.row(i) / total;
      out.row_defined[i] = true;
    }
  }
  return out;
}

MatrixXd state_means_statistic(const Dataset& data, int n_states) {
  require_states(data);
  const int n_dep = data.n_dep();
  MatrixXd sums = MatrixXd::Zero(n_dep, n_states);
  VectorXd counts = VectorXd::Zero(n_states);
  for (const auto& s : data.subjects)
    for (Eigen::Index t = 0; t < s.obs.rows(); ++t) {
      const int st = (*s.states)[static_cast<std::size_t>(t)];
      sums.col(st) += s.obs.row(t).transpose();
      counts(st) += 1.0;
    }
  for (int c = 0; c < n_states; ++c) sums.col(c) = counts(c) > 0 ? VectorXd(sums.col(c) / counts(c)) : VectorXd::Constant(n_dep, kNaN);
  return sums;
}

VectorXd total_variance_statistic(const Dataset& data) {
  const int n_dep = data.n_dep();
  VectorXd sum = VectorXd::Zero(n_dep);
  double n = 0.0;
  for (const auto& s : data.subjects) {
    sum += s.obs.colwise().sum().transpose();
    n += static_cast<double>(s.obs.rows());
  }
  const VectorXd mean = sum / n;
  VectorXd ss = VectorXd::Zero(n_dep);
  for (const auto& s : data.subjects) ss += (s.obs.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
  return n > 1 ? VectorXd(ss / (n - 1.0)) : VectorXd::Zero(n_dep);
}

std::vector<MatrixXd> period_tpm_statistic(const Dataset& data, int n_states, int n_periods) {
  require_states(data);
  if (n_periods < 1) throw std::invalid_argument("period_tpm_statistic: n_periods must be >= 1");
  std::vector<MatrixXd> counts(static_cast<std::size_t>(n_periods), MatrixXd::Zero(n_states, n_states));
  for (const auto& s : data.subjects) {
    const auto n_t = static_cast<int>(s.states->size());
    const int len = n_t / n_periods;
    for (int p = 0; p < n_periods; ++p) {
      const auto first = s.states->begin() + p * len;
      counts[static_cast<std::size_t>(p)] += empirical_tpm(StatePath(first, first + len), n_states).counts;
    }
  }
  std::vector<MatrixXd> out;
  for (const auto& c : counts) {
    MatrixXd tpm = MatrixXd::Constant(n_states, n_states, kNaN);
    for (int i = 0; i < n_states; ++i)
      if (c.row(i).sum() > 0) tpm.row(i) = c.row(i) / c.row(i).sum();
    out.push_back(std::move(tpm));
  }
  return out;
}

PpcResult make_ppc_result(std::string name, double observed, VectorXd replicates) {
  PpcResult res;
  res.statistic = std::move(name);
  res.observed = observed;
  res.replicates = std::move(replicates);
  if (!std::isfinite(observed)) {
    res.defined = false;
    res.p_posterior = kNaN;
    res.two_sided_p = kNaN;
    return res;
  }
  int n = 0;
  int ge = 0;
  for (Eigen::Index r = 0; r < res.replicates.size(); ++r) {
    const double v = res.replicates(r);
    if (!std::isfinite(v)) continue;
    ++n;
    if (v >= observed) ++ge;
  }
  if (n == 0) {
    res.defined = false;
    res.p_posterior = kNaN;
    res.two_sided_p = kNaN;
    return res;
  }
  res.p_posterior = static_cast<double>(ge) / n;
  res.two_sided_p = std::min(1.0, 2.0 * std::min(res.p_posterior, 1.0 - res.p_posterior));
  return res;
}

std::vector<PpcResult> ppc_emission_means(const Dataset& observed, const std::vector<Dataset>& replicates,
                                          int n_states) {
  require_states(observed);
  const MatrixXd obs = state_means_statistic(observed, n_states);
  std::vector<MatrixXd> reps;
  for (const auto& r : replicates) reps.push_back(state_means_statistic(r, n_states));
  std::vector<PpcResult> out;
  for (Eigen::Index c = 0; c < obs.cols(); ++c)
    for (Eigen::Index k = 0; k < obs.rows(); ++k) {
      VectorXd v(static_cast<Eigen::Index>(reps.size()));
      for (std::size_t r = 0; r < reps.size(); ++r) v(static_cast<Eigen::Index>(r)) = reps[r](k, c);
      out.push_back(make_ppc_result("state_mean." + idx(static_cast<int>(k)) + "." + idx(static_cast<int>(c)),
                                    obs(k, c), std::move(v)));
    }
  return out;
}

std::vector<PpcResult> ppc_total_variance(const Dataset& observed, const std::vector<Dataset>& replicates) {
  const VectorXd obs = total_variance_statistic(observed);
  std::vector<PpcResult> out;
  for (Eigen::Index k = 0; k < obs.size(); ++k) {
    VectorXd v(static_cast<Eigen::Index>(replicates.size()));
    for (std::size_t r = 0; r < replicates.size(); ++r)
      v(static_cast<Eigen::Index>(r)) = total_variance_statistic(replicates[r])(k);
    out.push_back(make_ppc_result("total_var." + idx(static_cast<int>(k)), obs(k), std::move(v)));
  }
  return out;
}

std::vector<PpcResult> ppc_tpm_homogeneity(const Dataset& observed, const std::vector<Dataset>& replicates,
                                           int n_states, int n_periods) {
  require_states(observed);
  for (const auto& s : observed.subjects)
    if (s.obs.rows() % n_periods != 0) {
      warn("ppc: series length not divisible by the number of periods; trailing occasions dropped");
      break;
    }
  const auto obs = period_tpm_statistic(observed, n_states, n_periods);
  std::vector<std::vector<MatrixXd>> reps;
  for (const auto& r : replicates) reps.push_back(period_tpm_statistic(r, n_states, n_periods));
  std::vector<PpcResult> out;
  for (int p = 0; p < n_periods; ++p)
    for (int i = 0; i < n_states; ++i)
      for (int j = 0; j < n_states; ++j) {
        VectorXd v(static_cast<Eigen::Index>(reps.size()));
        for (std::size_t r = 0; r < reps.size(); ++r) v(static_cast<Eigen::Index>(r)) = reps[r][p](i, j);
        out.push_back(make_ppc_result("period_tpm." + idx(p) + "." + idx(i) + "." + idx(j), obs[p](i, j), std::move(v)));
      }
  return out;
}

std::vector<PpcResult> run_ppc(const Dataset& observed, const std::vector<Draw>& draws, int n_states,
                               const PpcConfig& config) {
  require_states(observed);
  for (const auto& s : observed.subjects)
    if (s.obs.rows() % config.n_periods != 0) {
      warn("ppc: series length not divisible by the number of periods; trailing occasions dropped");
      break;
    }
  Rng select_rng(derive_seed(config.seed, {kSelectStream}));
  const auto chosen = select_draws(static_cast<int>(draws.size()), config.n_draws, select_rng);
  const ReplicateStats obs = compute_stats(observed, n_states, config.n_periods);
  std::vector<ReplicateStats> reps(chosen.size());
  parallel_for(config.n_draws, config.parallelism, [&](int r) {
    const SimulatedData rep = ppc_replicate(draws[chosen[r]].group, config, r);
    reps[r] = compute_stats(rep.data, n_states, config.n_periods);
  });
  return assemble(obs, reps);
}

}  // namespace mhmm
