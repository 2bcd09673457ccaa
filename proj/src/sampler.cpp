#include "mhmm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>

#include "mhmm/log.hpp"

namespace mhmm {

namespace {

constexpr std::uint64_t kStartStream = 0x5354415254ULL;  // "START"

bool all_finite(const SamplerState& s) {
  const auto& g = s.group;
  if (!g.emiss_mean.allFinite() || !g.emiss_rand_var.allFinite() || !g.emiss_resid_var.allFinite() ||
      !g.tpm_intercepts.allFinite() || !g.tpm_rand_var.allFinite())
    return false;
  for (const auto& m : s.subj_mean)
    if (!m.allFinite()) return false;
  for (const auto& a : s.subj_alpha)
    if (!a.allFinite()) return false;
  return true;
}

/// log of mnl_row without forming the probabilities.
VectorXd log_mnl_row(const VectorXd& intercepts) {
  const Eigen::Index m = intercepts.size() + 1;
  VectorXd logits(m);
  logits(0) = 0.0;
  logits.tail(m - 1) = intercepts;
  const double shift = logits.maxCoeff();
  const double lse = shift + std::log((logits.array() - shift).exp().sum());
  return logits.array() - lse;
}

double log_initial_prob(const MatrixXd& tpm, int first_state) {
  return std::log(stationary_distribution(tpm).pi(first_state));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  return parts;
}

}  // namespace

void Hyperpriors::validate(int n_dep, int n_states) const {
  if (mu0.size() != 0 && (mu0.rows() != n_dep || mu0.cols() != n_states))
    throw std::invalid_argument("Hyperpriors: mu0 must be n_dep x m");
  if (!(k0 > 0 && nu > 0 && v > 0 && alpha0 > 0 && beta0 > 0))
    throw std::invalid_argument("Hyperpriors: k0, nu, v, alpha0, beta0 must be positive");
  if (!(tpm_int_prior_var > 0 && tpm_var_prior_shape > 0 && tpm_var_prior_scale > 0))
    throw std::invalid_argument("Hyperpriors: TPM prior variances must be positive");
}

void StartValues::validate() const {
  if (emiss_mean.rows() != emiss_var.rows() || emiss_mean.cols() != emiss_var.cols())
    throw std::invalid_argument("StartValues: emission mean/var shape mismatch");
  if (!(emiss_var.array() > 0.0).all()) throw std::invalid_argument("StartValues: variances must be positive");
  if (tpm.rows() != emiss_mean.cols()) throw std::invalid_argument("StartValues: tpm size differs from m");
  if (auto check = validate_tpm(tpm); !check) throw std::invalid_argument("StartValues: " + check.message);
}

void McmcConfig::validate() const {
  if (n_iter < 1) throw std::invalid_argument("McmcConfig: n_iter must be >= 1");
  if (burn_in < 0 || burn_in >= n_iter) throw std::invalid_argument("McmcConfig: need 0 <= burn_in < n_iter");
  if (thin < 1) throw std::invalid_argument("McmcConfig: thin must be >= 1");
  if (n_chains < 1) throw std::invalid_argument("McmcConfig: n_chains must be >= 1");
  if (adapt_window < 1) throw std::invalid_argument("McmcConfig: adapt_window must be >= 1");
  if (!(initial_proposal_sd > 0)) throw std::invalid_argument("McmcConfig: initial_proposal_sd must be > 0");
  for (const auto& s : start) s.validate();
}

std::vector<std::string> group_parameter_names(int n_dep, int n_states, bool include_gamma) {
  std::vector<std::string> names;
  for (const char* p : {"emiss_mean", "emiss_rand_var", "emiss_resid_var"})
    for (int k = 1; k <= n_dep; ++k)
      for (int m = 1; m <= n_states; ++m)
        names.push_back(std::string(p) + "." + std::to_string(k) + "." + std::to_string(m));
  for (const char* p : {"alpha", "psi_var"})
    for (int i = 1; i <= n_states; ++i)
      for (int j = 2; j <= n_states; ++j)
        names.push_back(std::string(p) + "." + std::to_string(i) + "." + std::to_string(j));
  if (include_gamma)
    for (int i = 1; i <= n_states; ++i)
      for (int j = 1; j <= n_states; ++j) names.push_back("gamma." + std::to_string(i) + "." + std::to_string(j));
  return names;
}

double group_parameter_value(const GroupParams& g, const std::string& name) {
  const auto parts = split(name, '.');
  if (parts.size() != 3) throw std::out_of_range("unknown parameter: " + name);
  int a = 0, b = 0;
  try {
    a = std::stoi(parts[1]);
    b = std::stoi(parts[2]);
  } catch (const std::exception&) {
    throw std::out_of_range("unknown parameter: " + name);
  }
  const int m = g.n_states();
  const int k = g.n_dep();
  const std::string& p = parts[0];
  auto emiss = [&](const MatrixXd& mat) {
    if (a < 1 || a > k || b < 1 || b > m) throw std::out_of_range("parameter index out of range: " + name);
    return mat(a - 1, b - 1);
  };
  auto tpm_cell = [&](const MatrixXd& mat) {
    if (a < 1 || a > m || b < 2 || b > m) throw std::out_of_range("parameter index out of range: " + name);
    return mat(a - 1, b - 2);
  };
  if (p == "emiss_mean") return emiss(g.emiss_mean);
  if (p == "emiss_rand_var") return emiss(g.emiss_rand_var);
  if (p == "emiss_resid_var") return emiss(g.emiss_resid_var);
  if (p == "alpha") return tpm_cell(g.tpm_intercepts);
  if (p == "psi_var") return tpm_cell(g.tpm_rand_var);
  if (p == "gamma") {
    if (a < 1 || a > m || b < 1 || b > m) throw std::out_of_range("parameter index out of range: " + name);
    return mnl_row(g.tpm_intercepts.row(a - 1).transpose())(b - 1);
  }
  throw std::out_of_range("unknown parameter: " + name);
}

std::vector<std::string> Chain::parameter_names(bool include_gamma) const {
  return group_parameter_names(spec.n_dep, spec.n_states, include_gamma);
}

VectorXd Chain::trace(const std::string& name) const {
  VectorXd out(static_cast<Eigen::Index>(draws.size()));
  for (std::size_t d = 0; d < draws.size(); ++d)
    out(static_cast<Eigen::Index>(d)) = group_parameter_value(draws[d].group, name);
  return out;
}

StartValues generate_start_values(const GroupParams& group_ref, Rng& rng) {
  const int m = group_ref.n_states();
  StartValues start;
  start.emiss_mean = group_ref.emiss_mean;
  for (Eigen::Index c = 0; c < start.emiss_mean.cols(); ++c)
    for (Eigen::Index k = 0; k < start.emiss_mean.rows(); ++k) start.emiss_mean(k, c) += rng.uniform(-0.2, 0.2);
  start.emiss_var = group_ref.emiss_resid_var;
  start.tpm.resize(m, m);
  for (int i = 0; i < m; ++i) {
    const double diag = rng.uniform(0.5, 0.8);
    start.tpm.row(i).setConstant((1.0 - diag) / static_cast<double>(m - 1));
    start.tpm(i, i) = diag;
  }
  return start;
}

namespace {

/// Lloyd iterations on standardized pooled data, seeded at quantiles of the
/// first variable.
std::vector<int> kmeans_labels(const MatrixXd& pooled, int n_states) {
  const Eigen::Index n = pooled.rows();
  const Eigen::RowVectorXd mu = pooled.colwise().mean();
  Eigen::RowVectorXd sd = ((pooled.rowwise() - mu).array().square().colwise().sum() /
                           std::max<double>(1.0, static_cast<double>(n - 1)))
                              .sqrt();
  sd = sd.unaryExpr([](double s) { return s > 0 ? s : 1.0; });
  const MatrixXd z = (pooled.rowwise() - mu).array().rowwise() / sd.array();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return z(a, 0) < z(b, 0); });
  MatrixXd centers(n_states, z.cols());
  for (int c = 0; c < n_states; ++c) {
    const auto q = static_cast<std::size_t>((c + 0.5) / n_states * static_cast<double>(n));
    centers.row(c) = z.row(order[std::min<std::size_t>(q, static_cast<std::size_t>(n - 1))]);
  }

  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (Eigen::Index t = 0; t < n; ++t) {
      Eigen::Index best = 0;
      (centers.rowwise() - z.row(t)).rowwise().squaredNorm().minCoeff(&best);
      if (labels[t] != best) {
        labels[t] = static_cast<int>(best);
        changed = true;
      }
    }
    MatrixXd sums = MatrixXd::Zero(n_states, z.cols());
    VectorXd counts = VectorXd::Zero(n_states);
    for (Eigen::Index t = 0; t < n; ++t) {
      sums.row(labels[t]) += z.row(t);
      counts(labels[t]) += 1.0;
    }
    for (int c = 0; c < n_states; ++c)
      if (counts(c) > 0) centers.row(c) = sums.row(c) / counts(c);
    if (!changed && iter > 0) break;
  }

  // Relabel so clusters are ordered by their first-variable center.
  std::vector<int> rank(static_cast<std::size_t>(n_states));
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) { return centers(a, 0) < centers(b, 0); });
  std::vector<int> relabel(static_cast<std::size_t>(n_states));
  for (int r = 0; r < n_states; ++r) relabel[rank[r]] = r;
  for (auto& l : labels) l = relabel[l];
  return labels;
}

}  // namespace

StateMoments state_sample_moments(const Dataset& data, int n_states) {
  const int n_dep = data.n_dep();
  Eigen::Index total = 0;
  for (const auto& s : data.subjects) total += s.obs.rows();
  MatrixXd pooled(total, n_dep);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(total));
  Eigen::Index row = 0;
  for (const auto& s : data.subjects) {
    pooled.middleRows(row, s.obs.rows()) = s.obs;
    row += s.obs.rows();
    if (s.states) labels.insert(labels.end(), s.states->begin(), s.states->end());
  }
  if (!data.has_states()) labels = kmeans_labels(pooled, n_states);

  StateMoments out{MatrixXd::Zero(n_dep, n_states), MatrixXd::Zero(n_dep, n_states)};
  VectorXd counts = VectorXd::Zero(n_states);
  for (Eigen::Index t = 0; t < total; ++t) {
    out.mean.col(labels[t]) += pooled.row(t).transpose();
    counts(labels[t]) += 1.0;
  }
  for (int c = 0; c < n_states; ++c)
    if (counts(c) > 0) out.mean.col(c) /= counts(c);
  for (Eigen::Index t = 0; t < total; ++t)
    out.var.col(labels[t]).array() += (pooled.row(t).transpose() - out.mean.col(labels[t])).array().square();
  for (int c = 0; c < n_states; ++c)
    out.var.col(c) = counts(c) > 1 ? VectorXd(out.var.col(c) / (counts(c) - 1.0)) : VectorXd::Ones(n_dep);
  out.var = out.var.cwiseMax(1e-6);
  return out;
}

StatePath sample_states_ffbs(const MatrixXd& logdens, const MatrixXd& tpm, const VectorXd& delta, Rng& rng) {
  const ForwardPass fwd = forward_filter(logdens, tpm, delta);
  const Eigen::Index n_t = logdens.rows();
  StatePath path(static_cast<std::size_t>(n_t));
  path[static_cast<std::size_t>(n_t - 1)] = rng.categorical(fwd.filtered.row(n_t - 1));
  for (Eigen::Index t = n_t - 2; t >= 0; --t) {
    const int next = path[static_cast<std::size_t>(t + 1)];
    const VectorXd w = fwd.filtered.row(t).transpose().cwiseProduct(tpm.col(next));
    path[static_cast<std::size_t>(t)] = rng.categorical(w);
  }
  return path;
}

StatePath sample_states_ffbs(const MatrixXd& obs, const MatrixXd& tpm, const VectorXd& delta,
                             const EmissionPointParams& params, Rng& rng) {
  check_chain_inputs(tpm, delta);
  return sample_states_ffbs(emission_logdensity_matrix(obs, params), tpm, delta, rng);
}

EmissionUpdateReport update_emission_block(const Dataset& data, const Hyperpriors& hyper, SamplerState& state,
                                           Rng& rng) {
  GroupParams& g = state.group;
  const int n_subj = data.n_subjects();
  const Eigen::Index n_dep = g.emiss_mean.rows();
  const Eigen::Index m = g.emiss_mean.cols();

  // Subject means from their normal full conditionals.
  MatrixXd occupancy = MatrixXd::Zero(n_subj, m);
  for (int n = 0; n < n_subj; ++n) {
    const MatrixXd& obs = data.subjects[n].obs;
    const StatePath& path = state.states[n];
    MatrixXd sums = MatrixXd::Zero(n_dep, m);
    for (Eigen::Index t = 0; t < obs.rows(); ++t) {
      sums.col(path[t]) += obs.row(t).transpose();
      occupancy(n, path[t]) += 1.0;
    }
    for (Eigen::Index c = 0; c < m; ++c)
      for (Eigen::Index k = 0; k < n_dep; ++k) {
        const double prec = 1.0 / g.emiss_rand_var(k, c) + occupancy(n, c) / g.emiss_resid_var(k, c);
        const double mean =
            (g.emiss_mean(k, c) / g.emiss_rand_var(k, c) + sums(k, c) / g.emiss_resid_var(k, c)) / prec;
        state.subj_mean[n](k, c) = rng.normal(mean, std::sqrt(1.0 / prec));
      }
  }

  // Group means and between-subject variances (normal-inverse-gamma).
  const double big_n = static_cast<double>(n_subj);
  const double k_post = hyper.k0 + big_n;
  const double nu_post = hyper.nu + big_n;
  for (Eigen::Index c = 0; c < m; ++c)
    for (Eigen::Index k = 0; k < n_dep; ++k) {
      double ybar = 0.0;
      for (int n = 0; n < n_subj; ++n) ybar += state.subj_mean[n](k, c);
      ybar /= big_n;
      double ss = 0.0;
      for (int n = 0; n < n_subj; ++n) ss += std::pow(state.subj_mean[n](k, c) - ybar, 2);
      const double mu0 = hyper.mu0(k, c);
      const double scale =
          0.5 * (hyper.nu * hyper.v + ss + hyper.k0 * big_n / k_post * (ybar - mu0) * (ybar - mu0));
      const double var_u = rng.inv_gamma(0.5 * nu_post, scale);
      g.emiss_rand_var(k, c) = var_u;
      g.emiss_mean(k, c) = rng.normal((hyper.k0 * mu0 + big_n * ybar) / k_post, std::sqrt(var_u / k_post));
    }

  // Residual variances, pooled over subjects.
  EmissionUpdateReport report;
  const VectorXd visits = occupancy.colwise().sum().transpose();
  MatrixXd ss = MatrixXd::Zero(n_dep, m);
  for (int n = 0; n < n_subj; ++n) {
    const MatrixXd& obs = data.subjects[n].obs;
    const StatePath& path = state.states[n];
    for (Eigen::Index t = 0; t < obs.rows(); ++t)
      ss.col(path[t]).array() += (obs.row(t).transpose() - state.subj_mean[n].col(path[t])).array().square();
  }
  for (Eigen::Index c = 0; c < m; ++c) {
    if (visits(c) == 0.0) {
      ++report.empty_states;
      continue;
    }
    for (Eigen::Index k = 0; k < n_dep; ++k)
      g.emiss_resid_var(k, c) = rng.inv_gamma(hyper.alpha0 + 0.5 * visits(c), hyper.beta0 + 0.5 * ss(k, c));
  }
  return report;
}

Eigen::MatrixXd transition_counts(const StatePath& path, int n_states) {
  MatrixXd counts = MatrixXd::Zero(n_states, n_states);
  for (std::size_t t = 1; t < path.size(); ++t) counts(path[t - 1], path[t]) += 1.0;
  return counts;
}

MetropolisTuning::MetropolisTuning(int n_subjects, int n_states, double initial_sd)
    : sd(static_cast<std::size_t>(n_subjects), MatrixXd::Constant(n_states, n_states - 1, initial_sd)),
      window_accept(static_cast<std::size_t>(n_subjects), MatrixXd::Zero(n_states, n_states - 1)),
      accepted(VectorXd::Zero(n_states)),
      proposed(VectorXd::Zero(n_states)) {}

void MetropolisTuning::adapt(int window, double low, double high) {
  if (++window_sweeps < window) return;
  for (std::size_t n = 0; n < sd.size(); ++n) {
    const MatrixXd rate = window_accept[n] / static_cast<double>(window_sweeps);
    for (Eigen::Index i = 0; i < rate.rows(); ++i)
      for (Eigen::Index j = 0; j < rate.cols(); ++j) {
        if (rate(i, j) < low) sd[n](i, j) *= 0.75;
        else if (rate(i, j) > high) sd[n](i, j) *= 1.0 / 0.75;
      }
    window_accept[n].setZero();
  }
  window_sweeps = 0;
}

VectorXd MetropolisTuning::acceptance_rates() const {
  VectorXd out = VectorXd::Zero(accepted.size());
  for (Eigen::Index i = 0; i < accepted.size(); ++i)
    if (proposed(i) > 0) out(i) = accepted(i) / proposed(i);
  return out;
}

void update_tpm_block(const Hyperpriors& hyper, SamplerState& state, MetropolisTuning& tuning, Rng& rng,
                      bool record_acceptance) {
  GroupParams& g = state.group;
  const int m = static_cast<int>(g.tpm_intercepts.rows());
  const int n_subj = static_cast<int>(state.subj_alpha.size());

  for (int n = 0; n < n_subj; ++n) {
    MatrixXd& alpha = state.subj_alpha[n];
    const StatePath& path = state.states[n];
    const MatrixXd counts = transition_counts(path, m);
    const int first = path.front();
    MatrixXd tpm = tpm_from_intercepts(alpha);
    double cur_init = log_initial_prob(tpm, first);

    for (int i = 0; i < m; ++i) {
      VectorXd row = alpha.row(i).transpose();
      double cur_row = counts.row(i).dot(log_mnl_row(row));
      for (int j = 0; j < m - 1; ++j) {
        VectorXd prop = row;
        prop(j) += tuning.sd[n](i, j) * rng.normal();
        const double prop_row = counts.row(i).dot(log_mnl_row(prop));
        MatrixXd prop_tpm = tpm;
        prop_tpm.row(i) = mnl_row(prop).transpose();
        const double prop_init = log_initial_prob(prop_tpm, first);
        const double var = g.tpm_rand_var(i, j);
        const double mu = g.tpm_intercepts(i, j);
        const double log_prior_diff =
            -0.5 * ((prop(j) - mu) * (prop(j) - mu) - (row(j) - mu) * (row(j) - mu)) / var;
        const double log_ratio = prop_row + prop_init - cur_row - cur_init + log_prior_diff;
        const bool accept = std::log(rng.uniform()) < log_ratio;
        if (accept) {
          row = prop;
          cur_row = prop_row;
          cur_init = prop_init;
          tpm = prop_tpm;
          tuning.window_accept[n](i, j) += 1.0;
        }
        if (record_acceptance) {
          tuning.proposed(i) += 1.0;
          if (accept) tuning.accepted(i) += 1.0;
        }
      }
      alpha.row(i) = row.transpose();
    }
  }

  // Group intercepts and random-effect variances.
  const double big_n = static_cast<double>(n_subj);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m - 1; ++j) {
      double sum = 0.0;
      for (int n = 0; n < n_subj; ++n) sum += state.subj_alpha[n](i, j);
      const double var = g.tpm_rand_var(i, j);
      const double prec = 1.0 / hyper.tpm_int_prior_var + big_n / var;
      const double mean = (hyper.tpm_int_prior_mean / hyper.tpm_int_prior_var + sum / var) / prec;
      g.tpm_intercepts(i, j) = rng.normal(mean, std::sqrt(1.0 / prec));
      double ss = 0.0;
      for (int n = 0; n < n_subj; ++n) ss += std::pow(state.subj_alpha[n](i, j) - g.tpm_intercepts(i, j), 2);
      g.tpm_rand_var(i, j) =
          rng.inv_gamma(hyper.tpm_var_prior_shape + 0.5 * big_n, hyper.tpm_var_prior_scale + 0.5 * ss);
    }
}

Hyperpriors resolve_hyperpriors(const Dataset& data, int n_states, Hyperpriors hyper) {
  if (hyper.mu0.size() == 0) hyper.mu0 = state_sample_moments(data, n_states).mean;
  hyper.validate(data.n_dep(), n_states);
  return hyper;
}

namespace {

Chain run_chain(const Dataset& data, const ModelSpec& spec, const Hyperpriors& hyper, const McmcConfig& config,
                const StartValues& start, int chain_index) {
  const int m = spec.n_states;
  const int n_subj = data.n_subjects();
  const std::uint64_t seed = derive_seed(config.seed, {static_cast<std::uint64_t>(chain_index)});
  Rng rng(seed);

  SamplerState state;
  state.group.emiss_mean = start.emiss_mean;
  state.group.emiss_resid_var = start.emiss_var;
  state.group.emiss_rand_var = MatrixXd::Constant(spec.n_dep, m, hyper.v);
  state.group.tpm_intercepts = intercepts_from_tpm(start.tpm);
  state.group.tpm_rand_var = MatrixXd::Constant(m, m - 1, hyper.tpm_var_prior_scale);
  state.subj_mean.assign(static_cast<std::size_t>(n_subj), start.emiss_mean);
  state.subj_alpha.assign(static_cast<std::size_t>(n_subj), state.group.tpm_intercepts);
  state.states.resize(static_cast<std::size_t>(n_subj));

  Chain chain;
  chain.spec = spec;
  chain.meta.chain_index = chain_index;
  chain.meta.seed = seed;
  chain.meta.n_iter = config.n_iter;
  chain.meta.burn_in = config.burn_in;
  chain.meta.thin = config.thin;
  chain.meta.start = start;
  {
    std::ostringstream scheme;
    scheme << "component-wise random-walk Metropolis, initial sd " << config.initial_proposal_sd
           << ", batch adaptation every " << config.adapt_window << " sweeps toward acceptance ["
           << config.target_accept_low << ", " << config.target_accept_high << "] during burn-in only";
    chain.meta.proposal_scheme = scheme.str();
  }
  chain.draws.reserve(static_cast<std::size_t>(config.stored_draws()));
  chain.state_counts.assign(static_cast<std::size_t>(n_subj), Eigen::MatrixXi());
  for (int n = 0; n < n_subj; ++n)
    chain.state_counts[n] = Eigen::MatrixXi::Zero(data.subjects[n].obs.rows(), m);

  MetropolisTuning tuning(n_subj, m, config.initial_proposal_sd);
  bool warned_empty = false;

  for (int it = 0; it < config.n_iter; ++it) {
    // 1. latent states
    for (int n = 0; n < n_subj; ++n) {
      const MatrixXd tpm = state.subject_tpm(n);
      const VectorXd delta = stationary_distribution(tpm).pi;
      const MatrixXd& obs = data.subjects[n].obs;
      MatrixXd logdens = config.use_emissions
                             ? emission_logdensity_matrix(obs, {state.subj_mean[n], state.group.emiss_resid_var})
                             : MatrixXd::Zero(obs.rows(), m);
      if (!logdens.allFinite()) throw SamplerError(it, "states", "non-finite emission density");
      state.states[n] = sample_states_ffbs(logdens, tpm, delta, rng);
    }

    // 2. emission parameters
    const auto report = update_emission_block(data, hyper, state, rng);
    if (report.empty_states > 0) {
      ++chain.meta.empty_state_sweeps;
      if (!warned_empty) {
        warn("chain " + std::to_string(chain_index) + ": state with no occupancy at iteration " +
             std::to_string(it) + "; subject means drawn from the prior predictive");
        warned_empty = true;
      }
    }
    if (!all_finite(state)) throw SamplerError(it, "emission", "non-finite parameter draw");

    // 3. transition parameters
    const bool burning = it < config.burn_in;
    update_tpm_block(hyper, state, tuning, rng, !burning);
    if (burning) tuning.adapt(config.adapt_window, config.target_accept_low, config.target_accept_high);
    if (!all_finite(state)) throw SamplerError(it, "tpm", "non-finite parameter draw");

    if (!burning && (it - config.burn_in + 1) % config.thin == 0) {
      Draw draw;
      draw.group = state.group;
      draw.subjects.resize(static_cast<std::size_t>(n_subj));
      for (int n = 0; n < n_subj; ++n) {
        SubjectParams& sp = draw.subjects[n];
        sp.mean = state.subj_mean[n];
        sp.tpm = state.subject_tpm(n);
        const MatrixXd logdens =
            emission_logdensity_matrix(data.subjects[n].obs, {sp.mean, state.group.emiss_resid_var});
        draw.loglik += forward_filter(logdens, sp.tpm, stationary_distribution(sp.tpm).pi).loglik;
        for (std::size_t t = 0; t < state.states[n].size(); ++t)
          chain.state_counts[n](static_cast<Eigen::Index>(t), state.states[n][t]) += 1;
      }
      if (!std::isfinite(draw.loglik)) throw SamplerError(it, "loglik", "non-finite log-likelihood");
      chain.draws.push_back(std::move(draw));
    }
  }
  chain.meta.acceptance = tuning.acceptance_rates();
  chain.last_states = state.states;
  return chain;
}

}  // namespace

std::vector<Chain> run_mcmc(const Dataset& data, const ModelSpec& spec, const Hyperpriors& hyper_in,
                            const McmcConfig& config) {
  spec.validate();
  config.validate();
  data.validate(spec.n_states);
  if (data.n_dep() != spec.n_dep) throw std::invalid_argument("run_mcmc: dataset n_dep differs from model");
  const Hyperpriors hyper = resolve_hyperpriors(data, spec.n_states, hyper_in);

  GroupParams reference;
  if (config.start_reference) {
    reference = *config.start_reference;
  } else {
    const StateMoments moments = state_sample_moments(data, spec.n_states);
    reference.emiss_mean = moments.mean;
    reference.emiss_resid_var = moments.var;
  }

  std::vector<StartValues> starts;
  for (int c = 0; c < config.n_chains; ++c) {
    if (c < static_cast<int>(config.start.size())) {
      starts.push_back(config.start[c]);
    } else {
      Rng start_rng(derive_seed(config.seed, {static_cast<std::uint64_t>(c), kStartStream}));
      starts.push_back(generate_start_values(reference, start_rng));
    }
    starts.back().validate();
  }

  std::vector<std::future<Chain>> futures;
  for (int c = 0; c < config.n_chains; ++c)
    futures.push_back(std::async(std::launch::async, [&, c] { return run_chain(data, spec, hyper, config, starts[c], c); }));
  std::vector<Chain> chains;
  for (auto& f : futures) chains.push_back(f.get());
  return chains;
}

}  // namespace mhmm
