#include "mhmm/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "mhmm/diagnostics.hpp"
#include "mhmm/inference.hpp"
#include "mhmm/io.hpp"
#include "mhmm/population.hpp"
#include "mhmm/ppc.hpp"

namespace mhmm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Field access with field-level error messages.

const json* find(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

template <typename T>
T read_as(const json& v, const std::string& field) {
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(field, "expected a number");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_integer()) throw ConfigError(field, "expected an integer");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(field, "expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(field, "expected a string");
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(field, e.what());
  }
}

template <typename T>
void read_opt(const json& j, const char* key, const std::string& prefix, T& target) {
  if (const json* v = find(j, key)) target = read_as<T>(*v, prefix + key);
}

template <typename T>
std::vector<T> read_list(const json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) throw ConfigError(field, "expected a non-empty list");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(read_as<T>(v[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

MatrixXd read_matrix(const json& v, const std::string& field) {
  try {
    return io::matrix_from_json(v, field);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field, e.what());
  }
}

void reject_unknown(const json& j, const std::string& section, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError(section.empty() ? "config" : section, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return it.key() == k; }))
      throw ConfigError(section.empty() ? it.key() : section + "." + it.key(), "unknown field");
}

// ---------------------------------------------------------------------------

ModelSpec parse_model(const json& j) {
  reject_unknown(j, "model", {"n_states", "n_dep", "state_labels", "dep_labels"});
  ModelSpec m;
  const json* ns = find(j, "n_states");
  if (!ns) throw ConfigError("model.n_states", "required");
  m.n_states = read_as<int>(*ns, "model.n_states");
  read_opt(j, "n_dep", "model.", m.n_dep);
  if (const json* v = find(j, "state_labels")) m.state_labels = read_list<std::string>(*v, "model.state_labels");
  if (const json* v = find(j, "dep_labels")) m.dep_labels = read_list<std::string>(*v, "model.dep_labels");
  if (m.n_states < 2) throw ConfigError("model.n_states", "must be >= 2");
  if (!m.state_labels.empty() && static_cast<int>(m.state_labels.size()) != m.n_states)
    throw ConfigError("model.state_labels", "length must equal n_states");
  if (m.n_dep != 0 && !m.dep_labels.empty() && static_cast<int>(m.dep_labels.size()) != m.n_dep)
    throw ConfigError("model.dep_labels", "length must equal n_dep");
  return m;
}

ScenarioSpec parse_scenario(const json& j) {
  reject_unknown(j, "scenario",
                 {"id", "population", "group", "n_subjects", "n_occasions", "zeta", "q_var", "n_sim", "delta"});
  ScenarioSpec s;
  s.id = "scenario";
  read_opt(j, "id", "scenario.", s.id);
  const json* pop = find(j, "population");
  const json* grp = find(j, "group");
  if (pop && grp) throw ConfigError("scenario.population", "give either population or group, not both");
  if (grp) {
    try {
      s.group = io::group_from_json(*grp);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("scenario.group", e.what());
    }
  } else {
    const std::string name = pop ? read_as<std::string>(*pop, "scenario.population") : std::string("baseline");
    try {
      const PopulationSet ps = named_population(name);
      s.group = population::make_group(ps.means, ps.tpm, 0.0, 0.0, ps.resid_var);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("scenario.population", e.what());
    }
  }
  const json* n = find(j, "n_subjects");
  if (!n) throw ConfigError("scenario.n_subjects", "required");
  s.n_subjects = read_as<int>(*n, "scenario.n_subjects");
  const json* t = find(j, "n_occasions");
  if (!t) throw ConfigError("scenario.n_occasions", "required");
  s.n_occasions = read_as<int>(*t, "scenario.n_occasions");
  if (const json* v = find(j, "zeta")) s.zeta = read_as<double>(*v, "scenario.zeta");
  if (const json* v = find(j, "q_var")) s.q_var = read_as<double>(*v, "scenario.q_var");
  if (!grp && !s.zeta) throw ConfigError("scenario.zeta", "required with a named population");
  if (!grp && !s.q_var) throw ConfigError("scenario.q_var", "required with a named population");
  read_opt(j, "n_sim", "scenario.", s.n_sim);
  if (const json* v = find(j, "delta")) {
    const auto d = read_list<double>(*v, "scenario.delta");
    s.delta = Eigen::Map<const VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
  }
  if (s.n_subjects < 1) throw ConfigError("scenario.n_subjects", "must be >= 1");
  if (s.n_occasions < 2) throw ConfigError("scenario.n_occasions", "must be >= 2");
  if (s.n_sim < 1) throw ConfigError("scenario.n_sim", "must be >= 1");
  if (s.zeta && *s.zeta < 0) throw ConfigError("scenario.zeta", "must be >= 0");
  if (s.q_var && *s.q_var < 0) throw ConfigError("scenario.q_var", "must be >= 0");
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("scenario", e.what());
  }
  return s;
}

McmcConfig parse_mcmc(const json& j) {
  reject_unknown(j, "mcmc", {"n_iter", "burn_in", "thin", "n_chains", "initial_proposal_sd", "adapt_window",
                             "target_accept_low", "target_accept_high"});
  McmcConfig m;
  read_opt(j, "n_iter", "mcmc.", m.n_iter);
  read_opt(j, "burn_in", "mcmc.", m.burn_in);
  read_opt(j, "thin", "mcmc.", m.thin);
  read_opt(j, "n_chains", "mcmc.", m.n_chains);
  read_opt(j, "initial_proposal_sd", "mcmc.", m.initial_proposal_sd);
  read_opt(j, "adapt_window", "mcmc.", m.adapt_window);
  read_opt(j, "target_accept_low", "mcmc.", m.target_accept_low);
  read_opt(j, "target_accept_high", "mcmc.", m.target_accept_high);
  if (m.n_iter < 1) throw ConfigError("mcmc.n_iter", "must be >= 1");
  if (m.burn_in < 0 || m.burn_in >= m.n_iter) throw ConfigError("mcmc.burn_in", "must satisfy 0 <= burn_in < n_iter");
  if (m.thin < 1) throw ConfigError("mcmc.thin", "must be >= 1");
  if (m.n_chains < 1) throw ConfigError("mcmc.n_chains", "must be >= 1");
  if (!(m.initial_proposal_sd > 0)) throw ConfigError("mcmc.initial_proposal_sd", "must be > 0");
  if (m.adapt_window < 1) throw ConfigError("mcmc.adapt_window", "must be >= 1");
  return m;
}

Hyperpriors parse_hyper(const json& j) {
  reject_unknown(j, "hyperpriors", {"mu0", "k0", "nu", "v", "alpha0", "beta0", "tpm_int_prior_mean",
                                    "tpm_int_prior_var", "tpm_var_prior_shape", "tpm_var_prior_scale"});
  Hyperpriors h;
  if (const json* v = find(j, "mu0")) h.mu0 = read_matrix(*v, "hyperpriors.mu0");
  read_opt(j, "k0", "hyperpriors.", h.k0);
  read_opt(j, "nu", "hyperpriors.", h.nu);
  read_opt(j, "v", "hyperpriors.", h.v);
  read_opt(j, "alpha0", "hyperpriors.", h.alpha0);
  read_opt(j, "beta0", "hyperpriors.", h.beta0);
  read_opt(j, "tpm_int_prior_mean", "hyperpriors.", h.tpm_int_prior_mean);
  read_opt(j, "tpm_int_prior_var", "hyperpriors.", h.tpm_int_prior_var);
  read_opt(j, "tpm_var_prior_shape", "hyperpriors.", h.tpm_var_prior_shape);
  read_opt(j, "tpm_var_prior_scale", "hyperpriors.", h.tpm_var_prior_scale);
  for (auto [name, value] : {std::pair{"k0", h.k0}, std::pair{"nu", h.nu}, std::pair{"v", h.v},
                             std::pair{"alpha0", h.alpha0}, std::pair{"beta0", h.beta0},
                             std::pair{"tpm_int_prior_var", h.tpm_int_prior_var},
                             std::pair{"tpm_var_prior_shape", h.tpm_var_prior_shape},
                             std::pair{"tpm_var_prior_scale", h.tpm_var_prior_scale}})
    if (!(value > 0)) throw ConfigError(std::string("hyperpriors.") + name, "must be > 0");
  return h;
}

StudySection parse_study(const json& j) {
  reject_unknown(j, "study",
                 {"grid", "population", "axes", "include_baseline", "n_sim", "gr_fraction", "gr_threshold"});
  StudySection s;
  read_opt(j, "grid", "study.", s.grid);
  read_opt(j, "population", "study.", s.population);
  read_opt(j, "include_baseline", "study.", s.include_baseline);
  read_opt(j, "n_sim", "study.", s.n_sim);
  read_opt(j, "gr_fraction", "study.", s.gr_fraction);
  read_opt(j, "gr_threshold", "study.", s.gr_threshold);
  if (s.grid != "sleep" && s.grid != "baseline" && s.grid != "custom")
    throw ConfigError("study.grid", "must be sleep, baseline or custom");
  if (const json* a = find(j, "axes")) {
    reject_unknown(*a, "study.axes", {"n_subjects", "n_occasions", "zeta", "q_var"});
    auto axis = [&](const char* key, auto& target) {
      const json* v = find(*a, key);
      if (!v) throw ConfigError(std::string("study.axes.") + key, "required");
      target = read_list<typename std::decay_t<decltype(target)>::value_type>(*v, std::string("study.axes.") + key);
    };
    axis("n_subjects", s.axes.n_subjects);
    axis("n_occasions", s.axes.n_occasions);
    axis("zeta", s.axes.zeta);
    axis("q_var", s.axes.q_var);
  } else if (s.grid == "custom") {
    throw ConfigError("study.axes", "required for a custom grid");
  }
  if (s.n_sim < 1) throw ConfigError("study.n_sim", "must be >= 1");
  if (s.gr_fraction < 0 || s.gr_fraction > 1) throw ConfigError("study.gr_fraction", "must lie in [0, 1]");
  return s;
}

PpcSection parse_ppc(const json& j) {
  reject_unknown(j, "ppc", {"n_draws", "n_periods", "q_var", "n_subjects", "n_occasions", "decode"});
  PpcSection p;
  read_opt(j, "n_draws", "ppc.", p.n_draws);
  read_opt(j, "n_periods", "ppc.", p.n_periods);
  read_opt(j, "q_var", "ppc.", p.q_var);
  read_opt(j, "decode", "ppc.", p.decode);
  if (const json* v = find(j, "n_subjects")) p.n_subjects = read_as<int>(*v, "ppc.n_subjects");
  if (const json* v = find(j, "n_occasions")) p.n_occasions = read_as<int>(*v, "ppc.n_occasions");
  if (p.n_draws < 1) throw ConfigError("ppc.n_draws", "must be >= 1");
  if (p.n_periods < 1) throw ConfigError("ppc.n_periods", "must be >= 1");
  if (p.q_var < 0) throw ConfigError("ppc.q_var", "must be >= 0");
  return p;
}

// ---------------------------------------------------------------------------

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> parallel;
  bool resume = false;
};

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = c.seed;
  if (!c.out.empty()) cfg.out = c.out;
  if (c.parallel) cfg.parallel = *c.parallel;
  if (cfg.parallel < 1) throw ConfigError("parallel", "must be >= 1");
  return cfg;
}

std::uint64_t require_seed(const RunConfig& cfg) {
  if (!cfg.seed) throw ConfigError("seed", "required (config field 'seed' or --seed)");
  return *cfg.seed;
}

fs::path require_out(const RunConfig& cfg) {
  if (!cfg.out) throw ConfigError("out", "required (config field 'out' or --out)");
  return *cfg.out;
}

void write_effective_config(const fs::path& dir, const RunConfig& cfg) {
  io::write_text(dir / "config.effective.json", to_json(cfg).dump(2) + "\n");
}

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

// ---------------------------------------------------------------------------

int cmd_simulate(const Common& common, std::ostream& out) {
  RunConfig cfg = resolve(common);
  if (!cfg.scenario) throw ConfigError("scenario", "required for simulate");
  cfg.scenario->seed = require_seed(cfg);
  const fs::path dir = require_out(cfg);
  const ScenarioSpec& s = *cfg.scenario;
  fs::create_directories(dir);
  write_effective_config(dir, cfg);
  for (int it = 0; it < s.n_sim; ++it) {
    const SimulatedData sim = simulate_dataset(s, it);
    const fs::path data_path = dir / (s.id + "_" + std::to_string(it) + ".csv");
    io::write_dataset_csv(data_path, sim.data);
    json subjects = json::array();
    for (const auto& sp : sim.truth) subjects.push_back({{"mean", io::to_json(sp.mean)}, {"tpm", io::to_json(sp.tpm)}});
    const json truth = {{"scenario_id", s.id},
                        {"iteration", it},
                        {"seed", s.seed},
                        {"initial_distribution", s.delta ? "configured" : "stationary distribution of each subject TPM"},
                        {"delta_fallbacks", sim.delta_fallbacks},
                        {"group", io::to_json(s.generating_params())},
                        {"subjects", subjects}};
    io::write_text(dir / (s.id + "_" + std::to_string(it) + ".truth.json"), truth.dump(1) + "\n");
    out << data_path.string() << ": " << s.n_subjects << " subjects x " << s.n_occasions << " occasions x "
        << s.group.n_dep() << " variables\n";
  }
  return 0;
}

std::string summary_table(const std::vector<Chain>& chains) {
  std::ostringstream t;
  const bool with_rhat = chains.size() >= 2;
  t << pad("parameter", 22) << pad("MAP (SD)", 20) << pad("95% CCI", 22) << (with_rhat ? "R-hat" : "") << '\n';
  for (const auto& name : chains.front().parameter_names(true)) {
    const PosteriorSummary s = summarize(chains, name);
    t << pad(name, 22) << pad(format_map_sd(s), 20) << pad(format_cci(s), 22);
    if (with_rhat) t << io::fixed(gelman_rubin(chains, name), 3);
    t << '\n';
  }
  return t.str();
}

int cmd_fit(const Common& common, const std::string& data_path, std::ostream& out) {
  RunConfig cfg = resolve(common);
  const std::uint64_t seed = require_seed(cfg);
  const fs::path dir = require_out(cfg);
  if (data_path.empty()) throw ConfigError("data", "required (--data <path>)");
  const Dataset data = io::read_dataset_csv(data_path);
  if (!cfg.model) throw ConfigError("model", "required for fit");
  ModelSpec spec = *cfg.model;
  if (spec.n_dep == 0) spec.n_dep = data.n_dep();
  if (spec.n_dep != data.n_dep())
    throw ConfigError("model.n_dep", "dataset has " + std::to_string(data.n_dep()) + " variables");
  McmcConfig mcmc = cfg.mcmc;
  mcmc.seed = seed;
  const auto chains = run_mcmc(data, spec, cfg.hyper, mcmc);

  fs::create_directories(dir);
  write_effective_config(dir, cfg);
  for (const auto& c : chains) {
    const std::string stem = "chain_" + std::to_string(c.meta.chain_index + 1);
    io::write_chain_csv(dir / (stem + ".csv"), c);
    io::write_text(dir / (stem + ".meta.json"), io::chain_metadata(c).dump(2) + "\n");
  }
  std::ostringstream csv;
  csv << "parameter,median,mean,sd,cci_low,cci_high" << (chains.size() >= 2 ? ",rhat" : "") << '\n';
  for (const auto& name : chains.front().parameter_names(true)) {
    const PosteriorSummary s = summarize(chains, name);
    csv << name << ',' << io::full(s.median) << ',' << io::full(s.mean) << ',' << io::full(s.sd) << ','
        << io::full(s.cci_low) << ',' << io::full(s.cci_high);
    if (chains.size() >= 2) csv << ',' << io::full(gelman_rubin(chains, name));
    csv << '\n';
  }
  io::write_text(dir / "summary.csv", csv.str());
  const std::string table = summary_table(chains);
  io::write_text(dir / "summary.txt", table);
  out << table;
  out << "stored draws per chain: " << chains.front().draws.size() << '\n';
  return 0;
}

std::vector<Chain> load_chains(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ConfigError("chain", "at least one --chain <path> is required");
  std::vector<Chain> chains;
  for (const auto& p : paths) chains.push_back(io::read_chain_csv(p));
  for (const auto& c : chains) {
    if (c.spec.n_states != chains.front().spec.n_states || c.spec.n_dep != chains.front().spec.n_dep)
      throw ConfigError("chain", "chains have different shapes");
    if (c.draws.empty()) throw ConfigError("chain", "chain file has no draws");
  }
  return chains;
}

int cmd_diagnose(const Common& common, const std::vector<std::string>& chain_paths, std::ostream& out) {
  const RunConfig cfg = resolve(common);
  auto chains = load_chains(chain_paths);
  const bool with_rhat = chains.size() >= 2;
  if (with_rhat) {
    const std::size_t len = std::min_element(chains.begin(), chains.end(), [](const auto& a, const auto& b) {
                              return a.draws.size() < b.draws.size();
                            })->draws.size();
    for (auto& c : chains) c.draws.resize(len);
  }
  const int max_lag = 5;
  std::ostringstream table, csv;
  table << pad("parameter", 22) << pad("median", 10) << pad("sd", 10) << pad("95% CCI", 22) << pad("R-hat", 8)
        << "acf(1..5)\n";
  csv << "parameter,median,sd,cci_low,cci_high,rhat,acf1,acf2,acf3,acf4,acf5\n";
  for (const auto& name : chains.front().parameter_names(true)) {
    const PosteriorSummary s = summarize(chains, name);
    const double rhat = with_rhat ? gelman_rubin(chains, name) : std::nan("");
    const VectorXd acf = autocorr(chains.front(), name, std::min<int>(max_lag, static_cast<int>(chains.front().draws.size()) - 1));
    table << pad(name, 22) << pad(io::fixed(s.median), 10) << pad(io::fixed(s.sd), 10) << pad(format_cci(s), 22)
          << pad(io::fixed(rhat), 8);
    csv << name << ',' << io::full(s.median) << ',' << io::full(s.sd) << ',' << io::full(s.cci_low) << ','
        << io::full(s.cci_high) << ',' << io::full(rhat);
    for (int lag = 1; lag <= max_lag; ++lag) {
      const double a = lag < acf.size() ? acf(lag) : std::nan("");
      table << io::fixed(a) << (lag < max_lag ? " " : "");
      csv << ',' << io::full(a);
    }
    table << '\n';
    csv << '\n';
  }
  out << table.str();
  if (cfg.out) io::write_text(fs::path(*cfg.out) / "diagnose.csv", csv.str());
  return 0;
}

int cmd_ppc(const Common& common, const std::vector<std::string>& chain_paths, const std::string& data_path,
            std::ostream& out) {
  const RunConfig cfg = resolve(common);
  const std::uint64_t seed = require_seed(cfg);
  if (data_path.empty()) throw ConfigError("data", "required (--data <path>)");
  const auto chains = load_chains(chain_paths);
  Dataset observed = io::read_dataset_csv(data_path);
  const int m = chains.front().spec.n_states;
  if (observed.n_dep() != chains.front().spec.n_dep)
    throw ConfigError("data", "dataset has " + std::to_string(observed.n_dep()) + " variables, chain has " +
                                  std::to_string(chains.front().spec.n_dep));
  observed.validate(m);

  std::vector<Draw> draws;
  for (const auto& c : chains) draws.insert(draws.end(), c.draws.begin(), c.draws.end());

  if (!observed.has_states()) {
    if (!cfg.ppc.decode)
      throw ConfigError("data", "dataset has no state annotations; decode first or set ppc.decode = true");
    GroupParams med = draws.front().group;
    for (Eigen::Index k = 0; k < med.emiss_mean.rows(); ++k)
      for (Eigen::Index s = 0; s < med.emiss_mean.cols(); ++s) {
        med.emiss_mean(k, s) = summarize(chains, "emiss_mean." + std::to_string(k + 1) + "." + std::to_string(s + 1)).median;
        med.emiss_resid_var(k, s) =
            summarize(chains, "emiss_resid_var." + std::to_string(k + 1) + "." + std::to_string(s + 1)).median;
      }
    for (Eigen::Index i = 0; i < med.tpm_intercepts.rows(); ++i)
      for (Eigen::Index j = 0; j < med.tpm_intercepts.cols(); ++j)
        med.tpm_intercepts(i, j) = summarize(chains, "alpha." + std::to_string(i + 1) + "." + std::to_string(j + 2)).median;
    const MatrixXd tpm = med.tpm();
    const VectorXd delta = stationary_distribution(tpm).pi;
    for (auto& s : observed.subjects)
      s.states = decode_states(s.obs, tpm, delta, {med.emiss_mean, med.emiss_resid_var}).path;
  }

  PpcConfig pc;
  pc.n_draws = cfg.ppc.n_draws;
  pc.n_periods = cfg.ppc.n_periods;
  pc.q_var = cfg.ppc.q_var;
  pc.n_subjects = cfg.ppc.n_subjects.value_or(observed.n_subjects());
  pc.n_occasions = cfg.ppc.n_occasions.value_or(static_cast<int>(observed.subjects.front().obs.rows()));
  pc.seed = seed;
  pc.parallelism = cfg.parallel;
  const auto results = run_ppc(observed, draws, m, pc);

  std::ostringstream csv;
  csv << "statistic,observed,replicate_mean,p_posterior,two_sided_p\n";
  for (const auto& r : results)
    csv << r.statistic << ',' << io::full(r.observed) << ',' << io::full(r.replicate_mean()) << ','
        << io::full(r.p_posterior) << ',' << io::full(r.two_sided_p) << '\n';
  out << csv.str();
  if (cfg.out) io::write_text(fs::path(*cfg.out) / "ppc.csv", csv.str());
  return 0;
}

int cmd_study(const Common& common, std::ostream& out) {
  RunConfig cfg = resolve(common);
  cfg.seed = require_seed(cfg);
  const fs::path dir = require_out(cfg);
  const auto grid = study_grid(cfg);
  StudyConfig sc;
  sc.mcmc = cfg.mcmc;
  sc.hyper = cfg.hyper;
  sc.gr_fraction = cfg.study.gr_fraction;
  sc.gr_threshold = cfg.study.gr_threshold;
  fs::create_directories(dir);
  write_effective_config(dir, cfg);
  const StudyResult res = run_study(grid, sc, {dir, cfg.parallel, common.resume, true});
  int failed = 0;
  for (const auto& r : res.records) failed += r.status != "ok";
  out << "scenarios: " << grid.size() << ", iterations: " << res.records.size() << " (computed " << res.computed
      << ", failed " << failed << "), metric groups: " << res.reports.size() << '\n';
  out << "results: " << (dir / "results.csv").string() << "\nledger: " << (dir / "ledger.csv").string() << '\n';
  return 0;
}

int cmd_metrics(const Common& common, const std::string& study_dir_arg, std::ostream& out) {
  const RunConfig cfg = resolve(common);
  fs::path study_dir = study_dir_arg.empty() ? (cfg.out ? fs::path(*cfg.out) : fs::path()) : fs::path(study_dir_arg);
  if (study_dir.empty()) throw ConfigError("study-dir", "required (--study-dir <dir> or --out <dir>)");
  const fs::path iter_dir = study_dir / "iterations";
  if (!fs::is_directory(iter_dir)) throw ConfigError("study-dir", "no iterations directory in " + study_dir.string());
  std::map<std::string, std::vector<IterationRecord>> by_scenario;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(iter_dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files)
    if (auto r = read_iteration_record(f)) by_scenario[r->scenario_id].push_back(std::move(*r));
  for (auto& [id, recs] : by_scenario) {
    std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.iteration < b.iteration; });
    const MetricsReport rep = evaluate_metrics(id, recs);
    out << "scenario " << id << " (S = " << rep.n_ok << ", failed " << rep.n_failed << ", not converged "
        << rep.n_not_converged << ")\n";
    out << pad("parameter", 20) << pad("truth", 9) << pad("%bias (MCSE)", 18) << pad("emp SE", 9) << pad("model SE", 10)
        << pad("MSE", 9) << pad("cover", 8) << pad("bc cover", 9) << "flags\n";
    for (const auto& p : rep.params) {
      std::string flags;
      if (p.bias_flag) flags += "bias ";
      if (p.coverage_flag) flags += "coverage";
      out << pad(p.name, 20) << pad(io::fixed(p.truth), 9)
          << pad(io::fixed(p.percent_bias, 2) + " (" + io::fixed(p.percent_bias_mcse, 2) + ")", 18)
          << pad(io::fixed(p.emp_se), 9) << pad(io::fixed(p.model_se), 10) << pad(io::fixed(p.mse), 9)
          << pad(io::fixed(p.coverage, 2), 8) << pad(io::fixed(p.bias_corr_coverage, 2), 9) << flags << '\n';
    }
  }
  return 0;
}

}  // namespace

PopulationSet named_population(const std::string& name) {
  if (name == "sleep") return {"sleep", population::sleep_means(), population::sleep_tpm(), population::kResidualVariance};
  if (name == "baseline")
    return {"baseline", population::baseline_means(), population::baseline_tpm(), population::kResidualVariance};
  if (name == "baseline_sleep_tpm")
    return {"baseline_sleep_tpm", population::baseline_means(), population::sleep_tpm(), population::kResidualVariance};
  throw std::invalid_argument("unknown population '" + name + "' (sleep, baseline, baseline_sleep_tpm)");
}

RunConfig parse_config(const json& j) {
  reject_unknown(j, "", {"seed", "out", "parallel", "model", "scenario", "mcmc", "hyperpriors", "study", "ppc"});
  RunConfig c;
  if (const json* v = find(j, "seed")) {
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
      throw ConfigError("seed", "expected a non-negative integer");
    c.seed = v->get<std::uint64_t>();
  }
  if (const json* v = find(j, "out")) c.out = read_as<std::string>(*v, "out");
  read_opt(j, "parallel", "", c.parallel);
  if (c.parallel < 1) throw ConfigError("parallel", "must be >= 1");
  if (const json* v = find(j, "model")) c.model = parse_model(*v);
  if (const json* v = find(j, "scenario")) c.scenario = parse_scenario(*v);
  if (const json* v = find(j, "mcmc")) c.mcmc = parse_mcmc(*v);
  if (const json* v = find(j, "hyperpriors")) c.hyper = parse_hyper(*v);
  if (const json* v = find(j, "study")) c.study = parse_study(*v);
  if (const json* v = find(j, "ppc")) c.ppc = parse_ppc(*v);
  if (c.model && c.scenario) {
    if (c.model->n_states != c.scenario->group.n_states())
      throw ConfigError("model.n_states", "differs from the scenario's number of states");
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const std::exception& e) {
    throw ConfigError("config", e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON in ") + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& c) {
  json j = json::object();
  if (c.seed) j["seed"] = *c.seed;
  if (c.out) j["out"] = *c.out;
  j["parallel"] = c.parallel;
  if (c.model) {
    json m = {{"n_states", c.model->n_states}, {"n_dep", c.model->n_dep}};
    if (!c.model->state_labels.empty()) m["state_labels"] = c.model->state_labels;
    if (!c.model->dep_labels.empty()) m["dep_labels"] = c.model->dep_labels;
    j["model"] = m;
  }
  if (c.scenario) {
    const auto& s = *c.scenario;
    json sj = {{"id", s.id}, {"group", io::to_json(s.group)}, {"n_subjects", s.n_subjects},
               {"n_occasions", s.n_occasions}, {"n_sim", s.n_sim}};
    if (s.zeta) sj["zeta"] = *s.zeta;
    if (s.q_var) sj["q_var"] = *s.q_var;
    if (s.delta) sj["delta"] = std::vector<double>(s.delta->data(), s.delta->data() + s.delta->size());
    j["scenario"] = sj;
  }
  j["mcmc"] = {{"n_iter", c.mcmc.n_iter},
               {"burn_in", c.mcmc.burn_in},
               {"thin", c.mcmc.thin},
               {"n_chains", c.mcmc.n_chains},
               {"initial_proposal_sd", c.mcmc.initial_proposal_sd},
               {"adapt_window", c.mcmc.adapt_window},
               {"target_accept_low", c.mcmc.target_accept_low},
               {"target_accept_high", c.mcmc.target_accept_high}};
  json h = {{"k0", c.hyper.k0},
            {"nu", c.hyper.nu},
            {"v", c.hyper.v},
            {"alpha0", c.hyper.alpha0},
            {"beta0", c.hyper.beta0},
            {"tpm_int_prior_mean", c.hyper.tpm_int_prior_mean},
            {"tpm_int_prior_var", c.hyper.tpm_int_prior_var},
            {"tpm_var_prior_shape", c.hyper.tpm_var_prior_shape},
            {"tpm_var_prior_scale", c.hyper.tpm_var_prior_scale}};
  if (c.hyper.mu0.size() > 0) h["mu0"] = io::to_json(c.hyper.mu0);
  j["hyperpriors"] = h;
  json st = {{"grid", c.study.grid},
             {"population", c.study.population},
             {"include_baseline", c.study.include_baseline},
             {"n_sim", c.study.n_sim},
             {"gr_fraction", c.study.gr_fraction},
             {"gr_threshold", c.study.gr_threshold}};
  if (!c.study.axes.n_subjects.empty())
    st["axes"] = {{"n_subjects", c.study.axes.n_subjects},
                  {"n_occasions", c.study.axes.n_occasions},
                  {"zeta", c.study.axes.zeta},
                  {"q_var", c.study.axes.q_var}};
  j["study"] = st;
  json p = {{"n_draws", c.ppc.n_draws}, {"n_periods", c.ppc.n_periods}, {"q_var", c.ppc.q_var}, {"decode", c.ppc.decode}};
  if (c.ppc.n_subjects) p["n_subjects"] = *c.ppc.n_subjects;
  if (c.ppc.n_occasions) p["n_occasions"] = *c.ppc.n_occasions;
  j["ppc"] = p;
  return j;
}

std::vector<ScenarioSpec> study_grid(const RunConfig& c) {
  if (!c.seed) throw ConfigError("seed", "required");
  std::vector<ScenarioSpec> grid;
  const StudySection& s = c.study;
  if (s.grid == "sleep") {
    grid = build_scenario_grid(named_population("sleep"), sleep_grid_axes(), s.n_sim, *c.seed);
  } else if (s.grid == "custom") {
    PopulationSet pop;
    try {
      pop = named_population(s.population);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("study.population", e.what());
    }
    grid = build_scenario_grid(pop, s.axes, s.n_sim, *c.seed);
  }
  if (s.grid == "baseline" || s.include_baseline) {
    auto base = baseline_scenarios(s.n_sim, *c.seed);
    grid.insert(grid.end(), base.begin(), base.end());
  }
  return grid;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian multilevel hidden Markov models: simulation, fitting and simulation studies", "mhmm"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON configuration file");
    sub->add_option("--seed", common.seed, "root RNG seed (overrides config)");
    sub->add_option("--out", common.out, "output directory (overrides config)");
    sub->add_option("--parallel", common.parallel, "worker threads");
    sub->add_flag("--resume", common.resume, "skip cells that already have a record file");
  };

  std::string data_path;
  std::vector<std::string> chain_paths;
  std::string study_dir;

  auto* simulate = app.add_subcommand("simulate", "simulate datasets for one scenario");
  add_common(simulate);
  auto* fit = app.add_subcommand("fit", "fit the model to a dataset by MCMC");
  add_common(fit);
  fit->add_option("--data", data_path, "dataset CSV");
  auto* study = app.add_subcommand("study", "run a Monte Carlo simulation study");
  add_common(study);
  auto* diagnose = app.add_subcommand("diagnose", "posterior summaries, R-hat and autocorrelations");
  add_common(diagnose);
  diagnose->add_option("--chain", chain_paths, "chain CSV (repeat for several chains)");
  auto* ppc = app.add_subcommand("ppc", "posterior predictive checks");
  add_common(ppc);
  ppc->add_option("--chain", chain_paths, "chain CSV (repeat for several chains)");
  ppc->add_option("--data", data_path, "observed dataset CSV");
  auto* metrics = app.add_subcommand("metrics", "recompute performance measures of a study directory");
  add_common(metrics);
  metrics->add_option("--study-dir", study_dir, "study output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(common, out);
    if (fit->parsed()) return cmd_fit(common, data_path, out);
    if (study->parsed()) return cmd_study(common, out);
    if (diagnose->parsed()) return cmd_diagnose(common, chain_paths, out);
    if (ppc->parsed()) return cmd_ppc(common, chain_paths, data_path, out);
    if (metrics->parsed()) return cmd_metrics(common, study_dir, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const io::ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << '\n';
    return 1;
  } catch (const SamplerError& e) {
    err << "sampler failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace mhmm::cli
