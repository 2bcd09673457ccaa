#include "mhmm/study.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>

#include "mhmm/diagnostics.hpp"
#include "mhmm/io.hpp"
#include "mhmm/log.hpp"
#include "mhmm/parallel.hpp"
#include "mhmm/population.hpp"

namespace mhmm {

namespace {

constexpr std::uint64_t kFitStream = 0x464954ULL;  // "FIT"
constexpr std::uint64_t kGrStream = 0x4752ULL;     // "GR"

std::string short_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

double sample_var(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / (n - 1.0);
}

double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

}  // namespace

std::vector<ScenarioSpec> build_scenario_grid(const PopulationSet& pop, const GridAxes& axes, int n_sim,
                                              std::uint64_t seed) {
  std::vector<ScenarioSpec> grid;
  for (int n : axes.n_subjects)
    for (int t : axes.n_occasions)
      for (double z : axes.zeta)
        for (double q : axes.q_var) {
          ScenarioSpec s;
          s.id = pop.name + "_N" + std::to_string(n) + "_T" + std::to_string(t) + "_z" + short_number(z) + "_Q" +
                 short_number(q);
          s.group = population::make_group(pop.means, pop.tpm, z, q, pop.resid_var);
          s.n_subjects = n;
          s.n_occasions = t;
          s.zeta = z;
          s.q_var = q;
          s.n_sim = n_sim;
          s.seed = seed;
          grid.push_back(std::move(s));
        }
  return grid;
}

GridAxes sleep_grid_axes() { return {{10, 20, 40, 80}, {400, 800, 1600}, {0.25, 0.5, 1.0, 2.0}, {0.1, 0.2, 0.4}}; }

std::vector<ScenarioSpec> baseline_scenarios(int n_sim, std::uint64_t seed) {
  struct Cell {
    int number;
    bool sleep_tpm;
    int n;
    int t;
  };
  const Cell cells[] = {{1, true, 40, 800}, {2, false, 40, 800}, {3, false, 80, 800}, {4, false, 80, 3200},
                        {5, false, 140, 800}};
  std::vector<ScenarioSpec> out;
  for (const auto& [suffix, zeta] : {std::pair{"A", 0.25}, std::pair{"B", 0.5}})
    for (const auto& c : cells) {
      ScenarioSpec s;
      s.id = "baseline_" + std::to_string(c.number) + suffix;
      const MatrixXd tpm = c.sleep_tpm ? population::sleep_tpm() : population::baseline_tpm();
      s.group = population::make_group(population::baseline_means(), tpm, zeta, 0.1);
      s.n_subjects = c.n;
      s.n_occasions = c.t;
      s.zeta = zeta;
      s.q_var = 0.1;
      s.n_sim = n_sim;
      s.seed = seed;
      out.push_back(std::move(s));
    }
  return out;
}

std::uint64_t iteration_seed(const ScenarioSpec& scenario, int iteration) {
  return derive_seed(scenario.seed, {hash_id(scenario.id), static_cast<std::uint64_t>(iteration), kFitStream});
}

std::vector<std::pair<std::string, double>> scenario_truth(const ScenarioSpec& scenario) {
  const GroupParams g = scenario.generating_params();
  std::vector<std::pair<std::string, double>> out;
  for (const auto& name : group_parameter_names(g.n_dep(), g.n_states(), true))
    out.emplace_back(name, group_parameter_value(g, name));
  return out;
}

IterationRecord run_iteration(const ScenarioSpec& scenario, int iteration, const StudyConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  IterationRecord rec;
  rec.scenario_id = scenario.id;
  rec.iteration = iteration;
  rec.seed = iteration_seed(scenario, iteration);
  try {
    const SimulatedData sim = simulate_dataset(scenario, iteration);
    const GroupParams truth = scenario.generating_params();
    const ModelSpec spec{truth.n_states(), truth.n_dep(), {}, {}};

    McmcConfig mcmc = config.mcmc;
    mcmc.seed = rec.seed;
    mcmc.start.clear();
    mcmc.start_reference = truth;
    const double u = static_cast<double>(derive_seed(rec.seed, {kGrStream}) >> 11) * 0x1.0p-53;
    rec.gr_checked = u < config.gr_fraction;
    mcmc.n_chains = rec.gr_checked ? 2 : 1;

    const auto chains = run_mcmc(sim.data, spec, config.hyper, mcmc);
    for (const auto& name : group_parameter_names(spec.n_dep, spec.n_states, true)) {
      const PosteriorSummary s = summarize(chains.front(), name);
      rec.params.push_back({name, group_parameter_value(truth, name), s.median, s.sd, s.cci_low, s.cci_high});
    }
    if (rec.gr_checked) {
      rec.max_rhat = 0.0;
      for (const auto& name : group_parameter_names(spec.n_dep, spec.n_states, false))
        rec.max_rhat = std::max(rec.max_rhat, gelman_rubin(chains, name));
      rec.converged = rec.max_rhat <= config.gr_threshold;
    }
  } catch (const std::exception& e) {
    rec.status = "failed";
    rec.reason = e.what();
    rec.params.clear();
  }
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

double coverage_mcse(double coverage, int n_iterations) {
  return std::sqrt(coverage * (1.0 - coverage) / static_cast<double>(n_iterations));
}

MetricsReport evaluate_metrics(const std::string& scenario_id, const std::vector<IterationRecord>& records) {
  MetricsReport report;
  report.scenario_id = scenario_id;
  std::vector<const IterationRecord*> ok;
  for (const auto& r : records) {
    if (r.status == "ok") {
      ok.push_back(&r);
      if (!r.converged) ++report.n_not_converged;
    } else {
      ++report.n_failed;
    }
  }
  report.n_ok = static_cast<int>(ok.size());
  if (ok.size() < 2)
    throw std::invalid_argument("evaluate_metrics: scenario " + scenario_id + " has fewer than 2 successful iterations");

  const std::size_t n_params = ok.front()->params.size();
  const int big_s = static_cast<int>(ok.size());
  const double s = static_cast<double>(big_s);
  for (std::size_t p = 0; p < n_params; ++p) {
    ParameterMetrics pm;
    pm.name = ok.front()->params[p].name;
    pm.truth = ok.front()->params[p].truth;
    std::vector<double> est, sd2, sq_err;
    for (const auto* r : ok) {
      const auto& rec = r->params.at(p);
      if (rec.name != pm.name) throw std::invalid_argument("evaluate_metrics: parameter order differs between records");
      est.push_back(rec.estimate);
      sd2.push_back(rec.post_sd * rec.post_sd);
      sq_err.push_back((rec.estimate - pm.truth) * (rec.estimate - pm.truth));
    }
    pm.mean_estimate = mean_of(est);
    pm.bias = pm.mean_estimate - pm.truth;
    const double var_est = sample_var(est);
    pm.emp_se = std::sqrt(var_est);
    pm.bias_mcse = std::sqrt(var_est / s);
    pm.mean_estimate_mcse = pm.bias_mcse;
    pm.percent_bias_defined = pm.truth != 0.0;
    if (pm.percent_bias_defined) {
      pm.percent_bias = 100.0 * pm.bias / pm.truth;
      pm.percent_bias_mcse = 100.0 * pm.bias_mcse / std::abs(pm.truth);
    } else {
      pm.percent_bias = std::numeric_limits<double>::quiet_NaN();
      pm.percent_bias_mcse = std::numeric_limits<double>::quiet_NaN();
    }
    pm.emp_se_mcse = pm.emp_se / std::sqrt(2.0 * (s - 1.0));
    const double mean_sd2 = mean_of(sd2);
    pm.model_se = std::sqrt(mean_sd2);
    pm.model_se_mcse = pm.model_se > 0.0 ? std::sqrt(sample_var(sd2) / (4.0 * s * mean_sd2)) : 0.0;
    pm.mse = mean_of(sq_err);
    double mse_ss = 0.0;
    for (double e : sq_err) mse_ss += (e - pm.mse) * (e - pm.mse);
    pm.mse_mcse = std::sqrt(mse_ss / (s * (s - 1.0)));

    int covered = 0, covered_bc = 0;
    for (const auto* r : ok) {
      const auto& rec = r->params[p];
      if (rec.cci_low <= pm.truth && pm.truth <= rec.cci_high) ++covered;
      if (rec.cci_low <= pm.mean_estimate && pm.mean_estimate <= rec.cci_high) ++covered_bc;
    }
    pm.coverage = covered / s;
    pm.bias_corr_coverage = covered_bc / s;
    pm.coverage_mcse = coverage_mcse(pm.coverage, big_s);
    pm.bias_corr_coverage_mcse = coverage_mcse(pm.bias_corr_coverage, big_s);

    pm.bias_flag = pm.percent_bias_defined && std::abs(pm.percent_bias) > 5.0;
    pm.coverage_flag = pm.coverage < 0.92 || pm.coverage > 0.98;
    report.params.push_back(std::move(pm));
  }
  return report;
}

std::filesystem::path iteration_record_path(const std::filesystem::path& out_dir, const std::string& scenario_id,
                                            int iteration) {
  return out_dir / "iterations" / (scenario_id + "__" + std::to_string(iteration) + ".json");
}

void write_iteration_record(const std::filesystem::path& path, const IterationRecord& r) {
  nlohmann::json params = nlohmann::json::array();
  // Doubles are stored as 17-digit strings so a reloaded record is bit-identical.
  for (const auto& p : r.params)
    params.push_back({{"name", p.name},
                      {"truth", io::full(p.truth)},
                      {"estimate", io::full(p.estimate)},
                      {"post_sd", io::full(p.post_sd)},
                      {"cci_low", io::full(p.cci_low)},
                      {"cci_high", io::full(p.cci_high)}});
  const nlohmann::json j = {{"scenario_id", r.scenario_id}, {"iteration", r.iteration},
                            {"seed", r.seed},               {"status", r.status},
                            {"reason", r.reason},           {"wall_time", r.wall_time},
                            {"gr_checked", r.gr_checked},   {"max_rhat", io::full(r.max_rhat)},
                            {"converged", r.converged},     {"params", params}};
  io::write_text(path, j.dump(1) + "\n");
}

std::optional<IterationRecord> read_iteration_record(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(io::read_text(path));
    auto num = [](const nlohmann::json& v) { return v.get<std::string>() == "NA" ? std::nan("") : std::stod(v.get<std::string>()); };
    IterationRecord r;
    r.scenario_id = j.at("scenario_id").get<std::string>();
    r.iteration = j.at("iteration").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.status = j.at("status").get<std::string>();
    r.reason = j.at("reason").get<std::string>();
    r.wall_time = j.at("wall_time").get<double>();
    r.gr_checked = j.at("gr_checked").get<bool>();
    r.max_rhat = num(j.at("max_rhat"));
    r.converged = j.at("converged").get<bool>();
    for (const auto& p : j.at("params"))
      r.params.push_back({p.at("name").get<std::string>(), num(p.at("truth")), num(p.at("estimate")),
                          num(p.at("post_sd")), num(p.at("cci_low")), num(p.at("cci_high"))});
    return r;
  } catch (const std::exception& e) {
    warn("ignoring unreadable iteration record " + path.string() + ": " + e.what());
    return std::nullopt;
  }
}

void write_results_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& reports) {
  std::ostringstream out;
  out << "scenario_id,parameter,truth,mean_estimate,bias,percent_bias,emp_se,model_se,mse,coverage,"
         "bias_corr_coverage,mean_estimate_mcse,bias_mcse,percent_bias_mcse,emp_se_mcse,model_se_mcse,mse_mcse,"
         "coverage_mcse,bias_corr_coverage_mcse\n";
  for (const auto& r : reports)
    for (const auto& p : r.params) {
      out << r.scenario_id << ',' << p.name;
      for (double v : {p.truth, p.mean_estimate, p.bias, p.percent_bias, p.emp_se, p.model_se, p.mse, p.coverage,
                       p.bias_corr_coverage, p.mean_estimate_mcse, p.bias_mcse, p.percent_bias_mcse, p.emp_se_mcse,
                       p.model_se_mcse, p.mse_mcse, p.coverage_mcse, p.bias_corr_coverage_mcse})
        out << ',' << io::full(v);
      out << '\n';
    }
  io::write_text(path, out.str());
}

void write_ledger_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& records) {
  std::ostringstream out;
  out << "scenario_id,iteration,seed,status,wall_time\n";
  for (const auto& r : records)
    out << r.scenario_id << ',' << r.iteration << ',' << r.seed << ',' << r.status << ',' << io::fixed(r.wall_time, 3)
        << '\n';
  io::write_text(path, out.str());
}

StudyResult run_study(const std::vector<ScenarioSpec>& grid, const StudyConfig& config,
                      const StudyRunOptions& options) {
  for (const auto& s : grid) s.validate();
  std::filesystem::create_directories(options.out_dir / "iterations");

  struct CellRef {
    int scenario;
    int iteration;
  };
  std::vector<CellRef> cells;
  for (int s = 0; s < static_cast<int>(grid.size()); ++s)
    for (int it = 0; it < grid[s].n_sim; ++it) cells.push_back({s, it});

  StudyResult result;
  result.records.resize(cells.size());
  std::vector<int> todo;
  for (int c = 0; c < static_cast<int>(cells.size()); ++c) {
    const auto& cell = cells[c];
    const auto path = iteration_record_path(options.out_dir, grid[cell.scenario].id, cell.iteration);
    if (options.resume)
      if (auto rec = read_iteration_record(path)) {
        result.records[c] = std::move(*rec);
        continue;
      }
    todo.push_back(c);
  }

  std::mutex progress_mutex;
  const auto ledger_live = options.out_dir / "ledger.live.csv";
  parallel_for(static_cast<int>(todo.size()), options.parallelism, [&](int k) {
    const auto& cell = cells[todo[k]];
    const ScenarioSpec& scenario = grid[cell.scenario];
    IterationRecord rec = run_iteration(scenario, cell.iteration, config);
    write_iteration_record(iteration_record_path(options.out_dir, scenario.id, cell.iteration), rec);
    {
      std::lock_guard<std::mutex> lock(progress_mutex);
      std::ofstream live(ledger_live, std::ios::app);
      live << rec.scenario_id << ',' << rec.iteration << ',' << rec.seed << ',' << rec.status << ','
           << io::fixed(rec.wall_time, 3) << '\n';
      if (!options.quiet)
        std::cerr << scenario.id << " iteration " << cell.iteration << ": " << rec.status << " ("
                  << io::fixed(rec.wall_time, 1) << " s)\n";
    }
    result.records[todo[k]] = std::move(rec);
  });
  result.computed = static_cast<int>(todo.size());

  write_ledger_csv(options.out_dir / "ledger.csv", result.records);
  std::filesystem::remove(ledger_live);

  for (int s = 0; s < static_cast<int>(grid.size()); ++s) {
    std::vector<IterationRecord> recs;
    for (std::size_t c = 0; c < cells.size(); ++c)
      if (cells[c].scenario == s) recs.push_back(result.records[c]);
    int n_ok = 0;
    for (const auto& r : recs) n_ok += r.status == "ok";
    if (n_ok < 2) {
      warn("scenario " + grid[s].id + ": fewer than 2 successful iterations, no metrics");
      continue;
    }
    result.reports.push_back(evaluate_metrics(grid[s].id, recs));
  }
  write_results_csv(options.out_dir / "results.csv", result.reports);
  return result;
}

}  // namespace mhmm
