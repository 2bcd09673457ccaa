#include "mhmm/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace mhmm::io {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& file, std::size_t line) {
  if (s == "NA" || s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError(file, line, "not a number: '" + s + "'");
  }
  if (used != s.size()) throw ParseError(file, line, "not a number: '" + s + "'");
  return v;
}

long parse_int(const std::string& s, const std::string& file, std::size_t line) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(s, &used);
  } catch (const std::exception&) {
    throw ParseError(file, line, "not an integer: '" + s + "'");
  }
  if (used != s.size()) throw ParseError(file, line, "not an integer: '" + s + "'");
  return v;
}

}  // namespace

std::string full(double x) {
  if (std::isnan(x)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fixed(double x, int decimals) {
  if (std::isnan(x)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

nlohmann::json to_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument(field + ": expected a non-empty array of rows");
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) throw std::invalid_argument(field + ": rows must be non-empty arrays");
  MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw std::invalid_argument(field + ": row " + std::to_string(r + 1) + " has a different length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number())
        throw std::invalid_argument(field + ": entry (" + std::to_string(r + 1) + "," + std::to_string(c + 1) +
                                    ") is not a number");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

nlohmann::json to_json(const GroupParams& g) {
  return {{"n_states", g.n_states()},
          {"n_dep", g.n_dep()},
          {"emiss_mean", to_json(g.emiss_mean)},
          {"emiss_rand_var", to_json(g.emiss_rand_var)},
          {"emiss_resid_var", to_json(g.emiss_resid_var)},
          {"tpm_intercepts", to_json(g.tpm_intercepts)},
          {"tpm_rand_var", to_json(g.tpm_rand_var)}};
}

GroupParams group_from_json(const nlohmann::json& j) {
  auto field = [&](const char* name) -> const nlohmann::json& {
    if (!j.contains(name)) throw std::invalid_argument(std::string("group: missing field '") + name + "'");
    return j.at(name);
  };
  GroupParams g;
  g.emiss_mean = matrix_from_json(field("emiss_mean"), "group.emiss_mean");
  g.emiss_rand_var = matrix_from_json(field("emiss_rand_var"), "group.emiss_rand_var");
  g.emiss_resid_var = matrix_from_json(field("emiss_resid_var"), "group.emiss_resid_var");
  g.tpm_intercepts = matrix_from_json(field("tpm_intercepts"), "group.tpm_intercepts");
  g.tpm_rand_var = matrix_from_json(field("tpm_rand_var"), "group.tpm_rand_var");
  if (j.contains("n_states") && j.at("n_states").get<int>() != g.n_states())
    throw std::invalid_argument("group: n_states does not match emiss_mean columns");
  if (j.contains("n_dep") && j.at("n_dep").get<int>() != g.n_dep())
    throw std::invalid_argument("group: n_dep does not match emiss_mean rows");
  g.validate(/*allow_zero_rand_var=*/true);
  return g;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ostringstream out;
  out << "subject,occasion,state_true";
  for (int k = 1; k <= data.n_dep(); ++k) out << ",dep_" << k;
  out << '\n';
  for (int n = 0; n < data.n_subjects(); ++n) {
    const auto& s = data.subjects[n];
    for (Eigen::Index t = 0; t < s.obs.rows(); ++t) {
      out << n + 1 << ',' << t + 1 << ',';
      if (s.states) out << (*s.states)[static_cast<std::size_t>(t)] + 1;
      else out << "NA";
      for (Eigen::Index k = 0; k < s.obs.cols(); ++k) out << ',' << full(s.obs(t, k));
      out << '\n';
    }
  }
  write_text(path, out.str());
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  const std::string file = path.string();
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError(file, 1, "empty file");
  const auto header = split_csv(line);
  if (header.size() < 4 || header[0] != "subject" || header[1] != "occasion" || header[2] != "state_true")
    throw ParseError(file, 1, "expected header subject,occasion,state_true,dep_1,...");
  const std::size_t n_dep = header.size() - 3;

  struct Rows {
    std::vector<std::vector<double>> obs;
    std::vector<int> states;
    bool has_states = true;
  };
  std::vector<Rows> subjects;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw ParseError(file, line_no, "expected " + std::to_string(header.size()) + " columns, got " +
                                          std::to_string(cells.size()));
    const long subject = parse_int(cells[0], file, line_no);
    const long occasion = parse_int(cells[1], file, line_no);
    if (subject < 1) throw ParseError(file, line_no, "subject index must be >= 1");
    if (static_cast<std::size_t>(subject) > subjects.size()) {
      if (static_cast<std::size_t>(subject) != subjects.size() + 1)
        throw ParseError(file, line_no, "subjects must be numbered consecutively from 1");
      subjects.emplace_back();
    }
    if (static_cast<std::size_t>(subject) != subjects.size())
      throw ParseError(file, line_no, "rows of a subject must be contiguous");
    Rows& rows = subjects.back();
    if (occasion != static_cast<long>(rows.obs.size()) + 1)
      throw ParseError(file, line_no, "occasions must be numbered consecutively from 1");
    if (cells[2] == "NA") {
      rows.has_states = false;
    } else {
      const long st = parse_int(cells[2], file, line_no);
      if (st < 1) throw ParseError(file, line_no, "state_true must be >= 1");
      rows.states.push_back(static_cast<int>(st - 1));
    }
    std::vector<double> values(n_dep);
    for (std::size_t k = 0; k < n_dep; ++k) {
      values[k] = parse_double(cells[3 + k], file, line_no);
      if (!std::isfinite(values[k])) throw ParseError(file, line_no, "non-finite observation");
    }
    rows.obs.push_back(std::move(values));
  }
  if (subjects.empty()) throw ParseError(file, line_no, "no data rows");

  Dataset data;
  for (auto& rows : subjects) {
    SubjectSeries s;
    s.obs.resize(static_cast<Eigen::Index>(rows.obs.size()), static_cast<Eigen::Index>(n_dep));
    for (std::size_t t = 0; t < rows.obs.size(); ++t)
      for (std::size_t k = 0; k < n_dep; ++k)
        s.obs(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = rows.obs[t][k];
    if (rows.has_states && rows.states.size() == rows.obs.size()) s.states = std::move(rows.states);
    data.subjects.push_back(std::move(s));
  }
  return data;
}

void write_chain_csv(const std::filesystem::path& path, const Chain& chain) {
  const auto names = chain.parameter_names(/*include_gamma=*/false);
  std::ostringstream out;
  out << "draw";
  for (const auto& n : names) out << ',' << n;
  out << ",loglik\n";
  for (std::size_t d = 0; d < chain.draws.size(); ++d) {
    out << d + 1;
    for (const auto& n : names) out << ',' << full(group_parameter_value(chain.draws[d].group, n));
    out << ',' << full(chain.draws[d].loglik) << '\n';
  }
  write_text(path, out.str());
}

Chain read_chain_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open chain " + path.string());
  const std::string file = path.string();
  std::string line;
  if (!std::getline(in, line)) throw ParseError(file, 1, "empty file");
  const auto header = split_csv(line);
  if (header.size() < 3 || header.front() != "draw" || header.back() != "loglik")
    throw ParseError(file, 1, "expected header draw,<parameters>,loglik");

  int n_dep = 0;
  int m = 0;
  for (std::size_t c = 1; c + 1 < header.size(); ++c) {
    const auto& h = header[c];
    const auto first = h.find('.');
    const auto second = h.find('.', first + 1);
    if (first == std::string::npos || second == std::string::npos) throw ParseError(file, 1, "bad column " + h);
    const int a = std::stoi(h.substr(first + 1, second - first - 1));
    const int b = std::stoi(h.substr(second + 1));
    const std::string p = h.substr(0, first);
    if (p.rfind("emiss_", 0) == 0) {
      n_dep = std::max(n_dep, a);
      m = std::max(m, b);
    } else {
      m = std::max({m, a, b});
    }
  }
  const auto expected = group_parameter_names(n_dep, m, false);
  if (expected.size() != header.size() - 2 || !std::equal(expected.begin(), expected.end(), header.begin() + 1))
    throw ParseError(file, 1, "unexpected column layout");

  Chain chain;
  chain.spec = {m, n_dep, {}, {}};
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw ParseError(file, line_no, "column count mismatch");
    Draw d;
    GroupParams& g = d.group;
    g.emiss_mean.resize(n_dep, m);
    g.emiss_rand_var.resize(n_dep, m);
    g.emiss_resid_var.resize(n_dep, m);
    g.tpm_intercepts.resize(m, m - 1);
    g.tpm_rand_var.resize(m, m - 1);
    std::size_t c = 1;
    for (MatrixXd* mat : {&g.emiss_mean, &g.emiss_rand_var, &g.emiss_resid_var})
      for (int k = 0; k < n_dep; ++k)
        for (int s = 0; s < m; ++s) (*mat)(k, s) = parse_double(cells[c++], file, line_no);
    for (MatrixXd* mat : {&g.tpm_intercepts, &g.tpm_rand_var})
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m - 1; ++j) (*mat)(i, j) = parse_double(cells[c++], file, line_no);
    d.loglik = parse_double(cells[c], file, line_no);
    chain.draws.push_back(std::move(d));
  }
  chain.meta.n_iter = static_cast<int>(chain.draws.size());
  return chain;
}

nlohmann::json chain_metadata(const Chain& chain) {
  nlohmann::json acc = nlohmann::json::array();
  for (Eigen::Index i = 0; i < chain.meta.acceptance.size(); ++i) acc.push_back(chain.meta.acceptance(i));
  return {{"chain_index", chain.meta.chain_index},
          {"seed", chain.meta.seed},
          {"n_iter", chain.meta.n_iter},
          {"burn_in", chain.meta.burn_in},
          {"thin", chain.meta.thin},
          {"stored_draws", chain.draws.size()},
          {"n_states", chain.spec.n_states},
          {"n_dep", chain.spec.n_dep},
          {"acceptance_per_row", acc},
          {"proposal_scheme", chain.meta.proposal_scheme},
          {"empty_state_sweeps", chain.meta.empty_state_sweeps},
          {"start",
           {{"emiss_mean", to_json(chain.meta.start.emiss_mean)},
            {"emiss_var", to_json(chain.meta.start.emiss_var)},
            {"tpm", to_json(chain.meta.start.tpm)}}}};
}

}  // namespace mhmm::io
