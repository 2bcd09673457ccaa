#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "mhmm/model.hpp"
#include "mhmm/sampler.hpp"

namespace mhmm::io {

/// Malformed input file; line is 1-based (0 when not applicable).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + (line ? ":" + std::to_string(line) : std::string()) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// 17 significant digits; NaN as "NA".
std::string full(double x);
/// Fixed decimals for human-readable tables.
std::string fixed(double x, int decimals = 3);

nlohmann::json to_json(const MatrixXd& m);
/// Expects an array of equal-length numeric rows.
MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& field);

nlohmann::json to_json(const GroupParams& g);
GroupParams group_from_json(const nlohmann::json& j);

/// Columns: subject, occasion, state_true, dep_1..dep_k. state_true is
/// 1-based, or "NA" when unknown.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset_csv(const std::filesystem::path& path);

/// One row per stored draw with group-level columns (see
/// group_parameter_names, without gamma) and loglik.
void write_chain_csv(const std::filesystem::path& path, const Chain& chain);
/// Loads group-level draws; subject-level draws are not persisted.
Chain read_chain_csv(const std::filesystem::path& path);

nlohmann::json chain_metadata(const Chain& chain);

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

}  // namespace mhmm::io
