#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wqed/numerics.hpp"

namespace wqed::io {

inline constexpr const char* kUnits =
    "gamma = 1: frequencies and rates in units of gamma, times and lengths in 1/gamma, "
    "group velocity 1";

// 12 significant digits, shortest form.
std::string format_number(double v);

// CSV with a units comment line and a header row.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns);
  void row(const std::vector<double>& values);

 private:
  std::ofstream out_;
  std::size_t n_ = 0;
};

// Writes pretty JSON with a top-level "units" entry added to objects.
void write_json(const std::filesystem::path& path, nlohmann::json j);
// Throws ConfigError on a missing file or malformed JSON.
nlohmann::json read_json(const std::filesystem::path& path);

// Complex numbers as [re, im]; plain numbers are accepted on input.
nlohmann::json to_json(const CVec& v);
nlohmann::json to_json(const CMat& m);
CVec complex_vector_from_json(const nlohmann::json& j);
CMat complex_matrix_from_json(const nlohmann::json& j);

}  // namespace wqed::io
