#include "wqed/io.hpp"

#include <cstdio>

#include "wqed/errors.hpp"

namespace wqed::io {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns)
    : out_(path), n_(columns.size()) {
  if (!out_) throw ConfigError("cannot open " + path.string() + " for writing");
  out_ << "# units: " << kUnits << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << "\n";
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != n_) throw InvariantError("csv row has the wrong number of columns");
  for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_number(values[i]);
  out_ << "\n";
}

void write_json(const std::filesystem::path& path, nlohmann::json j) {
  if (j.is_object() && !j.contains("units")) j["units"] = kUnits;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

nlohmann::json to_json(const CVec& v) {
  auto j = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back({v(i).real(), v(i).imag()});
  return j;
}

nlohmann::json to_json(const CMat& m) {
  auto j = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) j.push_back(to_json(CVec(m.row(i).transpose())));
  return j;
}

namespace {
cplx complex_from_json(const nlohmann::json& e) {
  if (e.is_number()) return {e.get<double>(), 0.0};
  if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number())
    return {e[0].get<double>(), e[1].get<double>()};
  throw ConfigError("expected a number or [re, im], got " + e.dump());
}
}  // namespace

CVec complex_vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("expected an array of complex numbers");
  CVec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = complex_from_json(j[i]);
  return v;
}

CMat complex_matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("expected a non-empty matrix");
  const std::size_t cols = j[0].size();
  CMat m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw ConfigError("matrix rows differ in length");
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = complex_from_json(j[i][k]);
  }
  return m;
}

}  // namespace wqed::io
