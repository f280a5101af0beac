#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "wqed/commands.hpp"
#include "wqed/io.hpp"
#include "wqed/numerics.hpp"

using namespace wqed;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh(const std::string& name) {
  fs::path p = fs::path(WQED_TEST_TMP) / name;
  fs::remove_all(p);
  return p;
}

json single_system(double td) {
  return {{"emitters", {{{"omega", kPi / td}, {"gamma", 1.0}, {"delay", td}}}}};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// rows of a CSV written by CsvWriter, header and units line dropped
std::vector<std::vector<double>> csv_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
    rows.push_back(r);
  }
  return rows;
}

int run(const std::string& cmd, json cfg, const fs::path& out) {
  CommandContext ctx;
  ctx.config = std::move(cfg);
  ctx.out_dir = out;
  return run_command(cmd, ctx);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("empty emitter list is a config error") {
  CHECK(run("spectral", {{"system", {{"emitters", json::array()}}}}, fresh("empty")) == 2);
  CHECK(run("spectral", json::object(), fresh("nosys")) == 2);
  CHECK(run("frobnicate", json::object(), fresh("unknown")) == 2);
}

TEST_CASE("spectral outputs for a degenerate pair") {
  json sys = {{"emitters", {{{"omega", kPi / 2}, {"gamma", 1.0}, {"delay", 2.0}},
                            {{"omega", kPi / 2}, {"gamma", 1.0}, {"delay", 4.0}}}}};
  auto out = fresh("spectral2");
  REQUIRE(run("spectral", {{"system", sys}, {"xi_grid", {{"points", 101}}}}, out) == 0);
  auto bs = io::read_json(out / "bound_states.json");
  REQUIRE(bs["bound_states"].size() == 2);
  for (const auto& b : bs["bound_states"]) CHECK(b["omega"].get<double>() == doctest::Approx(kPi / 2));
  auto text = slurp(out / "xi_spectrum.csv");
  CHECK(text.rfind("# units:", 0) == 0);
  CHECK(text.find("omega,abs2_xi_1,re_xi_1,im_xi_1,abs2_xi_2,re_xi_2,im_xi_2") != std::string::npos);
  CHECK(csv_rows(out / "xi_spectrum.csv").size() == 101);
  CHECK(bs["units"].is_string());
}

TEST_CASE("delay sweep follows the epsilon law") {
  auto out = fresh("sweep");
  json cfg = {{"system", single_system(1.0)},
              {"xi_grid", {{"points", 11}}},
              {"delay_sweep", {{"t_min", 0.1}, {"t_max", 4.0}, {"points", 14}}}};
  REQUIRE(run("spectral", cfg, out) == 0);
  auto rows = csv_rows(out / "epsilon_vs_delay.csv");
  REQUIRE(rows.size() == 14);
  for (const auto& r : rows) {
    CHECK(r[3] == 1.0);
    CHECK(r[4] == doctest::Approx(1.0 / std::sqrt(1.0 + 2.0 * r[0])).epsilon(1e-10));
  }
}

TEST_CASE("manifest reruns reproduce the outputs") {
  auto a = fresh("rerun_a"), b = fresh("rerun_b");
  json cfg = {{"system", single_system(2.0)}, {"xi_grid", {{"points", 301}}}};
  REQUIRE(run("spectral", cfg, a) == 0);
  auto m = io::read_json(a / "manifest.json");
  CHECK(m["config"]["xi_grid"]["min"].is_number());
  auto cmd = unwrap_manifest(m);
  REQUIRE(cmd);
  CHECK(*cmd == "spectral");
  REQUIRE(run(*cmd, m, b) == 0);
  CHECK(slurp(a / "xi_spectrum.csv") == slurp(b / "xi_spectrum.csv"));
  CHECK(slurp(a / "bound_states.json") == slurp(b / "bound_states.json"));
}

TEST_CASE("bound sweep row at long delay") {
  auto out = fresh("bound");
  REQUIRE(run("bound", {{"sweep", {{"gamma_td", {2.0}}, {"deltas", {0.1}}}}}, out) == 0);
  auto rows = csv_rows(out / "trap_bound.csv");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0][3] >= 0.9);
  CHECK(rows[0][3] <= rows[0][1] + 1e-9);
}

TEST_CASE("design without verification") {
  json sys = {{"emitters", {{{"omega", 2 * kPi}, {"gamma", 1.0}, {"delay", 0.5}},
                            {{"omega", 2 * kPi}, {"gamma", 1.0}, {"delay", 1.0}}}}};
  auto out = fresh("design");
  json cfg = {{"system", sys}, {"target", {1.0, 0.0}}, {"Omega0", 4 * kPi + 2.4}, {"Delta", 0.15}};
  REQUIRE(run("design", cfg, out) == 0);
  auto d = io::read_json(out / "design.json");
  CHECK(d["fidelity"].get<double>() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_FALSE(fs::exists(out / "fdtd_check.json"));
  cfg["target"] = {1.0, 0.0, 0.0};
  CHECK(run("design", cfg, fresh("design_bad")) == 2);
}

TEST_CASE("zero-input fdtd smoke run") {
  auto out = fresh("fdtd_zero");
  json cfg = {{"system", single_system(1.0)},
              {"wavepacket", {{"type", "zero"}}},
              {"lattice", {{"h", 0.05}}}};
  REQUIRE(run("fdtd", cfg, out) == 0);
  auto p = io::read_json(out / "probabilities.json");
  for (const auto& v : p["P_fdtd"]) CHECK(v.get<double>() == 0.0);
  CHECK(p["norm_drift"].get<double>() == 0.0);
  for (const auto& r : csv_rows(out / "norm_drift.csv")) CHECK(r[2] == 0.0);
  CHECK(fs::exists(out / "psi2_snapshot.csv"));
}

TEST_CASE("fdtd run of an optimal packet") {
  auto out = fresh("fdtd_opt");
  json cfg = {{"system", single_system(1.0)},
              {"wavepacket", {{"type", "optimal"}, {"Delta", 0.4}, {"Omega0_offset", 0.8}}},
              {"lattice", {{"h", 0.05}, {"snapshot_times", {0.0}}}}};
  REQUIRE(run("fdtd", cfg, out) == 0);
  auto p = io::read_json(out / "probabilities.json");
  CHECK(std::abs(p["P_fdtd"][0].get<double>() - p["P_scatter"][0].get<double>()) < 0.03);
  auto m = io::read_json(out / "manifest.json");
  CHECK(m["result"]["wavepacket_hash"].is_string());
  CHECK(m["config"]["lattice"]["settle"].get<double>() == 30.0);
  cfg["lattice"]["h"] = 0.03;  // not commensurate with the delay
  CHECK(run("fdtd", cfg, fresh("fdtd_bad")) == 2);
}

}
