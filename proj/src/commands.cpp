#include "wqed/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <iostream>
#include <random>

#include <omp.h>

#include "wqed/experiments.hpp"
#include "wqed/fdtd.hpp"
#include "wqed/io.hpp"
#include "wqed/validation.hpp"

namespace wqed {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::uint64_t kDefaultSeed = 20240601;

// Reads parameters from a config object and writes the defaults it used back, so
// the object ends up as the resolved config.
class Params {
 public:
  Params(json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (j_.is_null()) j_ = json::object();
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  bool has(const char* key) const { return j_.contains(key) && !j_[key].is_null(); }

  template <class T>
  T get(const char* key, T def) {
    if (!has(key)) j_[key] = def;
    return as<T>(key);
  }

  template <class T>
  T require(const char* key) {
    if (!has(key)) throw ConfigError(where_ + ": missing required field '" + key + "'");
    return as<T>(key);
  }

  const json& raw(const char* key) const {
    if (!has(key)) throw ConfigError(where_ + ": missing required field '" + key + "'");
    return j_[key];
  }

  Params sub(const char* key) { return Params(j_[key], where_ + "." + key); }

 private:
  template <class T>
  T as(const char* key) {
    try {
      return j_[key].get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  json& j_;
  std::string where_;
};

struct Output {
  fs::path dir;
  std::vector<std::string> files;
  fs::path operator()(const std::string& name) {
    files.push_back(name);
    return dir / name;
  }
};

SystemSpec load_system(Params& p) {
  SystemSpec sys = system_from_json(p.raw("system"));
  require_valid(sys);
  return sys;
}

std::vector<double> sweep_values(const json& j, const std::string& where) {
  if (j.is_array()) return j.get<std::vector<double>>();
  if (j.is_object()) {
    const double lo = j.at("min").get<double>(), hi = j.at("max").get<double>();
    const int n = j.at("points").get<int>();
    if (n < 1) throw ConfigError(where + ": points must be positive");
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1.0);
    return v;
  }
  throw ConfigError(where + ": expected a list or {min, max, points}");
}

json spectral(json& cfg, Output& out) {
  Params p(cfg, "config");
  auto sys = load_system(p);
  auto found = find_bound_states(sys);
  json bs;
  bs["bound_states"] = bound_states_to_json(found.states);
  bs["degenerate_construction"] = found.degenerate_construction;
  bs["rejected_candidates"] = json::array();
  for (const auto& r : found.rejected)
    bs["rejected_candidates"].push_back({{"omega", r.omega}, {"det_abs", r.det_abs},
                                         {"consistency", r.consistency}, {"reason", r.reason}});
  io::write_json(out("bound_states.json"), bs);

  auto tab = overlaps(sys, found.states);
  auto g = p.sub("xi_grid");
  const double lo = g.get("min", sys.window_min), hi = g.get("max", sys.window_max);
  const int n = g.get("points", 2001);
  if (n < 2 || !(hi > lo)) throw ConfigError("xi_grid: need points >= 2 and max > min");
  std::vector<std::string> cols{"omega"};
  for (int k = 1; k <= sys.size(); ++k)
    for (const char* part : {"abs2_xi_", "re_xi_", "im_xi_"}) cols.push_back(part + std::to_string(k));
  std::vector<CVec> xs(n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) xs[i] = tab.xi(lo + (hi - lo) * i / (n - 1.0));
  io::CsvWriter csv(out("xi_spectrum.csv"), cols);
  for (int i = 0; i < n; ++i) {
    std::vector<double> row{lo + (hi - lo) * i / (n - 1.0)};
    for (int k = 0; k < sys.size(); ++k) {
      row.push_back(std::norm(xs[i](k)));
      row.push_back(xs[i](k).real());
      row.push_back(xs[i](k).imag());
    }
    csv.row(row);
  }

  json summary{{"n_bound", found.states.size()}};
  if (p.has("delay_sweep")) {
    auto d = p.sub("delay_sweep");
    const double gamma = d.get("gamma", 1.0);
    const int n_pi = d.get("n_pi", 1);
    json range = {{"min", d.get("t_min", 0.1)}, {"max", d.get("t_max", 4.0)},
                  {"points", d.get("points", 40)}};
    auto pts = delay_sweep(sweep_values(range, "delay_sweep"), gamma, n_pi);
    io::CsvWriter ev(out("epsilon_vs_delay.csv"),
                     {"t_d", "gamma_td", "omega0", "n_bound", "epsilon", "epsilon_closed_form"});
    for (const auto& q : pts)
      ev.row({q.t_d, gamma * q.t_d, q.omega0, double(q.n_bound), q.epsilon, q.epsilon_closed});
  }
  return summary;
}

json bound(json& cfg, Output& out) {
  Params p(cfg, "config");
  auto s = p.sub("sweep");
  const double gamma = s.get("gamma", 1.0);
  const int n_pi = s.get("n_pi", 1);
  const auto deltas = s.get("deltas", std::vector<double>{0.4, 0.2, 0.1});
  if (!s.has("gamma_td")) s.get("gamma_td", std::vector<double>{0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0});
  const auto gts = sweep_values(s.raw("gamma_td"), "sweep.gamma_td");
  if (!(gamma > 0)) throw ConfigError("sweep.gamma must be positive");
  std::vector<TrapRow> rows(gts.size());
  std::vector<std::exception_ptr> errs(gts.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < gts.size(); ++i) {
    try {
      rows[i] = trapping_row(gts[i] / gamma, deltas, gamma, n_pi);
    } catch (...) {
      errs[i] = std::current_exception();
    }
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  std::vector<std::string> cols{"gamma_td", "P_ub", "Omega_star"};
  for (double D : deltas) cols.push_back("P_Delta_" + io::format_number(D));
  io::CsvWriter csv(out("trap_bound.csv"), cols);
  for (const auto& r : rows) {
    std::vector<double> row{r.gamma_td, r.P_ub, r.Omega_star};
    row.insert(row.end(), r.P.begin(), r.P.end());
    csv.row(row);
  }
  return {{"points", rows.size()}};
}

RunOptions run_options(Params& l) {
  RunOptions o;
  o.h = l.get("h", o.h);
  o.double_precision = l.get("double_precision", o.double_precision);
  o.clearance = l.get("clearance", o.clearance);
  o.settle = l.get("settle", o.settle);
  o.snapshot_stride = l.get("snapshot_stride", o.snapshot_stride);
  o.norm_every = l.get("norm_every", o.norm_every);
  if (!(o.h > 0)) throw ConfigError("lattice.h must be positive");
  return o;
}

json design(json& cfg, Output& out) {
  Params p(cfg, "config");
  auto sys = load_system(p);
  CVec target = io::complex_vector_from_json(p.raw("target"));
  const double Omega0 = p.require<double>("Omega0");
  const double Delta = p.get("Delta", 0.15);
  const double max_cond = p.get("max_condition", 1e6);
  const bool verify = p.get("verify", false);
  auto found = find_bound_states(sys);
  Scatterer sc(overlaps(sys, found.states));
  auto r = sc.design_input(target, Omega0, Delta, max_cond);
  json dj = r.to_json();
  dj["bound_omegas"] = sc.overlaps().row_omegas;
  io::write_json(out("design.json"), dj);
  json summary{{"fidelity", r.fidelity}, {"condition_number", r.condition_number}};
  if (verify) {
    auto l = p.sub("fdtd");
    RunOptions ro = run_options(l);
    auto rep = simulate(sc, r.packet, ro);
    json fj;
    fj["P_fdtd"] = rep.trap.P;
    fj["P_scatter"] = io::to_json(r.P);
    fj["fidelity_fdtd"] = rep.trap.fidelity(target);
    fj["fidelity_scatter"] = r.fidelity_finite_delta;
    fj["rho_fdtd"] = io::to_json(rep.trap.rho);
    fj["run"] = rep.manifest(sys, r.packet);
    io::write_json(out("fdtd_check.json"), fj);
    summary["fidelity_fdtd"] = fj["fidelity_fdtd"];
  }
  return summary;
}

TwoPhotonWavepacket make_packet(Params& w, const Scatterer& sc, std::uint64_t seed) {
  const auto type = w.get<std::string>("type", "optimal");
  const SystemSpec& sys = sc.overlaps().system;
  if (type == "optimal") {
    const int alpha = w.get("alpha", 0);
    if (alpha < 0 || alpha >= sc.n_bound())
      throw ConfigError("wavepacket.alpha out of range: the system has " +
                        std::to_string(sc.n_bound()) + " bound states");
    const double Delta = w.get("Delta", 0.1);
    std::optional<double> Omega0;
    if (w.has("Omega0_offset"))
      Omega0 = 2.0 * sc.overlaps().row_omegas[alpha] + w.require<double>("Omega0_offset");
    else if (w.has("Omega0"))
      Omega0 = w.require<double>("Omega0");
    return sc.optimal_wavepacket(alpha, Delta, Omega0);
  }
  if (type == "superposition")
    return sc.superposition_packet(io::complex_vector_from_json(w.raw("c")),
                                   w.require<double>("Omega0"), w.get("Delta", 0.15));
  if (type == "grid")
    return make_grid_packet(w.require<double>("nu_min"), w.require<double>("step"),
                            io::complex_matrix_from_json(w.raw("values")));
  if (type == "random_grid") {
    std::mt19937_64 rng(seed);
    const double c = w.get("center", sys.mean_omega());
    return random_grid_packet(rng, c, w.get("half_width", 1.5), w.get("points", 41));
  }
  if (type == "zero") {
    const double c = sys.mean_omega();
    return make_grid_packet(c - 1.0, 1.0, CMat::Zero(3, 3));
  }
  throw ConfigError("wavepacket.type must be optimal, superposition, grid, random_grid or zero");
}

json fdtd(json& cfg, Output& out, std::uint64_t seed) {
  Params p(cfg, "config");
  auto sys = load_system(p);
  auto found = find_bound_states(sys);
  Scatterer sc(overlaps(sys, found.states));
  auto w = p.sub("wavepacket");
  auto packet = make_packet(w, sc, seed);
  auto l = p.sub("lattice");
  RunOptions ro = run_options(l);
  const auto times = l.get("snapshot_times", std::vector<double>{});
  const bool final_snap = l.get("snapshot_final", true);

  const double g = std::max(sys.max_gamma(), 1e-12);
  PositionPacket pp(sc, packet, ro.h / g);
  PositionSupport sup = pp.empty() ? PositionSupport{-1.0, 0.0, 0.0} : pp.support();
  SimulationReport rep;
  rep.plan = plan_run(sys, sup, ro);
  for (double t : times) ro.snapshot_times.push_back(std::min(std::max(t, 0.0), rep.plan.T_final));
  if (final_snap) ro.snapshot_times.push_back(rep.plan.T_final);
  FieldState init = init_from_wavepacket(pp, sys, rep.plan.lattice, rep.plan.X_shift);
  const double n_before = init.init_norm;
  rep.result = run(std::move(init), sys, rep.plan.lattice.n_steps, ro);
  rep.result.init_norm_before_renorm = n_before;
  rep.result.X_shift = rep.plan.X_shift;
  rep.trap = extract_trapping(rep.result.state, sc.overlaps());

  {
    io::CsvWriter csv(out("psi2_snapshot.csv"), {"t", "x1", "x2", "abs_psi2"});
    for (const auto& sn : rep.result.snapshots)
      for (std::size_t i = 0; i < sn.y.size(); ++i)
        for (std::size_t j = 0; j < sn.y.size(); ++j)
          csv.row({sn.t, sn.y[i] + sn.t, sn.y[j] + sn.t, sn.abs_psi2[i][j]});
  }
  {
    io::CsvWriter csv(out("norm_drift.csv"), {"t", "norm", "drift"});
    const double N0 = rep.result.norm_history.empty() ? 0.0 : rep.result.norm_history[0].second;
    for (const auto& [t, n] : rep.result.norm_history) csv.row({t, n, n - N0});
  }
  json pj;
  pj["bound_omegas"] = sc.overlaps().row_omegas;
  pj["P_fdtd"] = rep.trap.P;
  pj["P_scatter"] = sc.trapping_probabilities(packet);
  pj["rho_fdtd"] = io::to_json(rep.trap.rho);
  pj["extraction_residual"] = rep.trap.residual;
  pj["norm_drift"] = rep.result.norm_drift;
  pj["init_norm_before_renorm"] = rep.result.init_norm_before_renorm;
  io::write_json(out("probabilities.json"), pj);
  return rep.manifest(sys, packet);
}

json validate(json& cfg, Output& out, std::uint64_t seed, int& code) {
  Params p(cfg, "config");
  ValidationOptions vo;
  vo.seed = seed;
  vo.h_fig = p.get("h_fig", vo.h_fig);
  vo.h_battery = p.get("h_battery", vo.h_battery);
  vo.enforce_budget = p.get("enforce_budget", vo.enforce_budget);
  auto ids = p.get("criteria", std::vector<int>{});
  for (int id : ids)
    if (id < 1 || id > kNumCriteria) throw ConfigError("criteria: unknown id " + std::to_string(id));
  json res = json::array();
  bool all = true;
  for (int id : (ids.empty() ? std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10} : ids)) {
    auto r = run_criterion(id, vo);
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", r.pass ? "PASS" : "FAIL", r.id,
                r.title.c_str(), r.detail.c_str(), r.seconds);
    std::fflush(stdout);
    all = all && r.pass;
    res.push_back(r.to_json());
  }
  io::write_json(out("validation.json"), {{"all_pass", all}, {"results", res}});
  if (!all) code = 4;
  return {{"all_pass", all}};
}

}  // namespace

std::optional<std::string> unwrap_manifest(json& config) {
  if (config.is_object() && config.contains("config") && config.contains("command")) {
    auto cmd = config["command"].get<std::string>();
    json inner = config["config"];
    config = std::move(inner);
    return cmd;
  }
  return std::nullopt;
}

int run_command(const std::string& name, const CommandContext& ctx) {
  try {
    if (std::find(kCommands.begin(), kCommands.end(), name) == kCommands.end())
      throw ConfigError("unknown command '" + name + "'");
    if (ctx.threads > 0) omp_set_num_threads(ctx.threads);
    fs::create_directories(ctx.out_dir);
    json cfg = ctx.config;
    if (cfg.is_null()) cfg = json::object();
    if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
    std::uint64_t seed = kDefaultSeed;
    if (ctx.seed)
      seed = *ctx.seed;
    else if (cfg.contains("seed"))
      seed = cfg["seed"].get<std::uint64_t>();
    cfg["seed"] = seed;

    Output out{ctx.out_dir, {}};
    int code = 0;
    json extra;
    if (name == "spectral") extra = spectral(cfg, out);
    if (name == "bound") extra = bound(cfg, out);
    if (name == "design") extra = design(cfg, out);
    if (name == "fdtd") extra = fdtd(cfg, out, seed);
    if (name == "validate") extra = validate(cfg, out, seed, code);

    json m;
    m["command"] = name;
    m["config"] = cfg;
    m["threads"] = ctx.threads > 0 ? ctx.threads : omp_get_max_threads();
    m["outputs"] = out.files;
    m["result"] = extra;
    io::write_json(ctx.out_dir / "manifest.json", m);
    return code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const InvariantError& e) {
    std::cerr << "invariant breach: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace wqed
