#include "wqed/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include "wqed/experiments.hpp"
#include "wqed/fdtd.hpp"

namespace wqed {

nlohmann::json CriterionResult::to_json() const {
  return {{"id", id},           {"title", title},   {"pass", pass},
          {"within_budget", within_budget},         {"detail", detail},
          {"seconds", seconds}, {"budget_seconds", budget}, {"data", data}};
}

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  nlohmann::json data = nlohmann::json::object();
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

struct Loaded {
  SystemSpec sys;
  std::unique_ptr<Scatterer> sc;
};

Loaded load(SystemSpec sys) {
  auto bs = find_bound_states(sys);
  Loaded l{sys, std::make_unique<Scatterer>(overlaps(sys, bs.states))};
  return l;
}

// 1: overlaps against the single-emitter closed forms
Outcome overlaps_closed_form() {
  Outcome o;
  double e_eps = 0.0, e_xi = 0.0;
  for (double td : {0.1, 0.5, 1.0, 2.0, 4.0}) {
    auto sys = single_mirror_system(td);
    auto bs = find_bound_states(sys);
    if (bs.states.size() != 1) {
      o.detail = "expected one bound state at t_d = " + fmt(td);
      return o;
    }
    auto tab = overlaps(sys, bs.states);
    const double w0 = sys.emitters[0].omega;
    double ee = std::abs(std::abs(tab.eps(0, 0)) - epsilon_closed_form(1.0, td));
    double ex = 0.0;
    for (int k = -500; k <= 500; ++k) {
      const double w = w0 + 0.02 * k;
      ex = std::max(ex, std::abs(tab.xi(0, w) - xi_closed_form(w0, 1.0, td, w)));
    }
    o.data["t_d=" + fmt(td)] = {{"eps_error", ee}, {"xi_error", ex}};
    e_eps = std::max(e_eps, ee);
    e_xi = std::max(e_xi, ex);
  }
  o.pass = e_eps <= 1e-10 && e_xi <= 1e-8;
  o.detail = "max |eps - closed| = " + fmt(e_eps) + ", max |xi - closed| = " + fmt(e_xi);
  return o;
}

// 2: |tau| = 1
Outcome unitarity() {
  Outcome o;
  double worst = 0.0;
  for (const auto& sys : {single_mirror_system(1.0), two_mirror_system()}) {
    const double a = sys.window_min, b = sys.window_max;
    for (int i = 0; i < 1001; ++i) {
      const double w = a + (i + 0.5) * (b - a) / 1001.0;
      worst = std::max(worst, std::abs(std::abs(solve_scattering_state(sys, w).tau) - 1.0));
    }
  }
  o.pass = worst <= 1e-10;
  o.detail = "max ||tau| - 1| = " + fmt(worst) + " over 2 x 1001 frequencies";
  o.data["max_error"] = worst;
  return o;
}

// 3: orthonormality and completeness
Outcome orthonormality() {
  Outcome o;
  double bb = 0.0, bs_err = 0.0, ss = 0.0, comp = 0.0;
  for (const auto& sys : {single_mirror_system(1.0), two_mirror_system()}) {
    auto found = find_bound_states(sys);
    const auto& st = found.states;
    for (std::size_t a = 0; a < st.size(); ++a)
      for (std::size_t b = 0; b < st.size(); ++b)
        bb = std::max(bb, std::abs(inner(st[a], st[b]) - (a == b ? 1.0 : 0.0)));
    const double lo = sys.window_min, hi = sys.window_max;
    std::vector<ScatteringState> scat;
    for (int i = 0; i < 25; ++i) scat.push_back(solve_scattering_state(sys, lo + (i + 0.37) * (hi - lo) / 25.0));
    for (const auto& b : st)
      for (const auto& s : scat) bs_err = std::max(bs_err, std::abs(inner(b, s)));
    for (int i = 0; i + 1 < static_cast<int>(scat.size()); i += 2)
      ss = std::max(ss, std::abs(scattering_offdiag(scat[i], scat[i + 1])));
    auto tab = overlaps(sys, st);
    for (int n = 0; n < sys.size(); ++n)
      comp = std::max(comp, std::abs(completeness(tab, n, lo, hi).total() - 1.0));
  }
  o.pass = bb <= 1e-6 && bs_err <= 1e-6 && ss <= 1e-6 && comp <= 1e-3;
  o.detail = "bound-bound " + fmt(bb) + ", bound-scattering " + fmt(bs_err) +
             ", scattering off-diagonal " + fmt(ss) + ", completeness " + fmt(comp);
  o.data = {{"bound_bound", bb}, {"bound_scattering", bs_err}, {"scattering_offdiag", ss},
            {"completeness", comp}};
  return o;
}

// 4: number of bound states
Outcome bound_count() {
  Outcome o;
  auto degenerate = find_bound_states(two_mirror_system());
  auto detuned = find_bound_states(make_feedback_system({{kPi + 0.3, 1.0, 1.0}}));
  const int nd = static_cast<int>(degenerate.states.size());
  const int nt = static_cast<int>(detuned.states.size());
  o.pass = nd == 2 && nt == 0;
  o.detail = "degenerate pair: " + std::to_string(nd) + " bound states, detuned emitter: " +
             std::to_string(nt) + " (" + std::to_string(detuned.rejected.size()) +
             " candidates rejected)";
  o.data = {{"degenerate", nd}, {"detuned", nt}, {"detuned_rejected", detuned.rejected.size()}};
  return o;
}

// 5: single-emitter trapping sweep
Outcome trapping_sweep() {
  Outcome o;
  const std::vector<double> gts{0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0};
  const std::vector<double> deltas{0.4, 0.2, 0.1};
  std::vector<TrapRow> rows;
  for (double g : gts) rows.push_back(trapping_row(g, deltas));
  bool ordered = true;
  double ub_short = 0.0, ub_two = 0.0;
  o.data["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    ordered = ordered && r.P[0] <= r.P[1] + 1e-9 && r.P[1] <= r.P[2] + 1e-9 &&
              r.P[2] <= r.P_ub + 1e-9;
    if (r.gamma_td == 0.1) ub_short = r.P_ub;
    if (r.gamma_td == 2.0) ub_two = r.P_ub;
    o.data["rows"].push_back({{"gamma_td", r.gamma_td}, {"P_ub", r.P_ub}, {"P", r.P}});
  }
  o.pass = ordered && ub_short < 0.05 && ub_two > 0.9;
  o.detail = "P_ub(0.1) = " + fmt(ub_short) + ", P_ub(2) = " + fmt(ub_two) +
             (ordered ? ", ordering holds" : ", ordering violated");
  return o;
}

struct Comparison {
  std::vector<double> P_fdtd, P_scatter;
  double max_diff = 0.0;
  double drift = 0.0;
  double fidelity = 0.0;
};

Comparison compare(const Scatterer& sc, const TwoPhotonWavepacket& p, double h,
                   const CVec* target = nullptr) {
  RunOptions ro;
  ro.h = h;
  auto rep = simulate(sc, p, ro);
  Comparison c;
  c.P_fdtd = rep.trap.P;
  c.P_scatter = sc.trapping_probabilities(p);
  for (std::size_t a = 0; a < c.P_fdtd.size(); ++a)
    c.max_diff = std::max(c.max_diff, std::abs(c.P_fdtd[a] - c.P_scatter[a]));
  c.drift = rep.result.norm_drift;
  if (target) c.fidelity = rep.trap.fidelity(*target);
  return c;
}

// 6: long-delay trapping of the optimal packet, scattering theory against FDTD
Outcome single_emitter_fdtd(const ValidationOptions& opt) {
  Outcome o;
  auto l = load(single_mirror_system(2.0));
  const double w0 = l.sys.emitters[0].omega;
  auto p = l.sc->optimal_wavepacket(0, 0.1, 2.0 * w0 + 0.95);
  auto c = compare(*l.sc, p, opt.h_fig);
  o.pass = c.P_scatter[0] >= 0.9 && c.max_diff <= 0.02;
  o.detail = "P scatter = " + fmt(c.P_scatter[0]) + ", P fdtd = " + fmt(c.P_fdtd[0]) +
             " at h = " + fmt(opt.h_fig);
  o.data = {{"P_scatter", c.P_scatter[0]}, {"P_fdtd", c.P_fdtd[0]}, {"norm_drift", c.drift}};
  return o;
}

// 7: battery of designed and random packets, plus the drift convergence
Outcome oracle_equivalence(const ValidationOptions& opt) {
  Outcome o;
  auto one = load(single_mirror_system(2.0));
  auto one_b = load(single_mirror_system(1.0));
  auto two = load(two_mirror_system());
  struct Case {
    std::string name;
    const Scatterer* sc;
    TwoPhotonWavepacket p;
  };
  std::vector<Case> cases;
  for (double D : {0.2, 0.3, 0.4})
    cases.push_back({"optimal t_d=2 Delta=" + fmt(D), one.sc.get(), one.sc->optimal_wavepacket(0, D)});
  for (double D : {0.2, 0.4})
    cases.push_back({"optimal t_d=1 Delta=" + fmt(D), one_b.sc.get(), one_b.sc->optimal_wavepacket(0, D)});
  const double O2 = 4.0 * kPi + 2.4;
  const double s = 1.0 / std::sqrt(2.0);
  const std::vector<std::pair<std::string, CVec>> targets{
      {"e1", CVec::Unit(2, 0)},
      {"e2", CVec::Unit(2, 1)},
      {"(1,1)", (CVec(2) << s, s).finished()},
      {"(1,i)", (CVec(2) << s, kI * s).finished()},
      {"(1,-1)", (CVec(2) << s, -s).finished()}};
  for (const auto& [name, t] : targets)
    cases.push_back({"design " + name, two.sc.get(), two.sc->design_input(t, O2, 0.2).packet});

  std::mt19937_64 rng(opt.seed);
  auto add_random = [&](const Loaded& l, int n_structured, int n_grid, const std::string& tag) {
    const double w0 = l.sys.emitters[0].omega;
    for (int i = 0; i < n_structured; ++i) {
      auto p = random_structured_packet(rng, l.sys.size(), 2 * w0 - 2.0, 2 * w0 + 2.0, 0.2, 0.4);
      l.sc->normalize(p);
      cases.push_back({"random structured " + tag + " #" + std::to_string(i), l.sc.get(), p});
    }
    for (int i = 0; i < n_grid; ++i)
      cases.push_back({"random grid " + tag + " #" + std::to_string(i), l.sc.get(),
                       random_grid_packet(rng, w0, 1.5, 41)});
  };
  add_random(one, 3, 1, "N=1");
  add_random(two, 4, 2, "N=2");

  double worst = 0.0;
  o.data["cases"] = nlohmann::json::array();
  for (const auto& cs : cases) {
    auto c = compare(*cs.sc, cs.p, opt.h_battery);
    worst = std::max(worst, c.max_diff);
    o.data["cases"].push_back({{"name", cs.name}, {"P_fdtd", c.P_fdtd},
                               {"P_scatter", c.P_scatter}, {"max_diff", c.max_diff}});
  }

  // drift at h and h/2 for one packet
  const double h0 = 2.0 * opt.h_battery;
  auto p = one.sc->optimal_wavepacket(0, 0.4);
  RunOptions ro;
  ro.h = h0;
  const double d1 = simulate(*one.sc, p, ro).result.norm_drift;
  ro.h = h0 / 2;
  const double d2 = simulate(*one.sc, p, ro).result.norm_drift;
  const double ratio = d2 / d1;
  o.data["drift"] = {{"h", h0}, {"drift_h", d1}, {"drift_h_half", d2}, {"ratio", ratio}};
  // "halves": the drift at h/2 is at most 0.6 of the drift at h
  o.pass = worst <= 0.02 && ratio <= 0.6;
  o.detail = std::to_string(cases.size()) + " packets, max |dP| = " + fmt(worst) +
             " at h = " + fmt(opt.h_battery) + "; drift " + fmt(d1) + " -> " + fmt(d2) +
             " when h halves";
  return o;
}

// 8: designed superpositions verified by FDTD
Outcome superposition_design(const ValidationOptions& opt) {
  Outcome o;
  auto two = load(two_mirror_system());
  const double s = 1.0 / std::sqrt(2.0);
  const std::vector<CVec> targets{CVec::Unit(2, 0), CVec::Unit(2, 1), (CVec(2) << s, s).finished()};
  double worst = 1.0;
  o.data["fidelity"] = nlohmann::json::array();
  for (const auto& t : targets) {
    auto d = two.sc->design_input(t, 4.0 * kPi + 2.4, 0.15);
    auto c = compare(*two.sc, d.packet, opt.h_fig, &t);
    worst = std::min(worst, c.fidelity);
    o.data["fidelity"].push_back(c.fidelity);
  }
  o.pass = worst >= 0.95;
  o.detail = "min FDTD fidelity = " + fmt(worst) + " over e1, e2, (1,1)/sqrt2";
  return o;
}

// 9: no packet beats the bound
Outcome cauchy_schwarz(const ValidationOptions& opt) {
  Outcome o;
  std::mt19937_64 rng(opt.seed + 9);
  double worst = -1.0;
  int count = 0;
  for (const auto& sys : {single_mirror_system(2.0), two_mirror_system()}) {
    auto l = load(sys);
    const int Nb = l.sc->n_bound();
    std::vector<double> ub(Nb);
    for (int a = 0; a < Nb; ++a) ub[a] = l.sc->upper_bound(a).P_ub;
    const double w0 = sys.emitters[0].omega;
    for (int i = 0; i < 50; ++i) {
      TwoPhotonWavepacket p;
      if (i % 2 == 0) {
        p = random_structured_packet(rng, sys.size(), 2 * w0 - 3.0, 2 * w0 + 3.0, 0.05, 0.5);
        l.sc->normalize(p);
      } else {
        p = random_grid_packet(rng, w0, 2.0, 41);
      }
      auto P = l.sc->trapping_probabilities(p);
      for (int a = 0; a < Nb; ++a) worst = std::max(worst, P[a] - ub[a]);
      ++count;
    }
  }
  o.pass = worst <= 1e-6;
  o.detail = std::to_string(count) + " packets, max (P - P_ub) = " + fmt(worst);
  o.data = {{"max_excess", worst}, {"packets", count}};
  return o;
}

// 10: T-matrix against the damped-integral extrapolation
Outcome t_matrix_oracle() {
  Outcome o;
  double worst = 0.0;
  for (const auto& sys : {single_mirror_system(2.0), two_mirror_system()}) {
    auto l = load(sys);
    const double c = 2.0 * sys.emitters[0].omega;
    std::vector<double> Om;
    for (int i = 0; i < 10; ++i) Om.push_back(c + (i % 2 ? -1.0 : 1.0) * (0.5 + 0.35 * i));
    auto ref = t_matrix_eta_oracle(l.sc->overlaps(), Om);
    for (std::size_t i = 0; i < Om.size(); ++i) {
      CMat T = l.sc->t_matrix(Om[i]);
      worst = std::max(worst, (T - ref[i]).norm() / T.norm());
    }
  }
  o.pass = worst <= 1e-4;
  o.detail = "max relative difference = " + fmt(worst) + " at 20 total energies";
  o.data["max_relative"] = worst;
  return o;
}

struct Entry {
  const char* title;
  double budget;
};
constexpr Entry kEntries[kNumCriteria] = {
    {"closed-form overlaps", 1.0},
    {"unitarity", 5.0},
    {"orthonormality and completeness", 30.0},
    {"bound-state count", 5.0},
    {"trapping sweep ordering", 600.0},
    {"single-emitter FDTD trapping", 300.0},
    {"FDTD against scattering theory", 1800.0},
    {"superposition design", 900.0},
    {"Cauchy-Schwarz bound", 120.0},
    {"T-matrix regularization", 60.0},
};

}  // namespace

CriterionResult run_criterion(int id, const ValidationOptions& opt) {
  if (id < 1 || id > kNumCriteria) throw ConfigError("unknown criterion " + std::to_string(id));
  CriterionResult r;
  r.id = id;
  r.title = kEntries[id - 1].title;
  r.budget = kEntries[id - 1].budget;
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    switch (id) {
      case 1: o = overlaps_closed_form(); break;
      case 2: o = unitarity(); break;
      case 3: o = orthonormality(); break;
      case 4: o = bound_count(); break;
      case 5: o = trapping_sweep(); break;
      case 6: o = single_emitter_fdtd(opt); break;
      case 7: o = oracle_equivalence(opt); break;
      case 8: o = superposition_design(opt); break;
      case 9: o = cauchy_schwarz(opt); break;
      case 10: o = t_matrix_oracle(); break;
    }
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.within_budget = r.seconds <= r.budget;
  r.pass = o.pass && (r.within_budget || !opt.enforce_budget);
  r.detail = o.detail;
  r.data = std::move(o.data);
  return r;
}

std::vector<CriterionResult> run_acceptance(const ValidationOptions& opt, const std::vector<int>& ids) {
  std::vector<int> todo = ids;
  if (todo.empty())
    for (int i = 1; i <= kNumCriteria; ++i) todo.push_back(i);
  std::vector<CriterionResult> out;
  for (int id : todo) out.push_back(run_criterion(id, opt));
  return out;
}

}  // namespace wqed
