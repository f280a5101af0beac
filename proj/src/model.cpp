#include "wqed/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace wqed {

double SystemSpec::max_delay() const {
  double t = 0.0;
  for (const auto& e : emitters) t = std::max(t, e.delay);
  return t;
}

double SystemSpec::max_gamma() const {
  double g = 0.0;
  for (const auto& e : emitters) g = std::max(g, e.gamma);
  return g;
}

double SystemSpec::mean_omega() const {
  if (emitters.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : emitters) s += e.omega;
  return s / emitters.size();
}

void set_default_window(SystemSpec& sys, double half_width_in_gamma) {
  if (sys.emitters.empty()) return;
  double lo = sys.emitters[0].omega, hi = lo;
  for (const auto& e : sys.emitters) {
    lo = std::min(lo, e.omega);
    hi = std::max(hi, e.omega);
  }
  double g = sys.max_gamma() > 0 ? sys.max_gamma() : 1.0;
  sys.window_min = lo - half_width_in_gamma * g;
  sys.window_max = hi + half_width_in_gamma * g;
}

SystemSpec make_feedback_system(std::vector<EmitterSpec> emitters) {
  SystemSpec sys;
  sys.emitters = std::move(emitters);
  sys.kind = CouplingKind::feedback;
  set_default_window(sys);
  return sys;
}

std::vector<Diagnostic> validate(const SystemSpec& sys) {
  std::vector<Diagnostic> out;
  if (sys.emitters.empty()) {
    out.push_back({"no_emitters", 0, "system has no emitters"});
    return out;
  }
  for (int n = 0; n < sys.size(); ++n) {
    const auto& e = sys.emitters[n];
    if (!std::isfinite(e.omega))
      out.push_back({"nonfinite_omega", n + 1, "emitter frequency is not finite"});
    if (!(e.gamma >= 0.0)) out.push_back({"negative_gamma", n + 1, "negative decay rate"});
    if (!(e.delay > 0.0)) out.push_back({"nonpositive_delay", n + 1, "mirror delay must be > 0"});
    if (n > 0 && !(e.delay > sys.emitters[n - 1].delay))
      out.push_back({"delays_not_increasing", n + 1, "delays not strictly increasing"});
  }
  if (!(sys.window_max > sys.window_min)) {
    out.push_back({"empty_window", 0, "frequency window is empty"});
  } else {
    for (int n = 0; n < sys.size(); ++n) {
      double w = sys.emitters[n].omega;
      if (w < sys.window_min || w > sys.window_max)
        out.push_back({"omega_outside_window", n + 1, "emitter frequency outside window"});
    }
  }
  if (sys.kind == CouplingKind::custom && !sys.custom)
    out.push_back({"missing_coupling", 0, "custom coupling kind without a coupling function"});
  return out;
}

void require_valid(const SystemSpec& sys) {
  auto diags = validate(sys);
  if (diags.empty()) return;
  std::ostringstream os;
  os << "invalid system:";
  for (const auto& d : diags) {
    os << " [" << d.message;
    if (d.emitter > 0) os << " @ emitter " << d.emitter;
    os << "]";
  }
  throw ConfigError(os.str());
}

std::vector<bool> bound_state_condition(const SystemSpec& sys, double tol) {
  std::vector<bool> out;
  out.reserve(sys.emitters.size());
  for (const auto& e : sys.emitters) {
    double r = e.omega * e.delay / kPi;
    out.push_back(std::abs(r - std::round(r)) <= tol);
  }
  return out;
}

bool degenerate_feedback(const SystemSpec& sys, double tol) {
  if (sys.kind != CouplingKind::feedback || sys.emitters.empty()) return false;
  auto cond = bound_state_condition(sys, tol);
  for (std::size_t n = 0; n < cond.size(); ++n) {
    if (!cond[n]) return false;
    double dw = std::abs(sys.emitters[n].omega - sys.emitters[0].omega);
    if (dw > tol * std::max(1.0, std::abs(sys.emitters[0].omega))) return false;
  }
  return true;
}

cplx coupling_value(const SystemSpec& sys, int n, double w) {
  if (n < 1 || n > sys.size()) throw std::out_of_range("coupling_value: emitter index out of range");
  const auto& e = sys.emitters[n - 1];
  if (sys.kind == CouplingKind::custom) {
    if (w < sys.window_min || w > sys.window_max) return 0.0;
    return sys.custom(n - 1, w);
  }
  return 2.0 * kI * std::sqrt(e.gamma) * std::sin(w * e.delay);
}

SystemSpec system_from_json(const nlohmann::json& j) {
  SystemSpec sys;
  if (!j.contains("emitters") || !j["emitters"].is_array())
    throw ConfigError("config: 'emitters' array is required");
  try {
    for (const auto& e : j["emitters"]) {
      EmitterSpec s;
      s.omega = e.at("omega").get<double>();
      s.gamma = e.at("gamma").get<double>();
      s.delay = e.at("delay").get<double>();
      sys.emitters.push_back(s);
    }
    if (j.contains("window")) {
      sys.window_min = j["window"].at("min").get<double>();
      sys.window_max = j["window"].at("max").get<double>();
    } else {
      set_default_window(sys);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  if (j.contains("coupling") && j["coupling"] != "feedback")
    throw ConfigError("config: only the feedback coupling is available from JSON");
  return sys;
}

nlohmann::json system_to_json(const SystemSpec& sys) {
  nlohmann::json j;
  j["emitters"] = nlohmann::json::array();
  for (const auto& e : sys.emitters)
    j["emitters"].push_back({{"omega", e.omega}, {"gamma", e.gamma}, {"delay", e.delay}});
  j["window"] = {{"min", sys.window_min}, {"max", sys.window_max}};
  j["coupling"] = sys.kind == CouplingKind::feedback ? "feedback" : "custom";
  return j;
}

}  // namespace wqed
