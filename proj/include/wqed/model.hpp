#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wqed/numerics.hpp"

namespace wqed {

// Units: group velocity 1, frequencies in units of a reference gamma.
struct EmitterSpec {
  double omega = 0.0;
  double gamma = 0.0;
  double delay = 0.0;  // mirror delay t_n; couplings at x = -t_n and x = +t_n
};

enum class CouplingKind { feedback, custom };

// V_n(w) for custom systems; n is 0-based here.
using CouplingFn = std::function<cplx(int n, double w)>;

struct SystemSpec {
  std::vector<EmitterSpec> emitters;
  CouplingKind kind = CouplingKind::feedback;
  double window_min = 0.0;
  double window_max = 0.0;
  CouplingFn custom;  // only for kind == custom; zero outside the window

  int size() const { return static_cast<int>(emitters.size()); }
  double max_delay() const;
  double max_gamma() const;
  double mean_omega() const;
};

struct Diagnostic {
  std::string code;  // e.g. "negative_gamma"
  int emitter = 0;   // 1-based, 0 when not emitter specific
  std::string message;
};

// Builds a feedback system with the default window omega +/- 20 gamma_max.
SystemSpec make_feedback_system(std::vector<EmitterSpec> emitters);
void set_default_window(SystemSpec& sys, double half_width_in_gamma = 20.0);

std::vector<Diagnostic> validate(const SystemSpec& sys);

// Throws ConfigError carrying all diagnostics when validate() is non-empty.
void require_valid(const SystemSpec& sys);

// For each emitter: |w_k t_k mod pi| <= tol * pi (nearest multiple).
std::vector<bool> bound_state_condition(const SystemSpec& sys, double tol = 1e-12);

// True when all emitters share one frequency and all are commensurate.
bool degenerate_feedback(const SystemSpec& sys, double tol = 1e-12);

// V_n(w), n is 1-based. Throws std::out_of_range.
cplx coupling_value(const SystemSpec& sys, int n, double w);

// JSON: {"emitters":[{"omega","gamma","delay"}], "window":{"min","max"}}.
SystemSpec system_from_json(const nlohmann::json& j);
nlohmann::json system_to_json(const SystemSpec& sys);

}  // namespace wqed
