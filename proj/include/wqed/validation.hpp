#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace wqed {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  bool within_budget = true;
  std::string detail;
  double seconds = 0.0;
  double budget = 0.0;  // wall-clock limit in seconds
  nlohmann::json data;
  nlohmann::json to_json() const;
};

struct ValidationOptions {
  std::uint64_t seed = 20240601;
  double h_fig = 0.01;       // lattice step for the single-emitter and design runs
  double h_battery = 0.025;  // lattice step for the oracle-equivalence battery
  bool enforce_budget = true;
};

inline constexpr int kNumCriteria = 10;

// Runs one acceptance check (1..10). Library errors are caught and reported as failures.
CriterionResult run_criterion(int id, const ValidationOptions& opt = {});
// Empty ids: all of them.
std::vector<CriterionResult> run_acceptance(const ValidationOptions& opt = {},
                                            const std::vector<int>& ids = {});

}  // namespace wqed
