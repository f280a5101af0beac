// Acceptance checks 1-10; one PASS/FAIL line each. Exit code 1 on any failure.
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "wqed/validation.hpp"

int main(int argc, char** argv) {
  wqed::ValidationOptions opt;
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
  if (ids.empty())
    for (int i = 1; i <= wqed::kNumCriteria; ++i) ids.push_back(i);
  int failed = 0;
  for (int id : ids) {
    auto r = wqed::run_criterion(id, opt);
    std::printf("%s criterion %d: %s | %s | %.1f s (budget %.0f s)\n", r.pass ? "PASS" : "FAIL",
                r.id, r.title.c_str(), r.detail.c_str(), r.seconds, r.budget);
    std::fflush(stdout);
    if (!r.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(ids.size()) - failed, ids.size());
  return failed ? 1 : 0;
}
