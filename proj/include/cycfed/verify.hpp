#pragma once

#include <string>
#include <vector>

namespace cycfed {

struct CheckResult {
  std::string id;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

// Self-configuring acceptance suites at fixed desk scale. Every tolerance
// is pinned in the implementation.
std::vector<CheckResult> verify_decomposition();  // cycle identity + expectation identity
std::vector<CheckResult> verify_wor();            // without-replacement variance lemma
std::vector<CheckResult> verify_reductions();     // SSGD(B=1) == GD == SGD(tau=1, full batch)
std::vector<CheckResult> verify_costs();          // cost-model comparison checks
std::vector<CheckResult> verify_rates();          // exponential + rate-regime slopes
std::vector<CheckResult> verify_experiments();    // dataset-track qualitative checks
std::vector<CheckResult> verify_all();

// Named suite dispatch: decomposition | wor | reductions | costs | rates | all.
std::vector<CheckResult> verify_suite(const std::string& name);

}  // namespace cycfed
