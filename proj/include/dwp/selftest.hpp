#pragma once

#include <functional>
#include <string>
#include <vector>

namespace dwp::selftest {

struct CaseResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Fast invariant checks across all modules (well under a minute).
std::vector<CaseResult> run(const std::function<void(const CaseResult&)>& on_case = {});

bool all_passed(const std::vector<CaseResult>& results);

}  // namespace dwp::selftest
