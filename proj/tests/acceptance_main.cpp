// Runs every acceptance criterion end to end and prints one line per
// criterion. Exit code 0 only if all gating criteria pass; informational
// lines never fail the build.
#include <cstdio>
#include <iostream>
#include <vector>

#include "mkflow/verify.hpp"

int main() {
  mkflow::VerifySuite suite(&std::cout);
  const std::vector<mkflow::CriterionResult> results = suite.run_selector("all");

  bool ok = true;
  int gating = 0, passed = 0;
  std::printf("\n");
  for (const mkflow::CriterionResult& r : results) {
    std::printf("%s %-32s %s%s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str(), r.gating ? "" : " [informational]");
    if (r.gating) {
      ++gating;
      if (r.pass) ++passed;
      ok = ok && r.pass;
    }
  }
  std::printf("ACCEPTANCE: %s (%d/%d gating criteria)\n", ok ? "PASS" : "FAIL", passed,
              gating);
  std::fflush(stdout);
  return ok ? 0 : 1;
}