// Acceptance gate: one pass/fail line per criterion with its runtime,
// nonzero exit on any failure. The same checks back the `cycfed verify`
// subcommand.
#include <cstdio>
#include <iostream>

#include "cycfed/verify.hpp"

int main() {
  bool all_pass = true;
  double total = 0.0;
  for (const auto& c : cycfed::verify_all()) {
    char timing[32];
    std::snprintf(timing, sizeof(timing), "%.2f", c.seconds);
    std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.id << "  [" << timing << " s]\n      "
              << c.detail << std::endl;
    all_pass = all_pass && c.pass;
    total += c.seconds;
  }
  std::cout << (all_pass ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED") << " (" << total << " s)"
            << std::endl;
  return all_pass ? 0 : 1;
}
