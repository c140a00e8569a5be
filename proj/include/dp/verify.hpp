#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dp/common.hpp"

namespace dp::verify {

// One randomized property suite. `checked` counts instances that met the
// preconditions; `skipped` counts instances the precondition filter removed
// (recorded, never failures). The statistic is the suite's worst observed
// value, useful for margin inspection.
struct SuiteResult {
  std::string name;
  int requested = 0;
  int checked = 0;
  int skipped = 0;
  int failures = 0;
  double statistic = 0.0;
  std::string statistic_name;
  std::vector<std::string> counterexamples;
  bool pass = false;

  double elapsed_seconds = 0.0;
};

struct VerifyReport {
  std::uint64_t seed = 0;
  int trials = 0;
  std::vector<SuiteResult> suites;
  bool all_pass = false;
};

SuiteResult verify_h_inverse(std::uint64_t seed, int trials);
SuiteResult verify_davis_kahan(std::uint64_t seed, int trials);
SuiteResult verify_projection_contraction(std::uint64_t seed, int trials);
SuiteResult verify_trace_lemma(std::uint64_t seed, int trials);
SuiteResult verify_sum_inequality(std::uint64_t seed, int trials);
SuiteResult verify_goe_operator_norm(std::uint64_t seed, int trials);
SuiteResult verify_preconditioner_sensitivity(std::uint64_t seed, int trials);

// Runs all seven suites. trials < 1 is rejected.
VerifyReport verify_all(std::uint64_t seed, int trials);

std::string report_to_json(const VerifyReport& report);
void print_report(const VerifyReport& report, std::ostream& os);

}  // namespace dp::verify
