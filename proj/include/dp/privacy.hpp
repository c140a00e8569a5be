#pragma once

#include <string>
#include <vector>

#include "dp/common.hpp"

namespace dp::privacy {

// ---------------------------------------------------------------------------
// PrivacyParams: the (epsilon, delta, n, T, L) tuple driving calibration.
// calib_constant_c scales the composition formulas (the asymptotic
// calibrations hide constants; scaling laws are the contract).
// ---------------------------------------------------------------------------
struct PrivacyParams {
  double epsilon = 1.0;
  double delta = 1e-5;
  int n = 2;
  int T = 1;
  double lipschitz_l = 1.0;
  double calib_constant_c = 1.0;
  double budget_split = 0.5;  // fraction of (epsilon, delta) for the gradient stream

  void validate() const;
};

// Delta_2 of the averaged gradient: L/n.
double gradient_sensitivity(double lipschitz_l, int n);

// Delta_2 of the preconditioner at step t: L*sqrt(t)/n.
double preconditioner_sensitivity(double lipschitz_l, int n, int t);

// Per-step gradient noise for T compositions at (eps/2, delta/2):
//   sigma_b = c * (L/n) * sqrt(T * ln(2/delta)) / (eps/2)
double calibrate_sigma_b(const PrivacyParams& params);

// Preconditioner noise at step t (sensitivity L*sqrt(t)/n, T compositions):
//   sigma_B(t) = c * (L*sqrt(t)/n) * sqrt(T * ln(2/delta)) / (eps/2)
double calibrate_sigma_B(const PrivacyParams& params, int t);

// Single-release Gaussian mechanism test: true iff sigma exceeds
// sqrt(2 ln(1.25/delta)) * sensitivity / epsilon. Requires epsilon in (0,1).
bool gaussian_mechanism_check(double sigma, double sensitivity, double epsilon, double delta);

// ceil((eps*n)^(2/(1+2*alpha))); requires eps*n > 1.
long long private_iteration_count(double epsilon, int n, double alpha);

// ---------------------------------------------------------------------------
// BudgetLedger: one entry per mechanism invocation. The assert phase fails
// loudly if any recorded sigma is below its calibrated floor.
// ---------------------------------------------------------------------------
struct LedgerEntry {
  std::string label;       // mechanism name, e.g. "gradient" / "preconditioner"
  int t = 0;               // step index
  double sensitivity = 0.0;
  double sigma = 0.0;            // requested noise scale
  double sigma_effective = 0.0;  // scale actually applied (differs only when clamped)
  double floor = 0.0;            // calibrated minimum for this entry
};

class BudgetLedger {
 public:
  BudgetLedger() = default;
  explicit BudgetLedger(double budget_split) : budget_split_(budget_split) {}

  void record(LedgerEntry entry) { entries_.push_back(std::move(entry)); }

  // Throws UnderNoised naming the first offending entry.
  void assert_compliant() const;
  bool compliant() const;

  std::size_t size() const { return entries_.size(); }
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  double budget_split() const { return budget_split_; }

  std::size_t count_label(const std::string& label) const;

  // JSON lines, one entry per mechanism invocation.
  std::string to_jsonl() const;
  static BudgetLedger from_jsonl(const std::string& text);

 private:
  std::vector<LedgerEntry> entries_;
  double budget_split_ = 0.5;
};

}  // namespace dp::privacy
