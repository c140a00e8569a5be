#include "dp/privacy.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

namespace dp::privacy {

using nlohmann::json;

void PrivacyParams::validate() const {
  if (!(epsilon > 0.0)) throw InvalidParams("privacy: epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidParams("privacy: delta must be in (0,1)");
  if (n < 2) throw InvalidParams("privacy: n must be >= 2");
  if (T < 1) throw InvalidParams("privacy: T must be >= 1");
  if (!(lipschitz_l > 0.0)) throw InvalidParams("privacy: lipschitz_l must be positive");
  if (!(calib_constant_c > 0.0)) throw InvalidParams("privacy: calib constant must be positive");
  if (!(budget_split > 0.0 && budget_split < 1.0))
    throw InvalidParams("privacy: budget_split must be in (0,1)");
}

double gradient_sensitivity(double lipschitz_l, int n) {
  if (!(lipschitz_l > 0.0)) throw InvalidParams("gradient_sensitivity: L must be positive");
  if (n < 1) throw InvalidParams("gradient_sensitivity: n must be >= 1");
  return lipschitz_l / n;
}

double preconditioner_sensitivity(double lipschitz_l, int n, int t) {
  if (!(lipschitz_l > 0.0)) throw InvalidParams("preconditioner_sensitivity: L must be positive");
  if (n < 1) throw InvalidParams("preconditioner_sensitivity: n must be >= 1");
  if (t < 1) throw InvalidParams("preconditioner_sensitivity: t must be >= 1");
  return lipschitz_l * std::sqrt(static_cast<double>(t)) / n;
}

double calibrate_sigma_b(const PrivacyParams& params) {
  params.validate();
  const double eps_stream = params.epsilon * params.budget_split;
  const double delta_stream = params.delta * params.budget_split;
  const double sensitivity = gradient_sensitivity(params.lipschitz_l, params.n);
  return params.calib_constant_c * sensitivity *
         std::sqrt(params.T * std::log(1.0 / delta_stream)) / eps_stream;
}

double calibrate_sigma_B(const PrivacyParams& params, int t) {
  params.validate();
  if (t < 1 || t > params.T) throw InvalidParams("calibrate_sigma_B: t out of [1, T]");
  const double eps_stream = params.epsilon * (1.0 - params.budget_split);
  const double delta_stream = params.delta * (1.0 - params.budget_split);
  const double sensitivity = preconditioner_sensitivity(params.lipschitz_l, params.n, t);
  return params.calib_constant_c * sensitivity *
         std::sqrt(params.T * std::log(1.0 / delta_stream)) / eps_stream;
}

bool gaussian_mechanism_check(double sigma, double sensitivity, double epsilon, double delta) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw InvalidParams("gaussian_mechanism_check: epsilon must be in (0,1)");
  if (!(delta > 0.0 && delta < 1.0))
    throw InvalidParams("gaussian_mechanism_check: delta must be in (0,1)");
  if (!(sensitivity > 0.0))
    throw InvalidParams("gaussian_mechanism_check: sensitivity must be positive");
  if (!(sigma > 0.0)) return false;
  const double threshold = std::sqrt(2.0 * std::log(1.25 / delta)) * sensitivity / epsilon;
  return sigma > threshold;
}

long long private_iteration_count(double epsilon, int n, double alpha) {
  if (!(epsilon > 0.0) || n < 1) throw InvalidParams("private_iteration_count: bad epsilon or n");
  if (alpha < 0.0) throw InvalidParams("private_iteration_count: alpha must be >= 0");
  const double en = epsilon * n;
  if (!(en > 1.0)) throw InvalidParams("private_iteration_count: requires epsilon*n > 1");
  const double exponent = 2.0 / (1.0 + 2.0 * alpha);
  double value = std::pow(en, exponent);
  // snap values that are integral up to round-off before taking the ceiling
  const double nearest = std::round(value);
  if (std::abs(value - nearest) < 1e-9 * std::max(1.0, std::abs(value))) value = nearest;
  return static_cast<long long>(std::ceil(value));
}

void BudgetLedger::assert_compliant() const {
  for (const LedgerEntry& e : entries_) {
    if (e.sigma < e.floor) {
      std::ostringstream msg;
      msg << "ledger: under-noised mechanism '" << e.label << "' at step " << e.t << " (sigma "
          << e.sigma << " < floor " << e.floor << ")";
      throw UnderNoised(msg.str());
    }
  }
}

bool BudgetLedger::compliant() const {
  for (const LedgerEntry& e : entries_)
    if (e.sigma < e.floor) return false;
  return true;
}

std::size_t BudgetLedger::count_label(const std::string& label) const {
  std::size_t count = 0;
  for (const LedgerEntry& e : entries_)
    if (e.label == label) ++count;
  return count;
}

std::string BudgetLedger::to_jsonl() const {
  std::ostringstream out;
  for (const LedgerEntry& e : entries_) {
    json j{{"label", e.label},
           {"t", e.t},
           {"sensitivity", e.sensitivity},
           {"sigma", e.sigma},
           {"sigma_effective", e.sigma_effective},
           {"floor", e.floor}};
    out << j.dump() << '\n';
  }
  return out.str();
}

BudgetLedger BudgetLedger::from_jsonl(const std::string& text) {
  BudgetLedger ledger;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    LedgerEntry e;
    e.label = j.at("label").get<std::string>();
    e.t = j.at("t").get<int>();
    e.sensitivity = j.at("sensitivity").get<double>();
    e.sigma = j.at("sigma").get<double>();
    e.sigma_effective = j.at("sigma_effective").get<double>();
    e.floor = j.at("floor").get<double>();
    ledger.record(std::move(e));
  }
  return ledger;
}

}  // namespace dp::privacy
