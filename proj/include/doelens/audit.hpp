#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "doelens/factor_space.hpp"
#include "doelens/nnet.hpp"
#include "doelens/synthgen.hpp"

namespace doelens {

/// Per-sample task loss paired with the factor setting that produced it.
struct LossTable {
  FactorSpace space;
  std::vector<double> losses;
  std::vector<FactorSetting> settings;

  std::size_t size() const { return losses.size(); }
  void add(double loss, FactorSetting setting);
};

/// Eval-mode cross-entropy per sample, in dataset order.
LossTable per_sample_losses(const nnet::ModelParams& params, const Dataset& data);

struct AnovaResult {
  double f = 0.0;
  int df_between = 0;
  int df_within = 0;
  double p_raw = 1.0;
  double ss_between = 0.0;
  double ss_within = 0.0;
  bool degenerate = false;  // zero within-group variance with between-group spread: F = inf, p = 0
};

/// One-way ANOVA of `values` grouped by `groups` (labels in [0, group_count)).
/// Empty groups are ignored. Throws std::invalid_argument with fewer than two
/// nonempty groups or no within-group degrees of freedom.
AnovaResult anova_groups(std::span<const double> values, std::span<const int> groups, int group_count);

AnovaResult anova_one_way(const LossTable& table, std::size_t factor_index);

/// Regularized incomplete beta I_x(a, b) by Lentz continued fraction, using
/// the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) past the mode.
double regularized_incomplete_beta(double a, double b, double x);

/// CDF of the F(d1, d2) distribution.
double f_cdf(double x, int d1, int d2);
/// Upper tail 1 - f_cdf, evaluated without cancellation.
double f_sf(double x, int d1, int d2);

/// alpha / (k - i + 1) for i = 1..k.
std::vector<double> holm_thresholds(std::size_t k, double alpha);

/// Holm step-down: sort ascending, reject while p_(i) <= alpha / (k - i + 1),
/// stop at the first failure. Flags are in input order.
std::vector<bool> holm_bonferroni(std::span<const double> p_values, double alpha);

struct FactorSensitivity {
  std::string factor;
  FactorRole role = FactorRole::nuisance;
  double f = 0.0;
  int df_between = 0;
  int df_within = 0;
  double p_raw = 1.0;
  bool significant = false;  // Holm decision at the profile's alpha
  bool degenerate = false;
  bool testable = true;  // false when fewer than two levels were observed
};

struct SensitivityProfile {
  double alpha = 0.05;
  std::vector<FactorSensitivity> factors;

  const FactorSensitivity& at(std::string_view name) const;
};

/// Per-factor ANOVA on one loss table, Holm adjustment across testable factors.
SensitivityProfile audit_losses(const LossTable& table, double alpha);
SensitivityProfile run_audit(const nnet::ModelParams& params, const Dataset& data, double alpha);

/// "***" p <= 0.001, "**" p <= 0.01, "*" p <= 0.05 for Holm-significant
/// factors, "n.s." otherwise.
std::string significance_stars(double p_raw, bool significant);

nlohmann::json to_json(const SensitivityProfile& profile);
SensitivityProfile profile_from_json(const nlohmann::json& j);
std::string format_profile_table(const SensitivityProfile& profile);

/// Four significant digits, as used in every text table.
std::string format_4g(double v);

}  // namespace doelens
