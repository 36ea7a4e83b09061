#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "doelens/audit.hpp"
#include "doelens/factor_space.hpp"
#include "doelens/nnet.hpp"
#include "doelens/synthgen.hpp"

namespace doelens {

/// Stratified metric driving the coverage test. Accuracy drop is
/// covered - uncovered accuracy; loss drop is uncovered - covered mean loss.
enum class StratifiedMetric { accuracy, loss };

struct FactorCoverage {
  std::string factor;
  std::vector<double> level_metric;        // per level on the audit split (NaN where absent)
  std::vector<std::size_t> audit_counts;   // per level on the audit split
  std::vector<std::size_t> train_counts;   // training histogram
  std::vector<int> underrepresented;       // training share < 1 / (2 * level_count)
  double covered_metric = 0.0;
  double uncovered_metric = 0.0;
  double drop = 0.0;
  bool positive = false;
};

struct CoverageEvidence {
  StratifiedMetric metric = StratifiedMetric::accuracy;
  double delta = 0.10;
  std::vector<FactorCoverage> factors;
};

/// Levels whose share of the training mass is below 1 / (2 * level_count),
/// including unseen levels.
std::vector<int> underrepresented_levels(std::span<const std::size_t> train_counts);

/// Coverage test from per-sample scores (1/0 correctness for accuracy, loss
/// otherwise). Positive iff underrepresented levels exist, the audit split
/// holds samples at them, and drop >= delta.
CoverageEvidence coverage_from_scores(const FactorSpace& space, std::span<const FactorSetting> settings,
                                      std::span<const double> scores, const LevelHistogram& train_hist,
                                      double delta, StratifiedMetric metric = StratifiedMetric::accuracy);

CoverageEvidence coverage_test(const nnet::ModelParams& params, const Dataset& audit_val,
                               const LevelHistogram& train_hist, double delta,
                               StratifiedMetric metric = StratifiedMetric::accuracy);

/// Positive iff the factor is nuisance and Holm-significant.
std::vector<bool> shortcut_test(const SensitivityProfile& profile, const FactorSpace& space);

enum class GapType { type_i, type_ii, correct, semantic };

std::string_view to_string(GapType t);
GapType parse_gap_type(std::string_view text);

struct FactorDiagnosis {
  std::string factor;
  FactorRole role = FactorRole::nuisance;
  GapType classification = GapType::correct;
  bool coverage_positive = false;
  bool shortcut_positive = false;
  double coverage_drop = 0.0;
  double f = 0.0;
  bool significant = false;
  std::vector<int> deficient_levels;  // underrepresented levels from the coverage test
};

struct GapDiagnosis {
  std::vector<FactorDiagnosis> factors;

  bool has_gaps() const;
  const FactorDiagnosis& at(std::string_view name) const;
};

/// Coverage-positive -> Type I; else shortcut-positive -> Type II; else
/// Correct, or Semantic for semantic factors.
GapDiagnosis classify(const FactorSpace& space, const CoverageEvidence& coverage, const std::vector<bool>& shortcut,
                      const SensitivityProfile& profile);

/// Audit, coverage test, shortcut test and classification in one call.
struct DiagnosisRun {
  SensitivityProfile profile;
  CoverageEvidence coverage;
  GapDiagnosis diagnosis;
};
DiagnosisRun diagnose_model(const nnet::ModelParams& params, const Dataset& audit_val,
                            const LevelHistogram& train_hist, double alpha, double delta);

nlohmann::json to_json(const CoverageEvidence& evidence);
nlohmann::json to_json(const GapDiagnosis& diagnosis);
GapDiagnosis diagnosis_from_json(const nlohmann::json& j);

}  // namespace doelens
