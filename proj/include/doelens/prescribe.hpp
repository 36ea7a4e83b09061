#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "doelens/diagnose.hpp"
#include "doelens/nnet.hpp"
#include "doelens/synthgen.hpp"

namespace doelens {

struct Type1Target {
  std::size_t factor = 0;
  std::vector<int> levels;  // deficient levels to fill
  std::size_t budget = 0;   // images
};

struct Type2Target {
  std::size_t factor = 0;
  std::size_t pairs = 0;
};

struct PrescriptionPlan {
  FactorSpace space;
  std::vector<Type1Target> type1;
  std::vector<Type2Target> type2;

  std::size_t type1_total() const;
  std::size_t pair_total() const;
  /// Synthetic images the plan produces: Type I samples plus two per pair.
  std::size_t image_total() const { return type1_total() + 2 * pair_total(); }
  bool empty() const { return type1_total() == 0 && pair_total() == 0; }
};

/// Splits each budget evenly over the factors of its gap type; the remainder
/// goes one unit at a time to the earliest factors.
PrescriptionPlan build_plan(const FactorSpace& space, const GapDiagnosis& diagnosis, std::size_t type1_budget,
                            std::size_t pair_budget);

/// Draws every factor independently from the histogram's empirical marginals.
FactorSetting sample_from_marginals(const FactorSpace& space, const LevelHistogram& marginals, Rng& rng);

/// Per Type I target: the target factor uniform over its deficient levels,
/// every other factor from the empirical training marginals.
Dataset generate_type1(const PrescriptionPlan& plan, const LevelHistogram& train_marginals,
                       const GeneratorConfig& generator, std::uint64_t seed);

/// Per pair: a base setting from the training marginals, then the varied
/// factor set to two distinct levels, one from each extreme quartile when the
/// factor has at least four levels.
std::vector<CounterfactualPair> generate_type2_pairs(const PrescriptionPlan& plan,
                                                     const LevelHistogram& train_marginals,
                                                     const GeneratorConfig& generator, std::uint64_t seed);

/// Fine-tunes on real ∪ type1 with the invariance term over `pairs`. Starts
/// from `params` unless cold_start, which reinitializes from cfg.seed.
nnet::ModelParams correct(const nnet::ModelParams& params, const Dataset& real, const Dataset& type1,
                          const std::vector<CounterfactualPair>& pairs, const nnet::TrainConfig& cfg,
                          bool cold_start = false, nnet::TrainLog* log = nullptr);

struct AuditRound {
  int round = 0;
  SensitivityProfile profile;
  CoverageEvidence coverage;
  GapDiagnosis diagnosis;
  double heldout_accuracy = 0.0;
  std::size_t type1_images = 0;  // cumulative synthetic data used to reach this model
  std::size_t pairs = 0;
};

struct AuditHistory {
  std::vector<AuditRound> rounds;
};

struct LoopConfig {
  std::size_t type1_budget = 2000;
  std::size_t pair_budget = 500;
  int max_rounds = 3;
  double alpha = 0.05;
  double delta = 0.10;
  nnet::TrainConfig train;
  std::uint64_t seed = 0;
  GeneratorConfig generator;
  bool cold_start = false;
};

struct LoopResult {
  nnet::ModelParams params;
  AuditHistory history;
};

/// Round 0 audits the given model. Each later round prescribes from the
/// previous diagnosis, fine-tunes on real data plus all synthetic data
/// produced so far, and re-audits. Stops when a diagnosis has no Type I or
/// Type II factor, or after max_rounds corrections.
LoopResult verify_loop(const nnet::ModelParams& params, const Dataset& real, const Dataset& audit_val,
                       const Dataset& test, const LoopConfig& cfg);

struct TransferRow {
  std::string factor;
  FactorRole role = FactorRole::nuisance;
  double f_before = 0.0;
  double f_after = 0.0;
  double delta_f = 0.0;
  std::optional<double> delta_pct;  // absent when f_before is zero or either F is non-finite
  bool increased = false;
  bool targeted = false;
};

struct TransferReport {
  std::vector<TransferRow> rows;

  /// Nuisance factors that were not targeted and whose F rose.
  std::vector<std::string> transferred() const;
};

/// Rows compare the first and last profile; targeted = Type I or Type II
/// in the first diagnosis.
TransferReport sensitivity_transfer_report(const AuditHistory& history);
TransferReport sensitivity_transfer_report(const SensitivityProfile& before, const SensitivityProfile& after,
                                           const GapDiagnosis& diagnosis);

nlohmann::json to_json(const PrescriptionPlan& plan);
PrescriptionPlan plan_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AuditHistory& history);
nlohmann::json to_json(const TransferReport& report);
std::string format_transfer_table(const TransferReport& report);

}  // namespace doelens
