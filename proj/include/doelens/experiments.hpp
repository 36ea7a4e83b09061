#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "doelens/audit.hpp"
#include "doelens/diagnose.hpp"
#include "doelens/nnet.hpp"
#include "doelens/prescribe.hpp"

namespace doelens {

struct Exp1Config {
  std::uint64_t seed = 0;
  std::size_t train_size = 6000;
  std::size_t split_size = 1500;
  double width = 0.5;
  nnet::TrainConfig biased_train{3e-4, 256, 15, 0.0, 32};
  // At 6,000 real images a 64-batch gives about as many updates as 256 does at
  // 30,000; the pair share of each step stays at one pair per eight images.
  nnet::TrainConfig correction{3e-4, 64, 15, 0.5, 8};
  std::size_t type1_budget = 2000;
  std::size_t pair_budget = 500;
  double alpha = 0.05;
  double delta = 0.10;
  std::string generators = "D=AB,E=AC";
  std::size_t probe_replicates = 64;  // 0 disables the design-of-experiments probe audit

  /// 30,000 training images, 5,000 per split, full-width network.
  static Exp1Config paper_scale();
  void validate() const;
};

nlohmann::json to_json(const Exp1Config& cfg);
Exp1Config exp1_config_from_json(const nlohmann::json& j, const Exp1Config& defaults = {});

struct NamedCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Exp1Report {
  Exp1Config config;
  nlohmann::json design;  // generators, defining relation, resolution, runs
  double biased_train_accuracy = 0.0;
  SensitivityProfile before;
  nlohmann::json coverage;
  GapDiagnosis diagnosis;
  PrescriptionPlan plan;
  std::size_t synthetic_images = 0;
  SensitivityProfile after_invariance;
  SensitivityProfile after_task_only;
  double accuracy_baseline = 0.0;
  double accuracy_invariance = 0.0;
  double accuracy_task_only = 0.0;
  TransferReport transfer;  // invariance-regularized arm against the biased model
  std::optional<SensitivityProfile> probe;  // fractional-design audit of the biased model
  std::vector<NamedCheck> checks;

  bool all_checks_pass() const;
};

/// Builds biased train and disjoint balanced splits, trains the biased model,
/// audits and diagnoses it, then fine-tunes two arms from the same weights on
/// the same prescription: invariance-regularized (correction.lambda, pairs in
/// the invariance term) and task-loss only (lambda = 0, pair images join the
/// training data). All arms are scored on one final test split.
Exp1Report run_exp1(const Exp1Config& cfg);

struct Exp3Config {
  std::uint64_t seed = 0;
  std::size_t train_size = 600;  // small enough that the classifier is not saturated
  std::size_t audit_size = 1500;
  double epsilon_perfect = 0.0;
  double epsilon_entangled = 0.3;
  nnet::TrainConfig train{1e-3, 64, 15, 0.0, 32};
  double alpha = 0.05;

  void validate() const;
};

nlohmann::json to_json(const Exp3Config& cfg);
Exp3Config exp3_config_from_json(const nlohmann::json& j, const Exp3Config& defaults = {});

struct Exp3Row {
  std::string factor;
  double f_perfect = 0.0;
  double f_entangled = 0.0;
  double delta_f = 0.0;
};

struct Exp3Report {
  Exp3Config config;
  SensitivityProfile perfect;
  SensitivityProfile entangled;
  double accuracy_perfect = 0.0;
  double accuracy_entangled = 0.0;
  std::vector<Exp3Row> rows;
  std::vector<NamedCheck> checks;

  bool all_checks_pass() const;
};

/// Trains the tiny classifier on balanced colored-shape data from each
/// generator with identical seeds, audits each on a balanced set from its own
/// generator drawn with identical seeds, and reports per-factor F differences.
Exp3Report run_exp3(const Exp3Config& cfg);

nlohmann::json to_json(const Exp1Report& report);
Exp1Report exp1_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Exp3Report& report);
Exp3Report exp3_report_from_json(const nlohmann::json& j);

std::string format_exp1_table(const Exp1Report& report);
std::string format_exp3_table(const Exp3Report& report);
std::string exp1_csv(const Exp1Report& report);
std::string exp3_csv(const Exp3Report& report);

/// Writes <prefix>.json, <prefix>.csv and <prefix>.txt into `dir`.
void emit_report(const Exp1Report& report, const std::filesystem::path& dir, const std::string& prefix = "exp1");
void emit_report(const Exp3Report& report, const std::filesystem::path& dir, const std::string& prefix = "exp3");

nlohmann::json to_json(const std::vector<NamedCheck>& checks);
TransferReport transfer_report_from_json(const nlohmann::json& j);

}  // namespace doelens
