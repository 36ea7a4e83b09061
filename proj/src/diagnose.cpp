#include "doelens/diagnose.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace doelens {

std::vector<int> underrepresented_levels(std::span<const std::size_t> train_counts) {
  std::size_t total = 0;
  for (auto c : train_counts) total += c;
  std::vector<int> out;
  const double threshold = 1.0 / (2.0 * static_cast<double>(train_counts.size()));
  for (std::size_t l = 0; l < train_counts.size(); ++l) {
    const double share = total ? static_cast<double>(train_counts[l]) / static_cast<double>(total) : 0.0;
    if (share < threshold) out.push_back(static_cast<int>(l));
  }
  return out;
}

CoverageEvidence coverage_from_scores(const FactorSpace& space, std::span<const FactorSetting> settings,
                                      std::span<const double> scores, const LevelHistogram& train_hist,
                                      double delta, StratifiedMetric metric) {
  if (settings.empty()) throw std::invalid_argument("coverage test needs a nonempty audit set");
  if (settings.size() != scores.size()) throw std::invalid_argument("settings/scores size mismatch");
  if (train_hist.size() != space.size()) throw std::invalid_argument("training histogram must cover every factor");
  CoverageEvidence ev;
  ev.metric = metric;
  ev.delta = delta;
  for (std::size_t f = 0; f < space.size(); ++f) {
    const int levels = space[f].level_count;
    if (train_hist[f].size() != static_cast<std::size_t>(levels))
      throw std::invalid_argument("training histogram for '" + space[f].name + "' has wrong level count");
    FactorCoverage fc;
    fc.factor = space[f].name;
    fc.train_counts = train_hist[f];
    fc.underrepresented = underrepresented_levels(train_hist[f]);
    std::vector<bool> under(levels, false);
    for (int l : fc.underrepresented) under[l] = true;

    std::vector<double> sum(levels, 0.0);
    fc.audit_counts.assign(levels, 0);
    double cov_sum = 0.0, unc_sum = 0.0;
    std::size_t cov_n = 0, unc_n = 0;
    for (std::size_t i = 0; i < settings.size(); ++i) {
      const int l = settings[i][f];
      sum[l] += scores[i];
      ++fc.audit_counts[l];
      if (under[l]) {
        unc_sum += scores[i];
        ++unc_n;
      } else {
        cov_sum += scores[i];
        ++cov_n;
      }
    }
    fc.level_metric.resize(levels);
    for (int l = 0; l < levels; ++l)
      fc.level_metric[l] = fc.audit_counts[l] ? sum[l] / static_cast<double>(fc.audit_counts[l])
                                              : std::numeric_limits<double>::quiet_NaN();
    fc.covered_metric = cov_n ? cov_sum / static_cast<double>(cov_n) : std::numeric_limits<double>::quiet_NaN();
    fc.uncovered_metric = unc_n ? unc_sum / static_cast<double>(unc_n) : std::numeric_limits<double>::quiet_NaN();
    if (cov_n && unc_n) {
      fc.drop = metric == StratifiedMetric::accuracy ? fc.covered_metric - fc.uncovered_metric
                                                     : fc.uncovered_metric - fc.covered_metric;
    }
    fc.positive = !fc.underrepresented.empty() && cov_n && unc_n && fc.drop >= delta;
    ev.factors.push_back(std::move(fc));
  }
  return ev;
}

CoverageEvidence coverage_test(const nnet::ModelParams& params, const Dataset& audit_val,
                               const LevelHistogram& train_hist, double delta, StratifiedMetric metric) {
  if (audit_val.empty()) throw std::invalid_argument("coverage test needs a nonempty audit set");
  const auto ev = nnet::evaluate(params, audit_val);
  std::vector<double> scores(audit_val.size());
  std::vector<FactorSetting> settings;
  settings.reserve(audit_val.size());
  for (std::size_t i = 0; i < audit_val.size(); ++i) {
    scores[i] = metric == StratifiedMetric::accuracy ? (ev.predicted[i] == audit_val.samples[i].label ? 1.0 : 0.0)
                                                     : ev.loss[i];
    settings.push_back(audit_val.samples[i].setting);
  }
  return coverage_from_scores(audit_val.space, settings, scores, train_hist, delta, metric);
}

std::vector<bool> shortcut_test(const SensitivityProfile& profile, const FactorSpace& space) {
  if (profile.factors.size() != space.size()) throw std::invalid_argument("profile and space differ in factor count");
  std::vector<bool> out(space.size());
  for (std::size_t f = 0; f < space.size(); ++f) {
    if (profile.factors[f].factor != space[f].name) throw std::invalid_argument("profile and space factor order differ");
    out[f] = space[f].role == FactorRole::nuisance && profile.factors[f].significant;
  }
  return out;
}

std::string_view to_string(GapType t) {
  switch (t) {
    case GapType::type_i: return "TypeI";
    case GapType::type_ii: return "TypeII";
    case GapType::correct: return "Correct";
    case GapType::semantic: return "Semantic";
  }
  return "Correct";
}

GapType parse_gap_type(std::string_view text) {
  for (auto t : {GapType::type_i, GapType::type_ii, GapType::correct, GapType::semantic})
    if (to_string(t) == text) return t;
  throw std::invalid_argument("unknown gap type '" + std::string(text) + "'");
}

bool GapDiagnosis::has_gaps() const {
  for (const auto& f : factors)
    if (f.classification == GapType::type_i || f.classification == GapType::type_ii) return true;
  return false;
}

const FactorDiagnosis& GapDiagnosis::at(std::string_view name) const {
  for (const auto& f : factors)
    if (f.factor == name) return f;
  throw std::out_of_range("diagnosis has no factor '" + std::string(name) + "'");
}

GapDiagnosis classify(const FactorSpace& space, const CoverageEvidence& coverage, const std::vector<bool>& shortcut,
                      const SensitivityProfile& profile) {
  if (coverage.factors.size() != space.size() || shortcut.size() != space.size() ||
      profile.factors.size() != space.size())
    throw std::invalid_argument("diagnosis inputs must cover the same factor space");
  GapDiagnosis d;
  for (std::size_t f = 0; f < space.size(); ++f) {
    FactorDiagnosis fd;
    fd.factor = space[f].name;
    fd.role = space[f].role;
    fd.coverage_positive = coverage.factors[f].positive;
    fd.shortcut_positive = shortcut[f] && space[f].role == FactorRole::nuisance;
    fd.coverage_drop = coverage.factors[f].drop;
    fd.f = profile.factors[f].f;
    fd.significant = profile.factors[f].significant;
    fd.deficient_levels = coverage.factors[f].underrepresented;
    if (fd.coverage_positive)
      fd.classification = GapType::type_i;
    else if (fd.shortcut_positive)
      fd.classification = GapType::type_ii;
    else
      fd.classification = space[f].role == FactorRole::semantic ? GapType::semantic : GapType::correct;
    d.factors.push_back(std::move(fd));
  }
  return d;
}

DiagnosisRun diagnose_model(const nnet::ModelParams& params, const Dataset& audit_val,
                            const LevelHistogram& train_hist, double alpha, double delta) {
  DiagnosisRun run;
  run.profile = run_audit(params, audit_val, alpha);
  run.coverage = coverage_test(params, audit_val, train_hist, delta);
  run.diagnosis = classify(audit_val.space, run.coverage, shortcut_test(run.profile, audit_val.space), run.profile);
  return run;
}

namespace {
nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
}  // namespace

nlohmann::json to_json(const CoverageEvidence& ev) {
  nlohmann::json factors = nlohmann::json::array();
  for (const auto& f : ev.factors) {
    nlohmann::json levels = nlohmann::json::array();
    for (double v : f.level_metric) levels.push_back(num(v));
    factors.push_back({{"factor", f.factor},
                       {"level_metric", levels},
                       {"audit_counts", f.audit_counts},
                       {"train_counts", f.train_counts},
                       {"underrepresented", f.underrepresented},
                       {"covered", num(f.covered_metric)},
                       {"uncovered", num(f.uncovered_metric)},
                       {"drop", num(f.drop)},
                       {"positive", f.positive}});
  }
  return {{"metric", ev.metric == StratifiedMetric::accuracy ? "accuracy" : "loss"},
          {"delta", ev.delta},
          {"factors", factors}};
}

nlohmann::json to_json(const GapDiagnosis& d) {
  nlohmann::json factors = nlohmann::json::array();
  for (const auto& f : d.factors) {
    factors.push_back({{"factor", f.factor},
                       {"role", to_string(f.role)},
                       {"classification", to_string(f.classification)},
                       {"coverage_positive", f.coverage_positive},
                       {"shortcut_positive", f.shortcut_positive},
                       {"coverage_drop", num(f.coverage_drop)},
                       {"F", num(f.f)},
                       {"significant", f.significant},
                       {"deficient_levels", f.deficient_levels}});
  }
  return {{"factors", factors}, {"stop_rule", "Holm-significant OR coverage drop >= delta"}};
}

GapDiagnosis diagnosis_from_json(const nlohmann::json& j) {
  GapDiagnosis d;
  for (const auto& f : j.at("factors")) {
    FactorDiagnosis fd;
    fd.factor = f.at("factor").get<std::string>();
    fd.role = parse_factor_role(f.at("role").get<std::string>());
    fd.classification = parse_gap_type(f.at("classification").get<std::string>());
    fd.coverage_positive = f.at("coverage_positive").get<bool>();
    fd.shortcut_positive = f.at("shortcut_positive").get<bool>();
    fd.coverage_drop = f.at("coverage_drop").is_null() ? 0.0 : f.at("coverage_drop").get<double>();
    fd.f = f.at("F").is_null() ? std::numeric_limits<double>::quiet_NaN() : f.at("F").get<double>();
    fd.significant = f.at("significant").get<bool>();
    fd.deficient_levels = f.at("deficient_levels").get<std::vector<int>>();
    d.factors.push_back(std::move(fd));
  }
  return d;
}

}  // namespace doelens
