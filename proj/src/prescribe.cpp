#include "doelens/prescribe.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "doelens/rng.hpp"

namespace doelens {

std::size_t PrescriptionPlan::type1_total() const {
  std::size_t n = 0;
  for (const auto& t : type1) n += t.budget;
  return n;
}

std::size_t PrescriptionPlan::pair_total() const {
  std::size_t n = 0;
  for (const auto& t : type2) n += t.pairs;
  return n;
}

namespace {

std::vector<std::size_t> even_split(std::size_t budget, std::size_t parts) {
  std::vector<std::size_t> out(parts, parts ? budget / parts : 0);
  for (std::size_t i = 0; parts && i < budget % parts; ++i) ++out[i];
  return out;
}

void check_marginals(const FactorSpace& space, const LevelHistogram& marginals) {
  if (marginals.size() != space.size()) throw std::invalid_argument("marginals must cover every factor");
  for (std::size_t f = 0; f < space.size(); ++f) {
    if (marginals[f].size() != static_cast<std::size_t>(space[f].level_count))
      throw std::invalid_argument("marginal for '" + space[f].name + "' has wrong level count");
    std::size_t total = 0;
    for (auto c : marginals[f]) total += c;
    if (total == 0) throw std::invalid_argument("marginal for '" + space[f].name + "' is empty");
  }
}

}  // namespace

PrescriptionPlan build_plan(const FactorSpace& space, const GapDiagnosis& diagnosis, std::size_t type1_budget,
                            std::size_t pair_budget) {
  if (diagnosis.factors.size() != space.size()) throw std::invalid_argument("diagnosis does not match the space");
  PrescriptionPlan plan;
  plan.space = space;
  std::vector<std::size_t> t1, t2;
  for (std::size_t f = 0; f < space.size(); ++f) {
    const auto& d = diagnosis.factors[f];
    if (d.factor != space[f].name) throw std::invalid_argument("diagnosis factor order differs from the space");
    if (d.classification == GapType::type_i) t1.push_back(f);
    if (d.classification == GapType::type_ii) t2.push_back(f);
  }
  const auto b1 = even_split(type1_budget, t1.size());
  const auto b2 = even_split(pair_budget, t2.size());
  for (std::size_t i = 0; i < t1.size(); ++i) {
    const auto& d = diagnosis.factors[t1[i]];
    if (d.deficient_levels.empty())
      throw std::invalid_argument("Type I factor '" + d.factor + "' has no deficient levels");
    plan.type1.push_back({t1[i], d.deficient_levels, b1[i]});
  }
  for (std::size_t i = 0; i < t2.size(); ++i) plan.type2.push_back({t2[i], b2[i]});
  return plan;
}

FactorSetting sample_from_marginals(const FactorSpace& space, const LevelHistogram& marginals, Rng& rng) {
  FactorSetting s;
  s.values.resize(space.size());
  for (std::size_t f = 0; f < space.size(); ++f) {
    std::discrete_distribution<int> dist(marginals[f].begin(), marginals[f].end());
    s[f] = dist(rng);
  }
  return s;
}

Dataset generate_type1(const PrescriptionPlan& plan, const LevelHistogram& train_marginals,
                       const GeneratorConfig& generator, std::uint64_t seed) {
  if (plan.type1.empty()) throw std::invalid_argument("plan has no Type I entries");
  if (generator_space(generator.kind) != plan.space)
    throw std::invalid_argument("generator space differs from the plan space");
  check_marginals(plan.space, train_marginals);
  std::vector<FactorSetting> settings;
  settings.reserve(plan.type1_total());
  for (const auto& target : plan.type1) {
    if (target.levels.empty())
      throw std::invalid_argument("Type I target '" + plan.space[target.factor].name + "' has no deficient levels");
    for (int l : target.levels)
      if (l < 0 || l >= plan.space[target.factor].level_count)
        throw std::invalid_argument("Type I target level out of range");
    std::uniform_int_distribution<std::size_t> pick(0, target.levels.size() - 1);
    for (std::size_t j = 0; j < target.budget; ++j) {
      Rng rng = make_rng(seed, settings.size());
      FactorSetting s = sample_from_marginals(plan.space, train_marginals, rng);
      s[target.factor] = target.levels[pick(rng)];
      settings.push_back(std::move(s));
    }
  }
  return render_dataset(generator, settings, Provenance::type1_correction, seed);
}

std::vector<CounterfactualPair> generate_type2_pairs(const PrescriptionPlan& plan,
                                                     const LevelHistogram& train_marginals,
                                                     const GeneratorConfig& generator, std::uint64_t seed) {
  if (plan.type2.empty()) throw std::invalid_argument("plan has no Type II entries");
  if (generator_space(generator.kind) != plan.space)
    throw std::invalid_argument("generator space differs from the plan space");
  check_marginals(plan.space, train_marginals);
  std::vector<FactorSetting> settings;
  std::vector<std::size_t> varied;
  for (const auto& target : plan.type2) {
    const int levels = plan.space[target.factor].level_count;
    if (levels < 2)
      throw std::invalid_argument("varied factor '" + plan.space[target.factor].name + "' has fewer than 2 levels");
    const auto proj = two_level_projection(plan.space, target.factor);
    for (std::size_t j = 0; j < target.pairs; ++j) {
      Rng rng = make_rng(seed, varied.size());
      FactorSetting a = sample_from_marginals(plan.space, train_marginals, rng);
      FactorSetting b = a;
      if (levels >= 4) {
        std::uniform_int_distribution<std::size_t> lo(0, proj.low.size() - 1), hi(0, proj.high.size() - 1);
        a[target.factor] = proj.low[lo(rng)];
        b[target.factor] = proj.high[hi(rng)];
        if (std::bernoulli_distribution(0.5)(rng)) std::swap(a[target.factor], b[target.factor]);
      } else {
        std::uniform_int_distribution<int> first(0, levels - 1), second(0, levels - 2);
        a[target.factor] = first(rng);
        const int other = second(rng);
        b[target.factor] = other >= a[target.factor] ? other + 1 : other;
      }
      settings.push_back(std::move(a));
      settings.push_back(std::move(b));
      varied.push_back(target.factor);
    }
  }
  const Dataset images = render_dataset(generator, settings, Provenance::pairs, seed);
  std::vector<CounterfactualPair> pairs(varied.size());
  for (std::size_t i = 0; i < varied.size(); ++i)
    pairs[i] = {images.samples[2 * i], images.samples[2 * i + 1], varied[i]};
  return pairs;
}

nnet::ModelParams correct(const nnet::ModelParams& params, const Dataset& real, const Dataset& type1,
                          const std::vector<CounterfactualPair>& pairs, const nnet::TrainConfig& cfg,
                          bool cold_start, nnet::TrainLog* log) {
  if (type1.empty() && pairs.empty()) throw std::invalid_argument("correction needs Type I data or pairs");
  const Dataset unioned = type1.empty() ? real : concat(real, type1, Provenance::biased_train);
  nnet::ModelParams start =
      cold_start ? nnet::init_params<float>(params.arch, derive_seed(cfg.seed, stream::model_init)) : params;
  return nnet::train(std::move(start), unioned, pairs, cfg, log);
}

LoopResult verify_loop(const nnet::ModelParams& params, const Dataset& real, const Dataset& audit_val,
                       const Dataset& test, const LoopConfig& cfg) {
  if (cfg.max_rounds < 1) throw std::invalid_argument("max_rounds must be >= 1");
  LoopResult out{params, {}};
  Dataset type1;
  type1.space = real.space;
  type1.generator = cfg.generator;
  type1.provenance = Provenance::type1_correction;
  std::vector<CounterfactualPair> pairs;

  for (int round = 0;; ++round) {
    const Dataset train_view = type1.empty() ? real : concat(real, type1, Provenance::biased_train);
    const auto hist = level_histogram(train_view);
    auto run = diagnose_model(out.params, audit_val, hist, cfg.alpha, cfg.delta);
    AuditRound r;
    r.round = round;
    r.profile = std::move(run.profile);
    r.coverage = std::move(run.coverage);
    r.diagnosis = std::move(run.diagnosis);
    r.heldout_accuracy = nnet::evaluate(out.params, test).accuracy;
    r.type1_images = type1.size();
    r.pairs = pairs.size();
    const bool gaps = r.diagnosis.has_gaps();
    const GapDiagnosis diagnosis = r.diagnosis;
    out.history.rounds.push_back(std::move(r));
    if (!gaps || round >= cfg.max_rounds) break;

    const auto plan = build_plan(real.space, diagnosis, cfg.type1_budget, cfg.pair_budget);
    if (plan.empty()) break;
    const auto marginals = level_histogram(real);
    if (plan.type1_total() > 0) {
      const auto fresh = generate_type1(plan, marginals, cfg.generator,
                                        derive_seed(derive_seed(cfg.seed, stream::type1), round));
      type1 = type1.empty() ? fresh : concat(type1, fresh, Provenance::type1_correction);
    }
    if (plan.pair_total() > 0) {
      auto fresh = generate_type2_pairs(plan, marginals, cfg.generator,
                                        derive_seed(derive_seed(cfg.seed, stream::type2), round));
      pairs.insert(pairs.end(), fresh.begin(), fresh.end());
    }
    nnet::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.train.seed, static_cast<std::uint64_t>(round));
    out.params = correct(out.params, real, type1, pairs, tc, cfg.cold_start);
  }
  return out;
}

std::vector<std::string> TransferReport::transferred() const {
  std::vector<std::string> out;
  for (const auto& r : rows)
    if (r.increased && !r.targeted && r.role == FactorRole::nuisance) out.push_back(r.factor);
  return out;
}

TransferReport sensitivity_transfer_report(const SensitivityProfile& before, const SensitivityProfile& after,
                                           const GapDiagnosis& diagnosis) {
  if (before.factors.size() != after.factors.size() || before.factors.size() != diagnosis.factors.size())
    throw std::invalid_argument("transfer report inputs cover different factors");
  TransferReport rep;
  for (std::size_t f = 0; f < before.factors.size(); ++f) {
    const auto& b = before.factors[f];
    const auto& a = after.factors[f];
    if (b.factor != a.factor || b.factor != diagnosis.factors[f].factor)
      throw std::invalid_argument("transfer report inputs list factors in different orders");
    TransferRow row;
    row.factor = b.factor;
    row.role = b.role;
    row.f_before = b.f;
    row.f_after = a.f;
    row.delta_f = a.f - b.f;
    if (std::isfinite(a.f) && std::isfinite(b.f) && b.f != 0.0) row.delta_pct = 100.0 * (a.f - b.f) / b.f;
    row.increased = a.f > b.f;
    const auto cls = diagnosis.factors[f].classification;
    row.targeted = cls == GapType::type_i || cls == GapType::type_ii;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

TransferReport sensitivity_transfer_report(const AuditHistory& history) {
  if (history.rounds.size() < 2) throw std::invalid_argument("transfer report needs at least two rounds");
  return sensitivity_transfer_report(history.rounds.front().profile, history.rounds.back().profile,
                                     history.rounds.front().diagnosis);
}

namespace {
nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
}  // namespace

nlohmann::json to_json(const PrescriptionPlan& plan) {
  nlohmann::json t1 = nlohmann::json::array(), t2 = nlohmann::json::array();
  for (const auto& t : plan.type1)
    t1.push_back({{"factor", plan.space[t.factor].name}, {"levels", t.levels}, {"budget", t.budget}});
  for (const auto& t : plan.type2) t2.push_back({{"factor", plan.space[t.factor].name}, {"pairs", t.pairs}});
  return {{"space", to_json(plan.space)},
          {"type1", t1},
          {"type2", t2},
          {"type1_total", plan.type1_total()},
          {"pair_total", plan.pair_total()},
          {"image_total", plan.image_total()}};
}

PrescriptionPlan plan_from_json(const nlohmann::json& j) {
  PrescriptionPlan plan;
  plan.space = factor_space_from_json(j.at("space"));
  for (const auto& t : j.at("type1")) {
    Type1Target target{plan.space.index_of(t.at("factor").get<std::string>()), t.at("levels").get<std::vector<int>>(),
                       t.at("budget").get<std::size_t>()};
    for (int l : target.levels)
      if (l < 0 || l >= plan.space[target.factor].level_count)
        throw std::invalid_argument("plan level out of range for '" + plan.space[target.factor].name + "'");
    plan.type1.push_back(std::move(target));
  }
  for (const auto& t : j.at("type2"))
    plan.type2.push_back({plan.space.index_of(t.at("factor").get<std::string>()), t.at("pairs").get<std::size_t>()});
  return plan;
}

nlohmann::json to_json(const AuditHistory& history) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : history.rounds)
    rounds.push_back({{"round", r.round},
                      {"profile", to_json(r.profile)},
                      {"coverage", to_json(r.coverage)},
                      {"diagnosis", to_json(r.diagnosis)},
                      {"heldout_accuracy", r.heldout_accuracy},
                      {"type1_images", r.type1_images},
                      {"pairs", r.pairs}});
  return {{"rounds", rounds}};
}

nlohmann::json to_json(const TransferReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"factor", r.factor},
                    {"role", to_string(r.role)},
                    {"F_before", num(r.f_before)},
                    {"F_after", num(r.f_after)},
                    {"delta_F", num(r.delta_f)},
                    {"delta_pct", r.delta_pct ? nlohmann::json(*r.delta_pct) : nlohmann::json(nullptr)},
                    {"increased", r.increased},
                    {"targeted", r.targeted}});
  return {{"rows", rows}, {"transferred", report.transferred()}};
}

std::string format_transfer_table(const TransferReport& report) {
  std::size_t width = 6;
  for (const auto& r : report.rows) width = std::max(width, r.factor.size());
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %10s  %10s  %10s  %10s  %s\n", static_cast<int>(width), "Factor", "F_before",
                "F_after", "dF", "d%", "");
  os << line;
  for (const auto& r : report.rows) {
    std::string mark = r.increased && !r.targeted && r.role == FactorRole::nuisance ? "^" : "";
    if (r.targeted) mark = "targeted";
    std::snprintf(line, sizeof line, "%-*s  %10s  %10s  %10s  %10s  %s\n", static_cast<int>(width), r.factor.c_str(),
                  format_4g(r.f_before).c_str(), format_4g(r.f_after).c_str(), format_4g(r.delta_f).c_str(),
                  r.delta_pct ? format_4g(*r.delta_pct).c_str() : "-", mark.c_str());
    os << line;
  }
  return os.str();
}

}  // namespace doelens
