#include "doelens/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "doelens/dataset_io.hpp"
#include "doelens/design.hpp"
#include "doelens/rng.hpp"

namespace doelens {
namespace {

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
double num_or(const nlohmann::json& j, double missing = std::numeric_limits<double>::quiet_NaN()) {
  return j.is_null() ? missing : j.get<double>();
}

NamedCheck check(std::string name, bool passed, std::string detail) {
  return {std::move(name), passed, std::move(detail)};
}

std::string fmt_double(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

nnet::TrainConfig seeded(nnet::TrainConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  return cfg;
}

std::vector<NamedCheck> checks_from_json(const nlohmann::json& j) {
  std::vector<NamedCheck> out;
  for (const auto& c : j)
    out.push_back({c.at("name").get<std::string>(), c.at("passed").get<bool>(), c.at("detail").get<std::string>()});
  return out;
}

}  // namespace

Exp1Config Exp1Config::paper_scale() {
  Exp1Config c;
  c.train_size = 30000;
  c.split_size = 5000;
  c.width = 1.0;
  c.correction.batch_size = 256;
  c.correction.inv_pairs_per_batch = 32;
  return c;
}

void Exp1Config::validate() const {
  if (train_size < 3) throw std::invalid_argument("exp1 train_size must be >= 3");
  if (split_size < 3) throw std::invalid_argument("exp1 split_size must be >= 3");
  if (!(width > 0)) throw std::invalid_argument("exp1 width must be positive");
  if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(delta >= 0 && delta <= 1)) throw std::invalid_argument("delta must lie in [0, 1]");
  biased_train.validate();
  correction.validate();
  parse_generators(generators);
}

nlohmann::json to_json(const Exp1Config& c) {
  return {{"seed", c.seed},
          {"train_size", c.train_size},
          {"split_size", c.split_size},
          {"width", c.width},
          {"biased_train", nnet::to_json(c.biased_train)},
          {"correction", nnet::to_json(c.correction)},
          {"type1_budget", c.type1_budget},
          {"pair_budget", c.pair_budget},
          {"alpha", c.alpha},
          {"delta", c.delta},
          {"generators", c.generators},
          {"probe_replicates", c.probe_replicates}};
}

Exp1Config exp1_config_from_json(const nlohmann::json& j, const Exp1Config& d) {
  if (!j.is_object()) throw std::invalid_argument("exp1 config must be a JSON object");
  Exp1Config c = d;
  c.seed = j.value("seed", d.seed);
  c.train_size = j.value("train_size", d.train_size);
  c.split_size = j.value("split_size", d.split_size);
  c.width = j.value("width", d.width);
  if (j.contains("biased_train")) c.biased_train = nnet::train_config_from_json(j.at("biased_train"), d.biased_train);
  if (j.contains("correction")) c.correction = nnet::train_config_from_json(j.at("correction"), d.correction);
  c.type1_budget = j.value("type1_budget", d.type1_budget);
  c.pair_budget = j.value("pair_budget", d.pair_budget);
  c.alpha = j.value("alpha", d.alpha);
  c.delta = j.value("delta", d.delta);
  c.generators = j.value("generators", d.generators);
  c.probe_replicates = j.value("probe_replicates", d.probe_replicates);
  c.validate();
  return c;
}

bool Exp1Report::all_checks_pass() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

Exp1Report run_exp1(const Exp1Config& cfg) {
  cfg.validate();
  Exp1Report rep;
  rep.config = cfg;
  const auto& space = dsprites_space();
  const GeneratorConfig generator{GeneratorKind::dsprites, 0.0};

  DesignPlan design = fractional_factorial(space.size(), parse_generators(cfg.generators));
  rep.design = plan_sidecar_json(design);
  rep.design["rows"] = design.runs;

  spdlog::info("exp1 seed {}: building data ({} train, {} per split)", cfg.seed, cfg.train_size, cfg.split_size);
  const Dataset train = build_biased_trainset(cfg.train_size, derive_seed(cfg.seed, stream::biased_train));
  const auto [audit_val, test] = build_balanced_splits(cfg.split_size, derive_seed(cfg.seed, stream::splits));

  spdlog::info("exp1 seed {}: training biased model", cfg.seed);
  const auto arch = nnet::Architecture::dsprites_cnn(cfg.width);
  auto init = nnet::init_params<float>(arch, derive_seed(cfg.seed, stream::model_init));
  const auto biased = nnet::train(std::move(init), train, {},
                                  seeded(cfg.biased_train, derive_seed(cfg.seed, stream::shuffle)));
  rep.biased_train_accuracy = nnet::evaluate(biased, train).accuracy;

  const auto hist = level_histogram(train);
  auto run = diagnose_model(biased, audit_val, hist, cfg.alpha, cfg.delta);
  rep.before = run.profile;
  rep.coverage = to_json(run.coverage);
  rep.diagnosis = run.diagnosis;
  rep.accuracy_baseline = nnet::evaluate(biased, test).accuracy;
  spdlog::info("exp1 seed {}: baseline test accuracy {:.4f}", cfg.seed, rep.accuracy_baseline);

  if (cfg.probe_replicates > 0) {
    Rng rng = make_rng(cfg.seed, stream::probe);
    const auto settings = realize(design, space, cfg.probe_replicates, rng);
    const Dataset probe = render_dataset(generator, settings, Provenance::probe, derive_seed(cfg.seed, stream::probe));
    rep.probe = run_audit(biased, probe, cfg.alpha);
  }

  rep.plan = build_plan(space, rep.diagnosis, cfg.type1_budget, cfg.pair_budget);
  Dataset type1;
  type1.space = space;
  type1.generator = generator;
  type1.provenance = Provenance::type1_correction;
  std::vector<CounterfactualPair> pairs;
  if (rep.plan.type1_total() > 0)
    type1 = generate_type1(rep.plan, hist, generator, derive_seed(cfg.seed, stream::type1));
  if (rep.plan.pair_total() > 0)
    pairs = generate_type2_pairs(rep.plan, hist, generator, derive_seed(cfg.seed, stream::type2));
  rep.synthetic_images = type1.size() + 2 * pairs.size();

  if (rep.plan.empty()) {
    rep.after_invariance = rep.before;
    rep.after_task_only = rep.before;
    rep.accuracy_invariance = rep.accuracy_task_only = rep.accuracy_baseline;
  } else {
    const std::uint64_t correction_seed = derive_seed(derive_seed(cfg.seed, stream::shuffle), 1);
    spdlog::info("exp1 seed {}: invariance-regularized correction ({} synthetic images)", cfg.seed,
                 rep.synthetic_images);
    const auto invariant = correct(biased, train, type1, pairs, seeded(cfg.correction, correction_seed));
    rep.after_invariance = run_audit(invariant, audit_val, cfg.alpha);
    rep.accuracy_invariance = nnet::evaluate(invariant, test).accuracy;

    spdlog::info("exp1 seed {}: task-loss-only correction", cfg.seed);
    auto task_cfg = seeded(cfg.correction, correction_seed);
    task_cfg.lambda = 0.0;
    // Same diagnosed images, all of them as labeled data.
    Dataset targeted = type1;
    for (const auto& p : pairs) {
      targeted.samples.push_back(p.a);
      targeted.samples.push_back(p.b);
    }
    const auto task_only = correct(biased, train, targeted, {}, task_cfg);
    rep.after_task_only = run_audit(task_only, audit_val, cfg.alpha);
    rep.accuracy_task_only = nnet::evaluate(task_only, test).accuracy;
  }
  rep.transfer = sensitivity_transfer_report(rep.before, rep.after_invariance, rep.diagnosis);

  const auto& posx_before = rep.before.at("posX");
  const auto& posx_after = rep.after_invariance.at("posX");
  rep.checks.push_back(check("biased_train_accuracy", rep.biased_train_accuracy >= 0.99,
                             fmt_double("%.4f >= 0.99", rep.biased_train_accuracy)));
  rep.checks.push_back(check("posX_significant_before", posx_before.significant,
                             "F=" + format_4g(posx_before.f) + " p=" + format_4g(posx_before.p_raw)));
  rep.checks.push_back(check("orientation_type_i", rep.diagnosis.at("orientation").classification == GapType::type_i,
                             std::string(to_string(rep.diagnosis.at("orientation").classification))));
  rep.checks.push_back(check("posX_type_ii", rep.diagnosis.at("posX").classification == GapType::type_ii,
                             std::string(to_string(rep.diagnosis.at("posX").classification))));
  rep.checks.push_back(check("baseline_accuracy_band",
                             rep.accuracy_baseline >= 0.40 && rep.accuracy_baseline <= 0.65,
                             fmt_double("%.4f in [0.40, 0.65]", rep.accuracy_baseline)));
  rep.checks.push_back(check("task_only_gain", rep.accuracy_task_only - rep.accuracy_baseline >= 0.15,
                             fmt_double("%+.4f >= +0.15", rep.accuracy_task_only - rep.accuracy_baseline)));
  rep.checks.push_back(check("posX_nonsignificant_after", !posx_after.significant,
                             "F=" + format_4g(posx_after.f) + " p=" + format_4g(posx_after.p_raw)));
  for (const auto& c : rep.checks) spdlog::info("exp1 seed {}: check {} {} ({})", cfg.seed, c.name,
                                                 c.passed ? "ok" : "VIOLATED", c.detail);
  return rep;
}

void Exp3Config::validate() const {
  if (train_size < 3) throw std::invalid_argument("exp3 train_size must be >= 3");
  if (audit_size < 3) throw std::invalid_argument("exp3 audit_size must be >= 3");
  if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("alpha must lie in (0, 1)");
  doelens::validate(GeneratorConfig{GeneratorKind::colored_shapes, epsilon_perfect});
  doelens::validate(GeneratorConfig{GeneratorKind::colored_shapes, epsilon_entangled});
  train.validate();
}

nlohmann::json to_json(const Exp3Config& c) {
  return {{"seed", c.seed},
          {"train_size", c.train_size},
          {"audit_size", c.audit_size},
          {"epsilon_perfect", c.epsilon_perfect},
          {"epsilon_entangled", c.epsilon_entangled},
          {"train", nnet::to_json(c.train)},
          {"alpha", c.alpha}};
}

Exp3Config exp3_config_from_json(const nlohmann::json& j, const Exp3Config& d) {
  if (!j.is_object()) throw std::invalid_argument("exp3 config must be a JSON object");
  Exp3Config c = d;
  c.seed = j.value("seed", d.seed);
  c.train_size = j.value("train_size", d.train_size);
  c.audit_size = j.value("audit_size", d.audit_size);
  c.epsilon_perfect = j.value("epsilon_perfect", d.epsilon_perfect);
  c.epsilon_entangled = j.value("epsilon_entangled", d.epsilon_entangled);
  if (j.contains("train")) c.train = nnet::train_config_from_json(j.at("train"), d.train);
  c.alpha = j.value("alpha", d.alpha);
  c.validate();
  return c;
}

bool Exp3Report::all_checks_pass() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

Exp3Report run_exp3(const Exp3Config& cfg) {
  cfg.validate();
  Exp3Report rep;
  rep.config = cfg;
  const auto arch = nnet::Architecture::tiny_cnn();
  auto arm = [&](double epsilon, SensitivityProfile& profile, double& accuracy) {
    const GeneratorConfig gen{GeneratorKind::colored_shapes, epsilon};
    const Dataset train = build_balanced_dataset(gen, cfg.train_size, derive_seed(cfg.seed, stream::exp3_train));
    const Dataset audit =
        build_balanced_dataset(gen, cfg.audit_size, derive_seed(cfg.seed, stream::exp3_audit), Provenance::probe);
    spdlog::info("exp3 seed {}: training on epsilon={} generator", cfg.seed, epsilon);
    auto init = nnet::init_params<float>(arch, derive_seed(cfg.seed, stream::model_init));
    const auto model = nnet::train(std::move(init), train, {}, seeded(cfg.train, derive_seed(cfg.seed, stream::shuffle)));
    profile = run_audit(model, audit, cfg.alpha);
    accuracy = nnet::evaluate(model, audit).accuracy;
  };
  // Both arms always train, so equal epsilons exercise end-to-end determinism.
  arm(cfg.epsilon_perfect, rep.perfect, rep.accuracy_perfect);
  arm(cfg.epsilon_entangled, rep.entangled, rep.accuracy_entangled);
  for (std::size_t f = 0; f < rep.perfect.factors.size(); ++f) {
    const auto& p = rep.perfect.factors[f];
    const auto& e = rep.entangled.factors[f];
    rep.rows.push_back({p.factor, p.f, e.f, e.f - p.f});
  }
  auto row = [&](std::string_view name) -> const Exp3Row& {
    for (const auto& r : rep.rows)
      if (r.factor == name) return r;
    throw std::out_of_range("missing factor");
  };
  if (cfg.epsilon_entangled > cfg.epsilon_perfect) {
    rep.checks.push_back(check("style_delta_positive", row("style").delta_f > 0.0, "dF=" + format_4g(row("style").delta_f)));
    rep.checks.push_back(check("size_delta_negative", row("size").delta_f < 0.0, "dF=" + format_4g(row("size").delta_f)));
  } else if (cfg.epsilon_entangled == cfg.epsilon_perfect) {
    bool zero = true;
    for (const auto& r : rep.rows) zero = zero && r.delta_f == 0.0;
    rep.checks.push_back(check("identical_generators_zero_delta", zero, zero ? "all dF = 0" : "nonzero dF"));
  }
  for (const auto& c : rep.checks) spdlog::info("exp3 seed {}: check {} {} ({})", cfg.seed, c.name,
                                                 c.passed ? "ok" : "VIOLATED", c.detail);
  return rep;
}

nlohmann::json to_json(const std::vector<NamedCheck>& checks) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : checks) out.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return out;
}

TransferReport transfer_report_from_json(const nlohmann::json& j) {
  TransferReport rep;
  for (const auto& r : j.at("rows")) {
    TransferRow row;
    row.factor = r.at("factor").get<std::string>();
    row.role = parse_factor_role(r.at("role").get<std::string>());
    row.f_before = num_or(r.at("F_before"));
    row.f_after = num_or(r.at("F_after"));
    row.delta_f = num_or(r.at("delta_F"));
    if (!r.at("delta_pct").is_null()) row.delta_pct = r.at("delta_pct").get<double>();
    row.increased = r.at("increased").get<bool>();
    row.targeted = r.at("targeted").get<bool>();
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

nlohmann::json to_json(const Exp1Report& r) {
  return {{"experiment", "exp1"},
          {"config", to_json(r.config)},
          {"seeds",
           {{"master", r.config.seed},
            {"biased_train", derive_seed(r.config.seed, stream::biased_train)},
            {"splits", derive_seed(r.config.seed, stream::splits)},
            {"model_init", derive_seed(r.config.seed, stream::model_init)},
            {"type1", derive_seed(r.config.seed, stream::type1)},
            {"type2", derive_seed(r.config.seed, stream::type2)}}},
          {"design", r.design},
          {"biased_train_accuracy", r.biased_train_accuracy},
          {"before", to_json(r.before)},
          {"coverage", r.coverage},
          {"diagnosis", to_json(r.diagnosis)},
          {"plan", to_json(r.plan)},
          {"synthetic_images", r.synthetic_images},
          {"after_invariance", to_json(r.after_invariance)},
          {"after_task_only", to_json(r.after_task_only)},
          {"accuracy",
           {{"no_synthetic", r.accuracy_baseline}, {"invariance", r.accuracy_invariance}, {"task_only", r.accuracy_task_only}}},
          {"transfer", to_json(r.transfer)},
          {"probe", r.probe ? to_json(*r.probe) : nlohmann::json(nullptr)},
          {"checks", to_json(r.checks)}};
}

Exp1Report exp1_report_from_json(const nlohmann::json& j) {
  Exp1Report r;
  r.config = exp1_config_from_json(j.at("config"));
  r.design = j.at("design");
  r.biased_train_accuracy = j.at("biased_train_accuracy").get<double>();
  r.before = profile_from_json(j.at("before"));
  r.coverage = j.at("coverage");
  r.diagnosis = diagnosis_from_json(j.at("diagnosis"));
  r.plan = plan_from_json(j.at("plan"));
  r.synthetic_images = j.at("synthetic_images").get<std::size_t>();
  r.after_invariance = profile_from_json(j.at("after_invariance"));
  r.after_task_only = profile_from_json(j.at("after_task_only"));
  r.accuracy_baseline = j.at("accuracy").at("no_synthetic").get<double>();
  r.accuracy_invariance = j.at("accuracy").at("invariance").get<double>();
  r.accuracy_task_only = j.at("accuracy").at("task_only").get<double>();
  r.transfer = transfer_report_from_json(j.at("transfer"));
  if (!j.at("probe").is_null()) r.probe = profile_from_json(j.at("probe"));
  r.checks = checks_from_json(j.at("checks"));
  return r;
}

nlohmann::json to_json(const Exp3Report& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"factor", row.factor},
                    {"F_perfect", num(row.f_perfect)},
                    {"F_entangled", num(row.f_entangled)},
                    {"delta_F", num(row.delta_f)}});
  return {{"experiment", "exp3"},
          {"config", to_json(r.config)},
          {"seeds",
           {{"master", r.config.seed},
            {"train", derive_seed(r.config.seed, stream::exp3_train)},
            {"audit", derive_seed(r.config.seed, stream::exp3_audit)},
            {"model_init", derive_seed(r.config.seed, stream::model_init)}}},
          {"perfect", to_json(r.perfect)},
          {"entangled", to_json(r.entangled)},
          {"accuracy", {{"perfect", r.accuracy_perfect}, {"entangled", r.accuracy_entangled}}},
          {"rows", rows},
          {"checks", to_json(r.checks)}};
}

Exp3Report exp3_report_from_json(const nlohmann::json& j) {
  Exp3Report r;
  r.config = exp3_config_from_json(j.at("config"));
  r.perfect = profile_from_json(j.at("perfect"));
  r.entangled = profile_from_json(j.at("entangled"));
  r.accuracy_perfect = j.at("accuracy").at("perfect").get<double>();
  r.accuracy_entangled = j.at("accuracy").at("entangled").get<double>();
  for (const auto& row : j.at("rows"))
    r.rows.push_back({row.at("factor").get<std::string>(), num_or(row.at("F_perfect")),
                      num_or(row.at("F_entangled")), num_or(row.at("delta_F"))});
  r.checks = checks_from_json(j.at("checks"));
  return r;
}

namespace {

std::size_t name_width(const SensitivityProfile& p) {
  std::size_t w = 11;
  for (const auto& f : p.factors) w = std::max(w, f.factor.size());
  return w;
}

std::string stars(const FactorSensitivity& f) {
  return f.testable ? significance_stars(f.p_raw, f.significant) : "untestable";
}

std::string gap_cell(GapType t) {
  if (t == GapType::type_i) return "Type I";
  if (t == GapType::type_ii) return "Type II";
  return "--";
}

}  // namespace

std::string format_exp1_table(const Exp1Report& r) {
  std::ostringstream os;
  char line[256];
  const int w = static_cast<int>(name_width(r.before));
  std::snprintf(line, sizeof line, "%-*s  %10s  %-5s  %10s  %-5s  %-8s\n", w, "Factor", "F before", "Sig.", "F after",
                "Sig.", "Gap type");
  os << line;
  for (std::size_t f = 0; f < r.before.factors.size(); ++f) {
    const auto& b = r.before.factors[f];
    const auto& a = r.after_invariance.factors[f];
    std::snprintf(line, sizeof line, "%-*s  %10s  %-5s  %10s  %-5s  %-8s\n", w, b.factor.c_str(),
                  format_4g(b.f).c_str(), stars(b).c_str(), format_4g(a.f).c_str(), stars(a).c_str(),
                  gap_cell(r.diagnosis.factors[f].classification).c_str());
    os << line;
  }
  os << "\nHeld-out accuracy\n";
  std::snprintf(line, sizeof line, "  %-28s %s\n", "No synthetic data", format_4g(r.accuracy_baseline).c_str());
  os << line;
  std::snprintf(line, sizeof line, "  %-28s %s\n", "Targeted + invariance", format_4g(r.accuracy_invariance).c_str());
  os << line;
  std::snprintf(line, sizeof line, "  %-28s %s\n", "Targeted (task loss only)", format_4g(r.accuracy_task_only).c_str());
  os << line;
  os << "\nSynthetic images: " << r.synthetic_images << " (" << r.plan.type1_total() << " Type I, "
     << r.plan.pair_total() << " pairs)\n";
  os << "\nSensitivity transfer (invariance arm)\n" << format_transfer_table(r.transfer);
  if (r.probe) os << "\nFractional-design probe audit (" << r.design.value("generators", "") << ")\n"
                  << format_profile_table(*r.probe);
  os << "\nChecks\n";
  for (const auto& c : r.checks) os << "  " << (c.passed ? "ok       " : "VIOLATED ") << c.name << "  " << c.detail << '\n';
  return os.str();
}

std::string format_exp3_table(const Exp3Report& r) {
  std::ostringstream os;
  char line[256];
  const int w = static_cast<int>(name_width(r.perfect));
  std::snprintf(line, sizeof line, "%-*s  %10s  %-5s  %10s  %-5s  %10s\n", w, "Factor", "F perfect", "Sig.",
                "F entangl.", "Sig.", "dF");
  os << line;
  for (std::size_t f = 0; f < r.rows.size(); ++f) {
    std::snprintf(line, sizeof line, "%-*s  %10s  %-5s  %10s  %-5s  %10s\n", w, r.rows[f].factor.c_str(),
                  format_4g(r.rows[f].f_perfect).c_str(), stars(r.perfect.factors[f]).c_str(),
                  format_4g(r.rows[f].f_entangled).c_str(), stars(r.entangled.factors[f]).c_str(),
                  format_4g(r.rows[f].delta_f).c_str());
    os << line;
  }
  os << "\nAudit accuracy: perfect " << format_4g(r.accuracy_perfect) << ", entangled "
     << format_4g(r.accuracy_entangled) << '\n';
  os << "\nChecks\n";
  for (const auto& c : r.checks) os << "  " << (c.passed ? "ok       " : "VIOLATED ") << c.name << "  " << c.detail << '\n';
  return os.str();
}

std::string exp1_csv(const Exp1Report& r) {
  std::ostringstream os;
  os << "factor,role,F_before,p_before,sig_before,F_invariance,p_invariance,sig_invariance,F_task_only,p_task_only,sig_task_only,"
        "classification,coverage_drop,delta_pct\n";
  os.precision(17);
  for (std::size_t f = 0; f < r.before.factors.size(); ++f) {
    const auto& b = r.before.factors[f];
    const auto& a = r.after_invariance.factors[f];
    const auto& t = r.after_task_only.factors[f];
    const auto& d = r.diagnosis.factors[f];
    os << b.factor << ',' << to_string(b.role) << ',' << b.f << ',' << b.p_raw << ',' << b.significant << ',' << a.f
       << ',' << a.p_raw << ',' << a.significant << ',' << t.f << ',' << t.p_raw << ',' << t.significant << ','
       << to_string(d.classification) << ',' << d.coverage_drop << ',';
    if (r.transfer.rows[f].delta_pct) os << *r.transfer.rows[f].delta_pct;
    os << '\n';
  }
  return os.str();
}

std::string exp3_csv(const Exp3Report& r) {
  std::ostringstream os;
  os << "factor,F_perfect,p_perfect,F_entangled,p_entangled,delta_F\n";
  os.precision(17);
  for (std::size_t f = 0; f < r.rows.size(); ++f)
    os << r.rows[f].factor << ',' << r.rows[f].f_perfect << ',' << r.perfect.factors[f].p_raw << ','
       << r.rows[f].f_entangled << ',' << r.entangled.factors[f].p_raw << ',' << r.rows[f].delta_f << '\n';
  return os.str();
}

void emit_report(const Exp1Report& report, const std::filesystem::path& dir, const std::string& prefix) {
  write_json(to_json(report), dir / (prefix + ".json"));
  write_text(exp1_csv(report), dir / (prefix + ".csv"));
  write_text(format_exp1_table(report), dir / (prefix + ".txt"));
}

void emit_report(const Exp3Report& report, const std::filesystem::path& dir, const std::string& prefix) {
  write_json(to_json(report), dir / (prefix + ".json"));
  write_text(exp3_csv(report), dir / (prefix + ".csv"));
  write_text(format_exp3_table(report), dir / (prefix + ".txt"));
}

}  // namespace doelens
