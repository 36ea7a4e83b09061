#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "doelens/checkpoint.hpp"
#include "doelens/dataset_io.hpp"
#include "doelens/design.hpp"
#include "doelens/experiments.hpp"
#include "doelens/parallel.hpp"
#include "doelens/prescribe.hpp"

namespace fs = std::filesystem;
using namespace doelens;

namespace {

constexpr int exit_runtime = 1;
constexpr int exit_validation = 2;
constexpr int exit_check = 3;

struct TrainFlags {
  double lr = 3e-4;
  int batch = 256;
  int epochs = 15;
  double lambda = 0.0;
  int inv_pairs = 32;

  void add(CLI::App* app, double default_lambda) {
    lambda = default_lambda;
    app->add_option("--lr", lr, "Adam learning rate (cosine annealed)")->capture_default_str();
    app->add_option("--batch", batch, "Mini-batch size")->capture_default_str();
    app->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    app->add_option("--lambda", lambda, "Invariance loss weight")->capture_default_str();
    app->add_option("--inv-pairs", inv_pairs, "Counterfactual pairs per step")->capture_default_str();
  }
  nnet::TrainConfig config(std::uint64_t seed) const {
    nnet::TrainConfig c;
    c.learning_rate = lr;
    c.batch_size = batch;
    c.epochs = epochs;
    c.lambda = lambda;
    c.inv_pairs_per_batch = inv_pairs;
    c.seed = derive_seed(seed, stream::shuffle);
    c.validate();
    return c;
  }
};

LevelHistogram histogram_for(const FactorSpace& space, const std::string& hist_path, const std::string& data_dir) {
  if (!hist_path.empty()) return histogram_from_json(space, read_json(hist_path));
  if (!data_dir.empty()) return level_histogram(load_dataset(data_dir));
  throw std::invalid_argument("either --train-hist or --train-data is required");
}

void print(const std::string& text) { std::cout << text << std::flush; }

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_st("doelens"));
  retain_heap_memory();

  CLI::App app{"doelens: factor-sensitivity audit, gap diagnosis and targeted correction for image classifiers"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::string log_level = "info";
  app.add_option("--threads", threads, "Worker threads (default: DOELENS_THREADS or hardware count)");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", seed, "Master seed (required)")->required(); };

  // design
  auto* design = app.add_subcommand("design", "Build a two-level (fractional) factorial plan");
  std::size_t k = 5;
  std::string generators = "D=AB,E=AC", design_out = "plan.csv", probe_out;
  std::size_t replicates = 0;
  std::string probe_generator = "dsprites";
  design->add_option("--k", k, "Number of factors")->capture_default_str();
  design->add_option("--generators", generators, "Generator words; empty for a full factorial")->capture_default_str();
  design->add_option("--out", design_out, "Run matrix CSV; a .json sidecar is written next to it")->capture_default_str();
  design->add_option("--replicates", replicates, "Images per run when rendering the probe set")->capture_default_str();
  design->add_option("--generator", probe_generator, "Generator for the probe set (dsprites, colored)")
      ->capture_default_str();
  design->add_option("--probe-out", probe_out, "Render the realized plan into this dataset directory");
  add_seed(design);

  // generate
  auto* generate = app.add_subcommand("generate", "Render a dataset");
  std::string gen_kind = "dsprites", gen_mode = "balanced", gen_out;
  std::size_t gen_n = 1500;
  double gen_eps = 0.0;
  generate->add_option("--generator", gen_kind, "dsprites or colored")->capture_default_str();
  generate->add_option("--mode", gen_mode, "biased, balanced or splits")->capture_default_str();
  generate->add_option("--n", gen_n, "Images (per split for splits)")->capture_default_str();
  generate->add_option("--epsilon", gen_eps, "Style-to-size leakage of the colored generator")->capture_default_str();
  generate->add_option("--out", gen_out, "Output dataset directory")->required();
  add_seed(generate);

  // train
  auto* train = app.add_subcommand("train", "Train a classifier");
  std::string train_data, train_pairs, train_init, train_out, train_arch = "auto";
  double train_width = 0.5;
  TrainFlags train_flags;
  train->add_option("--data", train_data, "Training dataset directory")->required();
  train->add_option("--pairs", train_pairs, "Counterfactual pair directory");
  train->add_option("--init", train_init, "Warm-start checkpoint");
  train->add_option("--arch", train_arch, "auto, dsprites or tiny")->capture_default_str();
  train->add_option("--width", train_width, "Width multiplier of the dsprites network")->capture_default_str();
  train->add_option("--out", train_out, "Output checkpoint")->required();
  train_flags.add(train, 0.0);
  add_seed(train);

  // audit
  auto* audit = app.add_subcommand("audit", "Per-factor ANOVA sensitivity profile");
  std::string audit_model, audit_data, audit_out;
  double alpha = 0.05;
  audit->add_option("--model", audit_model, "Checkpoint")->required();
  audit->add_option("--data", audit_data, "Audit dataset directory")->required();
  audit->add_option("--alpha", alpha, "Family-wise error rate")->capture_default_str();
  audit->add_option("--out", audit_out, "Profile JSON");
  add_seed(audit);

  // diagnose
  auto* diagnose = app.add_subcommand("diagnose", "Classify factors into Type I / Type II / Correct / Semantic");
  std::string diag_model, diag_data, diag_hist, diag_train, diag_out;
  double delta = 0.10;
  diagnose->add_option("--model", diag_model, "Checkpoint")->required();
  diagnose->add_option("--data", diag_data, "Audit-validation dataset directory")->required();
  diagnose->add_option("--train-hist", diag_hist, "Training level histogram JSON");
  diagnose->add_option("--train-data", diag_train, "Training dataset directory (histogram computed from it)");
  diagnose->add_option("--alpha", alpha, "Family-wise error rate")->capture_default_str();
  diagnose->add_option("--delta", delta, "Coverage drop threshold")->capture_default_str();
  diagnose->add_option("--out", diag_out, "Diagnosis JSON");
  add_seed(diagnose);

  // prescribe
  auto* prescribe = app.add_subcommand("prescribe", "Generate targeted Type I data and counterfactual pairs");
  std::string pre_diag, pre_hist, pre_train, pre_out;
  std::size_t type1_budget = 2000, pair_budget = 500;
  prescribe->add_option("--diagnosis", pre_diag, "Diagnosis JSON")->required();
  prescribe->add_option("--train-hist", pre_hist, "Training level histogram JSON");
  prescribe->add_option("--train-data", pre_train, "Training dataset directory");
  prescribe->add_option("--type1-budget", type1_budget, "Type I images")->capture_default_str();
  prescribe->add_option("--pair-budget", pair_budget, "Counterfactual pairs")->capture_default_str();
  prescribe->add_option("--generator", gen_kind, "dsprites or colored")->capture_default_str();
  prescribe->add_option("--epsilon", gen_eps, "Style-to-size leakage of the colored generator")->capture_default_str();
  prescribe->add_option("--out", pre_out, "Output directory (plan.json, type1/, pairs/)")->required();
  add_seed(prescribe);

  // correct
  auto* correct_cmd = app.add_subcommand("correct", "Fine-tune on real + Type I data with the invariance term");
  std::string cor_model, cor_train, cor_type1, cor_pairs, cor_out;
  bool cold_start = false;
  TrainFlags cor_flags;
  correct_cmd->add_option("--model", cor_model, "Checkpoint to fine-tune")->required();
  correct_cmd->add_option("--train-data", cor_train, "Real training dataset directory")->required();
  correct_cmd->add_option("--type1", cor_type1, "Type I dataset directory");
  correct_cmd->add_option("--pairs", cor_pairs, "Counterfactual pair directory");
  correct_cmd->add_flag("--cold-start", cold_start, "Reinitialize instead of fine-tuning");
  correct_cmd->add_option("--out", cor_out, "Output checkpoint")->required();
  cor_flags.add(correct_cmd, 0.5);
  add_seed(correct_cmd);

  // loop
  auto* loop = app.add_subcommand("loop", "Audit, diagnose, prescribe and correct until no gaps remain");
  std::string loop_model, loop_train, loop_audit, loop_test, loop_out;
  int max_rounds = 3;
  TrainFlags loop_flags;
  loop->add_option("--model", loop_model, "Starting checkpoint")->required();
  loop->add_option("--train-data", loop_train, "Real training dataset directory")->required();
  loop->add_option("--audit-data", loop_audit, "Audit-validation dataset directory")->required();
  loop->add_option("--test-data", loop_test, "Held-out test dataset directory")->required();
  loop->add_option("--max-rounds", max_rounds, "Maximum correction rounds")->capture_default_str();
  loop->add_option("--type1-budget", type1_budget, "Type I images per round")->capture_default_str();
  loop->add_option("--pair-budget", pair_budget, "Counterfactual pairs per round")->capture_default_str();
  loop->add_option("--alpha", alpha, "Family-wise error rate")->capture_default_str();
  loop->add_option("--delta", delta, "Coverage drop threshold")->capture_default_str();
  loop->add_flag("--cold-start", cold_start, "Reinitialize before each correction");
  loop->add_option("--out", loop_out, "Output directory (history.json, transfer.json, model.ckpt)")->required();
  loop_flags.add(loop, 0.5);
  add_seed(loop);

  // exp1 / exp3
  auto* exp1 = app.add_subcommand("exp1", "Planted-bias diagnosis and correction experiment");
  std::string exp1_config, exp_out = "reports";
  bool paper_scale = false, check = false;
  exp1->add_option("--config", exp1_config, "Config JSON (fields of the exp1 report's config block)");
  exp1->add_option("--out", exp_out, "Report directory")->capture_default_str();
  exp1->add_flag("--paper-scale", paper_scale, "30,000 train / 5,000 per split / full width");
  exp1->add_flag("--check", check, "Exit 3 when an acceptance band is violated");
  add_seed(exp1);

  auto* exp3 = app.add_subcommand("exp3", "Generator entanglement detection experiment");
  std::string exp3_config;
  exp3->add_option("--config", exp3_config, "Config JSON (fields of the exp3 report's config block)");
  exp3->add_option("--out", exp_out, "Report directory")->capture_default_str();
  exp3->add_flag("--check", check, "Exit 3 when an acceptance band is violated");
  add_seed(exp3);

  auto* report = app.add_subcommand("report", "Re-render text and CSV tables from a report JSON");
  std::string report_in;
  report->add_option("--in", report_in, "exp1 or exp3 report JSON")->required();
  report->add_option("--out", exp_out, "Output directory")->capture_default_str();
  add_seed(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return e.get_exit_code() == 0 ? code : exit_validation;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    if (threads > 0) set_thread_count(threads);

    if (*design) {
      DesignPlan plan = generators.empty() ? full_factorial(k) : fractional_factorial(k, parse_generators(generators));
      write_text(plan_to_csv(plan), design_out);
      fs::path sidecar = fs::path(design_out).replace_extension(".json");
      write_json(plan_sidecar_json(plan), sidecar);
      spdlog::info("design: {} runs, resolution {}", plan.run_count(),
                   plan.resolution ? std::to_string(*plan.resolution) : "full");
      if (!probe_out.empty()) {
        if (replicates == 0) throw std::invalid_argument("--probe-out needs --replicates >= 1");
        const GeneratorConfig gen{parse_generator_kind(probe_generator), gen_eps};
        Rng rng = make_rng(seed, stream::probe);
        const auto settings = realize(plan, generator_space(gen.kind), replicates, rng);
        save_dataset(render_dataset(gen, settings, Provenance::probe, seed), probe_out);
      }
      return 0;
    }

    if (*generate) {
      const GeneratorConfig gen{parse_generator_kind(gen_kind), gen_eps};
      if (gen_mode == "biased") {
        if (gen.kind != GeneratorKind::dsprites) throw std::invalid_argument("biased mode needs the dsprites generator");
        const auto data = build_biased_trainset(gen_n, seed);
        save_dataset(data, gen_out);
        write_json(histogram_to_json(data.space, level_histogram(data)), fs::path(gen_out) / "histogram.json");
      } else if (gen_mode == "balanced") {
        const auto data = build_balanced_dataset(gen, gen_n, seed);
        save_dataset(data, gen_out);
        write_json(histogram_to_json(data.space, level_histogram(data)), fs::path(gen_out) / "histogram.json");
      } else if (gen_mode == "splits") {
        const auto [a, t] = build_balanced_splits(gen_n, seed, gen);
        save_dataset(a, fs::path(gen_out) / "audit_val");
        save_dataset(t, fs::path(gen_out) / "final_test");
      } else {
        throw std::invalid_argument("unknown --mode '" + gen_mode + "'");
      }
      return 0;
    }

    if (*train) {
      const Dataset data = load_dataset(train_data);
      nnet::ModelParams params;
      if (!train_init.empty()) {
        params = load_checkpoint(train_init).params;
      } else {
        nnet::Architecture arch;
        if (train_arch == "dsprites" || (train_arch == "auto" && data.generator.kind == GeneratorKind::dsprites))
          arch = nnet::Architecture::dsprites_cnn(train_width);
        else if (train_arch == "tiny" || train_arch == "auto")
          arch = nnet::Architecture::tiny_cnn();
        else
          throw std::invalid_argument("unknown --arch '" + train_arch + "'");
        params = nnet::init_params<float>(arch, derive_seed(seed, stream::model_init));
      }
      nnet::check_compatible(params.arch, data);
      const auto pairs = train_pairs.empty() ? std::vector<CounterfactualPair>{} : load_pairs(train_pairs);
      const auto cfg = train_flags.config(seed);
      nnet::TrainLog log;
      params = nnet::train(std::move(params), data, pairs, cfg, &log);
      const auto acc = nnet::evaluate(params, data).accuracy;
      spdlog::info("train: {} steps, final loss {:.4f}, training accuracy {:.4f}", log.step_loss.size(),
                   log.step_loss.empty() ? 0.0 : log.step_loss.back(), acc);
      save_checkpoint(params, train_out, {{"train", nnet::to_json(cfg)}, {"data", train_data}, {"seed", seed}});
      return 0;
    }

    if (*audit) {
      const auto ck = load_checkpoint(audit_model);
      const Dataset data = load_dataset(audit_data);
      const auto profile = run_audit(ck.params, data, alpha);
      if (!audit_out.empty()) write_json(to_json(profile), audit_out);
      print(format_profile_table(profile));
      return 0;
    }

    if (*diagnose) {
      const auto ck = load_checkpoint(diag_model);
      const Dataset data = load_dataset(diag_data);
      const auto hist = histogram_for(data.space, diag_hist, diag_train);
      const auto run = diagnose_model(ck.params, data, hist, alpha, delta);
      nlohmann::json out = to_json(run.diagnosis);
      out["profile"] = to_json(run.profile);
      out["coverage"] = to_json(run.coverage);
      if (!diag_out.empty()) write_json(out, diag_out);
      print(format_profile_table(run.profile));
      for (const auto& f : run.diagnosis.factors)
        std::cout << f.factor << ": " << to_string(f.classification) << '\n';
      return 0;
    }

    if (*prescribe) {
      const GeneratorConfig gen{parse_generator_kind(gen_kind), gen_eps};
      const auto& space = generator_space(gen.kind);
      const auto diag = diagnosis_from_json(read_json(pre_diag));
      const auto hist = histogram_for(space, pre_hist, pre_train);
      const auto plan = build_plan(space, diag, type1_budget, pair_budget);
      write_json(to_json(plan), fs::path(pre_out) / "plan.json");
      if (plan.type1_total() > 0)
        save_dataset(generate_type1(plan, hist, gen, derive_seed(seed, stream::type1)), fs::path(pre_out) / "type1");
      if (plan.pair_total() > 0)
        save_pairs(space, gen, derive_seed(seed, stream::type2),
                   generate_type2_pairs(plan, hist, gen, derive_seed(seed, stream::type2)), fs::path(pre_out) / "pairs");
      spdlog::info("prescribe: {} Type I images, {} pairs", plan.type1_total(), plan.pair_total());
      return 0;
    }

    if (*correct_cmd) {
      const auto ck = load_checkpoint(cor_model);
      const Dataset real = load_dataset(cor_train);
      Dataset type1;
      type1.space = real.space;
      if (!cor_type1.empty()) type1 = load_dataset(cor_type1);
      const auto pairs = cor_pairs.empty() ? std::vector<CounterfactualPair>{} : load_pairs(cor_pairs);
      const auto cfg = cor_flags.config(seed);
      const auto params = correct(ck.params, real, type1, pairs, cfg, cold_start);
      save_checkpoint(params, cor_out, {{"train", nnet::to_json(cfg)}, {"seed", seed}, {"cold_start", cold_start}});
      return 0;
    }

    if (*loop) {
      const auto ck = load_checkpoint(loop_model);
      const Dataset real = load_dataset(loop_train);
      const Dataset audit_set = load_dataset(loop_audit);
      const Dataset test = load_dataset(loop_test);
      LoopConfig cfg;
      cfg.type1_budget = type1_budget;
      cfg.pair_budget = pair_budget;
      cfg.max_rounds = max_rounds;
      cfg.alpha = alpha;
      cfg.delta = delta;
      cfg.train = loop_flags.config(seed);
      cfg.seed = seed;
      cfg.generator = real.generator;
      cfg.cold_start = cold_start;
      const auto result = verify_loop(ck.params, real, audit_set, test, cfg);
      write_json(to_json(result.history), fs::path(loop_out) / "history.json");
      if (result.history.rounds.size() >= 2) {
        const auto transfer = sensitivity_transfer_report(result.history);
        write_json(to_json(transfer), fs::path(loop_out) / "transfer.json");
        print(format_transfer_table(transfer));
      }
      save_checkpoint(result.params, fs::path(loop_out) / "model.ckpt", {{"seed", seed}});
      spdlog::info("loop: {} rounds recorded", result.history.rounds.size());
      return 0;
    }

    if (*exp1) {
      Exp1Config defaults = paper_scale ? Exp1Config::paper_scale() : Exp1Config{};
      Exp1Config cfg = exp1_config.empty() ? defaults : exp1_config_from_json(read_json(exp1_config), defaults);
      cfg.seed = seed;
      const auto rep = run_exp1(cfg);
      emit_report(rep, exp_out);
      print(format_exp1_table(rep));
      return check && !rep.all_checks_pass() ? exit_check : 0;
    }

    if (*exp3) {
      Exp3Config cfg = exp3_config.empty() ? Exp3Config{} : exp3_config_from_json(read_json(exp3_config));
      cfg.seed = seed;
      const auto rep = run_exp3(cfg);
      emit_report(rep, exp_out);
      print(format_exp3_table(rep));
      return check && !rep.all_checks_pass() ? exit_check : 0;
    }

    if (*report) {
      const auto j = read_json(report_in);
      const std::string kind = j.value("experiment", "");
      if (kind == "exp1") {
        const auto rep = exp1_report_from_json(j);
        write_text(exp1_csv(rep), fs::path(exp_out) / "exp1.csv");
        write_text(format_exp1_table(rep), fs::path(exp_out) / "exp1.txt");
        print(format_exp1_table(rep));
      } else if (kind == "exp3") {
        const auto rep = exp3_report_from_json(j);
        write_text(exp3_csv(rep), fs::path(exp_out) / "exp3.csv");
        write_text(format_exp3_table(rep), fs::path(exp_out) / "exp3.txt");
        print(format_exp3_table(rep));
      } else {
        throw std::invalid_argument(report_in + " is not an exp1 or exp3 report");
      }
      return 0;
    }
  } catch (const std::logic_error& e) {
    spdlog::error("{}", e.what());
    return exit_validation;
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("invalid JSON input: {}", e.what());
    return exit_validation;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return exit_runtime;
  }
  return exit_validation;
}
