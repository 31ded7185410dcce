// Command-line front end: train, evaluate, baseline, export-embeddings, check.
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "asmaml/config.hpp"
#include "asmaml/error.hpp"
#include "asmaml/harness.hpp"
#include "asmaml/kernels.hpp"
#include "asmaml/tensor.hpp"

namespace {

using namespace asmaml;

Config load_config(const std::string& path, const std::vector<std::string>& overrides) {
  Config cfg = path.empty() ? Config() : Config::from_file(path);
  for (const std::string& o : overrides) cfg.set_override(o);
  return cfg;
}

harness::ExperimentConfig experiment_from(const Config& cfg) {
  harness::ExperimentConfig e = harness::ExperimentConfig::from_config(cfg);
  kern::set_parallel(e.parallel);
  return e;
}

int cmd_train(const Config& cfg) {
  const auto e = experiment_from(cfg);
  const Dataset dataset = harness::load_dataset(e);
  const harness::Splits splits = harness::make_splits(e, dataset);
  std::cout << "dataset: " << dataset.size() << " graphs, " << dataset.class_index.size()
            << " classes (train " << splits.train.size() << ", val " << splits.val.size()
            << ", test " << splits.test.size() << ")\n";
  const harness::TrainResult result = harness::train(e, splits, &std::cout);
  std::cout << "trained " << result.episodes_run << " episodes";
  if (result.early_stopped) std::cout << " (early stop)";
  if (result.best_val_accuracy >= 0.0) {
    std::cout << ", best validation accuracy " << result.best_val_accuracy;
  }
  std::cout << "\n";
  if (!e.out_dir.empty()) {
    std::cout << "wrote " << result.csv_path << " and checkpoints under " << e.out_dir << "\n";
  }
  return 0;
}

int cmd_evaluate(const Config& cfg, const std::string& checkpoint_path,
                 const std::string& out_csv) {
  const auto e = experiment_from(cfg);
  const Dataset dataset = harness::load_dataset(e);
  const harness::Splits splits = harness::make_splits(e, dataset);
  const ParamSet checkpoint = load_params(checkpoint_path);
  const harness::EvalResult r = harness::evaluate(e, checkpoint, splits.test);
  std::cout << "accuracy over " << r.per_task.size() << " tasks (" << r.steps_used
            << " adaptation steps): " << r.mean << " +/- " << r.stddev << " (95% interval +/- "
            << r.ci95_half << ")\n";
  if (!out_csv.empty()) {
    harness::write_eval_csv(out_csv, "asmaml", r);
    std::cout << "wrote " << out_csv << "\n";
  }
  return 0;
}

int cmd_baseline(const Config& cfg, const std::string& method, const std::string& out_csv) {
  const auto e = experiment_from(cfg);
  const Dataset dataset = harness::load_dataset(e);
  const harness::Splits splits = harness::make_splits(e, dataset);
  const harness::EvalResult r = harness::evaluate_baseline(e, splits, method, &std::cout);
  std::cout << method << " accuracy over " << r.per_task.size() << " tasks: " << r.mean
            << " +/- " << r.stddev << " (95% interval +/- " << r.ci95_half << ")\n";
  if (!out_csv.empty()) {
    harness::write_eval_csv(out_csv, method, r);
    std::cout << "wrote " << out_csv << "\n";
  }
  return 0;
}

int cmd_export(const Config& cfg, const std::string& checkpoint_path, int sample_count,
               const std::string& out_csv) {
  const auto e = experiment_from(cfg);
  const Dataset dataset = harness::load_dataset(e);
  const ParamSet checkpoint = load_params(checkpoint_path);
  const std::size_t count =
      sample_count > 0 ? static_cast<std::size_t>(sample_count) : dataset.size();
  harness::export_embeddings(e, checkpoint, dataset, count, out_csv);
  std::cout << "wrote " << count << " embeddings to " << out_csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive-step graph meta-learner for few-shot graph classification"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string checkpoint_path;
  std::string out_csv;
  std::string method = "wl";
  int sample_count = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "configuration file (key = value lines)");
    sub->add_option("--set", overrides, "override a config key, e.g. --set meta.inner_lr=0.01");
  };

  CLI::App* train = app.add_subcommand("train", "episodic meta-training");
  add_common(train);

  CLI::App* evaluate = app.add_subcommand("evaluate", "episodic test-set evaluation");
  add_common(evaluate);
  evaluate->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  evaluate->add_option("--out", out_csv, "append per-task results to this CSV");

  CLI::App* baseline = app.add_subcommand("baseline", "kernel / finetune / proto baselines");
  add_common(baseline);
  baseline->add_option("--method", method, "wl | sp | graphlet | finetune | proto")->required();
  baseline->add_option("--out", out_csv, "append per-task results to this CSV");

  CLI::App* exporter = app.add_subcommand("export-embeddings", "dump graph embeddings to CSV");
  add_common(exporter);
  exporter->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  exporter->add_option("--out", out_csv, "output CSV path")->required();
  exporter->add_option("--count", sample_count, "sample size (default: whole dataset)");

  CLI::App* check = app.add_subcommand("check", "run gradient/kernel self-diagnostics");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(train)) return cmd_train(load_config(config_path, overrides));
    if (app.got_subcommand(evaluate)) {
      return cmd_evaluate(load_config(config_path, overrides), checkpoint_path, out_csv);
    }
    if (app.got_subcommand(baseline)) {
      return cmd_baseline(load_config(config_path, overrides), method, out_csv);
    }
    if (app.got_subcommand(exporter)) {
      return cmd_export(load_config(config_path, overrides), checkpoint_path, sample_count,
                        out_csv);
    }
    if (app.got_subcommand(check)) {
      const int failures = asmaml::harness::run_self_checks(std::cout);
      return failures == 0 ? 0 : 1;
    }
  } catch (const asmaml::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const asmaml::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const asmaml::ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const asmaml::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
