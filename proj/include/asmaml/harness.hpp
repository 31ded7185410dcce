#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "asmaml/baselines.hpp"
#include "asmaml/config.hpp"
#include "asmaml/controller.hpp"
#include "asmaml/graph.hpp"
#include "asmaml/meta.hpp"
#include "asmaml/synthetic.hpp"

namespace asmaml::harness {

// Environment variable prefixed to relative TU dataset paths.
inline constexpr const char* kDataRootEnv = "ASMAML_DATA_ROOT";

struct ExperimentConfig {
  std::uint64_t seed = 42;

  std::string dataset_kind = "tu";  // "tu" | "synthetic"
  std::string dataset_path;
  SyntheticConfig synthetic;

  std::string split_mode = "counts";  // "counts" | "explicit"
  std::size_t train_count = 0, val_count = 0, test_count = 0;
  std::vector<int> train_classes, val_classes, test_classes;
  double val_fraction = 0.2;  // example-level carve when no validation classes

  int way = 5;
  int shot = 10;
  int query = 15;

  gnn::BackboneConfig backbone;
  meta::MetaConfig meta;
  ctrl::ControllerConfig controller;
  int meta_batch = 1;

  int episodes = 2000;
  int val_interval = 100;
  int val_tasks = 50;
  int patience = 50;
  std::string out_dir;  // empty: no files written

  int eval_tasks = 200;
  int eval_steps = 0;  // 0 -> the checkpointed controller's step count
  bool parallel = true;

  base::KernelOptions kernels;
  base::PretrainConfig pretrain;
  int finetune_steps = 100;

  static ExperimentConfig from_config(const Config& c);
};

struct Splits {
  Dataset train, val, test;
};

Dataset load_dataset(const ExperimentConfig& cfg);
Splits make_splits(const ExperimentConfig& cfg, const Dataset& dataset);

// Full checkpoint: model parameters plus packed controller state.
ParamSet make_checkpoint(const ParamSet& theta, const ctrl::Controller& controller);
ParamSet theta_from_checkpoint(const ParamSet& checkpoint);
// Error mentions the offending parameter and the expected shape.
void validate_checkpoint(const ParamSet& checkpoint, const ExperimentConfig& cfg,
                         std::size_t feature_dim);

struct TrainResult {
  ParamSet best;
  ParamSet last;
  double best_val_accuracy = -1.0;
  int episodes_run = 0;
  bool early_stopped = false;
  std::string csv_path;
};

// Episodic training: adaptive-step inner loop, second-order outer update,
// controller update per episode, periodic validation with early stopping.
// On a numeric failure the last good checkpoint is saved before rethrowing.
TrainResult train(const ExperimentConfig& cfg, const Splits& splits,
                  std::ostream* log = nullptr);

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;
  double ci95_half = 0.0;  // 1.96 * stddev / sqrt(tasks)
  int steps_used = 0;
  std::vector<double> per_task;
};

EvalResult evaluate(const ExperimentConfig& cfg, const ParamSet& checkpoint,
                    const Dataset& test);

// CSV of (graph id, class, embedding columns) for a seeded sample.
void export_embeddings(const ExperimentConfig& cfg, const ParamSet& checkpoint,
                       const Dataset& dataset, std::size_t sample_count,
                       const std::string& csv_path);

// method: wl | sp | graphlet | finetune | proto
EvalResult evaluate_baseline(const ExperimentConfig& cfg, const Splits& splits,
                             const std::string& method, std::ostream* log = nullptr);

// Per-task results in a shared schema; the method column tells rows apart.
void write_eval_csv(const std::string& path, const std::string& method,
                    const EvalResult& result);

// Quick self-diagnostics (gradient checks, kernel parity, round-trips).
// Prints one line per check; returns the number of failures.
int run_self_checks(std::ostream& os);

}  // namespace asmaml::harness
