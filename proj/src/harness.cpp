#include "asmaml/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "asmaml/autodiff.hpp"
#include "asmaml/error.hpp"
#include "asmaml/kernels.hpp"

namespace fs = std::filesystem;

namespace asmaml::harness {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

gnn::BackboneConfig backbone_from(const Config& c) {
  gnn::BackboneConfig bb;
  bb.layers = c.get_int("backbone.layers", 3);
  bb.hidden_dim = static_cast<std::size_t>(c.get_int("backbone.hidden_dim", 128));
  bb.pool_ratio = c.get_double("backbone.pool_ratio", 0.5);
  bb.conv_activation = gnn::activation_from_name(c.get_string("backbone.conv_activation", "sigmoid"));
  bb.score_activation = gnn::activation_from_name(c.get_string("backbone.score_activation", "tanh"));
  bb.readout_activation =
      gnn::activation_from_name(c.get_string("backbone.readout_activation", "relu"));
  if (c.has("backbone.classifier_hidden")) {
    for (int w : c.get_int_list("backbone.classifier_hidden")) {
      bb.classifier_hidden.push_back(static_cast<std::size_t>(w));
    }
  }
  return bb;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_config(const Config& c) {
  ExperimentConfig e;
  e.seed = c.get_uint64("seed", 42);

  e.dataset_kind = c.get_string("dataset.kind", "tu");
  e.dataset_path = c.get_string("dataset.path", "");
  e.synthetic.graphs_per_family = c.get_int("synthetic.graphs_per_family", 100);
  e.synthetic.min_nodes = c.get_int("synthetic.min_nodes", 8);
  e.synthetic.max_nodes = c.get_int("synthetic.max_nodes", 16);
  e.synthetic.feature_dim = static_cast<std::size_t>(c.get_int("synthetic.feature_dim", 4));
  e.synthetic.noise_std = c.get_double("synthetic.noise_std", 0.3);

  e.split_mode = c.get_string("split.mode", "counts");
  e.train_count = static_cast<std::size_t>(c.get_int("split.train_count", 0));
  e.val_count = static_cast<std::size_t>(c.get_int("split.val_count", 0));
  e.test_count = static_cast<std::size_t>(c.get_int("split.test_count", 0));
  e.train_classes = c.get_int_list("split.train_classes");
  e.val_classes = c.get_int_list("split.val_classes");
  e.test_classes = c.get_int_list("split.test_classes");
  e.val_fraction = c.get_double("split.val_fraction", 0.2);

  e.way = c.get_int("episode.way", 5);
  e.shot = c.get_int("episode.shot", 10);
  e.query = c.get_int("episode.query", 15);

  e.backbone = backbone_from(c);

  e.meta.inner_lr = c.get_double("meta.inner_lr", 0.0001);
  e.meta.outer_lr = c.get_double("meta.outer_lr", 0.001);
  e.meta.weight_decay = c.get_double("meta.weight_decay", 1e-5);
  const std::string order = c.get_string("meta.order", "second");
  if (order == "second") {
    e.meta.order = ad::Order::Second;
  } else if (order == "first") {
    e.meta.order = ad::Order::First;
  } else {
    throw ConfigError("meta.order must be 'second' or 'first'");
  }
  if (e.meta.inner_lr <= 0.0 || e.meta.outer_lr <= 0.0) {
    throw ConfigError("learning rates must be positive");
  }
  e.meta_batch = c.get_int("meta.batch", 1);

  e.controller.hidden = static_cast<std::size_t>(c.get_int("controller.hidden", 32));
  e.controller.bounds.t_min = c.get_int("controller.min_step", 4);
  e.controller.bounds.t_max = c.get_int("controller.max_step", 15);
  e.controller.reward.penalty = c.get_double("controller.penalty", 0.01);
  e.controller.reward.lr = c.get_double("controller.lr", 0.0001);
  e.controller.reward.constant_return = c.get_bool("controller.constant_return", false);

  e.episodes = c.get_int("train.episodes", 2000);
  e.val_interval = c.get_int("train.val_interval", 100);
  e.val_tasks = c.get_int("train.val_tasks", 50);
  e.patience = c.get_int("train.patience", 50);
  e.out_dir = c.get_string("train.out_dir", "");

  e.eval_tasks = c.get_int("eval.tasks", 200);
  e.eval_steps = c.get_int("eval.steps", 0);
  e.parallel = c.get_bool("parallel.enabled", true);
  if (e.eval_tasks < 1) throw ConfigError("eval.tasks must be >= 1");

  e.kernels.wl.iterations = c.get_int("kernel.wl_iterations", 3);
  e.kernels.sp_length_cap = c.get_int("kernel.sp_length_cap", 10);
  e.kernels.graphlet_samples = c.get_int("kernel.graphlet_samples", 10000);
  e.kernels.attribute_bins = c.get_int("kernel.attribute_bins", 8);

  e.pretrain.steps = c.get_int("pretrain.steps", 300);
  e.pretrain.batch_size = c.get_int("pretrain.batch_size", 32);
  e.pretrain.lr = c.get_double("pretrain.lr", 0.001);
  e.pretrain.weight_decay = c.get_double("pretrain.weight_decay", 1e-5);
  e.finetune_steps = c.get_int("finetune.steps", 100);
  return e;
}

Dataset load_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset_kind == "synthetic") {
    Rng rng(Rng::mix(cfg.seed, 0xda7a));
    return make_synthetic_dataset(cfg.synthetic, rng);
  }
  if (cfg.dataset_kind != "tu") {
    throw ConfigError("dataset.kind must be 'tu' or 'synthetic'");
  }
  if (cfg.dataset_path.empty()) throw ConfigError("dataset.path is required for TU datasets");
  fs::path p(cfg.dataset_path);
  if (p.is_relative()) {
    if (const char* root = std::getenv(kDataRootEnv)) p = fs::path(root) / p;
  }
  return load_tu_dataset(p.string());
}

Splits make_splits(const ExperimentConfig& cfg, const Dataset& dataset) {
  SplitSpec spec;
  if (cfg.split_mode == "explicit") {
    spec.train_classes.insert(cfg.train_classes.begin(), cfg.train_classes.end());
    spec.val_classes.insert(cfg.val_classes.begin(), cfg.val_classes.end());
    spec.test_classes.insert(cfg.test_classes.begin(), cfg.test_classes.end());
  } else if (cfg.split_mode == "counts") {
    Rng rng(Rng::mix(cfg.seed, 0x5b717));
    spec = random_split(dataset, cfg.train_count, cfg.val_count, cfg.test_count, rng);
  } else {
    throw ConfigError("split.mode must be 'explicit' or 'counts'");
  }
  auto [train, val, test] = split_by_class(dataset, spec);
  Splits out;
  out.train = std::move(train);
  out.val = std::move(val);
  out.test = std::move(test);
  if (out.val.graphs.empty() && cfg.val_fraction > 0.0) {
    Rng rng(Rng::mix(cfg.seed, 0xca57e));
    auto [tr, va] = carve_validation(out.train, cfg.val_fraction, rng);
    out.train = std::move(tr);
    out.val = std::move(va);
  }
  return out;
}

ParamSet make_checkpoint(const ParamSet& theta, const ctrl::Controller& controller) {
  ParamSet ckpt = theta;
  controller.pack(ckpt);
  return ckpt;
}

ParamSet theta_from_checkpoint(const ParamSet& checkpoint) {
  ParamSet theta;
  for (const auto& [name, t] : checkpoint) {
    if (name.rfind("ctrl.", 0) == 0) continue;
    theta.emplace(name, t);
  }
  return theta;
}

void validate_checkpoint(const ParamSet& checkpoint, const ExperimentConfig& cfg,
                         std::size_t feature_dim) {
  Rng rng(0);
  ParamSet expected = gnn::init_backbone_params(feature_dim, cfg.backbone, rng);
  ParamSet clf = gnn::init_classifier_params(cfg.backbone, cfg.way, rng);
  for (auto& [name, t] : clf) expected.emplace(name, std::move(t));
  for (const auto& [name, t] : expected) {
    auto it = checkpoint.find(name);
    if (it == checkpoint.end()) {
      throw DataError("checkpoint is missing parameter '" + name + "'");
    }
    if (!it->second.same_shape(t)) {
      std::ostringstream os;
      os << "checkpoint parameter '" << name << "' has the wrong shape; expected [";
      for (std::size_t i = 0; i < t.shape().size(); ++i) {
        os << (i ? ", " : "") << t.shape()[i];
      }
      os << "]";
      throw DataError(os.str());
    }
  }
}

namespace {

constexpr const char* kTrainCsvSchema =
    "# asmaml-train-csv v1\n"
    "episode,steps,support_loss_first,support_loss_last,ani_first,ani_last,"
    "query_loss,query_accuracy,p_final,wall_ms\n";

double eval_steps_or_controller(const ExperimentConfig& cfg, const ctrl::Controller& c) {
  int steps = cfg.eval_steps > 0 ? cfg.eval_steps : c.current_step;
  steps = std::clamp(steps, cfg.controller.bounds.t_min, cfg.controller.bounds.t_max);
  return steps;
}

double validation_accuracy(const ExperimentConfig& cfg, const ParamSet& theta,
                           const Dataset& val, int steps, std::uint64_t salt) {
  EpisodeSampler sampler(val, cfg.way, cfg.shot, cfg.query, /*warn=*/false);
  Rng rng(Rng::mix(cfg.seed, salt));
  std::vector<Episode> eps;
  eps.reserve(static_cast<std::size_t>(cfg.val_tasks));
  for (int i = 0; i < cfg.val_tasks; ++i) eps.push_back(sampler.sample(rng));
  double acc = 0.0;
  for (const Episode& ep : eps) {
    acc += meta::test_episode(theta, val, ep, steps, cfg.backbone, cfg.meta);
  }
  return acc / static_cast<double>(cfg.val_tasks);
}

}  // namespace

TrainResult train(const ExperimentConfig& cfg, const Splits& splits, std::ostream* log) {
  Rng init_rng(Rng::mix(cfg.seed, 0x1217));
  ParamSet theta = gnn::init_backbone_params(splits.train.feature_dim, cfg.backbone, init_rng);
  {
    ParamSet clf = gnn::init_classifier_params(cfg.backbone, cfg.way, init_rng);
    for (auto& [name, t] : clf) theta.emplace(name, std::move(t));
  }
  ctrl::Controller controller = ctrl::Controller::init(cfg.controller, init_rng);

  TrainResult out;
  std::ofstream csv;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    out.csv_path = (fs::path(cfg.out_dir) / "train.csv").string();
    csv.open(out.csv_path);
    if (!csv) throw DataError("cannot open " + out.csv_path + " for writing");
    csv << kTrainCsvSchema;
  }

  out.best = make_checkpoint(theta, controller);
  if (cfg.episodes <= 0) {
    out.last = out.best;
    if (!cfg.out_dir.empty()) {
      save_params(out.best, (fs::path(cfg.out_dir) / "checkpoint_best.txt").string());
      save_params(out.last, (fs::path(cfg.out_dir) / "checkpoint_last.txt").string());
    }
    return out;
  }

  EpisodeSampler sampler(splits.train, cfg.way, cfg.shot, cfg.query);
  Rng episode_rng(Rng::mix(cfg.seed, 0xe715));
  const bool has_val = !splits.val.graphs.empty() && cfg.val_interval > 0 && cfg.val_tasks > 0;
  int vals_since_best = 0;

  for (int episode = 0; episode < cfg.episodes; ++episode) {
    const int steps = controller.current_step;
    const auto t0 = std::chrono::steady_clock::now();
    meta::MetaUpdateResult mu;
    try {
      if (cfg.meta_batch > 1) {
        std::vector<Episode> batch;
        for (int b = 0; b < cfg.meta_batch; ++b) batch.push_back(sampler.sample(episode_rng));
        mu = meta::meta_update_batch(theta, splits.train, batch, steps, cfg.backbone, cfg.meta);
      } else {
        const Episode ep = sampler.sample(episode_rng);
        mu = meta::meta_update(theta, splits.train, ep, steps, cfg.backbone, cfg.meta);
      }
    } catch (const NumericError& e) {
      out.last = make_checkpoint(theta, controller);
      if (!cfg.out_dir.empty()) {
        save_params(out.last, (fs::path(cfg.out_dir) / "checkpoint_last.txt").string());
      }
      throw NumericError("episode " + std::to_string(episode) + ": " + e.what());
    }
    theta = std::move(mu.theta);
    const ctrl::Controller::EpisodeUpdate cu = controller.observe_episode(mu.trace);
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    out.episodes_run = episode + 1;

    if (csv.is_open()) {
      csv << episode << ',' << steps << ',' << fmt(mu.trace.losses.front()) << ','
          << fmt(mu.trace.losses.back()) << ',' << fmt(mu.trace.anis.front()) << ','
          << fmt(mu.trace.anis.back()) << ',' << fmt(mu.query_loss) << ','
          << fmt(mu.query_accuracy) << ',' << fmt(cu.p_final) << ',' << fmt(wall_ms) << '\n';
    }

    if (has_val && (episode + 1) % cfg.val_interval == 0) {
      const int val_steps = static_cast<int>(eval_steps_or_controller(cfg, controller));
      const double acc = validation_accuracy(cfg, theta, splits.val, val_steps,
                                             0xa11d + static_cast<std::uint64_t>(episode));
      if (log) {
        *log << "episode " << (episode + 1) << ": val acc " << acc
             << " (steps " << val_steps << ")\n";
      }
      if (acc > out.best_val_accuracy) {
        out.best_val_accuracy = acc;
        out.best = make_checkpoint(theta, controller);
        vals_since_best = 0;
      } else if (++vals_since_best >= cfg.patience) {
        out.early_stopped = true;
        break;
      }
    }
  }

  out.last = make_checkpoint(theta, controller);
  if (!has_val) out.best = out.last;
  if (!cfg.out_dir.empty()) {
    save_params(out.best, (fs::path(cfg.out_dir) / "checkpoint_best.txt").string());
    save_params(out.last, (fs::path(cfg.out_dir) / "checkpoint_last.txt").string());
  }
  return out;
}

EvalResult evaluate(const ExperimentConfig& cfg, const ParamSet& checkpoint,
                    const Dataset& test) {
  validate_checkpoint(checkpoint, cfg, test.feature_dim);
  const ParamSet theta = theta_from_checkpoint(checkpoint);
  const ctrl::Controller controller = ctrl::Controller::unpack(checkpoint, cfg.controller);

  EvalResult out;
  out.steps_used = static_cast<int>(eval_steps_or_controller(cfg, controller));

  EpisodeSampler sampler(test, cfg.way, cfg.shot, cfg.query, /*warn=*/false);
  Rng rng(Rng::mix(cfg.seed, 0xea1));
  std::vector<Episode> episodes;
  episodes.reserve(static_cast<std::size_t>(cfg.eval_tasks));
  for (int i = 0; i < cfg.eval_tasks; ++i) episodes.push_back(sampler.sample(rng));

  out.per_task.assign(episodes.size(), 0.0);
  const long n = static_cast<long>(episodes.size());
#pragma omp parallel for schedule(dynamic) if (cfg.parallel)
  for (long i = 0; i < n; ++i) {
    out.per_task[static_cast<std::size_t>(i)] =
        meta::test_episode(theta, test, episodes[static_cast<std::size_t>(i)], out.steps_used,
                           cfg.backbone, cfg.meta);
  }

  double mean = 0.0;
  for (double a : out.per_task) mean += a;
  mean /= static_cast<double>(out.per_task.size());
  double var = 0.0;
  for (double a : out.per_task) var += (a - mean) * (a - mean);
  const std::size_t m = out.per_task.size();
  out.mean = mean;
  out.stddev = m > 1 ? std::sqrt(var / static_cast<double>(m - 1)) : 0.0;
  out.ci95_half = 1.96 * out.stddev / std::sqrt(static_cast<double>(m));
  return out;
}

void export_embeddings(const ExperimentConfig& cfg, const ParamSet& checkpoint,
                       const Dataset& dataset, std::size_t sample_count,
                       const std::string& csv_path) {
  if (sample_count > dataset.size()) {
    throw ConfigError("sample_count exceeds dataset size");
  }
  validate_checkpoint(checkpoint, cfg, dataset.feature_dim);
  const ParamSet theta = theta_from_checkpoint(checkpoint);
  Rng rng(Rng::mix(cfg.seed, 0xe4b));
  const auto picks = rng.sample_without_replacement(dataset.size(), sample_count);

  std::ofstream os(csv_path);
  if (!os) throw DataError("cannot open " + csv_path + " for writing");
  os << "# asmaml-embeddings-csv v1\n";
  os << "graph_id,class";
  for (std::size_t j = 0; j < 2 * cfg.backbone.hidden_dim; ++j) os << ",z" << j;
  os << "\n";
  for (std::size_t pick : picks) {
    const GraphData& g = dataset.graphs[pick];
    const Tensor z = gnn::embed_graph_value(theta, cfg.backbone, g);
    os << pick << ',' << g.class_id;
    for (std::size_t j = 0; j < z.size(); ++j) os << ',' << fmt(z[j]);
    os << "\n";
  }
}

EvalResult evaluate_baseline(const ExperimentConfig& cfg, const Splits& splits,
                             const std::string& method, std::ostream* log) {
  EpisodeSampler sampler(splits.test, cfg.way, cfg.shot, cfg.query, /*warn=*/false);
  Rng rng(Rng::mix(cfg.seed, 0xba5e));
  std::vector<Episode> episodes;
  episodes.reserve(static_cast<std::size_t>(cfg.eval_tasks));
  for (int i = 0; i < cfg.eval_tasks; ++i) episodes.push_back(sampler.sample(rng));

  EvalResult out;
  out.per_task.assign(episodes.size(), 0.0);

  if (method == "wl" || method == "sp" || method == "graphlet") {
    const base::KernelKind kind = base::kernel_kind_from_name(method);
    for (std::size_t i = 0; i < episodes.size(); ++i) {
      out.per_task[i] = base::kernel_episode(splits.test, episodes[i], kind, cfg.kernels,
                                             Rng::mix(cfg.seed, 0x6e + i))
                            .accuracy;
    }
  } else if (method == "finetune" || method == "proto") {
    if (log) *log << "pretraining backbone on " << splits.train.size() << " graphs...\n";
    const base::PretrainedModel model =
        base::pretrain_supervised(splits.train, cfg.backbone, cfg.pretrain, cfg.seed);
    const long n = static_cast<long>(episodes.size());
    if (method == "finetune") {
#pragma omp parallel for schedule(dynamic) if (cfg.parallel)
      for (long i = 0; i < n; ++i) {
        out.per_task[static_cast<std::size_t>(i)] = base::finetune_episode(
            model, cfg.backbone, splits.test, episodes[static_cast<std::size_t>(i)],
            cfg.finetune_steps, cfg.meta.outer_lr,
            Rng::mix(cfg.seed, 0xf7 + static_cast<std::uint64_t>(i)));
      }
    } else {
#pragma omp parallel for schedule(dynamic) if (cfg.parallel)
      for (long i = 0; i < n; ++i) {
        out.per_task[static_cast<std::size_t>(i)] =
            base::proto_episode(model, cfg.backbone, splits.test,
                                episodes[static_cast<std::size_t>(i)])
                .accuracy;
      }
    }
  } else {
    throw ConfigError("unknown baseline '" + method +
                      "' (expected wl, sp, graphlet, finetune or proto)");
  }

  double mean = 0.0;
  for (double a : out.per_task) mean += a;
  mean /= static_cast<double>(out.per_task.size());
  double var = 0.0;
  for (double a : out.per_task) var += (a - mean) * (a - mean);
  const std::size_t m = out.per_task.size();
  out.mean = mean;
  out.stddev = m > 1 ? std::sqrt(var / static_cast<double>(m - 1)) : 0.0;
  out.ci95_half = 1.96 * out.stddev / std::sqrt(static_cast<double>(m));
  return out;
}

void write_eval_csv(const std::string& path, const std::string& method,
                    const EvalResult& result) {
  const bool exists = fs::exists(path);
  std::ofstream os(path, std::ios::app);
  if (!os) throw DataError("cannot open " + path + " for writing");
  if (!exists) {
    os << "# asmaml-eval-csv v1\n";
    os << "method,task,accuracy\n";
  }
  for (std::size_t i = 0; i < result.per_task.size(); ++i) {
    os << method << ',' << i << ',' << fmt(result.per_task[i]) << "\n";
  }
}

int run_self_checks(std::ostream& os) {
  int failures = 0;
  auto report = [&](const char* name, bool ok, const std::string& detail = "") {
    os << (ok ? "PASS" : "FAIL") << "  " << name;
    if (!detail.empty()) os << "  (" << detail << ")";
    os << "\n";
    if (!ok) ++failures;
  };

  {  // parallel kernels agree with the serial reference bitwise
    Rng rng(7);
    const std::size_t m = 33, k = 47, n = 29;
    std::vector<double> a(m * k), b(k * n), c1(m * n), c2(m * n);
    for (double& v : a) v = rng.normal();
    for (double& v : b) v = rng.normal();
    kern::matmul_nn_serial(a.data(), b.data(), c1.data(), m, k, n);
    kern::matmul_nn_parallel(a.data(), b.data(), c2.data(), m, k, n);
    report("kernel parity (serial vs parallel matmul)", c1 == c2);
  }

  {  // gradient of a small episode loss vs central differences
    Rng rng(11);
    SyntheticConfig scfg;
    scfg.graphs_per_family = 6;
    scfg.min_nodes = 5;
    scfg.max_nodes = 7;
    const Dataset data = make_synthetic_dataset(scfg, rng);
    gnn::BackboneConfig bb;
    bb.layers = 2;
    bb.hidden_dim = 6;
    Rng prng(13);
    ParamSet params = gnn::init_backbone_params(data.feature_dim, bb, prng);
    ParamSet clf = gnn::init_classifier_params(bb, 3, prng);
    for (auto& [name, t] : clf) params.emplace(name, std::move(t));
    Rng erng(17);
    const Episode ep = sample_episode(data, 3, 2, 2, erng);
    meta::BatchView view = meta::support_view(data, ep);
    const double err =
        ad::finite_diff_check(meta::batch_objective(bb, view), params, 1e-5, 60, 23);
    report("episode gradient vs finite differences", err < 1e-4, "max rel err " + fmt(err));
  }

  {  // second-order chain on the scalar quadratic
    ParamSet p;
    p.emplace("x", Tensor::scalar(1.7));
    const double lr = 0.3;
    ad::Objective quad = [](ad::Tape& t, const ad::ParamNodeIds& ids) {
      const int x = ids.at("x");
      return t.scale(t.sum_all(t.mul(x, x)), 0.5);
    };
    const GradRecord g = ad::grad_through_updates(quad, quad, p, 1, lr, ad::Order::Second);
    const double expect = (1.0 - lr) * (1.0 - lr) * 1.7;
    report("second-order quadratic meta-gradient", std::fabs(g.at("x")[0] - expect) < 1e-12);
  }

  {  // step rule bounds
    Rng rng(3);
    ctrl::StepBounds bounds;
    bool ok = true;
    for (int i = 0; i < 1000; ++i) {
      const double p = std::min(1.0 - 1e-12, std::max(1e-12, rng.uniform()));
      const int t = ctrl::next_step_count(p, bounds);
      ok = ok && t >= bounds.t_min && t <= bounds.t_max;
    }
    report("step rule stays within bounds", ok);
  }

  {  // checkpoint round-trip
    Rng rng(5);
    ParamSet p;
    Tensor t = Tensor::matrix(3, 4);
    for (double& v : t.values()) v = rng.normal();
    p.emplace("w", std::move(t));
    std::stringstream ss;
    write_params(p, ss);
    const ParamSet q = read_params(ss);
    report("checkpoint round-trip", q.at("w").values() == p.at("w").values());
  }

  return failures;
}

}  // namespace asmaml::harness
