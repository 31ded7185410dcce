// Compares the serial reference kernels against the OpenMP ones, and a full
// episodic evaluation in both modes. Results also double as a parity check:
// every parallel kernel must match its serial reference bitwise.
#include <chrono>
#include <cstdio>
#include <vector>

#include <omp.h>

#include "asmaml/harness.hpp"
#include "asmaml/kernels.hpp"
#include "asmaml/meta.hpp"
#include "asmaml/rng.hpp"
#include "asmaml/synthetic.hpp"

using namespace asmaml;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void bench_matmul(std::size_t n, int reps) {
  Rng rng(42);
  std::vector<double> a(n * n), b(n * n), c(n * n), c_ref(n * n);
  for (double& v : a) v = rng.normal();
  for (double& v : b) v = rng.normal();

  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) kern::matmul_nn_serial(a.data(), b.data(), c_ref.data(), n, n, n);
  const double serial = ms_since(t0) / reps;

  t0 = Clock::now();
  for (int r = 0; r < reps; ++r) kern::matmul_nn_parallel(a.data(), b.data(), c.data(), n, n, n);
  const double parallel = ms_since(t0) / reps;

  const bool match = (c == c_ref);
  std::printf("matmul %4zux%-4zu  serial %8.3f ms  parallel %8.3f ms  speedup %.2fx  %s\n", n,
              n, serial, parallel, serial / parallel, match ? "bitwise-equal" : "MISMATCH");
}

void bench_evaluation(int tasks) {
  SyntheticConfig scfg;
  scfg.graphs_per_family = 30;
  Rng rng(7);
  const Dataset data = make_synthetic_dataset(scfg, rng);

  harness::ExperimentConfig cfg;
  cfg.way = 2;
  cfg.shot = 5;
  cfg.query = 10;
  cfg.backbone.layers = 2;
  cfg.backbone.hidden_dim = 32;
  cfg.eval_tasks = tasks;
  cfg.eval_steps = 5;

  Rng prng(11);
  ParamSet theta = gnn::init_backbone_params(data.feature_dim, cfg.backbone, prng);
  ParamSet clf = gnn::init_classifier_params(cfg.backbone, cfg.way, prng);
  for (auto& [name, t] : clf) theta.emplace(name, std::move(t));
  ctrl::Controller controller = ctrl::Controller::init(cfg.controller, prng);
  const ParamSet ckpt = harness::make_checkpoint(theta, controller);

  cfg.parallel = false;
  kern::set_parallel(false);
  auto t0 = Clock::now();
  const auto serial = harness::evaluate(cfg, ckpt, data);
  const double serial_ms = ms_since(t0);

  cfg.parallel = true;
  kern::set_parallel(true);
  t0 = Clock::now();
  const auto parallel = harness::evaluate(cfg, ckpt, data);
  const double parallel_ms = ms_since(t0);

  const bool match = serial.per_task == parallel.per_task;
  std::printf("evaluate %d tasks  serial %8.1f ms  parallel %8.1f ms  speedup %.2fx  %s\n",
              tasks, serial_ms, parallel_ms, serial_ms / parallel_ms,
              match ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  bench_matmul(64, 50);
  bench_matmul(128, 20);
  bench_matmul(256, 8);
  bench_matmul(512, 2);
  bench_evaluation(40);
  return 0;
}
