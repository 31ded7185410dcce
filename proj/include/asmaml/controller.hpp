#pragma once

#include <vector>

#include "asmaml/meta.hpp"
#include "asmaml/rng.hpp"
#include "asmaml/tensor.hpp"

namespace asmaml::ctrl {

struct StepBounds {
  int t_min = 4;
  int t_max = 15;
};

struct RewardConfig {
  double penalty = 0.01;     // eta, per-step cost
  double lr = 0.0001;        // alpha_3
  bool constant_return = false;  // literal summed-return mode instead of reward-to-go
};

struct ControllerConfig {
  std::size_t hidden = 32;
  StepBounds bounds;
  RewardConfig reward;
};

// Welford accumulator; standardization across episodes with epsilon 1e-8.
struct RunningNorm {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void update(double x);
  double stddev() const;
  double standardize(double x) const;
};

// Recurrent-cell parameters (ctrl.*): one input/forget/cell/output gate set
// over 2-dim inputs, plus the sigmoid stop head.
ParamSet init_controller_params(const ControllerConfig& cfg, Rng& rng);

struct ScanResult {
  std::vector<double> stop_probabilities;
  Tensor final_hidden;  // 1 x hidden
};

// Sequential scan over standardized (loss, ani) pairs from a zero state.
ScanResult controller_scan(const ParamSet& params, const std::vector<double>& losses,
                           const std::vector<double>& anis);

// T_next = clamp(floor(1 / p_final), t_min, t_max).
int next_step_count(double p_final, const StepBounds& bounds);

// Per-step returns from query accuracies: r_t = e_T - e_t - eta * t with t
// counted from 1. Reward-to-go by default; constant_return sums everything
// into every entry.
std::vector<double> compute_rewards(const std::vector<double>& query_accuracies, double eta,
                                    bool constant_return = false);

// Policy-gradient ascent over the stop policy: log-prob of the taken action
// is ln(1 - p_t) for the continue steps t < T and ln(p_T) for the stop.
// Returns the updated parameters; probs_out receives the pre-update scan.
ParamSet reinforce_update(const ParamSet& params, const std::vector<double>& losses,
                          const std::vector<double>& anis,
                          const std::vector<double>& returns, double lr,
                          std::vector<double>* probs_out = nullptr);

// The controller owned by a training loop: parameters, input normalizers and
// the step count to use for the next task.
struct Controller {
  ControllerConfig cfg;
  ParamSet params;
  RunningNorm loss_norm;
  RunningNorm ani_norm;
  int current_step = 0;

  static Controller init(const ControllerConfig& cfg, Rng& rng);

  // Checkpoint integration: controller tensors plus ctrl.state.* entries.
  void pack(ParamSet& into) const;
  static Controller unpack(const ParamSet& from, const ControllerConfig& cfg);

  struct EpisodeUpdate {
    std::vector<double> stop_probabilities;
    double p_final = 0.0;
    int next_steps = 0;
    double total_return = 0.0;
  };

  // Fold the raw trace into the normalizers, scan, update the policy from
  // the rewards, and set the step count for the next task.
  EpisodeUpdate observe_episode(const meta::AdaptationTrace& trace);
};

}  // namespace asmaml::ctrl
