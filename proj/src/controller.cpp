#include "asmaml/controller.hpp"

#include <algorithm>
#include <cmath>

#include "asmaml/error.hpp"
#include "asmaml/tape.hpp"

namespace asmaml::ctrl {

void RunningNorm::update(double x) {
  count += 1.0;
  const double delta = x - mean;
  mean += delta / count;
  m2 += delta * (x - mean);
}

double RunningNorm::stddev() const {
  return count > 0.0 ? std::sqrt(m2 / count) : 0.0;
}

double RunningNorm::standardize(double x) const {
  return (x - mean) / (stddev() + 1e-8);
}

namespace {
const char* kGates[] = {"in", "forget", "cell", "out"};
}

ParamSet init_controller_params(const ControllerConfig& cfg, Rng& rng) {
  if (cfg.hidden < 1) throw ConfigError("controller hidden size must be >= 1");
  ParamSet p;
  const std::size_t h = cfg.hidden;
  const double std_x = std::sqrt(2.0 / static_cast<double>(2 + h));
  const double std_h = std::sqrt(1.0 / static_cast<double>(h));
  for (const char* gate : kGates) {
    Tensor wx = Tensor::matrix(2, h);
    for (double& v : wx.values()) v = rng.normal(0.0, std_x);
    Tensor wh = Tensor::matrix(h, h);
    for (double& v : wh.values()) v = rng.normal(0.0, std_h);
    p.emplace(std::string("ctrl.") + gate + ".wx", std::move(wx));
    p.emplace(std::string("ctrl.") + gate + ".wh", std::move(wh));
    p.emplace(std::string("ctrl.") + gate + ".b", Tensor::matrix(1, h));
  }
  Tensor head = Tensor::matrix(h, 1);
  for (double& v : head.values()) v = rng.normal(0.0, std_h);
  p.emplace("ctrl.head.weight", std::move(head));
  p.emplace("ctrl.head.bias", Tensor::matrix(1, 1));
  return p;
}

namespace {

struct ScanNodes {
  std::vector<int> probs;   // 1x1 nodes
  std::vector<int> logits;  // head outputs before the sigmoid
  int final_hidden = -1;
};

// Shared builder for the value scan and the policy-gradient objective.
ScanNodes build_scan(ad::Tape& tape, const ad::ParamNodeIds& ids,
                     const std::vector<double>& losses, const std::vector<double>& anis,
                     std::size_t hidden) {
  if (losses.empty() || losses.size() != anis.size()) {
    throw ShapeError("controller scan needs equal, nonempty loss/ani sequences");
  }
  auto gate = [&](const char* name, int x, int h) {
    const std::string base = std::string("ctrl.") + name;
    const int a = tape.matmul(x, ids.at(base + ".wx"));
    const int b = tape.matmul(h, ids.at(base + ".wh"));
    return tape.add(tape.add(a, b), ids.at(base + ".b"));
  };
  int h = tape.constant(Tensor::matrix(1, hidden, 0.0));
  int c = tape.constant(Tensor::matrix(1, hidden, 0.0));
  ScanNodes out;
  for (std::size_t t = 0; t < losses.size(); ++t) {
    const int x = tape.constant(Tensor({1, 2}, {losses[t], anis[t]}));
    const int i = tape.sigmoid(gate("in", x, h));
    const int f = tape.sigmoid(gate("forget", x, h));
    const int g = tape.tanh_(gate("cell", x, h));
    const int o = tape.sigmoid(gate("out", x, h));
    c = tape.add(tape.mul(f, c), tape.mul(i, g));
    h = tape.mul(o, tape.tanh_(c));
    const int logit = tape.add(tape.matmul(h, ids.at("ctrl.head.weight")),
                               ids.at("ctrl.head.bias"));
    out.logits.push_back(logit);
    out.probs.push_back(tape.sigmoid(logit));
  }
  out.final_hidden = h;
  return out;
}

ad::ParamNodeIds bind(ad::Tape& tape, const ParamSet& params) {
  ad::ParamNodeIds ids;
  for (const auto& [name, t] : params) ids.emplace(name, tape.input(name, t));
  return ids;
}

}  // namespace

ScanResult controller_scan(const ParamSet& params, const std::vector<double>& losses,
                           const std::vector<double>& anis) {
  ad::Tape tape;
  const ad::ParamNodeIds ids = bind(tape, params);
  std::size_t hidden = params.at("ctrl.head.weight").rows();
  ScanNodes nodes = build_scan(tape, ids, losses, anis, hidden);
  ScanResult out;
  for (int p : nodes.probs) out.stop_probabilities.push_back(tape.scalar(p));
  out.final_hidden = tape.value_tensor(nodes.final_hidden);
  return out;
}

int next_step_count(double p_final, const StepBounds& bounds) {
  if (bounds.t_min < 1 || bounds.t_min > bounds.t_max) {
    throw ConfigError("step bounds require 1 <= t_min <= t_max");
  }
  const double raw = std::floor(1.0 / p_final);
  if (!(raw > 0.0)) return bounds.t_max;  // p_final ~ 1/inf guard
  const double clamped = std::clamp(raw, static_cast<double>(bounds.t_min),
                                    static_cast<double>(bounds.t_max));
  return static_cast<int>(clamped);
}

std::vector<double> compute_rewards(const std::vector<double>& query_accuracies, double eta,
                                    bool constant_return) {
  if (query_accuracies.empty()) throw ShapeError("compute_rewards on an empty trace");
  const std::size_t t_total = query_accuracies.size();
  const double e_final = query_accuracies.back();
  std::vector<double> rewards(t_total);
  for (std::size_t t = 0; t < t_total; ++t) {
    rewards[t] = e_final - query_accuracies[t] - eta * static_cast<double>(t + 1);
  }
  std::vector<double> returns(t_total, 0.0);
  if (constant_return) {
    double total = 0.0;
    for (double r : rewards) total += r;
    std::fill(returns.begin(), returns.end(), total);
  } else {
    double acc = 0.0;
    for (std::size_t t = t_total; t-- > 0;) {
      acc += rewards[t];
      returns[t] = acc;
    }
  }
  return returns;
}

ParamSet reinforce_update(const ParamSet& params, const std::vector<double>& losses,
                          const std::vector<double>& anis,
                          const std::vector<double>& returns, double lr,
                          std::vector<double>* probs_out) {
  if (returns.size() != losses.size()) {
    throw ShapeError("reinforce_update: one return per step required");
  }
  ad::Tape tape;
  const ad::ParamNodeIds ids = bind(tape, params);
  const std::size_t hidden = params.at("ctrl.head.weight").rows();
  ScanNodes nodes = build_scan(tape, ids, losses, anis, hidden);
  if (probs_out) {
    probs_out->clear();
    for (int p : nodes.probs) probs_out->push_back(tape.scalar(p));
  }

  // Surrogate objective sum_t Q_t * ln pi(a_t); the trajectory continues at
  // every step but the last, where it stops. The continue probability is
  // built as sigmoid(-logit), which equals 1 - p_t without cancellation.
  int objective = -1;
  for (std::size_t t = 0; t < nodes.probs.size(); ++t) {
    const bool stop = (t + 1 == nodes.probs.size());
    const int action_prob =
        stop ? nodes.probs[t] : tape.sigmoid(tape.scale(nodes.logits[t], -1.0));
    const int term = tape.scale(tape.log_(action_prob), returns[t]);
    objective = (objective < 0) ? term : tape.add(objective, term);
  }
  tape.backward(objective);

  ParamSet updated = params;
  GradRecord g;
  for (const auto& [name, id] : ids) g.emplace(name, tape.adjoint(id));
  axpy(updated, lr, g);  // ascent
  return updated;
}

Controller Controller::init(const ControllerConfig& cfg, Rng& rng) {
  Controller c;
  c.cfg = cfg;
  c.params = init_controller_params(cfg, rng);
  c.current_step = cfg.bounds.t_min + (cfg.bounds.t_max - cfg.bounds.t_min) / 2;
  return c;
}

void Controller::pack(ParamSet& into) const {
  for (const auto& [name, t] : params) into.emplace(name, t);
  into.emplace("ctrl.state.loss_norm",
               Tensor({1, 3}, {loss_norm.count, loss_norm.mean, loss_norm.m2}));
  into.emplace("ctrl.state.ani_norm",
               Tensor({1, 3}, {ani_norm.count, ani_norm.mean, ani_norm.m2}));
  into.emplace("ctrl.state.current_step", Tensor::scalar(static_cast<double>(current_step)));
}

Controller Controller::unpack(const ParamSet& from, const ControllerConfig& cfg) {
  Controller c;
  c.cfg = cfg;
  for (const auto& [name, t] : from) {
    if (name.rfind("ctrl.state.", 0) == 0) continue;
    if (name.rfind("ctrl.", 0) == 0) c.params.emplace(name, t);
  }
  if (c.params.empty()) throw DataError("checkpoint has no controller parameters");
  auto norm_from = [&](const char* key) {
    const Tensor& t = from.at(key);
    RunningNorm n;
    n.count = t[0];
    n.mean = t[1];
    n.m2 = t[2];
    return n;
  };
  c.loss_norm = norm_from("ctrl.state.loss_norm");
  c.ani_norm = norm_from("ctrl.state.ani_norm");
  c.current_step = static_cast<int>(from.at("ctrl.state.current_step")[0]);
  return c;
}

Controller::EpisodeUpdate Controller::observe_episode(const meta::AdaptationTrace& trace) {
  if (trace.losses.empty() || trace.query_accuracies.size() != trace.losses.size()) {
    throw ShapeError("controller needs a trace with per-step losses, ANIs and accuracies");
  }
  for (std::size_t t = 0; t < trace.losses.size(); ++t) {
    loss_norm.update(trace.losses[t]);
    ani_norm.update(trace.anis[t]);
  }
  std::vector<double> losses_std(trace.losses.size());
  std::vector<double> anis_std(trace.anis.size());
  for (std::size_t t = 0; t < trace.losses.size(); ++t) {
    losses_std[t] = loss_norm.standardize(trace.losses[t]);
    anis_std[t] = ani_norm.standardize(trace.anis[t]);
  }

  const std::vector<double> returns =
      compute_rewards(trace.query_accuracies, cfg.reward.penalty, cfg.reward.constant_return);

  EpisodeUpdate out;
  params = reinforce_update(params, losses_std, anis_std, returns, cfg.reward.lr,
                            &out.stop_probabilities);
  out.p_final = out.stop_probabilities.back();
  out.next_steps = next_step_count(out.p_final, cfg.bounds);
  out.total_return = returns.front();
  current_step = out.next_steps;
  return out;
}

}  // namespace asmaml::ctrl
