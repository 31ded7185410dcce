#include "asmaml/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "asmaml/error.hpp"
#include "asmaml/rng.hpp"

namespace asmaml::ad {

namespace {

ParamNodeIds bind_inputs(Tape& tape, const ParamSet& params, const GradRecord* tangent) {
  ParamNodeIds ids;
  for (const auto& [name, t] : params) {
    if (tangent) {
      auto it = tangent->find(name);
      if (it == tangent->end()) throw ShapeError("missing tangent for '" + name + "'");
      ids.emplace(name, tape.input(name, t, it->second));
    } else {
      ids.emplace(name, tape.input(name, t));
    }
  }
  return ids;
}

}  // namespace

double eval_objective(const Objective& f, const ParamSet& params) {
  Tape tape;
  const ParamNodeIds ids = bind_inputs(tape, params, nullptr);
  return tape.scalar(f(tape, ids));
}

GradRecord grad(const Objective& f, const ParamSet& params, double* value_out) {
  Tape tape;
  const ParamNodeIds ids = bind_inputs(tape, params, nullptr);
  const int root = f(tape, ids);
  if (value_out) *value_out = tape.scalar(root);
  tape.backward(root);
  GradRecord g;
  for (const auto& [name, id] : ids) g.emplace(name, tape.adjoint(id));
  return g;
}

GradRecord hvp(const Objective& f, const ParamSet& params, const GradRecord& v) {
  Tape tape({.tangents = true, .check_finite = true});
  const ParamNodeIds ids = bind_inputs(tape, params, &v);
  const int root = f(tape, ids);
  tape.backward(root);
  GradRecord out;
  for (const auto& [name, id] : ids) out.emplace(name, tape.adjoint_tangent(id));
  return out;
}

GradRecord backprop_through_chain(const Objective& inner,
                                  const std::vector<ParamSet>& iterates,
                                  GradRecord outer_grad, double inner_lr) {
  // d(theta_T)/d(theta_0) is a product of (I - lr * H_t); multiply the outer
  // gradient by each factor in reverse, using exact Hessian-vector products.
  for (auto it = iterates.rbegin(); it != iterates.rend(); ++it) {
    GradRecord hv = hvp(inner, *it, outer_grad);
    axpy(outer_grad, -inner_lr, hv);
  }
  return outer_grad;
}

GradRecord grad_through_updates(const Objective& inner, const Objective& outer,
                                const ParamSet& init, int steps, double inner_lr,
                                Order order,
                                std::vector<ParamSet>* iterates_out,
                                std::vector<double>* inner_losses_out,
                                double* outer_value_out) {
  if (steps < 0) throw ConfigError("grad_through_updates: negative step count");
  ParamSet theta = init;
  std::vector<ParamSet> iterates;
  iterates.reserve(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    double loss = 0.0;
    GradRecord g = grad(inner, theta, &loss);
    if (inner_losses_out) inner_losses_out->push_back(loss);
    iterates.push_back(theta);
    axpy(theta, -inner_lr, g);
  }
  if (iterates_out) *iterates_out = iterates;
  GradRecord gq = grad(outer, theta, outer_value_out);
  if (order == Order::First || steps == 0 || inner_lr == 0.0) return gq;
  return backprop_through_chain(inner, iterates, std::move(gq), inner_lr);
}

double finite_diff_check(const Objective& f, const ParamSet& params, double step,
                         std::size_t sample, std::uint64_t seed) {
  const GradRecord analytic = grad(f, params);
  std::vector<std::pair<std::string, std::size_t>> coords;
  for (const auto& [name, t] : params) {
    for (std::size_t i = 0; i < t.size(); ++i) coords.emplace_back(name, i);
  }
  Rng rng(seed);
  const std::size_t total = coords.size();
  const std::size_t picks = std::min(sample, total);
  const auto chosen = rng.sample_without_replacement(total, picks);

  double worst = 0.0;
  for (std::size_t c : chosen) {
    const auto& [name, i] = coords[c];
    ParamSet p = params;
    const double base = p.at(name)[i];
    p.at(name)[i] = base + step;
    const double fp = eval_objective(f, p);
    p.at(name)[i] = base - step;
    const double fm = eval_objective(f, p);
    const double numeric = (fp - fm) / (2.0 * step);
    const double a = analytic.at(name)[i];
    const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
    worst = std::max(worst, std::fabs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace asmaml::ad
