#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "asmaml/tape.hpp"
#include "asmaml/tensor.hpp"

namespace asmaml::ad {

// A scalar objective expressed as a tape program over named parameters.
// The callback receives one input node per parameter and returns the root.
using Objective = std::function<int(Tape&, const ParamNodeIds&)>;

enum class Order { Second, First };

double eval_objective(const Objective& f, const ParamSet& params);

// Exact reverse-mode gradient of f at params.
GradRecord grad(const Objective& f, const ParamSet& params, double* value_out = nullptr);

// Hessian-vector product H(params) * v via a forward-tangent pass threaded
// through the reverse sweep.
GradRecord hvp(const Objective& f, const ParamSet& params, const GradRecord& v);

// Pull the outer-loss gradient back through a sequence of SGD steps.
// iterates[t] is the parameter point where inner step t's gradient was taken.
GradRecord backprop_through_chain(const Objective& inner,
                                  const std::vector<ParamSet>& iterates,
                                  GradRecord outer_grad, double inner_lr);

// Gradient of (adapt params on `inner` for `steps` of SGD at inner_lr, then
// evaluate `outer`) with respect to the initial parameters. Order::First
// evaluates the outer gradient at the adapted point and applies it to the
// initial parameters unchanged.
GradRecord grad_through_updates(const Objective& inner, const Objective& outer,
                                const ParamSet& init, int steps, double inner_lr,
                                Order order,
                                std::vector<ParamSet>* iterates_out = nullptr,
                                std::vector<double>* inner_losses_out = nullptr,
                                double* outer_value_out = nullptr);

// Central-difference audit of grad() on a seeded sample of coordinates.
// Returns the worst relative error, denominator max(|a|, |b|, 1e-8).
double finite_diff_check(const Objective& f, const ParamSet& params, double step,
                         std::size_t sample, std::uint64_t seed);

}  // namespace asmaml::ad
