#pragma once

#include <vector>

#include "asmaml/autodiff.hpp"
#include "asmaml/backbone.hpp"
#include "asmaml/graph.hpp"
#include "asmaml/tensor.hpp"

namespace asmaml::meta {

struct MetaConfig {
  double inner_lr = 0.0001;
  double outer_lr = 0.001;
  double weight_decay = 1e-5;
  ad::Order order = ad::Order::Second;
};

// Per-step record of one adaptation: support loss and batch ANI are taken
// from the forward pass before each update; query accuracies (training only)
// are evaluated after each update and feed the controller's rewards.
struct AdaptationTrace {
  std::vector<double> losses;
  std::vector<double> anis;
  std::vector<double> query_accuracies;  // empty unless tracked
  int steps = 0;
};

struct BatchView {
  std::vector<const GraphData*> graphs;
  std::vector<int> labels;
};

BatchView support_view(const Dataset& data, const Episode& ep);
BatchView query_view(const Dataset& data, const Episode& ep);

// Objective of the mean episode loss over a fixed batch.
ad::Objective batch_objective(const gnn::BackboneConfig& backbone, const BatchView& batch);

struct AdaptResult {
  ParamSet adapted;
  AdaptationTrace trace;
  std::vector<ParamSet> iterates;  // parameter points where each inner gradient was taken
};

// T steps of SGD on the support loss starting from a value copy of theta.
// theta itself is never touched.
AdaptResult adapt(const ParamSet& theta, const Dataset& data, const Episode& ep, int steps,
                  const gnn::BackboneConfig& backbone, const MetaConfig& cfg,
                  bool track_query_accuracy = false);

struct MetaUpdateResult {
  ParamSet theta;
  AdaptationTrace trace;
  double query_loss = 0.0;
  double query_accuracy = 0.0;
};

// One outer step: adapt on support, differentiate the query loss back to the
// initial parameters (through the inner updates in second-order mode), then
// apply SGD with weight decay.
MetaUpdateResult meta_update(const ParamSet& theta, const Dataset& data, const Episode& ep,
                             int steps, const gnn::BackboneConfig& backbone,
                             const MetaConfig& cfg, bool track_query_accuracy = true);

// Average the outer gradient over a batch of episodes before applying it.
// The returned trace comes from the first episode (one controller input per
// outer update); query loss/accuracy are averaged over the batch.
MetaUpdateResult meta_update_batch(const ParamSet& theta, const Dataset& data,
                                   const std::vector<Episode>& episodes, int steps,
                                   const gnn::BackboneConfig& backbone, const MetaConfig& cfg,
                                   bool track_query_accuracy = true);

// Test protocol: adapt on support, report query accuracy of the adapted copy.
double test_episode(const ParamSet& theta, const Dataset& data, const Episode& ep, int steps,
                    const gnn::BackboneConfig& backbone, const MetaConfig& cfg,
                    double* query_loss_out = nullptr);

}  // namespace asmaml::meta
