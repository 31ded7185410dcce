#pragma once

#include <string>
#include <vector>

#include "asmaml/graph.hpp"
#include "asmaml/rng.hpp"
#include "asmaml/tape.hpp"
#include "asmaml/tensor.hpp"

namespace asmaml::gnn {

enum class Activation { Sigmoid, Tanh, Relu };

Activation activation_from_name(const std::string& name);

struct BackboneConfig {
  int layers = 3;
  std::size_t hidden_dim = 128;
  double pool_ratio = 0.5;
  Activation conv_activation = Activation::Sigmoid;
  Activation score_activation = Activation::Tanh;
  Activation readout_activation = Activation::Relu;
  std::vector<std::size_t> classifier_hidden;  // empty -> one hidden layer of 2*d

  std::vector<std::size_t> classifier_widths() const {
    return classifier_hidden.empty()
               ? std::vector<std::size_t>{2 * hidden_dim}
               : classifier_hidden;
  }
};

// Node set + undirected edge list as it shrinks through the pooling stack.
struct Topology {
  std::size_t n = 0;
  std::vector<std::pair<int, int>> edges;
};

// Embedding parameters: per layer, conv<l>.weight (d_in x d, no bias) and
// pool<l>.att (d x 1).
ParamSet init_backbone_params(std::size_t feature_dim, const BackboneConfig& cfg, Rng& rng);
// Classifier parameters: hidden relu stack then a linear map to `way` logits.
ParamSet init_classifier_params(const BackboneConfig& cfg, int way, Rng& rng);

// Row-stochastic mean-aggregation operator: row v averages {v} and N(v).
Tensor mean_aggregation_operator(const Topology& topo);
// Symmetric normalization of the self-connected adjacency, used by the
// attention score head.
Tensor score_normalization_operator(const Topology& topo);

// One mean-aggregator convolution: act(P * H * W).
int sage_layer(ad::Tape& tape, const Topology& topo, int h, int weight, Activation act);

struct PoolResult {
  std::vector<int> kept;  // surviving node ids in the pre-pool topology, ascending
  Topology topology;      // induced subgraph over the survivors
  int pooled = -1;        // tape node: kept rows of H scaled by their scores
  int scores = -1;        // tape node: n x 1 attention scores (pre-selection)
};

// Attention top-c pooling: score, keep the c = max(1, ceil(ratio*n)) best
// (ties -> lower id), gate kept rows by their scores, induce the subgraph.
PoolResult sag_pool(ad::Tape& tape, const Topology& topo, int h, int attention,
                    double ratio, Activation score_act);

// act(rowmean(H) || colmax(H)), a 1 x 2d graph readout.
int readout(ad::Tape& tape, int h, Activation act);

struct GraphActivations {
  Topology final_topology;
  Tensor final_hidden;  // surviving rows after the last pooling layer
};

struct EmbedResult {
  int z = -1;  // 1 x 2d embedding node
  GraphActivations activations;
};

EmbedResult embed_graph(ad::Tape& tape, const ad::ParamNodeIds& params,
                        const BackboneConfig& cfg, const GraphData& graph);

// Hidden relu stack then linear logits; expects Z rows of embeddings.
int classify(ad::Tape& tape, const ad::ParamNodeIds& params, const BackboneConfig& cfg,
             int z_matrix);

struct EpisodeForwardResult {
  int loss_node = -1;
  double loss = 0.0;
  double accuracy = 0.0;
  double ani = 0.0;  // batch mean over final-layer activations
  std::vector<int> predictions;
  std::vector<GraphActivations> activations;
};

// Mean cross-entropy over a labeled batch of graphs, with predictions,
// accuracy (argmax ties -> lowest class) and batch ANI read off the values.
EpisodeForwardResult episode_forward(ad::Tape& tape, const ad::ParamNodeIds& params,
                                     const BackboneConfig& cfg,
                                     const std::vector<const GraphData*>& graphs,
                                     const std::vector<int>& labels);

// Value-only embedding of one graph with fixed parameters.
Tensor embed_graph_value(const ParamSet& params, const BackboneConfig& cfg,
                         const GraphData& graph);

}  // namespace asmaml::gnn
