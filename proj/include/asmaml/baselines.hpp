#pragma once

#include <cstdint>
#include <vector>

#include "asmaml/backbone.hpp"
#include "asmaml/graph.hpp"
#include "asmaml/rng.hpp"
#include "asmaml/tensor.hpp"

namespace asmaml::base {

struct WlConfig {
  int iterations = 3;
};

struct KernelOptions {
  WlConfig wl;
  int sp_length_cap = 10;        // path lengths bucketed at the cap
  int graphlet_samples = 10000;  // triple samples when enumeration is too big
  std::size_t graphlet_exact_limit = 20000;  // enumerate when C(n,3) <= limit
  int attribute_bins = 8;        // per-dimension bins for label discretization
};

// Discrete node labels for the kernels: each feature dimension is binned
// uniformly over its range across the given graphs, and the bin tuple is
// hashed to a dense label id. One call covers all graphs that must share a
// label space (a pair, or a whole episode).
std::vector<std::vector<int>> discretize_node_labels(
    const std::vector<const GraphData*>& graphs, int bins);

// Normalized Weisfeiler-Lehman subtree kernel over provided label sequences.
double wl_kernel(const GraphData& g1, const GraphData& g2,
                 const std::vector<int>& labels1, const std::vector<int>& labels2,
                 const WlConfig& cfg);
// Convenience: pair-local label discretization.
double wl_kernel(const GraphData& g1, const GraphData& g2, const WlConfig& cfg,
                 int bins = 8);

// Normalized shortest-path-length histogram kernel (unweighted BFS).
// Two empty histograms compare as 1, exactly one empty as 0.
double sp_kernel(const GraphData& g1, const GraphData& g2, int length_cap = 10);

// Dot product of 3-node graphlet distributions (types by induced edge count).
// Exact enumeration when C(n,3) <= exact_limit, otherwise sampled.
double graphlet_kernel(const GraphData& g1, const GraphData& g2, int sample_count,
                       Rng& rng, std::size_t exact_limit = 20000);

struct ProtoResult {
  std::vector<int> predicted;
  double accuracy = 0.0;
};

// Parameter-free nearest-prototype prediction in a kernel-induced space:
// d^2(x, c) = k(x,x) - (2/K) sum_s k(x,s) + (1/K^2) sum_{s,s'} k(s,s').
ProtoResult prototypical_predict_kernel(const Tensor& k_query_support,
                                        const Tensor& k_support_support,
                                        const std::vector<double>& k_query_self,
                                        const std::vector<int>& support_labels,
                                        const std::vector<int>& query_labels, int way);

// Prototype = mean embedding per class, squared Euclidean distance.
ProtoResult prototypical_predict_embedding(const Tensor& support_embeddings,
                                           const std::vector<int>& support_labels,
                                           const Tensor& query_embeddings,
                                           const std::vector<int>& query_labels, int way);

enum class KernelKind { WL, SP, Graphlet };
KernelKind kernel_kind_from_name(const std::string& name);

// One episode of kernel + prototypical evaluation. Pairwise values are
// independent, so the matrices are assembled in parallel; graphlet sampling
// seeds are derived per pair for a thread-count-independent result.
ProtoResult kernel_episode(const Dataset& data, const Episode& ep, KernelKind kind,
                           const KernelOptions& opts, std::uint64_t seed);

struct PretrainConfig {
  int steps = 300;
  int batch_size = 32;
  double lr = 0.001;
  double weight_decay = 1e-5;
};

struct PretrainedModel {
  ParamSet params;  // backbone plus a classifier over the training classes
  std::vector<int> class_order;  // dataset class id per classifier column
};

// Standard supervised classification over the training classes; shared by
// the finetuning and embedding-prototype baselines.
PretrainedModel pretrain_supervised(const Dataset& train, const gnn::BackboneConfig& backbone,
                                    const PretrainConfig& cfg, std::uint64_t seed);

// Fresh way-sized output layer trained on the episode support; everything
// else stays frozen. Returns query accuracy.
double finetune_episode(const PretrainedModel& model, const gnn::BackboneConfig& backbone,
                        const Dataset& data, const Episode& ep, int steps, double lr,
                        std::uint64_t seed);

// Embedding-space prototypical evaluation of a pretrained backbone.
ProtoResult proto_episode(const PretrainedModel& model, const gnn::BackboneConfig& backbone,
                          const Dataset& data, const Episode& ep);

}  // namespace asmaml::base
