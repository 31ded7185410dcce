#pragma once

#include <string>
#include <vector>

#include "asmaml/graph.hpp"
#include "asmaml/rng.hpp"

namespace asmaml {

// Six structural graph families for desk-scale experiments. Node features
// carry a constant column and a scaled-degree column, both noise-corrupted,
// plus pure-noise columns up to feature_dim.
struct SyntheticConfig {
  int graphs_per_family = 100;
  int min_nodes = 8;
  int max_nodes = 16;
  std::size_t feature_dim = 4;
  double noise_std = 0.3;
};

// Family class ids, in order: cycle=0, star=1, clique=2, path=3, grid=4, tree=5.
const std::vector<std::string>& synthetic_family_names();

GraphData make_family_graph(int family, int nodes, const SyntheticConfig& cfg, Rng& rng);
Dataset make_synthetic_dataset(const SyntheticConfig& cfg, Rng& rng);

}  // namespace asmaml
