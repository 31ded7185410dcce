#pragma once

#include <utility>
#include <vector>

#include "asmaml/tensor.hpp"

namespace asmaml::ani {

// Average node information of one graph: mean L1 residual between each
// node's hidden row and the mean of its neighbors' rows. The adjacency has
// no self-loops; a degree-0 node's neighbor mean is the zero row, so it
// contributes the L1 norm of its own row.
double ani_graph(std::size_t node_count, const std::vector<std::pair<int, int>>& edges,
                 const Tensor& hidden);

// Arithmetic mean over a batch of per-graph values.
double ani_batch(const std::vector<double>& per_graph);

}  // namespace asmaml::ani
