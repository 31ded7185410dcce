#include "asmaml/ani.hpp"

#include <cmath>

#include "asmaml/error.hpp"

namespace asmaml::ani {

double ani_graph(std::size_t node_count, const std::vector<std::pair<int, int>>& edges,
                 const Tensor& hidden) {
  if (node_count == 0) throw ShapeError("ani_graph on an empty graph");
  if (hidden.rows() != node_count) {
    throw ShapeError("ani_graph: hidden row count does not match node count");
  }
  const std::size_t d = hidden.cols();
  std::vector<std::vector<int>> adj(node_count);
  for (const auto& [u, v] : edges) {
    adj[static_cast<std::size_t>(u)].push_back(v);
    adj[static_cast<std::size_t>(v)].push_back(u);
  }
  double total = 0.0;
  std::vector<double> mean(d);
  for (std::size_t v = 0; v < node_count; ++v) {
    std::fill(mean.begin(), mean.end(), 0.0);
    if (!adj[v].empty()) {
      for (int u : adj[v]) {
        for (std::size_t j = 0; j < d; ++j) mean[j] += hidden.at(static_cast<std::size_t>(u), j);
      }
      const double inv = 1.0 / static_cast<double>(adj[v].size());
      for (std::size_t j = 0; j < d; ++j) mean[j] *= inv;
    }
    double row = 0.0;
    for (std::size_t j = 0; j < d; ++j) row += std::fabs(hidden.at(v, j) - mean[j]);
    total += row;
  }
  return total / static_cast<double>(node_count);
}

double ani_batch(const std::vector<double>& per_graph) {
  if (per_graph.empty()) throw ShapeError("ani_batch of an empty batch");
  double acc = 0.0;
  for (double v : per_graph) acc += v;
  return acc / static_cast<double>(per_graph.size());
}

}  // namespace asmaml::ani
