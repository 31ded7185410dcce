#include "asmaml/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "asmaml/error.hpp"

namespace asmaml {

const std::vector<std::string>& synthetic_family_names() {
  static const std::vector<std::string> names = {"cycle", "star",  "clique",
                                                 "path",  "grid",  "tree"};
  return names;
}

namespace {

std::vector<std::pair<int, int>> cycle_edges(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  if (n > 2) e.emplace_back(0, n - 1);
  return e;
}

std::vector<std::pair<int, int>> star_edges(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 1; i < n; ++i) e.emplace_back(0, i);
  return e;
}

std::vector<std::pair<int, int>> clique_edges(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
  }
  return e;
}

std::vector<std::pair<int, int>> path_edges(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return e;
}

std::vector<std::pair<int, int>> grid_edges(int n, int* actual_n) {
  // Closest rows x cols grid with rows >= 2 that does not exceed n nodes.
  int rows = 2;
  for (int r = 2; r * r <= n; ++r) rows = r;
  int cols = std::max(2, n / rows);
  *actual_n = rows * cols;
  std::vector<std::pair<int, int>> e;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int v = r * cols + c;
      if (c + 1 < cols) e.emplace_back(v, v + 1);
      if (r + 1 < rows) e.emplace_back(v, v + cols);
    }
  }
  return e;
}

std::vector<std::pair<int, int>> tree_edges(int n) {
  // Complete binary tree in heap order.
  std::vector<std::pair<int, int>> e;
  for (int i = 1; i < n; ++i) e.emplace_back((i - 1) / 2, i);
  return e;
}

}  // namespace

GraphData make_family_graph(int family, int nodes, const SyntheticConfig& cfg, Rng& rng) {
  GraphData g;
  int n = std::max(3, nodes);
  switch (family) {
    case 0: g.edges = cycle_edges(n); break;
    case 1: g.edges = star_edges(n); break;
    case 2: g.edges = clique_edges(n); break;
    case 3: g.edges = path_edges(n); break;
    case 4: g.edges = grid_edges(n, &n); break;
    case 5: g.edges = tree_edges(n); break;
    default: throw ConfigError("unknown synthetic family " + std::to_string(family));
  }
  g.node_count = static_cast<std::size_t>(n);
  g.class_id = family;
  g.features = Tensor::matrix(g.node_count, cfg.feature_dim);
  const auto deg = g.degrees();
  for (std::size_t v = 0; v < g.node_count; ++v) {
    for (std::size_t j = 0; j < cfg.feature_dim; ++j) {
      double base = 0.0;
      if (j == 0) base = 1.0;
      if (j == 1) base = static_cast<double>(deg[v]) / 4.0;
      g.features.at(v, j) = base + rng.normal(0.0, cfg.noise_std);
    }
  }
  return g;
}

Dataset make_synthetic_dataset(const SyntheticConfig& cfg, Rng& rng) {
  if (cfg.feature_dim < 2) throw ConfigError("synthetic feature_dim must be >= 2");
  std::vector<GraphData> graphs;
  const int families = static_cast<int>(synthetic_family_names().size());
  for (int f = 0; f < families; ++f) {
    for (int i = 0; i < cfg.graphs_per_family; ++i) {
      const int n = cfg.min_nodes +
                    static_cast<int>(rng.uniform_int(
                        static_cast<std::uint64_t>(cfg.max_nodes - cfg.min_nodes + 1)));
      graphs.push_back(make_family_graph(f, n, cfg, rng));
    }
  }
  return Dataset::from_graphs(std::move(graphs));
}

}  // namespace asmaml
