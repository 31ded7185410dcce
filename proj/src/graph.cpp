#include "asmaml/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "asmaml/error.hpp"

namespace fs = std::filesystem;

namespace asmaml {

std::vector<std::vector<int>> GraphData::adjacency_lists() const {
  std::vector<std::vector<int>> adj(node_count);
  for (const auto& [u, v] : edges) {
    adj[static_cast<std::size_t>(u)].push_back(v);
    adj[static_cast<std::size_t>(v)].push_back(u);
  }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());
  return adj;
}

std::vector<int> GraphData::degrees() const {
  std::vector<int> deg(node_count, 0);
  for (const auto& [u, v] : edges) {
    ++deg[static_cast<std::size_t>(u)];
    ++deg[static_cast<std::size_t>(v)];
  }
  return deg;
}

void GraphData::validate() const {
  if (node_count == 0) throw DataError("graph with zero nodes");
  for (const auto& [u, v] : edges) {
    if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= node_count ||
        static_cast<std::size_t>(v) >= node_count) {
      throw DataError("edge endpoint out of range");
    }
    if (u == v) throw DataError("self-loop stored in graph");
  }
  if (features.rows() != node_count) throw DataError("feature row count mismatch");
  if (!features.all_finite()) throw DataError("non-finite node feature");
}

std::vector<int> Dataset::class_ids() const {
  std::vector<int> ids;
  ids.reserve(class_index.size());
  for (const auto& [c, _] : class_index) ids.push_back(c);
  return ids;
}

Dataset Dataset::from_graphs(std::vector<GraphData> graphs) {
  Dataset d;
  d.graphs = std::move(graphs);
  for (std::size_t i = 0; i < d.graphs.size(); ++i) {
    d.graphs[i].validate();
    d.class_index[d.graphs[i].class_id].push_back(i);
    if (i == 0) {
      d.feature_dim = d.graphs[i].features.cols();
    } else if (d.graphs[i].features.cols() != d.feature_dim) {
      throw DataError("graphs disagree on feature dimension");
    }
  }
  return d;
}

namespace {

std::string detect_prefix(const std::string& root) {
  if (!fs::is_directory(root)) throw DataError("dataset directory not found: " + root);
  for (const auto& entry : fs::directory_iterator(root)) {
    const std::string fname = entry.path().filename().string();
    const std::string suffix = "_A.txt";
    if (fname.size() > suffix.size() &&
        fname.compare(fname.size() - suffix.size(), suffix.size(), suffix) == 0) {
      return fname.substr(0, fname.size() - suffix.size());
    }
  }
  throw DataError("missing mandatory file <name>_A.txt under " + root);
}

std::vector<std::string> read_lines(const std::string& path, bool required) {
  std::ifstream is(path);
  if (!is) {
    if (required) throw DataError("missing mandatory file: " + path);
    return {};
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<double> parse_csv_row(const std::string& line, const std::string& file,
                                  std::size_t lineno) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw DataError(file + ":" + std::to_string(lineno) + ": bad number '" + tok + "'");
    }
  }
  return out;
}

}  // namespace

Dataset load_tu_dataset(const std::string& root_path) {
  const std::string prefix = detect_prefix(root_path);
  const std::string base = (fs::path(root_path) / prefix).string();

  const auto indicator_lines = read_lines(base + "_graph_indicator.txt", true);
  const auto label_lines = read_lines(base + "_graph_labels.txt", true);
  const auto edge_lines = read_lines(base + "_A.txt", true);
  const auto attr_lines = read_lines(base + "_node_attributes.txt", false);
  const auto nlabel_lines = read_lines(base + "_node_labels.txt", false);

  const std::size_t total_nodes = indicator_lines.size();
  const std::size_t graph_count = label_lines.size();
  if (graph_count == 0) throw DataError("empty graph label file");

  // Node -> graph membership and local ids (TU node ids are global, 1-based).
  std::vector<std::size_t> node_graph(total_nodes);
  std::vector<int> node_local(total_nodes);
  std::vector<std::size_t> graph_sizes(graph_count, 0);
  for (std::size_t i = 0; i < total_nodes; ++i) {
    long g = 0;
    try {
      g = std::stol(indicator_lines[i]);
    } catch (const std::exception&) {
      throw DataError("graph_indicator:" + std::to_string(i + 1) + ": bad graph id");
    }
    if (g < 1 || static_cast<std::size_t>(g) > graph_count) {
      throw DataError("graph_indicator:" + std::to_string(i + 1) + ": graph id out of range");
    }
    node_graph[i] = static_cast<std::size_t>(g) - 1;
    node_local[i] = static_cast<int>(graph_sizes[node_graph[i]]++);
  }

  // Node features: attributes, one-hot node labels, or a constant column.
  std::size_t feature_dim = 0;
  std::vector<std::vector<double>> node_features(total_nodes);
  if (!attr_lines.empty()) {
    if (attr_lines.size() != total_nodes) {
      throw DataError("node_attributes row count does not match node count");
    }
    for (std::size_t i = 0; i < total_nodes; ++i) {
      node_features[i] = parse_csv_row(attr_lines[i], "node_attributes", i + 1);
      if (i == 0) {
        feature_dim = node_features[i].size();
      } else if (node_features[i].size() != feature_dim) {
        throw DataError("node_attributes:" + std::to_string(i + 1) + ": ragged row");
      }
    }
  }
  if (!nlabel_lines.empty()) {
    if (nlabel_lines.size() != total_nodes) {
      throw DataError("node_labels row count does not match node count");
    }
    std::vector<int> raw(total_nodes);
    std::set<int> distinct;
    for (std::size_t i = 0; i < total_nodes; ++i) {
      try {
        raw[i] = std::stoi(nlabel_lines[i]);
      } catch (const std::exception&) {
        throw DataError("node_labels:" + std::to_string(i + 1) + ": bad label");
      }
      distinct.insert(raw[i]);
    }
    std::map<int, std::size_t> remap;
    std::size_t next = 0;
    for (int l : distinct) remap[l] = next++;
    const std::size_t onehot_dim = distinct.size();
    for (std::size_t i = 0; i < total_nodes; ++i) {
      std::vector<double> onehot(onehot_dim, 0.0);
      onehot[remap[raw[i]]] = 1.0;
      node_features[i].insert(node_features[i].end(), onehot.begin(), onehot.end());
    }
    feature_dim += onehot_dim;
  }
  if (feature_dim == 0) {
    feature_dim = 1;
    for (auto& f : node_features) f.assign(1, 1.0);
  }

  // Edges: global 1-based pairs; stored once per undirected edge, local ids.
  std::vector<std::set<std::pair<int, int>>> edge_sets(graph_count);
  for (std::size_t lineno = 0; lineno < edge_lines.size(); ++lineno) {
    const std::string& line = edge_lines[lineno];
    if (line.empty()) continue;
    long a = 0, b = 0;
    if (std::sscanf(line.c_str(), "%ld , %ld", &a, &b) != 2 &&
        std::sscanf(line.c_str(), "%ld,%ld", &a, &b) != 2) {
      throw DataError("A.txt:" + std::to_string(lineno + 1) + ": expected 'u, v'");
    }
    if (a < 1 || b < 1 || static_cast<std::size_t>(a) > total_nodes ||
        static_cast<std::size_t>(b) > total_nodes) {
      throw DataError("A.txt:" + std::to_string(lineno + 1) + ": node id out of range");
    }
    const std::size_t ga = node_graph[static_cast<std::size_t>(a) - 1];
    const std::size_t gb = node_graph[static_cast<std::size_t>(b) - 1];
    if (ga != gb) {
      throw DataError("A.txt:" + std::to_string(lineno + 1) + ": edge crosses graphs");
    }
    int u = node_local[static_cast<std::size_t>(a) - 1];
    int v = node_local[static_cast<std::size_t>(b) - 1];
    if (u == v) continue;  // drop self-loops; they are added transiently where needed
    if (u > v) std::swap(u, v);
    edge_sets[ga].insert({u, v});
  }

  // Class ids remapped to a dense 0-based range.
  std::vector<int> raw_labels(graph_count);
  std::set<int> label_set;
  for (std::size_t g = 0; g < graph_count; ++g) {
    try {
      raw_labels[g] = std::stoi(label_lines[g]);
    } catch (const std::exception&) {
      throw DataError("graph_labels:" + std::to_string(g + 1) + ": bad label");
    }
    label_set.insert(raw_labels[g]);
  }
  std::map<int, int> label_remap;
  int next_label = 0;
  for (int l : label_set) label_remap[l] = next_label++;

  std::vector<GraphData> graphs(graph_count);
  for (std::size_t g = 0; g < graph_count; ++g) {
    graphs[g].node_count = graph_sizes[g];
    graphs[g].edges.assign(edge_sets[g].begin(), edge_sets[g].end());
    graphs[g].class_id = label_remap[raw_labels[g]];
    graphs[g].features = Tensor::matrix(graph_sizes[g], feature_dim);
  }
  for (std::size_t i = 0; i < total_nodes; ++i) {
    GraphData& g = graphs[node_graph[i]];
    for (std::size_t j = 0; j < feature_dim; ++j) {
      g.features.at(static_cast<std::size_t>(node_local[i]), j) = node_features[i][j];
    }
  }
  return Dataset::from_graphs(std::move(graphs));
}

void write_tu_dataset(const Dataset& dataset, const std::string& root_path,
                      const std::string& name) {
  fs::create_directories(root_path);
  const std::string base = (fs::path(root_path) / name).string();
  std::ofstream fa(base + "_A.txt");
  std::ofstream fi(base + "_graph_indicator.txt");
  std::ofstream fl(base + "_graph_labels.txt");
  std::ofstream fx(base + "_node_attributes.txt");
  if (!fa || !fi || !fl || !fx) throw DataError("cannot write dataset under " + root_path);

  char buf[64];
  std::size_t node_base = 1;  // global 1-based ids
  for (std::size_t g = 0; g < dataset.graphs.size(); ++g) {
    const GraphData& graph = dataset.graphs[g];
    for (std::size_t v = 0; v < graph.node_count; ++v) {
      fi << (g + 1) << "\n";
      for (std::size_t j = 0; j < dataset.feature_dim; ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", graph.features.at(v, j));
        fx << (j ? ", " : "") << buf;
      }
      fx << "\n";
    }
    for (const auto& [u, v] : graph.edges) {
      fa << (node_base + static_cast<std::size_t>(u)) << ", "
         << (node_base + static_cast<std::size_t>(v)) << "\n";
      fa << (node_base + static_cast<std::size_t>(v)) << ", "
         << (node_base + static_cast<std::size_t>(u)) << "\n";
    }
    fl << graph.class_id << "\n";
    node_base += graph.node_count;
  }
}

std::tuple<Dataset, Dataset, Dataset> split_by_class(const Dataset& dataset,
                                                     const SplitSpec& spec) {
  auto check_known = [&](const std::set<int>& classes, const char* which) {
    for (int c : classes) {
      if (!dataset.class_index.count(c)) {
        throw DataError(std::string("unknown class ") + std::to_string(c) + " in " + which +
                        " split");
      }
    }
  };
  check_known(spec.train_classes, "train");
  check_known(spec.val_classes, "val");
  check_known(spec.test_classes, "test");
  for (int c : spec.train_classes) {
    if (spec.val_classes.count(c) || spec.test_classes.count(c)) {
      throw DataError("class " + std::to_string(c) + " appears in two splits");
    }
  }
  for (int c : spec.val_classes) {
    if (spec.test_classes.count(c)) {
      throw DataError("class " + std::to_string(c) + " appears in two splits");
    }
  }

  std::vector<GraphData> train, val, test;
  for (const GraphData& g : dataset.graphs) {
    if (spec.train_classes.count(g.class_id)) {
      train.push_back(g);
    } else if (spec.val_classes.count(g.class_id)) {
      val.push_back(g);
    } else if (spec.test_classes.count(g.class_id)) {
      test.push_back(g);
    }
  }
  auto build = [](std::vector<GraphData> gs, std::size_t dim) {
    if (gs.empty()) {
      Dataset d;
      d.feature_dim = dim;
      return d;
    }
    return Dataset::from_graphs(std::move(gs));
  };
  return {build(std::move(train), dataset.feature_dim),
          build(std::move(val), dataset.feature_dim),
          build(std::move(test), dataset.feature_dim)};
}

SplitSpec random_split(const Dataset& dataset, std::size_t train_count,
                       std::size_t val_count, std::size_t test_count, Rng& rng) {
  std::vector<int> classes = dataset.class_ids();
  if (train_count + val_count + test_count != classes.size()) {
    throw ConfigError("split counts must sum to the class count (" +
                      std::to_string(classes.size()) + ")");
  }
  rng.shuffle(classes);
  SplitSpec spec;
  std::size_t i = 0;
  for (; i < train_count; ++i) spec.train_classes.insert(classes[i]);
  for (; i < train_count + val_count; ++i) spec.val_classes.insert(classes[i]);
  for (; i < classes.size(); ++i) spec.test_classes.insert(classes[i]);
  return spec;
}

std::pair<Dataset, Dataset> carve_validation(const Dataset& train, double fraction, Rng& rng) {
  if (fraction <= 0.0 || train.graphs.empty()) {
    Dataset empty;
    empty.feature_dim = train.feature_dim;
    return {train, empty};
  }
  std::vector<std::size_t> order(train.graphs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  const std::size_t val_n = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(order.size())));
  std::vector<bool> in_val(order.size(), false);
  for (std::size_t i = 0; i < val_n; ++i) in_val[order[i]] = true;
  std::vector<GraphData> tr, va;
  for (std::size_t i = 0; i < train.graphs.size(); ++i) {
    (in_val[i] ? va : tr).push_back(train.graphs[i]);
  }
  auto build = [&](std::vector<GraphData> gs) {
    if (gs.empty()) {
      Dataset d;
      d.feature_dim = train.feature_dim;
      return d;
    }
    return Dataset::from_graphs(std::move(gs));
  };
  return {build(std::move(tr)), build(std::move(va))};
}

EpisodeSampler::EpisodeSampler(const Dataset& dataset, int way, int shot,
                               int query_per_class, bool warn)
    : dataset_(dataset), way_(way), shot_(shot), query_per_class_(query_per_class) {
  if (way < 1 || shot < 1 || query_per_class < 1) {
    throw ConfigError("episode parameters must be positive");
  }
  const std::size_t need = static_cast<std::size_t>(shot + query_per_class);
  for (const auto& [c, members] : dataset.class_index) {
    if (members.size() >= need) {
      eligible_.push_back(c);
    } else if (warn) {
      std::cerr << "warning: class " << c << " has " << members.size()
                << " graphs, fewer than shot+query=" << need
                << "; excluded from episode sampling\n";
    }
  }
  if (static_cast<int>(eligible_.size()) < way) {
    throw DataError("only " + std::to_string(eligible_.size()) +
                    " classes have enough graphs for " + std::to_string(way) +
                    "-way episodes");
  }
}

Episode EpisodeSampler::sample(Rng& rng) const {
  Episode ep;
  ep.way = way_;
  ep.shot = shot_;
  ep.query_per_class = query_per_class_;
  const auto class_picks =
      rng.sample_without_replacement(eligible_.size(), static_cast<std::size_t>(way_));
  for (int label = 0; label < way_; ++label) {
    const int cls = eligible_[class_picks[static_cast<std::size_t>(label)]];
    ep.class_map.push_back(cls);
    const auto& members = dataset_.class_index.at(cls);
    const auto picks = rng.sample_without_replacement(
        members.size(), static_cast<std::size_t>(shot_ + query_per_class_));
    for (int k = 0; k < shot_; ++k) {
      ep.support.emplace_back(members[picks[static_cast<std::size_t>(k)]], label);
    }
    for (int k = 0; k < query_per_class_; ++k) {
      ep.query.emplace_back(members[picks[static_cast<std::size_t>(shot_ + k)]], label);
    }
  }
  return ep;
}

Episode sample_episode(const Dataset& dataset, int way, int shot, int query_per_class,
                       Rng& rng) {
  EpisodeSampler sampler(dataset, way, shot, query_per_class, /*warn=*/false);
  return sampler.sample(rng);
}

}  // namespace asmaml
