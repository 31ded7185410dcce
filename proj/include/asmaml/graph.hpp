#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "asmaml/rng.hpp"
#include "asmaml/tensor.hpp"

namespace asmaml {

// One labeled graph: undirected edges over local 0-based node ids, a row of
// features per node, and a class id. Immutable after load; adjacency views
// are materialized on demand.
struct GraphData {
  std::size_t node_count = 0;
  std::vector<std::pair<int, int>> edges;  // u < v, each edge once, no self-loops
  Tensor features;                         // node_count x feature_dim
  int class_id = 0;

  std::vector<std::vector<int>> adjacency_lists() const;
  std::vector<int> degrees() const;
  void validate() const;
};

struct Dataset {
  std::vector<GraphData> graphs;
  std::map<int, std::vector<std::size_t>> class_index;  // class id -> graph positions
  std::size_t feature_dim = 0;

  std::size_t size() const { return graphs.size(); }
  std::vector<int> class_ids() const;
  static Dataset from_graphs(std::vector<GraphData> graphs);
};

struct SplitSpec {
  std::set<int> train_classes;
  std::set<int> val_classes;
  std::set<int> test_classes;
};

struct Episode {
  int way = 0;
  int shot = 0;
  int query_per_class = 0;
  // (graph position in source dataset, episode label in [0, way))
  std::vector<std::pair<std::size_t, int>> support;
  std::vector<std::pair<std::size_t, int>> query;
  std::vector<int> class_map;  // episode label -> original class id
};

// TU text format: <name>_A.txt (1-based edge pairs), <name>_graph_indicator.txt,
// <name>_graph_labels.txt, optional <name>_node_attributes.txt and/or
// <name>_node_labels.txt. The prefix is autodetected from *_A.txt.
Dataset load_tu_dataset(const std::string& root_path);
void write_tu_dataset(const Dataset& dataset, const std::string& root_path,
                      const std::string& name);

std::tuple<Dataset, Dataset, Dataset> split_by_class(const Dataset& dataset,
                                                     const SplitSpec& spec);

// Seeded class split with the given partition sizes (counts must cover all classes).
SplitSpec random_split(const Dataset& dataset, std::size_t train_count,
                       std::size_t val_count, std::size_t test_count, Rng& rng);

// For corpora without validation classes: move `fraction` of the training
// graphs (not classes) into a validation set.
std::pair<Dataset, Dataset> carve_validation(const Dataset& train, double fraction, Rng& rng);

// Episodic task sampler. Classes with fewer than shot + query_per_class
// graphs are excluded once, with a warning on stderr.
class EpisodeSampler {
 public:
  EpisodeSampler(const Dataset& dataset, int way, int shot, int query_per_class,
                 bool warn = true);

  Episode sample(Rng& rng) const;
  const std::vector<int>& eligible_classes() const { return eligible_; }

 private:
  const Dataset& dataset_;
  int way_, shot_, query_per_class_;
  std::vector<int> eligible_;
};

Episode sample_episode(const Dataset& dataset, int way, int shot, int query_per_class,
                       Rng& rng);

}  // namespace asmaml
