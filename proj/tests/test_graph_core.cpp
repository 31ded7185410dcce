#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <set>

#include "asmaml/error.hpp"
#include "asmaml/graph.hpp"
#include "asmaml/synthetic.hpp"

using namespace asmaml;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("asmaml_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream os(p);
  os << content;
}

// Two-graph toy corpus: graph 1 = nodes {1,2} with edge (1,2); graph 2 = node {3}.
void write_toy_dataset(const fs::path& dir, const std::string& name) {
  write_file(dir / (name + "_A.txt"), "1, 2\n2, 1\n");
  write_file(dir / (name + "_graph_indicator.txt"), "1\n1\n2\n");
  write_file(dir / (name + "_graph_labels.txt"), "7\n9\n");
}

}  // namespace

TEST_CASE("toy TU directory loads with expected sizes") {
  TempDir dir("toy");
  write_toy_dataset(dir.path, "toy");
  const Dataset d = load_tu_dataset(dir.path.string());
  REQUIRE(d.size() == 2);
  CHECK(d.graphs[0].node_count == 2);
  CHECK(d.graphs[0].edges.size() == 1);
  CHECK(d.graphs[1].node_count == 1);
  CHECK(d.graphs[1].edges.empty());
  // no attributes, no node labels -> single constant feature column
  CHECK(d.feature_dim == 1);
  CHECK(d.graphs[0].features.at(0, 0) == 1.0);
  // labels 7 and 9 remapped densely
  CHECK(d.graphs[0].class_id == 0);
  CHECK(d.graphs[1].class_id == 1);
}

TEST_CASE("node labels become one-hot features") {
  TempDir dir("labels");
  write_toy_dataset(dir.path, "lab");
  write_file(dir.path / "lab_node_labels.txt", "4\n6\n4\n");
  const Dataset d = load_tu_dataset(dir.path.string());
  CHECK(d.feature_dim == 2);
  CHECK(d.graphs[0].features.at(0, 0) == 1.0);
  CHECK(d.graphs[0].features.at(1, 1) == 1.0);
  CHECK(d.graphs[1].features.at(0, 0) == 1.0);
}

TEST_CASE("missing mandatory file names the file") {
  TempDir dir("missing");
  write_file(dir.path / "x_A.txt", "1, 2\n");
  write_file(dir.path / "x_graph_labels.txt", "1\n");
  try {
    load_tu_dataset(dir.path.string());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("graph_indicator") != std::string::npos);
  }
}

TEST_CASE("out-of-range node id reports the line") {
  TempDir dir("badedge");
  write_file(dir.path / "bad_A.txt", "1, 2\n2, 9\n");
  write_file(dir.path / "bad_graph_indicator.txt", "1\n1\n");
  write_file(dir.path / "bad_graph_labels.txt", "0\n");
  try {
    load_tu_dataset(dir.path.string());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":2") != std::string::npos);
    CHECK(msg.find("out of range") != std::string::npos);
  }
}

TEST_CASE("duplicate undirected edges collapse to one") {
  TempDir dir("dups");
  write_file(dir.path / "d_A.txt", "1, 2\n2, 1\n1, 2\n");
  write_file(dir.path / "d_graph_indicator.txt", "1\n1\n");
  write_file(dir.path / "d_graph_labels.txt", "0\n");
  const Dataset d = load_tu_dataset(dir.path.string());
  CHECK(d.graphs[0].edges.size() == 1);
}

TEST_CASE("ingestion round-trip preserves structure and labels") {
  Rng rng(404);
  SyntheticConfig cfg;
  cfg.graphs_per_family = 4;
  const Dataset original = make_synthetic_dataset(cfg, rng);

  TempDir dir("roundtrip");
  write_tu_dataset(original, dir.path.string(), "rt");
  const Dataset reloaded = load_tu_dataset(dir.path.string());

  REQUIRE(reloaded.size() == original.size());
  CHECK(reloaded.feature_dim == original.feature_dim);
  for (std::size_t i = 0; i < original.size(); ++i) {
    CHECK(reloaded.graphs[i].node_count == original.graphs[i].node_count);
    CHECK(reloaded.graphs[i].class_id == original.graphs[i].class_id);
    const std::set<std::pair<int, int>> e1(original.graphs[i].edges.begin(),
                                           original.graphs[i].edges.end());
    const std::set<std::pair<int, int>> e2(reloaded.graphs[i].edges.begin(),
                                           reloaded.graphs[i].edges.end());
    CHECK(e1 == e2);
    for (std::size_t v = 0; v < original.graphs[i].node_count; ++v) {
      for (std::size_t j = 0; j < original.feature_dim; ++j) {
        CHECK(reloaded.graphs[i].features.at(v, j) ==
              doctest::Approx(original.graphs[i].features.at(v, j)).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("split_by_class partitions exactly") {
  Rng rng(11);
  SyntheticConfig cfg;
  cfg.graphs_per_family = 5;
  const Dataset d = make_synthetic_dataset(cfg, rng);
  SplitSpec spec;
  spec.train_classes = {0, 1};
  spec.val_classes = {2};
  spec.test_classes = {3, 4, 5};
  const auto [train, val, test] = split_by_class(d, spec);
  CHECK(train.class_index.size() == 2);
  CHECK(val.class_index.size() == 1);
  CHECK(test.class_index.size() == 3);
  CHECK(train.size() + val.size() + test.size() == d.size());

  SUBCASE("all classes to train leaves the rest empty") {
    SplitSpec all;
    all.train_classes = {0, 1, 2, 3, 4, 5};
    const auto [t2, v2, s2] = split_by_class(d, all);
    CHECK(t2.size() == d.size());
    CHECK(v2.size() == 0);
    CHECK(s2.size() == 0);
  }

  SUBCASE("unknown class is rejected") {
    SplitSpec bad;
    bad.train_classes = {42};
    CHECK_THROWS_AS(split_by_class(d, bad), DataError);
  }

  SUBCASE("overlapping splits are rejected") {
    SplitSpec bad;
    bad.train_classes = {0};
    bad.val_classes = {0};
    CHECK_THROWS_AS(split_by_class(d, bad), DataError);
  }
}

TEST_CASE("random_split respects the requested counts") {
  Rng rng(5);
  SyntheticConfig cfg;
  cfg.graphs_per_family = 3;
  const Dataset d = make_synthetic_dataset(cfg, rng);
  Rng srng(77);
  const SplitSpec spec = random_split(d, 4, 1, 1, srng);
  CHECK(spec.train_classes.size() == 4);
  CHECK(spec.val_classes.size() == 1);
  CHECK(spec.test_classes.size() == 1);
  CHECK_THROWS_AS(random_split(d, 4, 1, 3, srng), ConfigError);
}

TEST_CASE("carve_validation moves the requested fraction of examples") {
  Rng rng(6);
  SyntheticConfig cfg;
  cfg.graphs_per_family = 10;
  const Dataset d = make_synthetic_dataset(cfg, rng);
  Rng crng(8);
  const auto [train, val] = carve_validation(d, 0.2, crng);
  CHECK(val.size() == d.size() / 5);
  CHECK(train.size() + val.size() == d.size());
}

TEST_CASE("episode shape and invariants") {
  Rng rng(21);
  SyntheticConfig cfg;
  cfg.graphs_per_family = 30;
  const Dataset d = make_synthetic_dataset(cfg, rng);

  Rng erng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const Episode ep = sample_episode(d, 5, 10, 15, erng);
    CHECK(ep.support.size() == 50);  // N*K
    CHECK(ep.query.size() == 75);
    std::vector<int> support_hist(5, 0), query_hist(5, 0);
    std::set<std::size_t> support_pos, query_pos;
    for (const auto& [pos, label] : ep.support) {
      ++support_hist[static_cast<std::size_t>(label)];
      support_pos.insert(pos);
      CHECK(d.graphs[pos].class_id == ep.class_map[static_cast<std::size_t>(label)]);
    }
    for (const auto& [pos, label] : ep.query) {
      ++query_hist[static_cast<std::size_t>(label)];
      query_pos.insert(pos);
    }
    for (int c = 0; c < 5; ++c) {
      CHECK(support_hist[static_cast<std::size_t>(c)] == 10);
      CHECK(query_hist[static_cast<std::size_t>(c)] == 15);
    }
    for (std::size_t pos : support_pos) CHECK(query_pos.count(pos) == 0);
  }
}

TEST_CASE("one-way one-shot episode is degenerate but valid") {
  Rng rng(2);
  SyntheticConfig cfg;
  cfg.graphs_per_family = 4;
  const Dataset d = make_synthetic_dataset(cfg, rng);
  Rng erng(3);
  const Episode ep = sample_episode(d, 1, 1, 1, erng);
  CHECK(ep.support.size() == 1);
  CHECK(ep.query.size() == 1);
  CHECK(ep.support[0].second == 0);
  CHECK(ep.query[0].second == 0);
  CHECK(d.graphs[ep.support[0].first].class_id == d.graphs[ep.query[0].first].class_id);
}

TEST_CASE("identical seeds give identical episodes") {
  Rng rng(15);
  SyntheticConfig cfg;
  cfg.graphs_per_family = 12;
  const Dataset d = make_synthetic_dataset(cfg, rng);
  Rng r1(9001), r2(9001);
  const Episode a = sample_episode(d, 3, 2, 2, r1);
  const Episode b = sample_episode(d, 3, 2, 2, r2);
  CHECK(a.support == b.support);
  CHECK(a.query == b.query);
  CHECK(a.class_map == b.class_map);
}

// Statistics of the public corpora, checked only when the data is present
// under ASMAML_DATA_ROOT (COIL-DEL: 3900 graphs averaging ~21.5 nodes and
// ~54.2 edges; Letter-High: 2250 graphs averaging ~4.7 nodes).
TEST_CASE("public dataset statistics when available") {
  const char* root = std::getenv("ASMAML_DATA_ROOT");
  if (!root) return;
  auto stats = [](const Dataset& d) {
    double nodes = 0.0, edges = 0.0;
    for (const GraphData& g : d.graphs) {
      nodes += static_cast<double>(g.node_count);
      edges += static_cast<double>(g.edges.size());
    }
    return std::pair<double, double>{nodes / static_cast<double>(d.size()),
                                     edges / static_cast<double>(d.size())};
  };
  if (fs::is_directory(fs::path(root) / "COIL-DEL")) {
    const Dataset d = load_tu_dataset((fs::path(root) / "COIL-DEL").string());
    CHECK(d.size() == 3900);
    const auto [avg_nodes, avg_edges] = stats(d);
    CHECK(avg_nodes == doctest::Approx(21.54).epsilon(0.01));
    CHECK(avg_edges == doctest::Approx(54.24).epsilon(0.01));
  }
  if (fs::is_directory(fs::path(root) / "Letter-high")) {
    const Dataset d = load_tu_dataset((fs::path(root) / "Letter-high").string());
    CHECK(d.size() == 2250);
    CHECK(stats(d).first == doctest::Approx(4.67).epsilon(0.01));
  }
}

TEST_CASE("scarce classes are excluded; sampling fails when too few remain") {
  std::vector<GraphData> graphs;
  Rng rng(1);
  SyntheticConfig cfg;
  cfg.feature_dim = 2;
  // class 0: 5 graphs, class 1: only 2
  for (int i = 0; i < 5; ++i) graphs.push_back(make_family_graph(0, 6, cfg, rng));
  for (int i = 0; i < 2; ++i) {
    GraphData g = make_family_graph(1, 6, cfg, rng);
    g.class_id = 1;
    graphs.push_back(g);
  }
  const Dataset d = Dataset::from_graphs(std::move(graphs));
  EpisodeSampler ok(d, 1, 1, 1, /*warn=*/false);  // needs 2 graphs per class
  CHECK(ok.eligible_classes() == std::vector<int>{0, 1});
  EpisodeSampler narrow(d, 1, 2, 1, /*warn=*/false);  // needs 3; class 1 has 2
  CHECK(narrow.eligible_classes() == std::vector<int>{0});
  CHECK_THROWS_AS(EpisodeSampler(d, 2, 2, 1, false), DataError);
}
