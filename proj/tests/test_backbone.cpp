#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "asmaml/autodiff.hpp"
#include "asmaml/backbone.hpp"
#include "asmaml/rng.hpp"
#include "asmaml/synthetic.hpp"

using namespace asmaml;
using gnn::Activation;
using gnn::Topology;

namespace {

GraphData make_graph(std::size_t n, std::vector<std::pair<int, int>> edges, Tensor features,
                     int cls = 0) {
  GraphData g;
  g.node_count = n;
  g.edges = std::move(edges);
  g.features = std::move(features);
  g.class_id = cls;
  g.validate();
  return g;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("sage layer on an isolated node with identity weights") {
  ad::Tape tape;
  Topology topo{1, {}};
  const int h = tape.constant(Tensor::matrix(1, 2, 0.0));
  Tensor eye({2, 2}, {1.0, 0.0, 0.0, 1.0});
  const int w = tape.input("w", eye);
  const int out = gnn::sage_layer(tape, topo, h, w, Activation::Sigmoid);
  CHECK(tape.value(out)[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(tape.value(out)[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("sage layer treats equal neighbors as the node itself") {
  ad::Tape tape;
  Topology topo{2, {{0, 1}}};
  Tensor feats({2, 2}, {0.3, -0.4, 0.3, -0.4});
  Rng rng(4);
  Tensor w = Tensor::matrix(2, 3);
  for (double& v : w.values()) v = rng.normal();
  const int h = tape.constant(feats);
  const int wn = tape.input("w", w);
  const int out = gnn::sage_layer(tape, topo, h, wn, Activation::Tanh);
  // both rows must equal tanh(h W) of the single shared feature vector
  for (std::size_t j = 0; j < 3; ++j) {
    const double expect = std::tanh(0.3 * w.at(0, j) + (-0.4) * w.at(1, j));
    CHECK(tape.value(out)[j] == doctest::Approx(expect).epsilon(1e-14));
    CHECK(tape.value(out)[3 + j] == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("sage layer on a path matches a dense hand computation") {
  // path 0-1-2 with distinct features; mean includes the node itself
  ad::Tape tape;
  Topology topo{3, {{0, 1}, {1, 2}}};
  Tensor feats({3, 2}, {1.0, 0.0, 0.0, 1.0, 2.0, -1.0});
  Tensor w({2, 2}, {0.5, -0.25, 1.5, 0.75});
  const int out = gnn::sage_layer(tape, topo, tape.constant(feats), tape.input("w", w),
                                  Activation::Sigmoid);
  const double agg[3][2] = {{0.5, 0.5}, {1.0, 0.0}, {1.0, 0.0}};
  for (std::size_t v = 0; v < 3; ++v) {
    for (std::size_t j = 0; j < 2; ++j) {
      const double pre = agg[v][0] * w.at(0, j) + agg[v][1] * w.at(1, j);
      CHECK(tape.value(out)[v * 2 + j] == doctest::Approx(sigmoid(pre)).epsilon(1e-12));
    }
  }
}

TEST_CASE("sag_pool keeps everything at ratio one and preserves edges") {
  ad::Tape tape;
  Topology topo{4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}}};
  Rng rng(9);
  Tensor h = Tensor::matrix(4, 3);
  for (double& v : h.values()) v = rng.normal();
  Tensor att = Tensor::matrix(3, 1);
  for (double& v : att.values()) v = rng.normal();
  const auto res = gnn::sag_pool(tape, topo, tape.constant(h), tape.input("a", att), 1.0,
                                 Activation::Tanh);
  CHECK(res.kept == std::vector<int>{0, 1, 2, 3});
  CHECK(res.topology.n == 4);
  CHECK(res.topology.edges.size() == topo.edges.size());
}

TEST_CASE("sag_pool on the star graph matches the dense oracle") {
  // star with center 0 and three leaves, identical features everywhere
  ad::Tape tape;
  Topology topo{4, {{0, 1}, {0, 2}, {0, 3}}};
  Tensor h = Tensor::matrix(4, 2, 0.7);
  Tensor att({2, 1}, {0.9, -0.3});

  // dense oracle: scores = tanh(Dt^{-1/2} At Dt^{-1/2} H att), At = A + I
  const double dt[4] = {4.0, 2.0, 2.0, 2.0};
  double norm[4][4] = {};
  for (int i = 0; i < 4; ++i) norm[i][i] = 1.0 / dt[i];
  for (int leaf = 1; leaf < 4; ++leaf) {
    norm[0][leaf] = norm[leaf][0] = 1.0 / std::sqrt(dt[0] * dt[static_cast<std::size_t>(leaf)]);
  }
  double expect_scores[4];
  const double hatt = 0.7 * 0.9 + 0.7 * (-0.3);
  for (int i = 0; i < 4; ++i) {
    double acc = 0.0;
    for (int j = 0; j < 4; ++j) acc += norm[i][j] * hatt;
    expect_scores[i] = std::tanh(acc);
  }

  const auto res = gnn::sag_pool(tape, topo, tape.constant(h), tape.input("a", att), 0.5,
                                 Activation::Tanh);
  for (int i = 0; i < 4; ++i) {
    CHECK(tape.value(res.scores)[static_cast<std::size_t>(i)] ==
          doctest::Approx(expect_scores[i]).epsilon(1e-12));
  }
  // leaves share one score, the center differs; ratio 0.5 keeps ceil(2) nodes
  CHECK(res.kept.size() == 2);
  // the center's normalization row sums higher, so it wins; the leaf tie
  // breaks toward the lowest id
  CHECK(expect_scores[0] > expect_scores[1]);
  CHECK(res.kept == std::vector<int>{0, 1});
  // kept features are the original rows scaled by their scores
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(tape.value(res.pooled)[j] == doctest::Approx(0.7 * expect_scores[0]).epsilon(1e-12));
    CHECK(tape.value(res.pooled)[2 + j] ==
          doctest::Approx(0.7 * expect_scores[1]).epsilon(1e-12));
  }
}

TEST_CASE("single node is always kept regardless of ratio") {
  ad::Tape tape;
  Topology topo{1, {}};
  const auto res = gnn::sag_pool(tape, topo, tape.constant(Tensor::matrix(1, 2, 1.0)),
                                 tape.input("a", Tensor::matrix(2, 1, 0.5)), 0.01,
                                 Activation::Tanh);
  CHECK(res.kept == std::vector<int>{0});
  CHECK(res.topology.n == 1);
}

TEST_CASE("readout is relu(mean || max)") {
  ad::Tape tape;
  const Tensor m({2, 2}, {1.0, -2.0, 3.0, 4.0});
  const int r = gnn::readout(tape, tape.constant(m), Activation::Relu);
  REQUIRE(tape.cols(r) == 4);
  CHECK(tape.value(r)[0] == 2.0);
  CHECK(tape.value(r)[1] == 1.0);
  CHECK(tape.value(r)[2] == 3.0);
  CHECK(tape.value(r)[3] == 4.0);

  SUBCASE("single node reduces to relu(h || h)") {
    const Tensor one({1, 2}, {0.5, -1.0});
    const int r1 = gnn::readout(tape, tape.constant(one), Activation::Relu);
    CHECK(tape.value(r1)[0] == 0.5);
    CHECK(tape.value(r1)[1] == 0.0);
    CHECK(tape.value(r1)[2] == 0.5);
    CHECK(tape.value(r1)[3] == 0.0);
  }
}

TEST_CASE("embedding length is twice the hidden dim and survivors shrink") {
  Rng rng(17);
  SyntheticConfig scfg;
  scfg.graphs_per_family = 1;
  scfg.min_nodes = 12;
  scfg.max_nodes = 12;
  const Dataset data = make_synthetic_dataset(scfg, rng);

  gnn::BackboneConfig cfg;
  cfg.layers = 3;
  cfg.hidden_dim = 8;
  cfg.pool_ratio = 0.5;
  Rng prng(23);
  const ParamSet params = gnn::init_backbone_params(data.feature_dim, cfg, prng);

  for (const GraphData& g : data.graphs) {
    ad::Tape tape;
    ad::ParamNodeIds ids;
    for (const auto& [name, t] : params) ids.emplace(name, tape.input(name, t));
    const auto res = gnn::embed_graph(tape, ids, cfg, g);
    CHECK(tape.cols(res.z) == 2 * cfg.hidden_dim);
    // survivor chain: ceil(rho * n) with a floor of one
    std::size_t expect = g.node_count;
    for (int l = 0; l < cfg.layers; ++l) {
      expect = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.5 * expect)));
    }
    CHECK(res.activations.final_topology.n == expect);
    CHECK(res.activations.final_hidden.rows() == expect);
  }
}

TEST_CASE("embedding is invariant to node permutation when scores are distinct") {
  Rng rng(29);
  gnn::BackboneConfig cfg;
  cfg.layers = 2;
  cfg.hidden_dim = 6;
  cfg.pool_ratio = 0.5;

  for (int trial = 0; trial < 10; ++trial) {
    // random connected-ish graph with distinct random features
    const std::size_t n = 6 + rng.uniform_int(4);
    std::vector<std::pair<int, int>> edges;
    for (std::size_t v = 1; v < n; ++v) {
      edges.emplace_back(static_cast<int>(rng.uniform_int(v)), static_cast<int>(v));
    }
    Tensor feats = Tensor::matrix(n, 3);
    for (double& v : feats.values()) v = rng.normal();
    const GraphData g = make_graph(n, edges, feats);

    Rng prng(100 + static_cast<std::uint64_t>(trial));
    const ParamSet params = gnn::init_backbone_params(3, cfg, prng);

    // permute node ids
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng srng(200 + static_cast<std::uint64_t>(trial));
    srng.shuffle(perm);
    std::vector<std::pair<int, int>> pedges;
    for (const auto& [u, v] : edges) {
      int a = perm[static_cast<std::size_t>(u)];
      int b = perm[static_cast<std::size_t>(v)];
      pedges.emplace_back(std::min(a, b), std::max(a, b));
    }
    Tensor pfeats = Tensor::matrix(n, 3);
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t j = 0; j < 3; ++j) {
        pfeats.at(static_cast<std::size_t>(perm[v]), j) = feats.at(v, j);
      }
    }
    const GraphData pg = make_graph(n, pedges, pfeats);

    const Tensor z1 = gnn::embed_graph_value(params, cfg, g);
    const Tensor z2 = gnn::embed_graph_value(params, cfg, pg);
    for (std::size_t j = 0; j < z1.size(); ++j) {
      CHECK(z1[j] == doctest::Approx(z2[j]).epsilon(1e-10));
    }
  }
}

TEST_CASE("classifier with zero weights gives uniform logits and ln N loss") {
  gnn::BackboneConfig cfg;
  cfg.hidden_dim = 4;
  ParamSet params;
  Rng rng(1);
  for (auto& [name, t] : gnn::init_classifier_params(cfg, 5, rng)) {
    for (double& v : t.values()) v = 0.0;
    params.emplace(name, std::move(t));
  }
  ad::Tape tape;
  ad::ParamNodeIds ids;
  for (const auto& [name, t] : params) ids.emplace(name, tape.input(name, t));
  const int z = tape.constant(Tensor::matrix(3, 8, 0.3));
  const int logits = gnn::classify(tape, ids, cfg, z);
  for (double v : tape.value(logits)) CHECK(v == 0.0);
  const int ce = tape.softmax_cross_entropy(logits, {0, 3, 2});
  CHECK(tape.scalar(ce) == doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("episode_forward accuracy and gradient consistency") {
  Rng rng(37);
  SyntheticConfig scfg;
  scfg.graphs_per_family = 4;
  scfg.min_nodes = 5;
  scfg.max_nodes = 8;
  const Dataset data = make_synthetic_dataset(scfg, rng);

  gnn::BackboneConfig cfg;
  cfg.layers = 2;
  cfg.hidden_dim = 5;
  Rng prng(41);
  ParamSet params = gnn::init_backbone_params(data.feature_dim, cfg, prng);
  for (auto& [name, t] : gnn::init_classifier_params(cfg, 3, prng)) {
    params.emplace(name, std::move(t));
  }

  std::vector<const GraphData*> graphs;
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t k = 0; k < 2; ++k) {
      graphs.push_back(&data.graphs[data.class_index.at(c)[k]]);
      labels.push_back(c);
    }
  }

  ad::Tape tape;
  ad::ParamNodeIds ids;
  for (const auto& [name, t] : params) ids.emplace(name, tape.input(name, t));
  const auto fwd = gnn::episode_forward(tape, ids, cfg, graphs, labels);
  CHECK(fwd.loss > 0.0);
  CHECK(fwd.ani >= 0.0);
  CHECK(fwd.predictions.size() == graphs.size());
  CHECK(fwd.activations.size() == graphs.size());

  const ad::Objective obj = [&](ad::Tape& t, const ad::ParamNodeIds& pid) {
    return gnn::episode_forward(t, pid, cfg, graphs, labels).loss_node;
  };
  CHECK(ad::finite_diff_check(obj, params, 1e-5, 50, 43) < 1e-4);
}
