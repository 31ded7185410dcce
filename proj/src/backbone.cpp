#include "asmaml/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asmaml/ani.hpp"
#include "asmaml/error.hpp"

namespace asmaml::gnn {

Activation activation_from_name(const std::string& name) {
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw ConfigError("unknown activation '" + name + "'");
}

namespace {

int apply_activation(ad::Tape& tape, int x, Activation act) {
  switch (act) {
    case Activation::Sigmoid: return tape.sigmoid(x);
    case Activation::Tanh: return tape.tanh_(x);
    case Activation::Relu: return tape.relu(x);
  }
  throw ConfigError("bad activation");
}

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor w = Tensor::matrix(fan_in, fan_out);
  const double std = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : w.values()) v = rng.normal(0.0, std);
  return w;
}

}  // namespace

ParamSet init_backbone_params(std::size_t feature_dim, const BackboneConfig& cfg, Rng& rng) {
  if (cfg.layers < 1 || cfg.hidden_dim < 1) throw ConfigError("backbone needs layers>=1, dim>=1");
  if (!(cfg.pool_ratio > 0.0 && cfg.pool_ratio <= 1.0)) {
    throw ConfigError("pool_ratio must be in (0, 1]");
  }
  ParamSet p;
  std::size_t d_in = feature_dim;
  for (int l = 1; l <= cfg.layers; ++l) {
    p.emplace("conv" + std::to_string(l) + ".weight", glorot(d_in, cfg.hidden_dim, rng));
    p.emplace("pool" + std::to_string(l) + ".att", glorot(cfg.hidden_dim, 1, rng));
    d_in = cfg.hidden_dim;
  }
  return p;
}

ParamSet init_classifier_params(const BackboneConfig& cfg, int way, Rng& rng) {
  if (way < 1) throw ConfigError("classifier needs way >= 1");
  ParamSet p;
  std::size_t in = 2 * cfg.hidden_dim;
  int h = 1;
  for (std::size_t width : cfg.classifier_widths()) {
    const std::string base = "clf.h" + std::to_string(h++);
    p.emplace(base + ".weight", glorot(in, width, rng));
    p.emplace(base + ".bias", Tensor::matrix(1, width));
    in = width;
  }
  p.emplace("clf.out.weight", glorot(in, static_cast<std::size_t>(way), rng));
  p.emplace("clf.out.bias", Tensor::matrix(1, static_cast<std::size_t>(way)));
  return p;
}

Tensor mean_aggregation_operator(const Topology& topo) {
  Tensor P = Tensor::matrix(topo.n, topo.n);
  std::vector<double> deg(topo.n, 1.0);  // self counts
  for (const auto& [u, v] : topo.edges) {
    deg[static_cast<std::size_t>(u)] += 1.0;
    deg[static_cast<std::size_t>(v)] += 1.0;
  }
  for (std::size_t v = 0; v < topo.n; ++v) P.at(v, v) = 1.0 / deg[v];
  for (const auto& [u, v] : topo.edges) {
    P.at(static_cast<std::size_t>(u), static_cast<std::size_t>(v)) =
        1.0 / deg[static_cast<std::size_t>(u)];
    P.at(static_cast<std::size_t>(v), static_cast<std::size_t>(u)) =
        1.0 / deg[static_cast<std::size_t>(v)];
  }
  return P;
}

Tensor score_normalization_operator(const Topology& topo) {
  // D^{-1/2} (A + I) D^{-1/2} with degrees taken from A + I.
  std::vector<double> deg(topo.n, 1.0);
  for (const auto& [u, v] : topo.edges) {
    deg[static_cast<std::size_t>(u)] += 1.0;
    deg[static_cast<std::size_t>(v)] += 1.0;
  }
  Tensor N = Tensor::matrix(topo.n, topo.n);
  for (std::size_t v = 0; v < topo.n; ++v) N.at(v, v) = 1.0 / deg[v];
  for (const auto& [u, v] : topo.edges) {
    const double w = 1.0 / std::sqrt(deg[static_cast<std::size_t>(u)] *
                                     deg[static_cast<std::size_t>(v)]);
    N.at(static_cast<std::size_t>(u), static_cast<std::size_t>(v)) = w;
    N.at(static_cast<std::size_t>(v), static_cast<std::size_t>(u)) = w;
  }
  return N;
}

int sage_layer(ad::Tape& tape, const Topology& topo, int h, int weight, Activation act) {
  if (tape.rows(h) != topo.n) throw ShapeError("sage_layer: hidden rows != node count");
  const int p = tape.constant(mean_aggregation_operator(topo));
  return apply_activation(tape, tape.matmul(tape.matmul(p, h), weight), act);
}

PoolResult sag_pool(ad::Tape& tape, const Topology& topo, int h, int attention,
                    double ratio, Activation score_act) {
  if (topo.n == 0) throw ShapeError("sag_pool on an empty topology");
  PoolResult out;
  const int norm = tape.constant(score_normalization_operator(topo));
  out.scores = apply_activation(tape, tape.matmul(tape.matmul(norm, h), attention), score_act);

  const std::vector<double>& s = tape.value(out.scores);
  const std::size_t keep =
      std::max<std::size_t>(1, static_cast<std::size_t>(
                                   std::ceil(ratio * static_cast<double>(topo.n))));
  std::vector<int> order(topo.n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (s[static_cast<std::size_t>(a)] != s[static_cast<std::size_t>(b)]) {
      return s[static_cast<std::size_t>(a)] > s[static_cast<std::size_t>(b)];
    }
    return a < b;
  });
  out.kept.assign(order.begin(), order.begin() + static_cast<long>(std::min(keep, topo.n)));
  std::sort(out.kept.begin(), out.kept.end());

  std::vector<int> remap(topo.n, -1);
  for (std::size_t i = 0; i < out.kept.size(); ++i) remap[static_cast<std::size_t>(out.kept[i])] = static_cast<int>(i);
  out.topology.n = out.kept.size();
  for (const auto& [u, v] : topo.edges) {
    const int ru = remap[static_cast<std::size_t>(u)];
    const int rv = remap[static_cast<std::size_t>(v)];
    if (ru >= 0 && rv >= 0) out.topology.edges.emplace_back(std::min(ru, rv), std::max(ru, rv));
  }

  const int kept_h = tape.gather_rows(h, out.kept);
  const int kept_s = tape.gather_rows(out.scores, out.kept);
  out.pooled = tape.scale_rows(kept_h, kept_s);
  return out;
}

int readout(ad::Tape& tape, int h, Activation act) {
  return apply_activation(tape, tape.concat_cols(tape.rowmean(h), tape.colmax(h)), act);
}

EmbedResult embed_graph(ad::Tape& tape, const ad::ParamNodeIds& params,
                        const BackboneConfig& cfg, const GraphData& graph) {
  Topology topo{graph.node_count, graph.edges};
  int h = tape.constant(graph.features);
  int z = -1;
  EmbedResult out;
  for (int l = 1; l <= cfg.layers; ++l) {
    const int w = params.at("conv" + std::to_string(l) + ".weight");
    const int att = params.at("pool" + std::to_string(l) + ".att");
    h = sage_layer(tape, topo, h, w, cfg.conv_activation);
    PoolResult pooled = sag_pool(tape, topo, h, att, cfg.pool_ratio, cfg.score_activation);
    h = pooled.pooled;
    topo = pooled.topology;
    const int r = readout(tape, h, cfg.readout_activation);
    z = (l == 1) ? r : tape.add(z, r);
  }
  out.z = z;
  out.activations.final_topology = topo;
  out.activations.final_hidden = tape.value_tensor(h);
  return out;
}

int classify(ad::Tape& tape, const ad::ParamNodeIds& params, const BackboneConfig& cfg,
             int z_matrix) {
  int x = z_matrix;
  int h = 1;
  for (std::size_t i = 0; i < cfg.classifier_widths().size(); ++i) {
    const std::string base = "clf.h" + std::to_string(h++);
    x = tape.relu(tape.bias_add(tape.matmul(x, params.at(base + ".weight")),
                                params.at(base + ".bias")));
  }
  return tape.bias_add(tape.matmul(x, params.at("clf.out.weight")), params.at("clf.out.bias"));
}

EpisodeForwardResult episode_forward(ad::Tape& tape, const ad::ParamNodeIds& params,
                                     const BackboneConfig& cfg,
                                     const std::vector<const GraphData*>& graphs,
                                     const std::vector<int>& labels) {
  if (graphs.empty()) throw ShapeError("episode_forward on an empty batch");
  if (graphs.size() != labels.size()) throw ShapeError("one label per graph required");

  EpisodeForwardResult out;
  std::vector<int> zs;
  std::vector<double> anis;
  zs.reserve(graphs.size());
  for (const GraphData* g : graphs) {
    EmbedResult er = embed_graph(tape, params, cfg, *g);
    zs.push_back(er.z);
    anis.push_back(ani::ani_graph(er.activations.final_topology.n,
                                  er.activations.final_topology.edges,
                                  er.activations.final_hidden));
    out.activations.push_back(std::move(er.activations));
  }
  const int zmat = tape.stack_rows(zs);
  const int logits = classify(tape, params, cfg, zmat);
  out.loss_node = tape.softmax_cross_entropy(logits, labels);
  out.loss = tape.scalar(out.loss_node);
  out.ani = ani::ani_batch(anis);

  const std::vector<double>& lv = tape.value(logits);
  const std::size_t way = tape.cols(logits);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < way; ++j) {
      if (lv[i * way + j] > lv[i * way + arg]) arg = j;
    }
    out.predictions.push_back(static_cast<int>(arg));
    if (static_cast<int>(arg) == labels[i]) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(graphs.size());
  return out;
}

Tensor embed_graph_value(const ParamSet& params, const BackboneConfig& cfg,
                         const GraphData& graph) {
  ad::Tape tape;
  ad::ParamNodeIds ids;
  for (const auto& [name, t] : params) ids.emplace(name, tape.input(name, t));
  EmbedResult er = embed_graph(tape, ids, cfg, graph);
  return tape.value_tensor(er.z);
}

}  // namespace asmaml::gnn
