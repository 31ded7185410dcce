#include "asmaml/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <string>

#include "asmaml/autodiff.hpp"
#include "asmaml/error.hpp"
#include "asmaml/meta.hpp"

namespace asmaml::base {

std::vector<std::vector<int>> discretize_node_labels(
    const std::vector<const GraphData*>& graphs, int bins) {
  if (graphs.empty()) return {};
  const std::size_t dim = graphs[0]->features.cols();
  std::vector<double> lo(dim, 0.0), hi(dim, 0.0);
  bool first = true;
  for (const GraphData* g : graphs) {
    for (std::size_t v = 0; v < g->node_count; ++v) {
      for (std::size_t j = 0; j < dim; ++j) {
        const double x = g->features.at(v, j);
        if (first) {
          lo[j] = hi[j] = x;
        } else {
          lo[j] = std::min(lo[j], x);
          hi[j] = std::max(hi[j], x);
        }
      }
      first = false;
    }
  }
  std::map<std::vector<int>, int> label_of;
  std::vector<std::vector<int>> out;
  std::vector<int> tuple(dim);
  for (const GraphData* g : graphs) {
    std::vector<int> labels(g->node_count);
    for (std::size_t v = 0; v < g->node_count; ++v) {
      for (std::size_t j = 0; j < dim; ++j) {
        const double range = hi[j] - lo[j];
        int b = 0;
        if (range > 0.0) {
          b = static_cast<int>(std::floor((g->features.at(v, j) - lo[j]) / range *
                                          static_cast<double>(bins)));
          b = std::clamp(b, 0, bins - 1);
        }
        tuple[j] = b;
      }
      auto [it, inserted] = label_of.try_emplace(tuple, static_cast<int>(label_of.size()));
      labels[v] = it->second;
    }
    out.push_back(std::move(labels));
  }
  return out;
}

namespace {

using Histogram = std::map<long long, double>;

double hist_dot(const Histogram& a, const Histogram& b) {
  double acc = 0.0;
  for (const auto& [key, va] : a) {
    auto it = b.find(key);
    if (it != b.end()) acc += va * it->second;
  }
  return acc;
}

double normalized_similarity(const Histogram& a, const Histogram& b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  const double cross = hist_dot(a, b);
  const double denom = std::sqrt(hist_dot(a, a) * hist_dot(b, b));
  return denom > 0.0 ? cross / denom : 0.0;
}

// Label-count histograms of every refinement round, concatenated; the label
// dictionary is shared by both graphs so equal signatures hash equally.
std::pair<Histogram, Histogram> wl_histograms(const GraphData& g1, const GraphData& g2,
                                              const std::vector<int>& labels1,
                                              const std::vector<int>& labels2,
                                              int iterations) {
  const auto adj1 = g1.adjacency_lists();
  const auto adj2 = g2.adjacency_lists();
  std::vector<int> cur1 = labels1;
  std::vector<int> cur2 = labels2;

  Histogram h1, h2;
  auto note = [](Histogram& h, int round, int label) {
    h[(static_cast<long long>(round) << 32) | static_cast<unsigned>(label)] += 1.0;
  };
  for (std::size_t v = 0; v < g1.node_count; ++v) note(h1, 0, cur1[v]);
  for (std::size_t v = 0; v < g2.node_count; ++v) note(h2, 0, cur2[v]);

  std::map<std::pair<int, std::vector<int>>, int> dictionary;
  for (int round = 1; round <= iterations; ++round) {
    auto refine = [&](const std::vector<std::vector<int>>& adj, std::vector<int>& cur) {
      std::vector<int> next(cur.size());
      for (std::size_t v = 0; v < cur.size(); ++v) {
        std::vector<int> neigh;
        neigh.reserve(adj[v].size());
        for (int u : adj[v]) neigh.push_back(cur[static_cast<std::size_t>(u)]);
        std::sort(neigh.begin(), neigh.end());
        auto [it, inserted] = dictionary.try_emplace({cur[v], std::move(neigh)},
                                                     static_cast<int>(dictionary.size()));
        next[v] = it->second;
      }
      cur = std::move(next);
    };
    refine(adj1, cur1);
    refine(adj2, cur2);
    for (std::size_t v = 0; v < g1.node_count; ++v) note(h1, round, cur1[v]);
    for (std::size_t v = 0; v < g2.node_count; ++v) note(h2, round, cur2[v]);
  }
  return {std::move(h1), std::move(h2)};
}

Histogram sp_histogram(const GraphData& g, int cap) {
  const auto adj = g.adjacency_lists();
  Histogram h;
  std::vector<int> dist(g.node_count);
  for (std::size_t s = 0; s < g.node_count; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[s] = 0;
    std::deque<std::size_t> frontier{s};
    while (!frontier.empty()) {
      const std::size_t v = frontier.front();
      frontier.pop_front();
      for (int u : adj[v]) {
        if (dist[static_cast<std::size_t>(u)] < 0) {
          dist[static_cast<std::size_t>(u)] = dist[v] + 1;
          frontier.push_back(static_cast<std::size_t>(u));
        }
      }
    }
    for (std::size_t t = s + 1; t < g.node_count; ++t) {
      if (dist[t] > 0) h[std::min(dist[t], cap)] += 1.0;  // unordered pair once
    }
  }
  return h;
}

int triple_type(const GraphData& g, const std::vector<std::vector<bool>>& adj, int a, int b,
                int c) {
  (void)g;
  int edges = 0;
  if (adj[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]) ++edges;
  if (adj[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)]) ++edges;
  if (adj[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)]) ++edges;
  return edges;
}

std::vector<double> graphlet_distribution(const GraphData& g, int sample_count, Rng& rng,
                                          std::size_t exact_limit) {
  std::vector<double> dist(4, 0.0);
  const std::size_t n = g.node_count;
  if (n < 3) return dist;  // empty distribution; callers apply the degenerate rule
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (const auto& [u, v] : g.edges) {
    adj[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = true;
    adj[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)] = true;
  }
  const std::size_t triples = n * (n - 1) * (n - 2) / 6;
  double total = 0.0;
  if (triples <= exact_limit) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        for (std::size_t c = b + 1; c < n; ++c) {
          dist[static_cast<std::size_t>(triple_type(g, adj, static_cast<int>(a),
                                                    static_cast<int>(b), static_cast<int>(c)))] +=
              1.0;
          total += 1.0;
        }
      }
    }
  } else {
    for (int s = 0; s < sample_count; ++s) {
      const auto pick = rng.sample_without_replacement(n, 3);
      dist[static_cast<std::size_t>(triple_type(g, adj, static_cast<int>(pick[0]),
                                                static_cast<int>(pick[1]),
                                                static_cast<int>(pick[2])))] += 1.0;
      total += 1.0;
    }
  }
  for (double& v : dist) v /= total;
  return dist;
}

}  // namespace

double wl_kernel(const GraphData& g1, const GraphData& g2, const std::vector<int>& labels1,
                 const std::vector<int>& labels2, const WlConfig& cfg) {
  if (cfg.iterations < 0) throw ConfigError("WL iterations must be >= 0");
  auto [h1, h2] = wl_histograms(g1, g2, labels1, labels2, cfg.iterations);
  return normalized_similarity(h1, h2);
}

double wl_kernel(const GraphData& g1, const GraphData& g2, const WlConfig& cfg, int bins) {
  const auto labels = discretize_node_labels({&g1, &g2}, bins);
  return wl_kernel(g1, g2, labels[0], labels[1], cfg);
}

double sp_kernel(const GraphData& g1, const GraphData& g2, int length_cap) {
  return normalized_similarity(sp_histogram(g1, length_cap), sp_histogram(g2, length_cap));
}

double graphlet_kernel(const GraphData& g1, const GraphData& g2, int sample_count, Rng& rng,
                       std::size_t exact_limit) {
  if (sample_count < 1) throw ConfigError("graphlet sample count must be >= 1");
  const auto d1 = graphlet_distribution(g1, sample_count, rng, exact_limit);
  const auto d2 = graphlet_distribution(g2, sample_count, rng, exact_limit);
  const double t1 = std::accumulate(d1.begin(), d1.end(), 0.0);
  const double t2 = std::accumulate(d2.begin(), d2.end(), 0.0);
  if (t1 == 0.0 && t2 == 0.0) return 1.0;
  if (t1 == 0.0 || t2 == 0.0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < d1.size(); ++i) acc += d1[i] * d2[i];
  return acc;
}

ProtoResult prototypical_predict_kernel(const Tensor& k_query_support,
                                        const Tensor& k_support_support,
                                        const std::vector<double>& k_query_self,
                                        const std::vector<int>& support_labels,
                                        const std::vector<int>& query_labels, int way) {
  const std::size_t q = k_query_support.rows();
  const std::size_t s = k_query_support.cols();
  if (support_labels.size() != s || k_support_support.rows() != s || k_query_self.size() != q) {
    throw ShapeError("prototypical kernel inputs disagree on sizes");
  }
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(way));
  for (std::size_t i = 0; i < s; ++i) {
    by_class.at(static_cast<std::size_t>(support_labels[i])).push_back(i);
  }
  // Class self-similarity term is query-independent.
  std::vector<double> class_term(static_cast<std::size_t>(way), 0.0);
  for (int c = 0; c < way; ++c) {
    const auto& members = by_class[static_cast<std::size_t>(c)];
    if (members.empty()) throw ShapeError("support class without members");
    double acc = 0.0;
    for (std::size_t a : members) {
      for (std::size_t b : members) acc += k_support_support.at(a, b);
    }
    const double k = static_cast<double>(members.size());
    class_term[static_cast<std::size_t>(c)] = acc / (k * k);
  }

  ProtoResult out;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < q; ++i) {
    int best = 0;
    double best_d = 0.0;
    for (int c = 0; c < way; ++c) {
      const auto& members = by_class[static_cast<std::size_t>(c)];
      double cross = 0.0;
      for (std::size_t m : members) cross += k_query_support.at(i, m);
      const double d2 = k_query_self[i] -
                        2.0 * cross / static_cast<double>(members.size()) +
                        class_term[static_cast<std::size_t>(c)];
      if (c == 0 || d2 < best_d) {  // strict: ties keep the lowest label
        best = c;
        best_d = d2;
      }
    }
    out.predicted.push_back(best);
    if (best == query_labels[i]) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(q);
  return out;
}

ProtoResult prototypical_predict_embedding(const Tensor& support_embeddings,
                                           const std::vector<int>& support_labels,
                                           const Tensor& query_embeddings,
                                           const std::vector<int>& query_labels, int way) {
  const std::size_t d = support_embeddings.cols();
  if (query_embeddings.cols() != d) throw ShapeError("embedding widths differ");
  Tensor prototypes = Tensor::matrix(static_cast<std::size_t>(way), d);
  std::vector<double> counts(static_cast<std::size_t>(way), 0.0);
  for (std::size_t i = 0; i < support_embeddings.rows(); ++i) {
    const std::size_t c = static_cast<std::size_t>(support_labels[i]);
    counts[c] += 1.0;
    for (std::size_t j = 0; j < d; ++j) prototypes.at(c, j) += support_embeddings.at(i, j);
  }
  for (int c = 0; c < way; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0.0) throw ShapeError("empty support class");
    for (std::size_t j = 0; j < d; ++j) {
      prototypes.at(static_cast<std::size_t>(c), j) /= counts[static_cast<std::size_t>(c)];
    }
  }
  ProtoResult out;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < query_embeddings.rows(); ++i) {
    int best = 0;
    double best_d = 0.0;
    for (int c = 0; c < way; ++c) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff =
            query_embeddings.at(i, j) - prototypes.at(static_cast<std::size_t>(c), j);
        d2 += diff * diff;
      }
      if (c == 0 || d2 < best_d) {
        best = c;
        best_d = d2;
      }
    }
    out.predicted.push_back(best);
    if (best == query_labels[i]) ++correct;
  }
  out.accuracy =
      static_cast<double>(correct) / static_cast<double>(query_embeddings.rows());
  return out;
}

KernelKind kernel_kind_from_name(const std::string& name) {
  if (name == "wl") return KernelKind::WL;
  if (name == "sp") return KernelKind::SP;
  if (name == "graphlet") return KernelKind::Graphlet;
  throw ConfigError("unknown kernel '" + name + "' (expected wl, sp or graphlet)");
}

ProtoResult kernel_episode(const Dataset& data, const Episode& ep, KernelKind kind,
                           const KernelOptions& opts, std::uint64_t seed) {
  std::vector<const GraphData*> graphs;
  std::vector<int> support_labels, query_labels;
  for (const auto& [pos, label] : ep.support) {
    graphs.push_back(&data.graphs.at(pos));
    support_labels.push_back(label);
  }
  const std::size_t s = graphs.size();
  for (const auto& [pos, label] : ep.query) {
    graphs.push_back(&data.graphs.at(pos));
    query_labels.push_back(label);
  }
  const std::size_t q = query_labels.size();

  // One label space per episode so every pairwise value is comparable.
  std::vector<std::vector<int>> labels;
  if (kind == KernelKind::WL) labels = discretize_node_labels(graphs, opts.attribute_bins);

  auto pair_value = [&](std::size_t i, std::size_t j) {
    switch (kind) {
      case KernelKind::WL:
        return wl_kernel(*graphs[i], *graphs[j], labels[i], labels[j], opts.wl);
      case KernelKind::SP:
        return sp_kernel(*graphs[i], *graphs[j], opts.sp_length_cap);
      case KernelKind::Graphlet: {
        Rng rng(Rng::mix(seed, i * graphs.size() + j));
        return graphlet_kernel(*graphs[i], *graphs[j], opts.graphlet_samples, rng,
                               opts.graphlet_exact_limit);
      }
    }
    return 0.0;
  };

  Tensor k_qs = Tensor::matrix(q, s);
  Tensor k_ss = Tensor::matrix(s, s);
  std::vector<double> k_qq(q, 0.0);
  const long total = static_cast<long>(q * s);
#pragma omp parallel for schedule(dynamic)
  for (long idx = 0; idx < total; ++idx) {
    const std::size_t i = static_cast<std::size_t>(idx) / s;
    const std::size_t j = static_cast<std::size_t>(idx) % s;
    k_qs.at(i, j) = pair_value(s + i, j);
  }
  const long pairs = static_cast<long>(s * s);
#pragma omp parallel for schedule(dynamic)
  for (long idx = 0; idx < pairs; ++idx) {
    const std::size_t i = static_cast<std::size_t>(idx) / s;
    const std::size_t j = static_cast<std::size_t>(idx) % s;
    if (i <= j) {
      const double v = pair_value(i, j);
      k_ss.at(i, j) = v;
      k_ss.at(j, i) = v;
    }
  }
  const long lq = static_cast<long>(q);
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < lq; ++i) {
    k_qq[static_cast<std::size_t>(i)] =
        pair_value(s + static_cast<std::size_t>(i), s + static_cast<std::size_t>(i));
  }

  return prototypical_predict_kernel(k_qs, k_ss, k_qq, support_labels, query_labels, ep.way);
}

PretrainedModel pretrain_supervised(const Dataset& train, const gnn::BackboneConfig& backbone,
                                    const PretrainConfig& cfg, std::uint64_t seed) {
  if (train.graphs.empty()) throw DataError("pretraining needs a nonempty training set");
  PretrainedModel model;
  model.class_order = train.class_ids();
  std::map<int, int> column_of;
  for (std::size_t i = 0; i < model.class_order.size(); ++i) {
    column_of[model.class_order[i]] = static_cast<int>(i);
  }

  Rng rng(Rng::mix(seed, 0xb45e11));
  model.params = gnn::init_backbone_params(train.feature_dim, backbone, rng);
  ParamSet clf = gnn::init_classifier_params(backbone,
                                             static_cast<int>(model.class_order.size()), rng);
  for (auto& [name, t] : clf) model.params.emplace(name, std::move(t));

  const std::size_t n = train.graphs.size();
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<const GraphData*> batch;
    std::vector<int> labels;
    const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
    const auto picks = rng.sample_without_replacement(n, bs);
    for (std::size_t p : picks) {
      batch.push_back(&train.graphs[p]);
      labels.push_back(column_of.at(train.graphs[p].class_id));
    }
    ad::Tape tape;
    ad::ParamNodeIds ids;
    for (const auto& [name, t] : model.params) ids.emplace(name, tape.input(name, t));
    const auto fwd = gnn::episode_forward(tape, ids, backbone, batch, labels);
    tape.backward(fwd.loss_node);
    GradRecord g;
    for (const auto& [name, id] : ids) g.emplace(name, tape.adjoint(id));
    axpy(g, cfg.weight_decay, model.params);
    axpy(model.params, -cfg.lr, g);
  }
  return model;
}

double finetune_episode(const PretrainedModel& model, const gnn::BackboneConfig& backbone,
                        const Dataset& data, const Episode& ep, int steps, double lr,
                        std::uint64_t seed) {
  Rng rng(Rng::mix(seed, 0xf17e));
  ParamSet params = model.params;
  // Fresh output layer sized to the episode; only it is trained.
  const std::size_t in_width = params.at("clf.out.weight").rows();
  Tensor w = Tensor::matrix(in_width, static_cast<std::size_t>(ep.way));
  const double std = std::sqrt(2.0 / static_cast<double>(in_width + static_cast<std::size_t>(ep.way)));
  for (double& v : w.values()) v = rng.normal(0.0, std);
  params.at("clf.out.weight") = std::move(w);
  params.at("clf.out.bias") = Tensor::matrix(1, static_cast<std::size_t>(ep.way));

  const meta::BatchView support = meta::support_view(data, ep);
  for (int step = 0; step < steps; ++step) {
    ad::Tape tape;
    ad::ParamNodeIds ids;
    for (const auto& [name, t] : params) ids.emplace(name, tape.input(name, t));
    const auto fwd = gnn::episode_forward(tape, ids, backbone, support.graphs, support.labels);
    tape.backward(fwd.loss_node);
    for (const char* name : {"clf.out.weight", "clf.out.bias"}) {
      const Tensor g = tape.adjoint(ids.at(name));
      Tensor& t = params.at(name);
      for (std::size_t i = 0; i < t.size(); ++i) t[i] -= lr * g[i];
    }
  }

  const meta::BatchView query = meta::query_view(data, ep);
  ad::Tape tape;
  ad::ParamNodeIds ids;
  for (const auto& [name, t] : params) ids.emplace(name, tape.input(name, t));
  return gnn::episode_forward(tape, ids, backbone, query.graphs, query.labels).accuracy;
}

ProtoResult proto_episode(const PretrainedModel& model, const gnn::BackboneConfig& backbone,
                          const Dataset& data, const Episode& ep) {
  const std::size_t dim = 2 * backbone.hidden_dim;
  Tensor support_emb = Tensor::matrix(ep.support.size(), dim);
  Tensor query_emb = Tensor::matrix(ep.query.size(), dim);
  std::vector<int> support_labels, query_labels;
  for (std::size_t i = 0; i < ep.support.size(); ++i) {
    const Tensor z =
        gnn::embed_graph_value(model.params, backbone, data.graphs.at(ep.support[i].first));
    for (std::size_t j = 0; j < dim; ++j) support_emb.at(i, j) = z[j];
    support_labels.push_back(ep.support[i].second);
  }
  for (std::size_t i = 0; i < ep.query.size(); ++i) {
    const Tensor z =
        gnn::embed_graph_value(model.params, backbone, data.graphs.at(ep.query[i].first));
    for (std::size_t j = 0; j < dim; ++j) query_emb.at(i, j) = z[j];
    query_labels.push_back(ep.query[i].second);
  }
  return prototypical_predict_embedding(support_emb, support_labels, query_emb, query_labels,
                                        ep.way);
}

}  // namespace asmaml::base
