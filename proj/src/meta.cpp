#include "asmaml/meta.hpp"

#include "asmaml/error.hpp"

namespace asmaml::meta {

namespace {

BatchView make_view(const Dataset& data, const std::vector<std::pair<std::size_t, int>>& items) {
  BatchView v;
  v.graphs.reserve(items.size());
  v.labels.reserve(items.size());
  for (const auto& [pos, label] : items) {
    v.graphs.push_back(&data.graphs.at(pos));
    v.labels.push_back(label);
  }
  return v;
}

gnn::EpisodeForwardResult forward_with(const ParamSet& params,
                                       const gnn::BackboneConfig& backbone,
                                       const BatchView& batch) {
  ad::Tape tape;
  ad::ParamNodeIds ids;
  for (const auto& [name, t] : params) ids.emplace(name, tape.input(name, t));
  return gnn::episode_forward(tape, ids, backbone, batch.graphs, batch.labels);
}

}  // namespace

BatchView support_view(const Dataset& data, const Episode& ep) {
  return make_view(data, ep.support);
}

BatchView query_view(const Dataset& data, const Episode& ep) {
  return make_view(data, ep.query);
}

ad::Objective batch_objective(const gnn::BackboneConfig& backbone, const BatchView& batch) {
  return [backbone, batch](ad::Tape& tape, const ad::ParamNodeIds& ids) {
    return gnn::episode_forward(tape, ids, backbone, batch.graphs, batch.labels).loss_node;
  };
}

AdaptResult adapt(const ParamSet& theta, const Dataset& data, const Episode& ep, int steps,
                  const gnn::BackboneConfig& backbone, const MetaConfig& cfg,
                  bool track_query_accuracy) {
  if (steps < 1) throw ConfigError("adapt requires at least one step");
  const BatchView support = support_view(data, ep);
  const BatchView query = query_view(data, ep);

  AdaptResult out;
  out.adapted = theta;
  out.trace.steps = steps;
  out.iterates.reserve(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    ad::Tape tape;
    ad::ParamNodeIds ids;
    for (const auto& [name, tensor] : out.adapted) ids.emplace(name, tape.input(name, tensor));
    gnn::EpisodeForwardResult fwd;
    try {
      fwd = gnn::episode_forward(tape, ids, backbone, support.graphs, support.labels);
      tape.backward(fwd.loss_node);
    } catch (const NumericError& e) {
      throw NumericError("inner step " + std::to_string(t + 1) + ": " + e.what());
    }
    out.trace.losses.push_back(fwd.loss);
    out.trace.anis.push_back(fwd.ani);
    out.iterates.push_back(out.adapted);
    GradRecord g;
    for (const auto& [name, id] : ids) g.emplace(name, tape.adjoint(id));
    axpy(out.adapted, -cfg.inner_lr, g);
    if (track_query_accuracy) {
      out.trace.query_accuracies.push_back(
          forward_with(out.adapted, backbone, query).accuracy);
    }
  }
  return out;
}

MetaUpdateResult meta_update(const ParamSet& theta, const Dataset& data, const Episode& ep,
                             int steps, const gnn::BackboneConfig& backbone,
                             const MetaConfig& cfg, bool track_query_accuracy) {
  AdaptResult ar = adapt(theta, data, ep, steps, backbone, cfg, track_query_accuracy);
  const BatchView query = query_view(data, ep);

  ad::Tape tape;
  ad::ParamNodeIds ids;
  for (const auto& [name, tensor] : ar.adapted) ids.emplace(name, tape.input(name, tensor));
  gnn::EpisodeForwardResult q =
      gnn::episode_forward(tape, ids, backbone, query.graphs, query.labels);
  tape.backward(q.loss_node);
  GradRecord gq;
  for (const auto& [name, id] : ids) gq.emplace(name, tape.adjoint(id));

  if (cfg.order == ad::Order::Second && cfg.inner_lr != 0.0) {
    const BatchView support = support_view(data, ep);
    gq = ad::backprop_through_chain(batch_objective(backbone, support), ar.iterates,
                                    std::move(gq), cfg.inner_lr);
  }

  MetaUpdateResult out;
  out.theta = theta;
  axpy(out.theta, -cfg.outer_lr, gq);
  if (cfg.weight_decay != 0.0) axpy(out.theta, -cfg.outer_lr * cfg.weight_decay, theta);
  out.trace = std::move(ar.trace);
  out.query_loss = q.loss;
  out.query_accuracy = q.accuracy;
  return out;
}

MetaUpdateResult meta_update_batch(const ParamSet& theta, const Dataset& data,
                                   const std::vector<Episode>& episodes, int steps,
                                   const gnn::BackboneConfig& backbone, const MetaConfig& cfg,
                                   bool track_query_accuracy) {
  if (episodes.empty()) throw ConfigError("meta_update_batch needs at least one episode");
  MetaUpdateResult out;
  GradRecord mean = zeros_like(theta);
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const Episode& ep = episodes[e];
    AdaptResult ar =
        adapt(theta, data, ep, steps, backbone, cfg, track_query_accuracy && e == 0);
    const BatchView query = query_view(data, ep);
    ad::Tape tape;
    ad::ParamNodeIds ids;
    for (const auto& [name, tensor] : ar.adapted) ids.emplace(name, tape.input(name, tensor));
    gnn::EpisodeForwardResult q =
        gnn::episode_forward(tape, ids, backbone, query.graphs, query.labels);
    tape.backward(q.loss_node);
    GradRecord gq;
    for (const auto& [name, id] : ids) gq.emplace(name, tape.adjoint(id));
    if (cfg.order == ad::Order::Second && cfg.inner_lr != 0.0) {
      const BatchView support = support_view(data, ep);
      gq = ad::backprop_through_chain(batch_objective(backbone, support), ar.iterates,
                                      std::move(gq), cfg.inner_lr);
    }
    axpy(mean, 1.0 / static_cast<double>(episodes.size()), gq);
    if (e == 0) out.trace = std::move(ar.trace);
    out.query_loss += q.loss / static_cast<double>(episodes.size());
    out.query_accuracy += q.accuracy / static_cast<double>(episodes.size());
  }
  out.theta = theta;
  axpy(out.theta, -cfg.outer_lr, mean);
  if (cfg.weight_decay != 0.0) axpy(out.theta, -cfg.outer_lr * cfg.weight_decay, theta);
  return out;
}

double test_episode(const ParamSet& theta, const Dataset& data, const Episode& ep, int steps,
                    const gnn::BackboneConfig& backbone, const MetaConfig& cfg,
                    double* query_loss_out) {
  AdaptResult ar = adapt(theta, data, ep, steps, backbone, cfg, false);
  gnn::EpisodeForwardResult q =
      forward_with(ar.adapted, backbone, query_view(data, ep));
  if (query_loss_out) *query_loss_out = q.loss;
  return q.accuracy;
}

}  // namespace asmaml::meta
