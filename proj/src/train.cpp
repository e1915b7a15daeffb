#include "rmat/train.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rmat/graph_diffusion.hpp"
#include "rmat/match_head.hpp"
#include "rmat/ops.hpp"
#include "rmat/rng.hpp"
#include "rmat/vertex_diffusion.hpp"

namespace rmat {

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train: epochs must be >= 1");
  if (lambda < 0.0 || lambda > 1.0) throw ValidationError("train: lambda must be in [0,1]");
  if (!(lr > 0.0)) throw ValidationError("train: lr must be > 0");
  vertex_solver.validate();
  graph_solver.validate();
}

void adam_step(const std::vector<Parameter*>& params, AdamState& st) {
  ++st.step;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->grad.numel(); ++i) {
      if (!std::isfinite(p->grad[i])) {
        throw NumericalError("adam: non-finite gradient in parameter '" + p->name + "'");
      }
    }
    auto [it, fresh] = st.moments.try_emplace(p->name, Tensor(p->value.shape()),
                                              Tensor(p->value.shape()));
    if (!fresh && !it->second.first.same_shape(p->value)) {
      throw ValidationError("adam: moment shape mismatch for parameter '" + p->name + "'");
    }
    Tensor& m = it->second.first;
    Tensor& v = it->second.second;
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      const double g = p->grad[i];
      m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g;
      v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g * g;
      p->value[i] -= st.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + st.eps);
      if (p->min_value && p->value[i] < *p->min_value) p->value[i] = *p->min_value;
    }
  }
}

namespace {

struct PatchKey {
  int frame;
  int idx;
  bool operator<(const PatchKey& o) const {
    return frame != o.frame ? frame < o.frame : idx < o.idx;
  }
};

const Frame& frame_at(const Dataset& ds, int frame_id) {
  if (frame_id < 0 || frame_id >= static_cast<int>(ds.frames.size())) {
    throw ValidationError("dataset: pair references missing frame " + std::to_string(frame_id));
  }
  return ds.frames[static_cast<std::size_t>(frame_id)];
}

struct VertexNodes {
  NodeId z0 = -1;  // downsampled feature map
  NodeId zT = -1;  // diffusion terminal state (equals z0 for the resnet arch)
  NodeId f = -1;   // embedding
};

VertexNodes forward_vertex(Tape& tape, const Tensor& pixels, ModelParams& p,
                           const SolverConfig& cfg, PlanCache* plans, const std::string& key) {
  VertexNodes out;
  const NodeId pix = tape.constant(pixels);
  out.z0 = downsample_t(tape, pix, p);
  if (p.cfg.arch == "resnet_gat") {
    // plain residual block: z + net(z)
    ConvLayer& c1 = p.ode_convs[0];
    ConvLayer& c2 = p.ode_convs[1];
    NodeId h = tape.conv2d(out.z0, tape.param(c1.kernel), tape.param(c1.bias), c1.stride,
                           c1.padding);
    h = tape.tanh(h);
    h = tape.conv2d(h, tape.param(c2.kernel), tape.param(c2.bias), c2.stride, c2.padding);
    out.zT = tape.add(out.z0, h);
  } else {
    const std::vector<StepRecord>* frozen = nullptr;
    if (plans && plans->frozen) {
      auto it = plans->seq.find(key);
      if (it != plans->seq.end()) frozen = &it->second;
    }
    std::vector<StepRecord> steps;
    out.zT = integrate_differentiable(tape, make_vertex_rhs(p), make_vertex_rhs_taped(p), out.z0,
                                      cfg, frozen, plans && !frozen ? &steps : nullptr);
    if (plans && !frozen) plans->seq[key] = std::move(steps);
  }
  out.f = vertex_head_t(tape, out.zT, p);
  return out;
}

struct GraphNodes {
  NodeId Z0 = -1;
  NodeId ZT = -1;
  NodeId g = -1;
};

GraphNodes forward_graph(Tape& tape, const std::vector<NodeId>& vertex_embeddings, ModelParams& p,
                         const SolverConfig& cfg, PlanCache* plans, const std::string& key) {
  GraphNodes out;
  out.Z0 = tape.stack_rows(vertex_embeddings);
  const Tensor adj = Tensor::full({tape.value(out.Z0).dim(0), tape.value(out.Z0).dim(0)}, 1.0);
  if (p.cfg.arch == "resnet_gat") {
    // the baseline applies the two blocks once, no integration or decay
    if (p.cfg.graph_variant == "gat") {
      out.ZT = gat_block_t(tape, gat_block_t(tape, out.Z0, adj, p, 0), adj, p, 1);
    } else {
      out.ZT = gcn_block_t(tape, gcn_block_t(tape, out.Z0, adj, p, 0), adj, p, 1);
    }
  } else {
    const std::vector<StepRecord>* frozen = nullptr;
    if (plans && plans->frozen) {
      auto it = plans->seq.find(key);
      if (it != plans->seq.end()) frozen = &it->second;
    }
    std::vector<StepRecord> steps;
    out.ZT = integrate_differentiable(tape, make_graph_rhs(p, adj), make_graph_rhs_taped(p, adj),
                                      out.Z0, cfg, frozen, plans && !frozen ? &steps : nullptr);
    if (plans && !frozen) plans->seq[key] = std::move(steps);
  }
  out.g = tape.mean_axis(out.ZT, 0);
  return out;
}

// |a - b|_F on the tape, floored away from zero so quotients stay finite.
NodeId diff_norm_t(Tape& tape, NodeId a, NodeId b, double floor) {
  NodeId ss = tape.sum_all(tape.square(tape.sub(a, b)));
  return tape.sqrt(tape.clamp(ss, floor * floor, HUGE_VAL));
}

}  // namespace

NodeId batch_loss_t(Tape& tape, ModelParams& params, const Dataset& dataset,
                    const std::vector<PairRef>& pairs, const TrainConfig& cfg, PlanCache* plans,
                    std::uint64_t noise_seed) {
  if (pairs.empty()) throw ValidationError("batch_loss: empty pair group");
  const bool need_graphs = cfg.lambda > 0.0;
  const bool reg = cfg.beta_reg > 0.0 && params.cfg.arch == "robustmat";

  // Every distinct patch and anchor referenced by the group, in fixed order.
  std::set<PatchKey> needed;
  std::set<PatchKey> anchors;
  std::map<PatchKey, NeighborhoodGraph> graphs;
  for (const PairRef& pr : pairs) {
    const PatchKey a{pr.frame_a, pr.idx_a};
    const PatchKey b{pr.frame_b, pr.idx_b};
    needed.insert(a);
    needed.insert(b);
    if (!need_graphs) continue;
    for (const PatchKey& k : {a, b}) {
      if (anchors.insert(k).second) {
        const NeighborhoodGraph g = build_neighborhood(frame_at(dataset, k.frame), k.idx,
                                                       params.cfg.knn, params.cfg.include_anchor);
        for (int v : g.vertices) needed.insert(PatchKey{k.frame, v});
        graphs.emplace(k, g);
      }
    }
  }

  std::map<PatchKey, VertexNodes> vertex;
  std::map<PatchKey, VertexNodes> vertex_pert;
  for (const PatchKey& k : needed) {
    const Patch& patch = frame_at(dataset, k.frame).patches[static_cast<std::size_t>(k.idx)];
    const std::string key = "v:" + std::to_string(k.frame) + ":" + std::to_string(k.idx);
    vertex.emplace(k, forward_vertex(tape, patch.pixels, params, cfg.vertex_solver, plans, key));
    if (reg) {
      const Tensor noisy =
          perturb(patch.pixels, PerturbKind::gauss, cfg.reg_noise_psnr,
                  mix_seed(noise_seed, (static_cast<std::uint64_t>(k.frame) << 20) +
                                           static_cast<std::uint64_t>(k.idx)));
      vertex_pert.emplace(k, forward_vertex(tape, noisy, params, cfg.vertex_solver, plans,
                                            key + ":pert"));
    }
  }

  std::map<PatchKey, GraphNodes> graph;
  std::map<PatchKey, GraphNodes> graph_pert;
  for (const auto& [k, g] : graphs) {
    std::vector<NodeId> embeddings;
    for (int v : g.vertices) embeddings.push_back(vertex.at(PatchKey{k.frame, v}).f);
    const std::string key = "g:" + std::to_string(k.frame) + ":" + std::to_string(k.idx);
    graph.emplace(k, forward_graph(tape, embeddings, params, cfg.graph_solver, plans, key));
    if (reg) {
      std::vector<NodeId> pert_embeddings;
      for (int v : g.vertices) pert_embeddings.push_back(vertex_pert.at(PatchKey{k.frame, v}).f);
      graph_pert.emplace(k, forward_graph(tape, pert_embeddings, params, cfg.graph_solver, plans,
                                          key + ":pert"));
    }
  }

  std::vector<NodeId> r_scores, d_xy, d_yx;
  std::vector<int> labels;
  for (const PairRef& pr : pairs) {
    const PatchKey a{pr.frame_a, pr.idx_a};
    const PatchKey b{pr.frame_b, pr.idx_b};
    labels.push_back(pr.label);
    r_scores.push_back(v2v_score_t(tape, vertex.at(a).f, vertex.at(b).f, params));
    if (need_graphs) {
      d_xy.push_back(v2g_score_t(tape, vertex.at(a).f, graph.at(b).g, params));
      d_yx.push_back(v2g_score_t(tape, vertex.at(b).f, graph.at(a).g, params));
    }
  }

  NodeId total;
  if (cfg.lambda == 0.0) {
    total = loss_vv_t(tape, r_scores, labels);
  } else if (cfg.lambda == 1.0) {
    total = loss_vg_t(tape, d_xy, d_yx, labels);
  } else {
    total = loss_total_t(tape, loss_vv_t(tape, r_scores, labels),
                         loss_vg_t(tape, d_xy, d_yx, labels), cfg.lambda);
  }

  if (reg) {
    constexpr double kDelta = 1e-8;
    NodeId acc = -1;
    int count = 0;
    for (const auto& [k, clean] : vertex) {
      const VertexNodes& pert = vertex_pert.at(k);
      NodeId ratio = tape.div(diff_norm_t(tape, clean.zT, pert.zT, 0.0),
                              diff_norm_t(tape, clean.z0, pert.z0, kDelta));
      acc = count == 0 ? ratio : tape.add(acc, ratio);
      ++count;
    }
    for (const auto& [k, clean] : graph) {
      const GraphNodes& pert = graph_pert.at(k);
      NodeId ratio = tape.div(diff_norm_t(tape, clean.ZT, pert.ZT, 0.0),
                              diff_norm_t(tape, clean.Z0, pert.Z0, kDelta));
      acc = count == 0 ? ratio : tape.add(acc, ratio);
      ++count;
    }
    if (count > 0) {
      total = tape.add(total, tape.scale(acc, cfg.beta_reg / static_cast<double>(count)));
    }
  }
  return total;
}

double quotient_regularizer(const std::vector<std::pair<Tensor, Tensor>>& in_pairs,
                            const std::vector<std::pair<Tensor, Tensor>>& out_pairs) {
  if (in_pairs.size() != out_pairs.size() || in_pairs.empty()) {
    throw ValidationError("quotient_regularizer: need matching, non-empty pair lists");
  }
  constexpr double kDelta = 1e-8;
  double acc = 0.0;
  for (std::size_t i = 0; i < in_pairs.size(); ++i) {
    const double den =
        std::max(ops::sub(in_pairs[i].first, in_pairs[i].second).frob_norm(), kDelta);
    acc += ops::sub(out_pairs[i].first, out_pairs[i].second).frob_norm() / den;
  }
  return acc / static_cast<double>(in_pairs.size());
}

TrainResult train(ModelParams& params, const Dataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.pairs.empty()) throw ValidationError("train: dataset has no pairs");
  bool has_pos = false, has_neg = false;
  for (const PairRef& pr : dataset.pairs) (pr.label ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) {
    throw ValidationError("train: need at least one positive and one negative pair");
  }

  // Group pairs by frame pair (scene batches).
  std::map<std::pair<int, int>, std::vector<PairRef>> groups;
  for (const PairRef& pr : dataset.pairs) {
    groups[{std::min(pr.frame_a, pr.frame_b), std::max(pr.frame_a, pr.frame_b)}].push_back(pr);
  }
  std::vector<std::vector<PairRef>> batches;
  for (auto& [key, g] : groups) batches.push_back(std::move(g));

  AdamState adam;
  adam.lr = cfg.lr;
  adam.beta1 = cfg.adam_beta1;
  adam.beta2 = cfg.adam_beta2;
  adam.eps = cfg.adam_eps;
  auto all = params.all();

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, 0xe90c + static_cast<std::uint64_t>(epoch)));
    std::vector<int> order(batches.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);

    double loss_acc = 0.0;
    std::size_t pair_count = 0;
    for (std::size_t bi = 0; bi < order.size(); ++bi) {
      std::vector<PairRef> batch = batches[static_cast<std::size_t>(order[bi])];
      rng.shuffle(batch);
      try {
        Tape tape;
        const NodeId loss =
            batch_loss_t(tape, params, dataset, batch, cfg, nullptr,
                         mix_seed(cfg.seed, 0xbeef + static_cast<std::uint64_t>(epoch)));
        params.zero_grads();
        tape.backward(loss);
        adam_step(all, adam);
        loss_acc += tape.value(loss)[0] * static_cast<double>(batch.size());
        pair_count += batch.size();
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + " batch " + std::to_string(bi) +
                             ": " + e.what());
      }
    }
    result.loss_history.push_back(loss_acc / static_cast<double>(pair_count));
  }
  return result;
}

std::vector<double> score_pairs(ModelParams& params, const Dataset& dataset,
                                const EvalConfig& cfg, std::vector<int>* labels_out) {
  std::map<PatchKey, Tensor> femb;
  std::map<PatchKey, Tensor> gemb;

  auto vertex_cached = [&](const PatchKey& k) -> const Tensor& {
    auto it = femb.find(k);
    if (it != femb.end()) return it->second;
    const Patch& patch = frame_at(dataset, k.frame).patches[static_cast<std::size_t>(k.idx)];
    return femb.emplace(k, vertex_embedding(patch.pixels, params, cfg.vertex_solver))
        .first->second;
  };
  auto graph_cached = [&](const PatchKey& k) -> const Tensor& {
    auto it = gemb.find(k);
    if (it != gemb.end()) return it->second;
    const NeighborhoodGraph g = build_neighborhood(frame_at(dataset, k.frame), k.idx,
                                                   params.cfg.knn, params.cfg.include_anchor);
    std::vector<Tensor> embeddings;
    for (int v : g.vertices) embeddings.push_back(vertex_cached(PatchKey{k.frame, v}));
    return gemb.emplace(k, graph_embedding(embeddings, params, cfg.graph_solver)).first->second;
  };

  std::vector<double> scores;
  if (labels_out) labels_out->clear();
  for (const PairRef& pr : dataset.pairs) {
    const PatchKey a{pr.frame_a, pr.idx_a};
    const PatchKey b{pr.frame_b, pr.idx_b};
    const double r = v2v_score(vertex_cached(a), vertex_cached(b), params);
    const double dxy = v2g_score(vertex_cached(a), graph_cached(b), params);
    const double dyx = v2g_score(vertex_cached(b), graph_cached(a), params);
    scores.push_back(r + 0.5 * (dxy + dyx));
    if (labels_out) labels_out->push_back(pr.label);
  }
  return scores;
}

Metrics evaluate(ModelParams& params, const Dataset& dataset, const EvalConfig& cfg) {
  if (dataset.pairs.empty()) throw ValidationError("evaluate: dataset has no pairs");
  std::vector<int> labels;
  const std::vector<double> scores = score_pairs(params, dataset, cfg, &labels);
  return compute_metrics(scores, labels, cfg.threshold);
}

}  // namespace rmat
