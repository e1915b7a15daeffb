#include "rmat/graph_diffusion.hpp"

#include <cmath>

#include "rmat/error.hpp"
#include "rmat/ops.hpp"

namespace rmat {

namespace {
constexpr double kMaskedOut = -1e30;
constexpr double kLeakySlope = 0.2;
}  // namespace

Tensor attention_mask(const Tensor& adj) {
  const int v = adj.dim(0);
  Tensor mask({v, v});
  for (int i = 0; i < v; ++i) {
    bool any = false;
    for (int j = 0; j < v; ++j) {
      const bool edge = adj[static_cast<std::size_t>(i) * v + j] != 0.0;
      mask[static_cast<std::size_t>(i) * v + j] = edge ? 0.0 : kMaskedOut;
      any = any || edge;
    }
    if (!any) {
      throw ValidationError("gat: vertex " + std::to_string(i) +
                            " has no incident edges; attention softmax is degenerate "
                            "(enable self-loops)");
    }
  }
  return mask;
}

Tensor gcn_norm(const Tensor& adj) {
  const int v = adj.dim(0);
  std::vector<double> dinv(static_cast<std::size_t>(v));
  for (int i = 0; i < v; ++i) {
    double deg = 0.0;
    for (int j = 0; j < v; ++j) deg += adj[static_cast<std::size_t>(i) * v + j];
    dinv[static_cast<std::size_t>(i)] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  Tensor norm({v, v});
  for (int i = 0; i < v; ++i) {
    for (int j = 0; j < v; ++j) {
      norm[static_cast<std::size_t>(i) * v + j] = dinv[static_cast<std::size_t>(i)] *
                                                  adj[static_cast<std::size_t>(i) * v + j] *
                                                  dinv[static_cast<std::size_t>(j)];
    }
  }
  return norm;
}

Tensor gat_block(const Tensor& z, const Tensor& adj, const ModelParams& p, int block) {
  const Tensor mask = attention_mask(adj);
  const int v = z.dim(0);
  std::vector<Tensor> head_outs;
  for (const GatHead& head : p.gat_blocks[static_cast<std::size_t>(block)].heads) {
    Tensor zw = ops::matmul(z, head.w.value);
    Tensor s = ops::reshape(ops::matmul(zw, head.a_src.value), {v});
    Tensor d = ops::reshape(ops::matmul(zw, head.a_dst.value), {v});
    Tensor e = ops::leaky_relu(ops::outer_sum(s, d), kLeakySlope);
    Tensor alpha = ops::softmax_axis(ops::add(e, mask), 1);
    head_outs.push_back(ops::matmul(alpha, zw));
  }
  std::vector<const Tensor*> parts;
  for (const Tensor& h : head_outs) parts.push_back(&h);
  return ops::elu(ops::concat_cols(parts));
}

NodeId gat_block_t(Tape& tape, NodeId z, const Tensor& adj, ModelParams& p, int block) {
  const NodeId mask = tape.constant(attention_mask(adj));
  const int v = tape.value(z).dim(0);
  std::vector<NodeId> head_outs;
  for (GatHead& head : p.gat_blocks[static_cast<std::size_t>(block)].heads) {
    NodeId zw = tape.matmul(z, tape.param(head.w));
    NodeId s = tape.reshape(tape.matmul(zw, tape.param(head.a_src)), {v});
    NodeId d = tape.reshape(tape.matmul(zw, tape.param(head.a_dst)), {v});
    NodeId e = tape.leaky_relu(tape.outer_sum(s, d), kLeakySlope);
    NodeId alpha = tape.softmax_axis(tape.add(e, mask), 1);
    head_outs.push_back(tape.matmul(alpha, zw));
  }
  return tape.elu(tape.concat_cols(head_outs));
}

Tensor gcn_block(const Tensor& z, const Tensor& adj, const ModelParams& p, int block) {
  Tensor mixed = ops::matmul(gcn_norm(adj), z);
  return ops::relu(ops::matmul(mixed, p.gcn_weights[static_cast<std::size_t>(block)].value));
}

NodeId gcn_block_t(Tape& tape, NodeId z, const Tensor& adj, ModelParams& p, int block) {
  NodeId mixed = tape.matmul(tape.constant(gcn_norm(adj)), z);
  return tape.relu(tape.matmul(mixed, tape.param(p.gcn_weights[static_cast<std::size_t>(block)])));
}

namespace {

Tensor graph_net(const Tensor& z, const Tensor& adj, const ModelParams& p) {
  if (p.cfg.graph_variant == "gat") return gat_block(gat_block(z, adj, p, 0), adj, p, 1);
  return gcn_block(gcn_block(z, adj, p, 0), adj, p, 1);
}

NodeId graph_net_t(Tape& tape, NodeId z, const Tensor& adj, ModelParams& p) {
  if (p.cfg.graph_variant == "gat") {
    return gat_block_t(tape, gat_block_t(tape, z, adj, p, 0), adj, p, 1);
  }
  return gcn_block_t(tape, gcn_block_t(tape, z, adj, p, 0), adj, p, 1);
}

Tensor complete_self_looped(int v) { return Tensor::full({v, v}, 1.0); }

}  // namespace

Tensor graph_rhs(const Tensor& z, const Tensor& adj, const ModelParams& p) {
  Tensor net = graph_net(z, adj, p);
  if (!p.cfg.contraction_form) return net;
  return ops::sub(net, ops::axis_scale(z, p.graph_gamma.value, 1));
}

NodeId graph_rhs_t(Tape& tape, NodeId z, const Tensor& adj, ModelParams& p) {
  NodeId net = graph_net_t(tape, z, adj, p);
  if (!p.cfg.contraction_form) return net;
  return tape.sub(net, tape.axis_scale(z, tape.param(p.graph_gamma), 1));
}

OdeRhs make_graph_rhs(const ModelParams& p, const Tensor& adj) {
  return [&p, adj](const Tensor& z, double) { return graph_rhs(z, adj, p); };
}

TapedOdeRhs make_graph_rhs_taped(ModelParams& p, const Tensor& adj) {
  return [&p, adj](Tape& tape, NodeId z, double) { return graph_rhs_t(tape, z, adj, p); };
}

Tensor embed_graph(const std::vector<Tensor>& vertex_embeddings, const ModelParams& p,
                   const SolverConfig& cfg, IntegrationResult* stats) {
  std::vector<const Tensor*> rows;
  for (const Tensor& e : vertex_embeddings) rows.push_back(&e);
  Tensor z0 = ops::stack_rows(rows);
  const Tensor adj = complete_self_looped(z0.dim(0));
  IntegrationResult res = integrate(make_graph_rhs(p, adj), z0, cfg);
  Tensor out = ops::mean_axis(res.state, 0);
  if (stats) *stats = std::move(res);
  return out;
}

NodeId embed_graph_t(Tape& tape, const std::vector<NodeId>& vertex_embeddings, ModelParams& p,
                     const SolverConfig& cfg, PlanCache* plans, const std::string& plan_key) {
  NodeId z0 = tape.stack_rows(vertex_embeddings);
  const Tensor adj = complete_self_looped(tape.value(z0).dim(0));
  const std::vector<StepRecord>* frozen = nullptr;
  if (plans && plans->frozen) {
    auto it = plans->seq.find(plan_key);
    if (it != plans->seq.end()) frozen = &it->second;
  }
  std::vector<StepRecord> steps;
  NodeId zT = integrate_differentiable(tape, make_graph_rhs(p, adj), make_graph_rhs_taped(p, adj),
                                       z0, cfg, frozen, plans && !frozen ? &steps : nullptr);
  if (plans && !frozen) plans->seq[plan_key] = std::move(steps);
  return tape.mean_axis(zT, 0);
}

Tensor embed_graph_resnet(const std::vector<Tensor>& vertex_embeddings, const ModelParams& p) {
  std::vector<const Tensor*> rows;
  for (const Tensor& e : vertex_embeddings) rows.push_back(&e);
  Tensor z0 = ops::stack_rows(rows);
  const Tensor adj = complete_self_looped(z0.dim(0));
  return ops::mean_axis(graph_net(z0, adj, p), 0);
}

NodeId embed_graph_resnet_t(Tape& tape, const std::vector<NodeId>& vertex_embeddings,
                            ModelParams& p) {
  NodeId z0 = tape.stack_rows(vertex_embeddings);
  const Tensor adj = complete_self_looped(tape.value(z0).dim(0));
  return tape.mean_axis(graph_net_t(tape, z0, adj, p), 0);
}

Tensor graph_embedding(const std::vector<Tensor>& vertex_embeddings, const ModelParams& p,
                       const SolverConfig& cfg) {
  if (p.cfg.arch == "resnet_gat") return embed_graph_resnet(vertex_embeddings, p);
  return embed_graph(vertex_embeddings, p, cfg);
}

NodeId graph_embedding_t(Tape& tape, const std::vector<NodeId>& vertex_embeddings, ModelParams& p,
                         const SolverConfig& cfg, PlanCache* plans, const std::string& plan_key) {
  if (p.cfg.arch == "resnet_gat") return embed_graph_resnet_t(tape, vertex_embeddings, p);
  return embed_graph_t(tape, vertex_embeddings, p, cfg, plans, plan_key);
}

}  // namespace rmat
