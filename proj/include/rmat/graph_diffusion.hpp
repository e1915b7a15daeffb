#pragma once

#include <string>
#include <vector>

#include "rmat/model.hpp"
#include "rmat/ode.hpp"

namespace rmat {

// Graph-diffusion embedding over a neighborhood graph: vertex embeddings
// are stacked into Z(0), evolved under a GAT- or GCN-based right-hand side,
// and mean-pooled over vertices.
//
// Blocks consume the SELF-LOOPED 0/1 adjacency (every vertex sees its own
// state inside dZ/dt); for the GCN normalization that matrix already plays
// the role of adj + I.

// Additive attention mask: 0 on edges, -1e30 elsewhere. Throws if a vertex
// has no incident edge at all (degenerate softmax row).
Tensor attention_mask(const Tensor& adj);
// Symmetric normalization D^-1/2 A D^-1/2 of the self-looped adjacency.
Tensor gcn_norm(const Tensor& adj);

Tensor gat_block(const Tensor& z, const Tensor& adj, const ModelParams& p, int block);
NodeId gat_block_t(Tape& tape, NodeId z, const Tensor& adj, ModelParams& p, int block);

Tensor gcn_block(const Tensor& z, const Tensor& adj, const ModelParams& p, int block);
NodeId gcn_block_t(Tape& tape, NodeId z, const Tensor& adj, ModelParams& p, int block);

// dZ/dt: two blocks composed, with the optional -gamma (.) Z decay term.
Tensor graph_rhs(const Tensor& z, const Tensor& adj, const ModelParams& p);
NodeId graph_rhs_t(Tape& tape, NodeId z, const Tensor& adj, ModelParams& p);

OdeRhs make_graph_rhs(const ModelParams& p, const Tensor& adj);
TapedOdeRhs make_graph_rhs_taped(ModelParams& p, const Tensor& adj);

Tensor embed_graph(const std::vector<Tensor>& vertex_embeddings, const ModelParams& p,
                   const SolverConfig& cfg, IntegrationResult* stats = nullptr);
NodeId embed_graph_t(Tape& tape, const std::vector<NodeId>& vertex_embeddings, ModelParams& p,
                     const SolverConfig& cfg, PlanCache* plans = nullptr,
                     const std::string& plan_key = {});

// Ablation baseline: the two blocks applied once, no integration.
Tensor embed_graph_resnet(const std::vector<Tensor>& vertex_embeddings, const ModelParams& p);
NodeId embed_graph_resnet_t(Tape& tape, const std::vector<NodeId>& vertex_embeddings,
                            ModelParams& p);

// Dispatch on cfg.arch.
Tensor graph_embedding(const std::vector<Tensor>& vertex_embeddings, const ModelParams& p,
                       const SolverConfig& cfg);
NodeId graph_embedding_t(Tape& tape, const std::vector<NodeId>& vertex_embeddings, ModelParams& p,
                         const SolverConfig& cfg, PlanCache* plans = nullptr,
                         const std::string& plan_key = {});

}  // namespace rmat
