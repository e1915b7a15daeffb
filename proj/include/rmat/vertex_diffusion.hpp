#pragma once

#include <string>

#include "rmat/model.hpp"
#include "rmat/ode.hpp"
#include "rmat/tape.hpp"
#include "rmat/tensor.hpp"

namespace rmat {

// Vertex-diffusion embedding: downsampling CNN -> CNN ODE -> average pool ->
// FC. Every function has a tape-free and a taped variant computing the same
// values through the shared kernels.

Tensor downsample(const Tensor& pixels, const ModelParams& p);
NodeId downsample_t(Tape& tape, NodeId pixels, ModelParams& p);

// dz/dt of the vertex ODE; the contraction form is -gamma (.) z + net(z)
// with net = conv -> tanh -> conv, channel preserving.
Tensor vertex_rhs(const Tensor& z, const ModelParams& p);
NodeId vertex_rhs_t(Tape& tape, NodeId z, ModelParams& p);

OdeRhs make_vertex_rhs(const ModelParams& p);
TapedOdeRhs make_vertex_rhs_taped(ModelParams& p);

// Pooling plus FC head applied to the ODE terminal state.
Tensor vertex_head(const Tensor& z_final, const ModelParams& p);
NodeId vertex_head_t(Tape& tape, NodeId z_final, ModelParams& p);

Tensor embed_vertex(const Tensor& pixels, const ModelParams& p, const SolverConfig& cfg,
                    IntegrationResult* stats = nullptr);
NodeId embed_vertex_t(Tape& tape, NodeId pixels, ModelParams& p, const SolverConfig& cfg,
                      PlanCache* plans = nullptr, const std::string& plan_key = {});

// Ablation baseline: one residual block in place of the integrated ODE.
Tensor embed_vertex_resnet(const Tensor& pixels, const ModelParams& p);
NodeId embed_vertex_resnet_t(Tape& tape, NodeId pixels, ModelParams& p);

// Dispatch on cfg.arch.
Tensor vertex_embedding(const Tensor& pixels, const ModelParams& p, const SolverConfig& cfg);
NodeId vertex_embedding_t(Tape& tape, NodeId pixels, ModelParams& p, const SolverConfig& cfg,
                          PlanCache* plans = nullptr, const std::string& plan_key = {});

}  // namespace rmat
