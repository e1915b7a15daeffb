#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmat/tape.hpp"
#include "rmat/tensor.hpp"

namespace rmat {

struct ConvSpec {
  int out_channels;
  int kernel;
  int stride;
  int padding;
};

// Model-scale knobs. The defaults are the desk-scale configuration (patch
// 3x32x32, c=16 feature maps at 8x8, n_f=64 embeddings); paper_scale() gives
// the full-size variant (3x256x256, c=128 at 64x64, n_f=512).
struct ModelConfig {
  int patch_side = 32;
  std::vector<ConvSpec> downsampler = {{8, 3, 2, 1}, {16, 3, 2, 1}, {16, 3, 1, 1}};
  int ode_kernel = 3;
  // Contraction form uses dz/dt = -gamma (.) z + net(z) with gamma clamped
  // to gamma_min from below, which keeps the diagonal Jacobian condition
  // enforceable instead of hoped-for. The plain form drops the decay term.
  bool contraction_form = true;
  double gamma_init = 0.5;
  double gamma_min = 0.1;
  int pool_grid = 2;  // average pooling onto [c,grid,grid] before the FC head
  int n_f = 64;
  std::string graph_variant = "gat";  // "gat" | "gcn"
  int gat_heads = 2;
  int gat_head_dim = 32;
  std::vector<int> r_hidden = {128, 64};
  int knn = 3;
  bool include_anchor = true;
  std::string arch = "robustmat";  // "robustmat" | "resnet_gat" ablation baseline

  int feature_channels() const;  // c
  int feature_side() const;      // H (= W)
  void validate() const;

  static ModelConfig paper_scale();
};

struct ConvLayer {
  Parameter kernel;
  Parameter bias;
  int stride;
  int padding;
};

struct GatHead {
  Parameter w;      // [d_in, d_head]
  Parameter a_src;  // [d_head, 1]
  Parameter a_dst;  // [d_head, 1]
};

struct GatBlock {
  std::vector<GatHead> heads;
};

// Every trainable weight of the pipeline, in a fixed named order.
struct ModelParams {
  ModelConfig cfg;
  std::vector<ConvLayer> downsampler;
  std::vector<ConvLayer> ode_convs;  // 2, channel-preserving
  Parameter vertex_gamma;            // [c]
  Parameter fc_w;                    // [n_f, c*grid*grid]
  Parameter fc_b;                    // [n_f]
  std::vector<GatBlock> gat_blocks;      // 2 when variant == gat
  std::vector<Parameter> gcn_weights;    // 2 when variant == gcn, each [n_f, n_f]
  Parameter graph_gamma;             // [n_f]
  std::vector<Parameter> r_weights;  // hidden stack plus the final 1-unit layer
  std::vector<Parameter> r_biases;
  Parameter bilinear_m;  // [n_f, n_f]

  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);

  std::vector<Parameter*> all();  // deterministic order
  void zero_grads();
};

// Checkpoint file: magic "RMWT", version, config snapshot, then the named
// parameter table (name, shape, little-endian f64 data).
void save_checkpoint(const std::string& path, ModelParams& params,
                     const nlohmann::json& config_snapshot);
ModelParams load_checkpoint(const std::string& path, nlohmann::json* config_snapshot = nullptr);

ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json model_config_to_json(const ModelConfig& cfg);

}  // namespace rmat
