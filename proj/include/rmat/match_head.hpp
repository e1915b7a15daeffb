#pragma once

#include <vector>

#include "rmat/landmark.hpp"
#include "rmat/model.hpp"
#include "rmat/ode.hpp"

namespace rmat {

// Cross-entropy probabilities are clamped into this range to keep the loss
// finite.
constexpr double kProbClamp = 1e-7;

// Vertex-to-vertex comparator r applied to the elementwise squared
// difference of the two embeddings; FC stack with ReLU between layers and a
// final sigmoid.
double v2v_score(const Tensor& fx, const Tensor& fy, const ModelParams& p);
NodeId v2v_score_t(Tape& tape, NodeId fx, NodeId fy, ModelParams& p);

// Bilinear vertex-to-graph discriminator d(a,b) = sigmoid(a' M b).
double v2g_score(const Tensor& fx, const Tensor& gy, const ModelParams& p);
NodeId v2g_score_t(Tape& tape, NodeId fx, NodeId gy, ModelParams& p);

struct MatchPrediction {
  double r_score = 0.0;
  double d_xy = 0.0;
  double d_yx = 0.0;
  double s_match = 0.0;  // r + (d_xy + d_yx) / 2, in [0,2]
  bool predicted = false;
  double threshold = 1.0;
};

// Full matching score for patches in two (distinct) frames.
MatchPrediction match_score(const Frame& frame_x, int x_idx, const Frame& frame_y, int y_idx,
                            const ModelParams& p, const SolverConfig& vertex_cfg,
                            const SolverConfig& graph_cfg, double threshold);

// ---- losses -----------------------------------------------------------------

double ce_loss(double prob, int label);
NodeId ce_loss_t(Tape& tape, NodeId prob, int label);

// Mean cross-entropy of the comparator over a batch.
double loss_vv(const std::vector<double>& r_scores, const std::vector<int>& labels);
NodeId loss_vv_t(Tape& tape, const std::vector<NodeId>& r_scores, const std::vector<int>& labels);

// Vertex-to-graph loss: the negated average of the two directional empirical
// log-likelihoods, equal to the mean of the two directional cross-entropies.
double loss_vg(const std::vector<double>& d_xy, const std::vector<double>& d_yx,
               const std::vector<int>& labels);
NodeId loss_vg_t(Tape& tape, const std::vector<NodeId>& d_xy, const std::vector<NodeId>& d_yx,
                 const std::vector<int>& labels);

double loss_total(double vv, double vg, double lambda);
NodeId loss_total_t(Tape& tape, NodeId vv, NodeId vg, double lambda);

}  // namespace rmat
