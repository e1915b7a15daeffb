#include "rmat/match_head.hpp"

#include <cmath>

#include "rmat/error.hpp"
#include "rmat/graph_diffusion.hpp"
#include "rmat/ops.hpp"
#include "rmat/vertex_diffusion.hpp"

namespace rmat {

double v2v_score(const Tensor& fx, const Tensor& fy, const ModelParams& p) {
  Tensor h = ops::square(ops::sub(fx, fy));
  for (std::size_t l = 0; l < p.r_weights.size(); ++l) {
    h = ops::linear(h, p.r_weights[l].value, p.r_biases[l].value);
    if (l + 1 < p.r_weights.size()) h = ops::relu(h);
  }
  return ops::sigmoid(h)[0];
}

NodeId v2v_score_t(Tape& tape, NodeId fx, NodeId fy, ModelParams& p) {
  NodeId h = tape.square(tape.sub(fx, fy));
  for (std::size_t l = 0; l < p.r_weights.size(); ++l) {
    h = tape.linear(h, tape.param(p.r_weights[l]), tape.param(p.r_biases[l]));
    if (l + 1 < p.r_weights.size()) h = tape.relu(h);
  }
  return tape.sigmoid(h);
}

double v2g_score(const Tensor& fx, const Tensor& gy, const ModelParams& p) {
  return ops::sigmoid(ops::bilinear(fx, p.bilinear_m.value, gy))[0];
}

NodeId v2g_score_t(Tape& tape, NodeId fx, NodeId gy, ModelParams& p) {
  return tape.sigmoid(tape.bilinear(fx, tape.param(p.bilinear_m), gy));
}

MatchPrediction match_score(const Frame& frame_x, int x_idx, const Frame& frame_y, int y_idx,
                            const ModelParams& p, const SolverConfig& vertex_cfg,
                            const SolverConfig& graph_cfg, double threshold) {
  if (frame_x.frame_id == frame_y.frame_id) {
    throw ValidationError("match_score: patches must come from distinct frames");
  }
  ModelParams& pm = const_cast<ModelParams&>(p);  // embeddings only read the values

  auto embed_frame_graph = [&](const Frame& frame, int anchor) {
    const NeighborhoodGraph g = build_neighborhood(frame, anchor, p.cfg.knn, p.cfg.include_anchor);
    std::vector<Tensor> embeddings;
    for (int v : g.vertices) {
      embeddings.push_back(
          vertex_embedding(frame.patches[static_cast<std::size_t>(v)].pixels, pm, vertex_cfg));
    }
    return graph_embedding(embeddings, pm, graph_cfg);
  };

  const Tensor fx =
      vertex_embedding(frame_x.patches[static_cast<std::size_t>(x_idx)].pixels, pm, vertex_cfg);
  const Tensor fy =
      vertex_embedding(frame_y.patches[static_cast<std::size_t>(y_idx)].pixels, pm, vertex_cfg);
  const Tensor gx = embed_frame_graph(frame_x, x_idx);
  const Tensor gy = embed_frame_graph(frame_y, y_idx);

  MatchPrediction out;
  out.r_score = v2v_score(fx, fy, p);
  out.d_xy = v2g_score(fx, gy, p);
  out.d_yx = v2g_score(fy, gx, p);
  out.s_match = out.r_score + 0.5 * (out.d_xy + out.d_yx);
  out.threshold = threshold;
  out.predicted = out.s_match > threshold;
  return out;
}

// ---- losses -----------------------------------------------------------------

double ce_loss(double prob, int label) {
  const double pc = std::min(std::max(prob, kProbClamp), 1.0 - kProbClamp);
  return label ? -std::log(pc) : -std::log(1.0 - pc);
}

NodeId ce_loss_t(Tape& tape, NodeId prob, int label) {
  NodeId pc = tape.clamp(prob, kProbClamp, 1.0 - kProbClamp);
  if (label) return tape.scale(tape.log(pc), -1.0);
  return tape.scale(tape.log(tape.sub(tape.constant(Tensor::scalar(1.0)), pc)), -1.0);
}

double loss_vv(const std::vector<double>& r_scores, const std::vector<int>& labels) {
  if (r_scores.empty()) throw ValidationError("loss_vv: empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < r_scores.size(); ++i) acc += ce_loss(r_scores[i], labels[i]);
  return acc / static_cast<double>(r_scores.size());
}

NodeId loss_vv_t(Tape& tape, const std::vector<NodeId>& r_scores, const std::vector<int>& labels) {
  if (r_scores.empty()) throw ValidationError("loss_vv: empty batch");
  NodeId acc = ce_loss_t(tape, r_scores[0], labels[0]);
  for (std::size_t i = 1; i < r_scores.size(); ++i) {
    acc = tape.add(acc, ce_loss_t(tape, r_scores[i], labels[i]));
  }
  return tape.scale(acc, 1.0 / static_cast<double>(r_scores.size()));
}

double loss_vg(const std::vector<double>& d_xy, const std::vector<double>& d_yx,
               const std::vector<int>& labels) {
  if (d_xy.empty()) throw ValidationError("loss_vg: empty batch");
  // -0.5 (L_xy + L_yx) where each L is the empirical log-likelihood; equal
  // to the average of the two directional mean cross-entropies.
  double acc_xy = 0.0, acc_yx = 0.0;
  for (std::size_t i = 0; i < d_xy.size(); ++i) {
    acc_xy += ce_loss(d_xy[i], labels[i]);
    acc_yx += ce_loss(d_yx[i], labels[i]);
  }
  const double m = static_cast<double>(d_xy.size());
  return 0.5 * (acc_xy / m + acc_yx / m);
}

NodeId loss_vg_t(Tape& tape, const std::vector<NodeId>& d_xy, const std::vector<NodeId>& d_yx,
                 const std::vector<int>& labels) {
  if (d_xy.empty()) throw ValidationError("loss_vg: empty batch");
  NodeId acc_xy = ce_loss_t(tape, d_xy[0], labels[0]);
  NodeId acc_yx = ce_loss_t(tape, d_yx[0], labels[0]);
  for (std::size_t i = 1; i < d_xy.size(); ++i) {
    acc_xy = tape.add(acc_xy, ce_loss_t(tape, d_xy[i], labels[i]));
    acc_yx = tape.add(acc_yx, ce_loss_t(tape, d_yx[i], labels[i]));
  }
  const double m = static_cast<double>(d_xy.size());
  return tape.scale(tape.add(tape.scale(acc_xy, 1.0 / m), tape.scale(acc_yx, 1.0 / m)), 0.5);
}

double loss_total(double vv, double vg, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw ValidationError("loss_total: lambda must be in [0,1]");
  return (1.0 - lambda) * vv + lambda * vg;
}

NodeId loss_total_t(Tape& tape, NodeId vv, NodeId vg, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw ValidationError("loss_total: lambda must be in [0,1]");
  return tape.add(tape.scale(vv, 1.0 - lambda), tape.scale(vg, lambda));
}

}  // namespace rmat
