#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rmat/dataset_io.hpp"
#include "rmat/metrics.hpp"
#include "rmat/model.hpp"
#include "rmat/ode.hpp"

namespace rmat {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::map<std::string, std::pair<Tensor, Tensor>> moments;  // first/second, keyed by name
};

// Standard Adam with bias correction; parameters carrying a min_value are
// clamped from below after the update. NaN gradients abort with the
// offending parameter's name.
void adam_step(const std::vector<Parameter*>& params, AdamState& state);

struct TrainConfig {
  int epochs = 30;
  double lr = 1e-3;
  double lambda = 0.5;  // weight between the comparator and discriminator losses
  std::uint64_t seed = 0;
  SolverConfig vertex_solver{};  // dopri5, rtol = atol = 0.01, T = 1
  SolverConfig graph_solver{.rtol = 1e-3, .atol = 1e-3};
  double beta_reg = 0.0;  // output-input quotient regularizer weight, 0 disables
  double reg_noise_psnr = 16.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct TrainResult {
  std::vector<double> loss_history;  // per-epoch mean loss over pairs
};

// Trains in scene batches: pairs are grouped by their frame pair, every
// distinct patch and neighborhood in a group is embedded once on a shared
// tape, and pair losses reuse those embeddings (identical function values,
// one backward per group).
TrainResult train(ModelParams& params, const Dataset& dataset, const TrainConfig& cfg);

// Loss of one pair group on the given tape. Exposed so gradient checks can
// replay a frozen step plan; train() itself freezes fresh plans per batch.
NodeId batch_loss_t(Tape& tape, ModelParams& params, const Dataset& dataset,
                    const std::vector<PairRef>& pairs, const TrainConfig& cfg,
                    PlanCache* plans = nullptr, std::uint64_t noise_seed = 0);

// Mean over pairs of |out_clean - out_pert| / max(|in_clean - in_pert|, 1e-8).
double quotient_regularizer(const std::vector<std::pair<Tensor, Tensor>>& in_pairs,
                            const std::vector<std::pair<Tensor, Tensor>>& out_pairs);

struct EvalConfig {
  SolverConfig vertex_solver{};
  SolverConfig graph_solver{.rtol = 1e-3, .atol = 1e-3};
  double threshold = 1.0;
};

// Scores every pair of the dataset with per-frame embedding caches; values
// equal match_score() applied pair by pair.
std::vector<double> score_pairs(ModelParams& params, const Dataset& dataset,
                                const EvalConfig& cfg, std::vector<int>* labels_out = nullptr);

Metrics evaluate(ModelParams& params, const Dataset& dataset, const EvalConfig& cfg);

}  // namespace rmat
