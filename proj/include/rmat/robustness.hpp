#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rmat/dataset_io.hpp"
#include "rmat/model.hpp"
#include "rmat/ode.hpp"

namespace rmat {

// Per-noise-level samples of the three stage distances between a clean
// patch and its perturbed copy: downsampled feature map, vertex embedding,
// graph embedding. All patches of the anchor's neighborhood are perturbed
// (frame-level noise).
struct StageSamples {
  double psnr_level = 0.0;
  std::vector<double> ds_diff;
  std::vector<double> f_diff;
  std::vector<double> g_diff;
};

struct RobustnessReport {
  std::vector<StageSamples> levels;
};

RobustnessReport stage_perturbation_stats(ModelParams& params, const Dataset& dataset,
                                          const std::vector<double>& psnr_levels, int n_patches,
                                          const SolverConfig& vertex_cfg,
                                          const SolverConfig& graph_cfg, std::uint64_t seed);

double median(std::vector<double> v);

// Finite-difference probe of the diagonal right-hand-side Jacobian along
// integrated trajectories. c_star is the negated largest sampled diagonal
// entry; the assumption holds when it is positive.
struct JacobianProbe {
  bool assumption_met = false;
  double c_star = 0.0;
  int samples = 0;
};

enum class DiffusionModule { vertex, graph };

JacobianProbe jacobian_probe(DiffusionModule module, ModelParams& params, const Dataset& dataset,
                             const SolverConfig& cfg, int n_trajectories, int n_points,
                             std::uint64_t seed);

// Perturbation-decay certificate: mean ratio |out(x~) - out(x)| / eps per
// terminal time, the log-linear fit of that curve, and the Jacobian probe
// gating it.
struct ContractionReport {
  JacobianProbe probe;
  std::vector<double> terminal_times;
  std::vector<double> mean_ratio;   // averaged over samples and eps levels
  double log_slope = 0.0;           // slope of log(ratio) against T
  double r_squared = 0.0;
};

ContractionReport contraction_probe(DiffusionModule module, ModelParams& params,
                                    const Dataset& dataset, const std::vector<double>& t_list,
                                    const std::vector<double>& eps_list, int n_samples,
                                    std::uint64_t seed);

}  // namespace rmat
