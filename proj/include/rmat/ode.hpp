#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rmat/tape.hpp"
#include "rmat/tensor.hpp"

namespace rmat {

struct SolverConfig {
  enum class Method { rk4_fixed, dopri5 };

  Method method = Method::dopri5;
  double t0 = 0.0;
  double t1 = 1.0;
  double rtol = 1e-2;
  double atol = 1e-2;
  int max_steps = 10000;       // attempted (accepted + rejected) steps
  double initial_step = 0.0;   // <= 0 means 0.1 * (t1 - t0)
  int fixed_step_count = 8;    // rk4_fixed only

  void validate() const;
};

struct StepRecord {
  double t;
  double h;
};

struct IntegrationResult {
  Tensor state;                   // z(t1)
  std::vector<StepRecord> steps;  // accepted steps in order
  int accepted = 0;
  int rejected = 0;
  int rhs_evals = 0;
};

// Right-hand side contracts. The taped variant must compute the same
// function through Tape ops so that replayed forwards are bit-identical.
using OdeRhs = std::function<Tensor(const Tensor& z, double t)>;
using TapedOdeRhs = std::function<NodeId(Tape& tape, NodeId z, double t)>;

// Gradient-free integration. When `trajectory` is non-null it receives the
// state after every accepted step (initial state included).
IntegrationResult integrate(const OdeRhs& f, const Tensor& z0, const SolverConfig& cfg,
                            std::vector<Tensor>* trajectory = nullptr);

// One Dormand-Prince 5(4) step with the canonical 7-stage tableau.
// error = z5 - z4 (embedded pair difference); k[6] is the FSAL derivative.
struct Dopri5Step {
  Tensor z5;
  Tensor error;
  std::array<Tensor, 7> k;
};
Dopri5Step dopri5_step(const OdeRhs& f, const Tensor& z, double t, double h);

// Replays a frozen accepted-step sequence on the tape (discretize-then-
// optimize): gradients flow through every replayed stage and the forward
// value equals the gradient-free integration bit for bit.
NodeId replay_steps(Tape& tape, const TapedOdeRhs& f, NodeId z0, SolverConfig::Method method,
                    const std::vector<StepRecord>& steps);

// Freeze (unless a frozen sequence is supplied) and replay in one call.
NodeId integrate_differentiable(Tape& tape, const OdeRhs& f_plain, const TapedOdeRhs& f_taped,
                                NodeId z0, const SolverConfig& cfg,
                                const std::vector<StepRecord>* frozen_in = nullptr,
                                std::vector<StepRecord>* frozen_out = nullptr);

// Frozen step sequences keyed per trajectory slot. Finite-difference checks
// replay the base point's discretization so that perturbed evaluations never
// change the step sequence under the probe.
struct PlanCache {
  std::map<std::string, std::vector<StepRecord>> seq;
  bool frozen = false;
};

}  // namespace rmat
