#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rmat/tape.hpp"

namespace rmat {

// Relative error with a small floor so near-zero gradients compare on an
// absolute scale.
double rel_err(double a, double b);

struct GradCheckReport {
  std::string op;
  double max_rel_err = 0.0;
  long checks = 0;
};

// Central finite differences (step 1e-5) of a scalar tape-built loss against
// the reverse-mode gradients, swept over every entry of every parameter.
// The builder must be a pure function of the parameter values.
GradCheckReport check_gradients(const std::string& name,
                                const std::function<NodeId(Tape&)>& build,
                                const std::vector<Parameter*>& params, double fd_step = 1e-5);

// Per-operation suite, `seeds` random instances each.
std::vector<GradCheckReport> run_op_gradchecks(int seeds, std::uint64_t seed);

// Full pipeline loss on a toy two-frame batch, every parameter checked.
// The solver step plan is frozen at the base point and replayed under the
// finite-difference probes.
GradCheckReport full_pipeline_gradcheck(std::uint64_t seed);

}  // namespace rmat
