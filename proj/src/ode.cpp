#include "rmat/ode.hpp"

#include <algorithm>
#include <cmath>

#include "rmat/error.hpp"
#include "rmat/ops.hpp"

namespace rmat {

namespace {

// Dormand-Prince 5(4): the 7th stage point equals the 5th-order solution
// (FSAL), and kE = b5 - b4 gives the embedded error estimate.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
constexpr double kE[7] = {71.0 / 57600,      0.0,         -71.0 / 16695, 71.0 / 1920,
                          -17253.0 / 339200, 22.0 / 525,  -1.0 / 40};
constexpr double kRk4W[4] = {1.0 / 6, 1.0 / 3, 1.0 / 3, 1.0 / 6};

// The stage arithmetic is shared between the tensor path and the tape path
// through these contexts, so a replayed forward reproduces the gradient-free
// integration bit for bit.
struct PlainCtx {
  using V = Tensor;
  const OdeRhs& f;
  int* evals;

  V eval(const V& z, double t) {
    ++*evals;
    Tensor d = f(z, t);
    if (!d.same_shape(z)) {
      throw DimensionError("ode: derivative shape " + d.shape_str() +
                           " differs from state shape " + z.shape_str());
    }
    if (!d.all_finite()) {
      throw NumericalError("ode: non-finite derivative at t = " + std::to_string(t));
    }
    return d;
  }
  V add(const V& a, const V& b) { return ops::add(a, b); }
  V scale(const V& a, double c) { return ops::scale(a, c); }
};

struct TapeCtx {
  using V = NodeId;
  Tape& tape;
  const TapedOdeRhs& f;

  V eval(V z, double t) { return f(tape, z, t); }
  V add(V a, V b) { return tape.add(a, b); }
  V scale(V a, double c) { return tape.scale(a, c); }
};

template <class C, std::size_t N>
typename C::V weighted_sum(C& cx, const std::array<typename C::V, N>& k, const double* coef,
                           int count, double h) {
  typename C::V acc{};
  bool first = true;
  for (int j = 0; j < count; ++j) {
    if (coef[j] == 0.0) continue;
    auto term = cx.scale(k[static_cast<std::size_t>(j)], h * coef[j]);
    acc = first ? term : cx.add(acc, term);
    first = false;
  }
  return acc;
}

template <class C>
struct Advance {
  typename C::V z_next;
  std::array<typename C::V, 7> k;
};

template <class C>
Advance<C> dopri5_advance(C& cx, const typename C::V& z, double t, double h,
                          const typename C::V* fsal_k1) {
  Advance<C> out;
  out.k[0] = fsal_k1 ? *fsal_k1 : cx.eval(z, t);
  typename C::V stage_point{};
  for (int i = 1; i < 7; ++i) {
    stage_point = cx.add(z, weighted_sum(cx, out.k, kA[i], i, h));
    out.k[static_cast<std::size_t>(i)] = cx.eval(stage_point, t + kC[i] * h);
  }
  out.z_next = stage_point;  // stage 7 sits at the 5th-order solution
  return out;
}

template <class C>
typename C::V rk4_advance(C& cx, const typename C::V& z, double t, double h) {
  std::array<typename C::V, 4> k;
  k[0] = cx.eval(z, t);
  k[1] = cx.eval(cx.add(z, cx.scale(k[0], h * 0.5)), t + h * 0.5);
  k[2] = cx.eval(cx.add(z, cx.scale(k[1], h * 0.5)), t + h * 0.5);
  k[3] = cx.eval(cx.add(z, cx.scale(k[2], h)), t + h);
  return cx.add(z, weighted_sum(cx, k, kRk4W, 4, h));
}

// Mixed-norm error: RMS of |e_i| / (atol + rtol * max(|z_i|, |z_next_i|)).
double error_norm(const Tensor& e, const Tensor& z, const Tensor& z_next, double atol,
                  double rtol) {
  double acc = 0.0;
  for (std::size_t i = 0; i < e.numel(); ++i) {
    const double sc = atol + rtol * std::max(std::fabs(z[i]), std::fabs(z_next[i]));
    const double r = e[i] / sc;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(e.numel()));
}

}  // namespace

void SolverConfig::validate() const {
  if (!(t1 > t0)) throw ValidationError("solver: t1 must exceed t0");
  if (!(rtol > 0.0) || !(atol > 0.0)) throw ValidationError("solver: rtol and atol must be > 0");
  if (max_steps < 1) throw ValidationError("solver: max_steps must be >= 1");
  if (method == Method::rk4_fixed && fixed_step_count < 1) {
    throw ValidationError("solver: fixed_step_count must be >= 1");
  }
}

Dopri5Step dopri5_step(const OdeRhs& f, const Tensor& z, double t, double h) {
  if (!(h > 0.0)) throw ValidationError("dopri5_step: h must be > 0");
  int evals = 0;
  PlainCtx cx{f, &evals};
  auto adv = dopri5_advance(cx, z, t, h, nullptr);
  Dopri5Step out;
  out.z5 = adv.z_next;
  out.error = weighted_sum(cx, adv.k, kE, 7, h);
  out.k = std::move(adv.k);
  return out;
}

IntegrationResult integrate(const OdeRhs& f, const Tensor& z0, const SolverConfig& cfg,
                            std::vector<Tensor>* trajectory) {
  cfg.validate();
  if (!z0.all_finite()) throw NumericalError("ode: non-finite initial state");
  IntegrationResult res;
  PlainCtx cx{f, &res.rhs_evals};
  if (trajectory) trajectory->push_back(z0);

  if (cfg.method == SolverConfig::Method::rk4_fixed) {
    const double h = (cfg.t1 - cfg.t0) / cfg.fixed_step_count;
    Tensor z = z0;
    for (int s = 0; s < cfg.fixed_step_count; ++s) {
      const double t = cfg.t0 + s * h;
      z = rk4_advance(cx, z, t, h);
      res.steps.push_back({t, h});
      ++res.accepted;
      if (trajectory) trajectory->push_back(z);
    }
    res.state = std::move(z);
    return res;
  }

  Tensor z = z0;
  double t = cfg.t0;
  double h = cfg.initial_step > 0.0 ? cfg.initial_step : 0.1 * (cfg.t1 - cfg.t0);
  Tensor fsal;
  bool have_fsal = false;
  double last_accepted_t = cfg.t0;
  int attempts = 0;

  while (t < cfg.t1) {
    if (attempts++ >= cfg.max_steps) {
      throw NumericalError("ode: exceeded max_steps = " + std::to_string(cfg.max_steps) +
                           ", last accepted t = " + std::to_string(last_accepted_t));
    }
    bool final_step = false;
    if (h >= cfg.t1 - t) {
      h = cfg.t1 - t;
      final_step = true;
    }
    auto adv = dopri5_advance(cx, z, t, h, have_fsal ? &fsal : nullptr);
    const Tensor err_vec = weighted_sum(cx, adv.k, kE, 7, h);
    const double err = error_norm(err_vec, z, adv.z_next, cfg.atol, cfg.rtol);
    if (!std::isfinite(err)) {
      throw NumericalError("ode: non-finite error estimate at t = " + std::to_string(t));
    }
    const double factor =
        err == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
    if (err <= 1.0) {
      res.steps.push_back({t, h});
      ++res.accepted;
      z = std::move(adv.z_next);
      t = final_step ? cfg.t1 : t + h;
      last_accepted_t = t;
      fsal = std::move(adv.k[6]);
      have_fsal = true;
      if (trajectory) trajectory->push_back(z);
    } else {
      ++res.rejected;  // state unchanged, so the FSAL derivative stays valid
    }
    h *= factor;
  }
  res.state = std::move(z);
  return res;
}

NodeId replay_steps(Tape& tape, const TapedOdeRhs& f, NodeId z0, SolverConfig::Method method,
                    const std::vector<StepRecord>& steps) {
  TapeCtx cx{tape, f};
  NodeId z = z0;
  if (method == SolverConfig::Method::rk4_fixed) {
    for (const StepRecord& s : steps) z = rk4_advance(cx, z, s.t, s.h);
    return z;
  }
  NodeId fsal = -1;
  for (const StepRecord& s : steps) {
    auto adv = dopri5_advance(cx, z, s.t, s.h, fsal >= 0 ? &fsal : nullptr);
    z = adv.z_next;
    fsal = adv.k[6];
  }
  return z;
}

NodeId integrate_differentiable(Tape& tape, const OdeRhs& f_plain, const TapedOdeRhs& f_taped,
                                NodeId z0, const SolverConfig& cfg,
                                const std::vector<StepRecord>* frozen_in,
                                std::vector<StepRecord>* frozen_out) {
  std::vector<StepRecord> steps;
  if (frozen_in) {
    steps = *frozen_in;
  } else {
    steps = integrate(f_plain, tape.value(z0), cfg).steps;
  }
  if (frozen_out) *frozen_out = steps;
  return replay_steps(tape, f_taped, z0, cfg.method, steps);
}

}  // namespace rmat
