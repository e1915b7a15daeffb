#include "rmat/loss_theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rmat/error.hpp"

namespace rmat {

void ToyJointDistribution::validate() const {
  if (rho_match.empty() || rho_match.size() != rho_unmatch.size()) {
    throw ValidationError("toy distribution: conditional vectors must share a non-empty support");
  }
  if (!(p_match > 0.0) || !(p_match < 1.0)) {
    throw ValidationError("toy distribution: p_match must lie in (0,1)");
  }
  double sm = 0.0, su = 0.0;
  for (std::size_t i = 0; i < rho_match.size(); ++i) {
    if (rho_match[i] < 0.0 || rho_unmatch[i] < 0.0) {
      throw ValidationError("toy distribution: negative probability at atom " + std::to_string(i));
    }
    sm += rho_match[i];
    su += rho_unmatch[i];
  }
  if (std::fabs(sm - 1.0) > 1e-12 || std::fabs(su - 1.0) > 1e-12) {
    throw ValidationError("toy distribution: conditionals must sum to 1 within 1e-12");
  }
}

ToyJointDistribution ToyJointDistribution::random(Rng& rng, int max_support) {
  const int n = 2 + rng.uniform_int(std::max(1, max_support - 1));
  ToyJointDistribution d;
  d.p_match = rng.uniform(0.1, 0.9);
  d.rho_match.resize(static_cast<std::size_t>(n));
  d.rho_unmatch.resize(static_cast<std::size_t>(n));
  double sm = 0.0, su = 0.0;
  for (int i = 0; i < n; ++i) {
    // exponential draws keep every atom strictly positive
    d.rho_match[static_cast<std::size_t>(i)] = -std::log(1.0 - rng.uniform());
    d.rho_unmatch[static_cast<std::size_t>(i)] = -std::log(1.0 - rng.uniform());
    sm += d.rho_match[static_cast<std::size_t>(i)];
    su += d.rho_unmatch[static_cast<std::size_t>(i)];
  }
  double rm = 0.0, ru = 0.0;
  for (int i = 0; i < n - 1; ++i) {
    d.rho_match[static_cast<std::size_t>(i)] /= sm;
    d.rho_unmatch[static_cast<std::size_t>(i)] /= su;
    rm += d.rho_match[static_cast<std::size_t>(i)];
    ru += d.rho_unmatch[static_cast<std::size_t>(i)];
  }
  // close the simplex exactly so validate()'s 1e-12 sum check holds
  d.rho_match.back() = 1.0 - rm;
  d.rho_unmatch.back() = 1.0 - ru;
  return d;
}

ToyJointDistribution ToyJointDistribution::random_singular(Rng& rng, int max_support) {
  const int half = 1 + rng.uniform_int(std::max(1, max_support / 2));
  ToyJointDistribution d;
  d.p_match = rng.uniform(0.1, 0.9);
  const int n = 2 * half;
  d.rho_match.assign(static_cast<std::size_t>(n), 0.0);
  d.rho_unmatch.assign(static_cast<std::size_t>(n), 0.0);
  double sm = 0.0, su = 0.0;
  for (int i = 0; i < half; ++i) {
    d.rho_match[static_cast<std::size_t>(i)] = -std::log(1.0 - rng.uniform());
    d.rho_unmatch[static_cast<std::size_t>(half + i)] = -std::log(1.0 - rng.uniform());
    sm += d.rho_match[static_cast<std::size_t>(i)];
    su += d.rho_unmatch[static_cast<std::size_t>(half + i)];
  }
  double rm = 0.0, ru = 0.0;
  for (int i = 0; i < half - 1; ++i) {
    d.rho_match[static_cast<std::size_t>(i)] /= sm;
    d.rho_unmatch[static_cast<std::size_t>(half + i)] /= su;
    rm += d.rho_match[static_cast<std::size_t>(i)];
    ru += d.rho_unmatch[static_cast<std::size_t>(half + i)];
  }
  d.rho_match[static_cast<std::size_t>(half - 1)] = 1.0 - rm;
  d.rho_unmatch[static_cast<std::size_t>(n - 1)] = 1.0 - ru;
  return d;
}

double discriminator_objective(const ToyJointDistribution& dist, const std::vector<double>& d) {
  dist.validate();
  if (d.size() != dist.rho_match.size()) {
    throw ValidationError("discriminator_objective: discriminator length mismatch");
  }
  const double pm = dist.p_match, pu = 1.0 - dist.p_match;
  double acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (dist.rho_match[i] > 0.0) acc += pm * dist.rho_match[i] * std::log(d[i]);
    if (dist.rho_unmatch[i] > 0.0) acc += pu * dist.rho_unmatch[i] * std::log(1.0 - d[i]);
  }
  return acc;
}

OptimalDiscriminator optimal_discriminator(const ToyJointDistribution& dist) {
  dist.validate();
  const double pm = dist.p_match, pu = 1.0 - dist.p_match;
  OptimalDiscriminator out;
  out.d_star.assign(dist.rho_match.size(), std::numeric_limits<double>::quiet_NaN());
  bool any = false;
  double acc = 0.0;
  for (std::size_t i = 0; i < dist.rho_match.size(); ++i) {
    const double wm = pm * dist.rho_match[i];
    const double wu = pu * dist.rho_unmatch[i];
    const double p = wm + wu;
    if (p == 0.0) continue;  // zero-marginal atoms are dropped
    any = true;
    out.d_star[i] = wm / p;
    // log d* and log(1-d*) expanded against the marginal: exact zeros on
    // mutually singular supports instead of log(1 - (1 - tiny)).
    if (wm > 0.0) acc += wm * (std::log(wm) - std::log(p));
    if (wu > 0.0) acc += wu * (std::log(wu) - std::log(p));
  }
  if (!any) {
    throw ValidationError("optimal_discriminator: distribution has no atom with positive mass");
  }
  out.l_d_star = acc;
  return out;
}

namespace {

// Projects x onto { x : <w, x> = 0 } (w has unit squared norm by
// construction, sum of rho = 1).
void project_mean_zero(std::vector<double>& x, const std::vector<double>& w) {
  double dot = 0.0, ww = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += w[i] * x[i];
    ww += w[i] * w[i];
  }
  if (ww == 0.0) return;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] -= (dot / ww) * w[i];
}

// Shrinks the direction so rho + eps_max * w * x stays nonnegative.
void fit_into_simplex(std::vector<double>& x, const std::vector<double>& w, double eps_max) {
  double c = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (w[i] > 0.0 && x[i] < 0.0) {
      c = std::min(c, 0.9 * w[i] / (eps_max * -x[i]));
    }
  }
  for (double& v : x) v *= c;
}

double loglog_slope(const std::vector<double>& eps, const std::vector<double>& delta) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (delta[i] <= 0.0) continue;
    const double x = std::log(eps[i]);
    const double y = std::log(delta[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

SensitivityResult perturbation_sensitivity(const ToyJointDistribution& dist,
                                           const std::vector<double>& eps_levels, int n_trials,
                                           Rng& rng) {
  dist.validate();
  if (eps_levels.empty()) throw ValidationError("perturbation_sensitivity: no eps levels");
  const double eps_max = *std::max_element(eps_levels.begin(), eps_levels.end());
  const std::size_t n = dist.rho_match.size();
  std::vector<double> wm(n), wu(n);
  for (std::size_t i = 0; i < n; ++i) {
    wm[i] = std::sqrt(dist.rho_match[i]);
    wu[i] = std::sqrt(dist.rho_unmatch[i]);
  }
  const double base = optimal_discriminator(dist).l_d_star;

  SensitivityResult res;
  res.eps_levels = eps_levels;
  for (int trial = 0; trial < n_trials; ++trial) {
    std::vector<double> phi(n), psi(n);
    for (std::size_t i = 0; i < n; ++i) {
      phi[i] = rng.normal();
      psi[i] = rng.normal();
    }
    project_mean_zero(phi, wm);
    project_mean_zero(psi, wu);
    fit_into_simplex(phi, wm, eps_max);
    fit_into_simplex(psi, wu, eps_max);

    std::vector<double> deltas;
    for (double eps : eps_levels) {
      ToyJointDistribution pert = dist;
      double sm = 0.0, su = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        pert.rho_match[i] = std::max(0.0, dist.rho_match[i] + eps * wm[i] * phi[i]);
        pert.rho_unmatch[i] = std::max(0.0, dist.rho_unmatch[i] + eps * wu[i] * psi[i]);
        sm += pert.rho_match[i];
        su += pert.rho_unmatch[i];
      }
      // mean-zero directions keep the sums at 1 up to roundoff; renormalize
      // the tail atom so validate() stays happy
      pert.rho_match.back() += 1.0 - sm;
      pert.rho_unmatch.back() += 1.0 - su;
      deltas.push_back(std::fabs(optimal_discriminator(pert).l_d_star - base));
    }
    const double slope = loglog_slope(eps_levels, deltas);
    if (std::isfinite(slope)) {
      res.exponents.push_back(slope);
      res.deltas.push_back(std::move(deltas));
    }
  }
  if (res.exponents.empty()) {
    throw NumericalError("perturbation_sensitivity: all trials degenerate");
  }
  std::vector<double> sorted = res.exponents;
  std::sort(sorted.begin(), sorted.end());
  res.fitted_exponent = sorted[sorted.size() / 2];
  return res;
}

}  // namespace rmat
