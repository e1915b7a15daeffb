#pragma once

#include <vector>

#include "rmat/rng.hpp"

namespace rmat {

// Discrete stand-in for the joint distribution of embedding pairs: a finite
// atom support with matched/unmatched conditional probability vectors and a
// match prior. The discriminator-optimality results survive discretization
// verbatim, which makes them checkable by direct summation.
struct ToyJointDistribution {
  std::vector<double> rho_match;
  std::vector<double> rho_unmatch;
  double p_match = 0.5;

  void validate() const;
  static ToyJointDistribution random(Rng& rng, int max_support = 16);
  static ToyJointDistribution random_singular(Rng& rng, int max_support = 16);
};

// Expected discriminator objective L_d = sum over atoms of
// P(m) rho_m log d + P(u) rho_u log(1 - d); zero-mass terms drop out.
double discriminator_objective(const ToyJointDistribution& dist, const std::vector<double>& d);

struct OptimalDiscriminator {
  std::vector<double> d_star;  // NaN on atoms with zero marginal mass
  double l_d_star = 0.0;
};

// d*(a) = P(m) rho_m(a) / p(a) with p the marginal; atoms with p(a) = 0 are
// dropped from the objective.
OptimalDiscriminator optimal_discriminator(const ToyJointDistribution& dist);

struct SensitivityResult {
  double fitted_exponent = 0.0;                // median over trials
  std::vector<double> exponents;               // per trial
  std::vector<double> eps_levels;
  std::vector<std::vector<double>> deltas;     // per trial, per eps
};

// Perturbs the conditionals along mean-zero directions scaled by sqrt(rho),
// re-solves the optimal discriminator and fits |max_d L~ - max_d L| ~ eps^q.
SensitivityResult perturbation_sensitivity(const ToyJointDistribution& dist,
                                           const std::vector<double>& eps_levels, int n_trials,
                                           Rng& rng);

}  // namespace rmat
