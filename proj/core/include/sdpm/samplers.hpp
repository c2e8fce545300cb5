// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "sdpm/sample_batch.hpp"

namespace sdpm {

enum class SimCase : std::uint8_t { Toy = 0, Case1 = 1, Case2 = 2 };

/// Synthetic-study parameters. eta in [0,1] controls how much true-model
/// information the prior carries: Case1 shifts the prior mean toward the
/// true coefficients, Case2 controls the fidelity of the sparsity pattern
/// encoded in the per-coordinate Laplace rates.
struct SimScenario {
  SimCase sim_case = SimCase::Case1;
  int p = 50;
  int n_experiments = 100;
  int n_classes = 10;
  double eta = 0.0;
  double coeff_range = 3.0;  // true coefficients drawn U[-coeff_range, coeff_range]
  std::pair<int, int> obs_range = {10, 15};
  int mcmc_draws = 500;
  double noise_sd = 1.0;
  int burn_in = 500;  // Case2 Gibbs burn-in
  std::uint64_t seed = 20140306;

  static SimScenario case1_defaults();
  static SimScenario case2_defaults();
  void validate() const;
};

struct ToyOptions {
  /// Scale batch sizes by the mixture weights (0.3, 0.5, 0.2) instead of
  /// using n_per_mode for every mode.
  bool proportional = false;
  /// Read the mode spreads (0.4, 0.3, 0.3) as standard deviations instead of
  /// variances.
  bool scale_is_sd = false;
};

/// Three one-dimensional batches, one per mode of
/// 0.3 N(-2, 0.4) + 0.5 N(0, 0.3) + 0.2 N(2.5, 0.3).
std::vector<SampleBatch> toy_batches(int n_per_mode, std::uint64_t seed, ToyOptions opts = {});

/// The true toy mixture density at y (variance parameterization by default).
double toy_density(double y, bool scale_is_sd = false);

/// Exact Gaussian posterior of a linear model y = X b + eps with known unit
/// noise variance and prior b ~ N(prior_mean, I): covariance (XᵀX + I)⁻¹.
struct ConjugatePosterior {
  Vector mean;
  Matrix cov;
  Matrix chol_precision;  // lower factor of XᵀX + I
};
ConjugatePosterior conjugate_linreg_posterior(const Matrix& x, const Vector& y,
                                              const Vector& prior_mean);

/// Exact draws from a conjugate posterior: mean + Lᵀ⁻¹ z with L the lower
/// factor of the precision.
Matrix sample_gaussian_posterior(const ConjugatePosterior& posterior, int n_draws,
                                 std::mt19937_64& rng);

/// The class-level true coefficient vector used by gen_case1/gen_case2 for
/// experiments of class `cls` under this scenario seed.
Vector case1_true_coefficients(const SimScenario& scenario, int cls);

/// Conjugate linear regression experiments: same-class experiments share one
/// true coefficient vector; posterior draws are exact (no MCMC error).
std::vector<SampleBatch> gen_case1(const SimScenario& scenario);

/// Per-coordinate Laplace rates for one sparse truth: value 10 imposes
/// sparsity, value 1 does not. With probability eta a coordinate's rate
/// reflects the truth (10 where beta0 is zero, 1 where it is active); with
/// probability 1-eta it is inverted.
Vector case2_lambda_pattern(const std::vector<bool>& is_zero, double eta,
                            std::mt19937_64& rng);

/// Sparse linear regression experiments sampled with the Bayesian-lasso
/// Gibbs sampler.
std::vector<SampleBatch> gen_case2(const SimScenario& scenario);

/// Gibbs sampler for the Bayesian lasso with per-coordinate rates lambda_j
/// and scale-invariant prior on the noise variance. Full conditionals:
/// beta is Gaussian with precision XᵀX + D_tau⁻¹, 1/tau_j² is
/// inverse-Gaussian, sigma² is inverse-gamma. Returns n_draws rows after
/// burn_in iterations; throws if the chain leaves the finite domain.
Matrix bayesian_lasso_gibbs(const Matrix& x, const Vector& y, const Vector& lambda,
                            int n_draws, int burn_in, std::mt19937_64& rng);

}  // namespace sdpm
