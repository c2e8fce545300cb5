// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <vector>

#include "sdpm/linalg.hpp"

namespace sdpm {

/// Hyperparameters of the conjugate normal-inverse-Wishart base measure for
/// one Gaussian mixture component: mean lambda with precision scale kappa,
/// inverse-Wishart scale omega with shape nu.
///
/// Validity requires kappa > 0, omega symmetric positive definite, and
/// 2*nu - p + 1 > 0 so the fresh-component predictive degrees of freedom are
/// positive.
class NiwPrior {
 public:
  NiwPrior(Vector lambda, double kappa, Matrix omega, double nu);

  /// Default rule used throughout: lambda = 0, kappa = 0.25, nu = p + 2,
  /// omega = (nu - 0.5*(p+1)) I.
  static NiwPrior defaults_for_dim(int p);

  int dim() const { return static_cast<int>(lambda_.size()); }
  const Vector& lambda() const { return lambda_; }
  double kappa() const { return kappa_; }
  const Matrix& omega() const { return omega_; }
  double nu() const { return nu_; }

  const Matrix& chol_omega() const { return chol_omega_; }
  double log_det_omega() const { return log_det_omega_; }
  double trace_omega() const { return trace_omega_; }

  /// Content fingerprint; predictive caches use it to detect that they were
  /// built against a different prior.
  std::uint64_t signature() const { return signature_; }

 private:
  Vector lambda_;
  double kappa_;
  Matrix omega_;
  double nu_;
  Matrix chol_omega_;
  double log_det_omega_;
  double trace_omega_;
  std::uint64_t signature_;
};

/// Per-component sufficient statistics: observation count, running mean and
/// centered scatter matrix, plus a cached Cholesky factor of the predictive
/// scale core omega + 0.5*D that is maintained by rank-one modification.
class ComponentStats {
 public:
  ComponentStats() = default;
  explicit ComponentStats(int dim);
  ComponentStats(std::uint64_t count, Vector mean, Matrix scatter);

  std::uint64_t count() const { return count_; }
  const Vector& mean() const { return mean_; }
  const Matrix& scatter() const { return scatter_; }
  int dim() const { return static_cast<int>(mean_.size()); }
  bool empty() const { return count_ == 0; }

  /// Absorbs one observation: count, mean and scatter follow the exact
  /// one-point update; a 0 -> 1 transition sets mean = theta, scatter = 0.
  /// Invalidates the predictive cache.
  void add(const Vector& theta);

  /// Same update, but additionally maintains the cached predictive-scale
  /// Cholesky factor by symmetric rank-one modification when the cache is
  /// valid for `prior`. A full refactorization is forced after
  /// `recompute_period` incremental updates to bound floating-point drift.
  void add(const Vector& theta, const NiwPrior& prior, int recompute_period);

  /// D = scatter + (kappa n / (kappa + n)) (lambda - mean)(lambda - mean)ᵀ,
  /// the data-dependent part of the posterior inverse-Wishart scale.
  Matrix posterior_scale_core(const NiwPrior& prior) const;

  /// Lower Cholesky factor of omega + 0.5*D, rebuilt if the cache is stale
  /// or was produced under a different prior. Throws FactorizationError if
  /// the matrix cannot be factorized even after one diagonal jitter.
  const Matrix& predictive_chol(const NiwPrior& prior) const;

  void invalidate_cache() const { cache_.valid = false; }
  bool cache_valid() const { return cache_.valid; }

 private:
  std::uint64_t count_ = 0;
  Vector mean_;
  Matrix scatter_;

  struct Cache {
    bool valid = false;
    std::uint64_t prior_signature = 0;
    Matrix chol;  // lower factor of omega + 0.5*D
    int updates_since_refactor = 0;
  };
  mutable Cache cache_;
};

/// Number of times a degenerate predictive scale needed diagonal jitter to
/// factorize (process-wide diagnostic).
std::uint64_t scale_jitter_count();
void reset_scale_jitter_count();

/// Log density of the multivariate Student-t with `df` degrees of freedom,
/// location `loc` and scale matrix `scale`, evaluated at x. Computed in log
/// space through the Cholesky factor of `scale`.
double mvt_logpdf(const Vector& x, double df, const Vector& loc, const Matrix& scale);

/// Log predictive density of an observation under a fresh component:
/// t_{d0}(theta | lambda, B0 * omega) with d0 = 2 nu - p + 1 and
/// B0 = 2 (kappa + 1) / (kappa (2 nu - p + 1)).
double predictive_new(const Vector& theta, const NiwPrior& prior);

/// Log predictive density under an existing component with statistics
/// (n, mean, scatter):
///   d = 2 nu + n - p + 1
///   a = (kappa lambda + n mean) / (kappa + n)
///   B = 2 (kappa + n + 1) / ((kappa + n)(2 nu + n - p + 1))
/// returning t_d(theta | a, B (omega + 0.5 D)).
double predictive_existing(const Vector& theta, const ComponentStats& stats,
                           const NiwPrior& prior);

/// Posterior-mean plug-in Gaussian for a nonempty component: mean a and
/// covariance (omega + 0.5 D) / (nu + n/2 - (p+1)/2).
struct GaussianMoments {
  Vector mean;
  Matrix chol_cov;  // lower factor
  double log_det_cov;
};
GaussianMoments plugin_moments(const ComponentStats& stats, const NiwPrior& prior);

double gaussian_logpdf(const Vector& x, const GaussianMoments& g);

ComponentStats stats_add(ComponentStats stats, const Vector& theta);

/// Two-pass mean/scatter over a nonempty point set; the batch counterpart of
/// incremental add().
ComponentStats stats_from_batch(const std::vector<Vector>& points);

}  // namespace sdpm
