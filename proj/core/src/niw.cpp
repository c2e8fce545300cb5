// Apache License, Version 2.0, refer to LICENSE.txt
#include "sdpm/niw.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

#include "sdpm/errors.hpp"
#include "sdpm/rng.hpp"

namespace sdpm {

namespace {

constexpr double kMinPivot = 1e-12;

std::atomic<std::uint64_t> g_jitter_count{0};

std::uint64_t hash_doubles(std::uint64_t h, const double* xs, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &xs[i], sizeof(bits));
    h = splitmix64(h ^ bits);
  }
  return h;
}

void check_symmetric(const Matrix& m, const char* name) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string(name) + " is not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::invalid_argument(std::string(name) + " is not symmetric");
}

/// Student-t log density given the quadratic form q = (x-a)ᵀ M⁻¹ (x-a) and
/// log|M| of the scale matrix M.
double mvt_core(int p, double df, double quad_form, double log_det_scale) {
  return std::lgamma(0.5 * (df + p)) - std::lgamma(0.5 * df) -
         0.5 * p * std::log(df * std::numbers::pi) - 0.5 * log_det_scale -
         0.5 * (df + p) * std::log1p(quad_form / df);
}

}  // namespace

NiwPrior::NiwPrior(Vector lambda, double kappa, Matrix omega, double nu)
    : lambda_(std::move(lambda)), kappa_(kappa), omega_(std::move(omega)), nu_(nu) {
  const int p = dim();
  if (p < 1) throw std::invalid_argument("NiwPrior: dimension must be >= 1");
  if (!(kappa_ > 0)) throw std::invalid_argument("NiwPrior: kappa must be > 0");
  if (!(2.0 * nu_ - p + 1.0 > 0))
    throw std::invalid_argument("NiwPrior: 2*nu - p + 1 must be > 0");
  check_symmetric(omega_, "NiwPrior omega");
  if (omega_.rows() != p) throw std::invalid_argument("NiwPrior: omega/lambda dimension mismatch");
  auto chol = try_cholesky(omega_);
  if (!chol) throw std::invalid_argument("NiwPrior: omega is not positive definite");
  chol_omega_ = std::move(*chol);
  log_det_omega_ = chol_log_det(chol_omega_);
  trace_omega_ = omega_.trace();

  std::uint64_t h = splitmix64(0x9d2c5680u ^ static_cast<std::uint64_t>(p));
  h = hash_doubles(h, lambda_.data(), lambda_.size());
  h = hash_doubles(h, omega_.data(), static_cast<std::size_t>(omega_.size()));
  h = hash_doubles(h, &kappa_, 1);
  h = hash_doubles(h, &nu_, 1);
  signature_ = h;
}

NiwPrior NiwPrior::defaults_for_dim(int p) {
  if (p < 1) throw std::invalid_argument("defaults_for_dim: dimension must be >= 1");
  const double nu = p + 2.0;
  Matrix omega = (nu - 0.5 * (p + 1)) * Matrix::Identity(p, p);
  return NiwPrior(Vector::Zero(p), 0.25, std::move(omega), nu);
}

ComponentStats::ComponentStats(int dim)
    : mean_(Vector::Zero(dim)), scatter_(Matrix::Zero(dim, dim)) {
  if (dim < 1) throw std::invalid_argument("ComponentStats: dimension must be >= 1");
}

ComponentStats::ComponentStats(std::uint64_t count, Vector mean, Matrix scatter)
    : count_(count), mean_(std::move(mean)), scatter_(std::move(scatter)) {
  if (scatter_.rows() != mean_.size() || scatter_.cols() != mean_.size())
    throw std::invalid_argument("ComponentStats: mean/scatter dimension mismatch");
}

void ComponentStats::add(const Vector& theta) {
  if (theta.size() != mean_.size())
    throw std::invalid_argument("ComponentStats::add: dimension mismatch");
  if (count_ == 0) {
    mean_ = theta;
    scatter_.setZero();
    count_ = 1;
    cache_.valid = false;
    return;
  }
  const double n = static_cast<double>(count_);
  // Rank-one form of the scatter update; algebraically equal to
  // S + theta thetaᵀ + n mean meanᵀ - (n+1) mean' mean'ᵀ.
  Vector w = theta - mean_;
  scatter_.noalias() += (n / (n + 1.0)) * (w * w.transpose());
  mean_ = (n * mean_ + theta) / (n + 1.0);
  count_ += 1;
  cache_.valid = false;
}

void ComponentStats::add(const Vector& theta, const NiwPrior& prior, int recompute_period) {
  if (theta.size() != mean_.size())
    throw std::invalid_argument("ComponentStats::add: dimension mismatch");
  const bool can_update = cache_.valid && cache_.prior_signature == prior.signature() &&
                          count_ >= 1 && recompute_period > 1;
  if (!can_update) {
    add(theta);
    return;
  }

  const double kappa = prior.kappa();
  const double n = static_cast<double>(count_);
  const Vector mean_old = mean_;
  add(theta);  // invalidates; we restore validity below if the updates succeed
  const Vector& mean_new = mean_;

  // omega + 0.5 D changes by
  //   +0.5 (n/(n+1)) w wᵀ          (scatter growth)
  //   +0.5 c_{n+1} u_new u_newᵀ    (new mean-shift term)
  //   -0.5 c_n u_old u_oldᵀ        (old mean-shift term)
  // with u = lambda - mean and c_m = kappa m / (kappa + m).
  Vector v_scatter = std::sqrt(0.5 * n / (n + 1.0)) * (theta - mean_old);
  const double c_old = kappa * n / (kappa + n);
  const double c_new = kappa * (n + 1.0) / (kappa + n + 1.0);
  Vector v_new = std::sqrt(0.5 * c_new) * (prior.lambda() - mean_new);
  Vector v_old = std::sqrt(0.5 * c_old) * (prior.lambda() - mean_old);

  Matrix chol = cache_.chol;
  bool ok = chol_rank1_update(chol, std::move(v_scatter), kMinPivot) &&
            chol_rank1_update(chol, std::move(v_new), kMinPivot) &&
            chol_rank1_downdate(chol, std::move(v_old), kMinPivot);
  if (!ok) return;  // cache already invalidated; rebuilt lazily

  cache_.chol = std::move(chol);
  cache_.valid = true;
  cache_.prior_signature = prior.signature();
  cache_.updates_since_refactor += 1;
  if (cache_.updates_since_refactor >= recompute_period) cache_.valid = false;
}

Matrix ComponentStats::posterior_scale_core(const NiwPrior& prior) const {
  const double kappa = prior.kappa();
  const double n = static_cast<double>(count_);
  Vector u = prior.lambda() - mean_;
  Matrix d = scatter_ + (kappa * n / (kappa + n)) * (u * u.transpose());
  return prior.omega() + 0.5 * d;
}

const Matrix& ComponentStats::predictive_chol(const NiwPrior& prior) const {
  if (cache_.valid && cache_.prior_signature == prior.signature()) return cache_.chol;
  Matrix m = posterior_scale_core(prior);
  auto chol = try_cholesky(m);
  if (!chol) {
    // The additive omega term normally keeps this positive definite even for
    // degenerate scatter; jitter once before giving up.
    m.diagonal().array() += 1e-10 * prior.trace_omega();
    g_jitter_count.fetch_add(1, std::memory_order_relaxed);
    chol = try_cholesky(m);
    if (!chol)
      throw FactorizationError("component predictive scale is not positive definite");
  }
  cache_.chol = std::move(*chol);
  cache_.valid = true;
  cache_.prior_signature = prior.signature();
  cache_.updates_since_refactor = 0;
  return cache_.chol;
}

std::uint64_t scale_jitter_count() { return g_jitter_count.load(std::memory_order_relaxed); }
void reset_scale_jitter_count() { g_jitter_count.store(0, std::memory_order_relaxed); }

double mvt_logpdf(const Vector& x, double df, const Vector& loc, const Matrix& scale) {
  const int p = static_cast<int>(x.size());
  if (loc.size() != p || scale.rows() != p || scale.cols() != p)
    throw std::invalid_argument("mvt_logpdf: dimension mismatch");
  if (!(df > 0)) throw std::invalid_argument("mvt_logpdf: df must be > 0");
  check_symmetric(scale, "mvt_logpdf scale");
  auto chol = try_cholesky(scale);
  if (!chol) throw FactorizationError("mvt_logpdf: scale matrix is not positive definite");
  const double q = mahalanobis_sq(*chol, x - loc);
  return mvt_core(p, df, q, chol_log_det(*chol));
}

double predictive_new(const Vector& theta, const NiwPrior& prior) {
  const int p = prior.dim();
  if (theta.size() != p) throw std::invalid_argument("predictive_new: dimension mismatch");
  const double d0 = 2.0 * prior.nu() - p + 1.0;
  const double b0 = 2.0 * (prior.kappa() + 1.0) / (prior.kappa() * d0);
  const double q = mahalanobis_sq(prior.chol_omega(), theta - prior.lambda()) / b0;
  const double log_det = prior.log_det_omega() + p * std::log(b0);
  return mvt_core(p, d0, q, log_det);
}

double predictive_existing(const Vector& theta, const ComponentStats& stats,
                           const NiwPrior& prior) {
  const int p = prior.dim();
  if (theta.size() != p || stats.dim() != p)
    throw std::invalid_argument("predictive_existing: dimension mismatch");
  if (stats.empty())
    throw std::invalid_argument("predictive_existing: component is empty");
  const double kappa = prior.kappa();
  const double n = static_cast<double>(stats.count());
  const double d = 2.0 * prior.nu() + n - p + 1.0;
  Vector a = (kappa * prior.lambda() + n * stats.mean()) / (kappa + n);
  const double b = 2.0 * (kappa + n + 1.0) / ((kappa + n) * d);
  const Matrix& chol = stats.predictive_chol(prior);
  const double q = mahalanobis_sq(chol, theta - a) / b;
  const double log_det = chol_log_det(chol) + p * std::log(b);
  return mvt_core(p, d, q, log_det);
}

GaussianMoments plugin_moments(const ComponentStats& stats, const NiwPrior& prior) {
  const int p = prior.dim();
  if (stats.dim() != p) throw std::invalid_argument("plugin_moments: dimension mismatch");
  if (stats.empty()) throw std::invalid_argument("plugin_moments: component is empty");
  const double kappa = prior.kappa();
  const double n = static_cast<double>(stats.count());
  const double denom = prior.nu() + 0.5 * n - 0.5 * (p + 1);
  if (!(denom > 0))
    throw std::invalid_argument("plugin_moments: posterior-mean covariance undefined (nu too small)");
  GaussianMoments g;
  g.mean = (kappa * prior.lambda() + n * stats.mean()) / (kappa + n);
  g.chol_cov = stats.predictive_chol(prior) / std::sqrt(denom);
  g.log_det_cov = chol_log_det(g.chol_cov);
  return g;
}

double gaussian_logpdf(const Vector& x, const GaussianMoments& g) {
  const int p = static_cast<int>(x.size());
  const double q = mahalanobis_sq(g.chol_cov, x - g.mean);
  return -0.5 * (p * std::log(2.0 * std::numbers::pi) + g.log_det_cov + q);
}

ComponentStats stats_add(ComponentStats stats, const Vector& theta) {
  stats.add(theta);
  return stats;
}

ComponentStats stats_from_batch(const std::vector<Vector>& points) {
  if (points.empty()) throw std::invalid_argument("stats_from_batch: empty point list");
  const int p = static_cast<int>(points.front().size());
  Vector mean = Vector::Zero(p);
  for (const auto& x : points) {
    if (x.size() != p) throw std::invalid_argument("stats_from_batch: dimension mismatch");
    mean += x;
  }
  mean /= static_cast<double>(points.size());
  Matrix scatter = Matrix::Zero(p, p);
  for (const auto& x : points) {
    Vector d = x - mean;
    scatter.noalias() += d * d.transpose();
  }
  return ComponentStats(points.size(), std::move(mean), std::move(scatter));
}

}  // namespace sdpm
