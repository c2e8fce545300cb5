// Apache License, Version 2.0, refer to LICENSE.txt
#include <cmath>
#include <stdexcept>
#include <string>

#include "sdpm/samplers.hpp"

namespace sdpm {

namespace {

/// Inverse-Gaussian draw by the transformation method.
double inverse_gaussian(double mu, double shape, std::mt19937_64& rng) {
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double z = std_normal(rng);
  const double y = z * z;
  const double x =
      mu + mu * mu * y / (2.0 * shape) -
      mu / (2.0 * shape) * std::sqrt(4.0 * mu * shape * y + mu * mu * y * y);
  if (unif(rng) <= mu / (mu + x)) return x;
  return mu * mu / x;
}

}  // namespace

Matrix bayesian_lasso_gibbs(const Matrix& x, const Vector& y, const Vector& lambda,
                            int n_draws, int burn_in, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (y.size() != n || lambda.size() != p)
    throw std::invalid_argument("bayesian_lasso_gibbs: dimension mismatch");
  if (n_draws < 1) throw std::invalid_argument("bayesian_lasso_gibbs: n_draws must be >= 1");
  if (!x.allFinite() || !y.allFinite() || !lambda.allFinite() || lambda.minCoeff() <= 0.0)
    throw std::invalid_argument("bayesian_lasso_gibbs: non-finite inputs or lambda <= 0");

  const Matrix xtx = x.transpose() * x;
  const Vector xty = x.transpose() * y;

  Vector tau2 = Vector::Ones(p);
  double sigma2 = 1.0;
  Vector beta = (xtx + Matrix::Identity(p, p)).llt().solve(xty);

  std::normal_distribution<double> std_normal(0.0, 1.0);
  Matrix draws(n_draws, p);
  Vector z(p);

  const int iterations = burn_in + n_draws;
  for (int iter = 0; iter < iterations; ++iter) {
    // beta | sigma2, tau2: Gaussian with precision XᵀX + D_tau⁻¹.
    Matrix precision = xtx;
    precision.diagonal() += tau2.cwiseInverse();
    Eigen::LLT<Matrix> llt(precision);
    for (Eigen::Index j = 0; j < p; ++j) z(j) = std_normal(rng);
    beta = llt.solve(xty) + std::sqrt(sigma2) * llt.matrixL().transpose().solve(z);

    // sigma2 | beta, tau2: inverse-gamma.
    const double rss = (y - x * beta).squaredNorm();
    const double penalty = (beta.array().square() / tau2.array()).sum();
    const double shape = 0.5 * (static_cast<double>(n) + static_cast<double>(p));
    const double rate = 0.5 * (rss + penalty);
    sigma2 = rate / std::gamma_distribution<double>(shape, 1.0)(rng);

    // 1/tau_j² | beta, sigma2: inverse-Gaussian.
    for (Eigen::Index j = 0; j < p; ++j) {
      const double bj2 = std::max(beta(j) * beta(j), 1e-12);
      const double mu = std::sqrt(lambda(j) * lambda(j) * sigma2 / bj2);
      const double inv_tau2 = inverse_gaussian(mu, lambda(j) * lambda(j), rng);
      tau2(j) = std::clamp(1.0 / inv_tau2, 1e-12, 1e12);
    }

    if (!beta.allFinite() || !std::isfinite(sigma2) || sigma2 <= 0.0)
      throw std::runtime_error("bayesian_lasso_gibbs: chain diverged at iteration " +
                               std::to_string(iter));
    if (iter >= burn_in) draws.row(iter - burn_in) = beta.transpose();
  }
  return draws;
}

}  // namespace sdpm
