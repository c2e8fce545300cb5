// Apache License, Version 2.0, refer to LICENSE.txt
//
// Independent oracles used by the test suites. Everything here is computed
// through formulas and algorithms deliberately different from the library's
// implementation paths (explicit inverses instead of Cholesky factors,
// quadrature instead of closed forms, exhaustive enumeration instead of
// sequential updates), mostly in long double.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Univariate Student-t log density with df degrees of freedom, location
/// loc and *squared* scale (scale-matrix convention), direct formula in
/// long double.
double t_logpdf_1d(double x, double df, double loc, double scale);

/// Multivariate-t log density via explicit Gauss-Jordan inverse and LU
/// determinant in long double.
double mvt_logpdf(const Vector& x, double df, const Vector& loc, const Matrix& scale);

/// Multivariate-t log density by numerical quadrature of the univariate t
/// kernel normalized to one (tan-substitution composite Simpson); 1-D only.
double t_logpdf_1d_quadrature(double x, double df, double loc, double scale);

/// Integral of a univariate log density over the whole real line by
/// tan-substitution quadrature centered at loc with width sqrt(scale)
/// (should be 1 for a normalized density).
double density_total_mass_1d(const std::function<double(double)>& log_density,
                             double loc, double scale);

/// Posterior predictive density p(theta | data) for a 1-D Gaussian with a
/// conjugate normal-inverse-Wishart prior, computed by 2-D numerical
/// integration over (mu, log sigma^2) of N(theta | mu, sigma^2) times the
/// posterior. `omega` and `nu` follow the convention where
/// sigma^2 ~ IG(shape = nu, rate = omega).
double niw_predictive_1d_quadrature(double theta, const std::vector<double>& data,
                                    double lambda, double kappa, double omega, double nu);

/// All set partitions of {0,...,n-1} as restricted-growth label vectors.
std::vector<std::vector<int>> set_partitions(int n);

/// Log predictive density of theta given a fixed partition of 1-D points
/// under the CRP/NIW model, recomputing every cluster's statistics from the
/// raw points: (sum_c n_c t_c(theta) + alpha t_new(theta)) / (alpha + n).
double partition_predictive_1d(const std::vector<double>& points,
                               const std::vector<int>& labels, double theta,
                               double lambda, double kappa, double omega, double nu,
                               double alpha);

/// Unnormalized log posterior weight of a partition: CRP prior times the
/// product over clusters of the NIW marginal likelihood.
double partition_log_weight_1d(const std::vector<double>& points,
                               const std::vector<int>& labels, double lambda,
                               double kappa, double omega, double nu, double alpha);

/// Lasso solution by cyclic coordinate descent:
/// argmin 0.5 ||y - X b||^2 + penalty * ||b||_1.
Vector lasso_coordinate_descent(const Matrix& x, const Vector& y, double penalty,
                                int sweeps = 500);

/// Explicit matrix inverse by Gauss-Jordan elimination with partial
/// pivoting (long double internally).
Matrix gauss_jordan_inverse(const Matrix& m);

}  // namespace oracle
