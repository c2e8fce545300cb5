// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace sdpm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix,
/// or nullopt if factorization fails.
std::optional<Matrix> try_cholesky(const Matrix& m);

/// log|L Lᵀ| = 2 Σ log L_ii for a lower-triangular factor L.
double chol_log_det(const Matrix& chol_lower);

/// Squared Mahalanobis norm dᵀ(L Lᵀ)⁻¹d via one triangular solve.
double mahalanobis_sq(const Matrix& chol_lower, const Vector& d);

/// In-place rank-one update of a lower Cholesky factor: L Lᵀ + v vᵀ.
/// Returns false (leaving L unspecified) if any pivot drops to min_pivot
/// or below.
bool chol_rank1_update(Matrix& chol_lower, Vector v, double min_pivot);

/// In-place rank-one downdate: L Lᵀ - v vᵀ. Same pivot contract as update.
bool chol_rank1_downdate(Matrix& chol_lower, Vector v, double min_pivot);

/// log Σ exp(x_i), guarded against overflow; -inf for an empty or all -inf
/// input.
double log_sum_exp(std::span<const double> xs);

/// log ( (1/n) Σ exp(x_i) ).
double log_mean_exp(std::span<const double> xs);

}  // namespace sdpm
