// Apache License, Version 2.0, refer to LICENSE.txt
#include "sdpm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sdpm {

std::optional<Matrix> try_cholesky(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) return std::nullopt;
  return Matrix(llt.matrixL());
}

double chol_log_det(const Matrix& chol_lower) {
  return 2.0 * chol_lower.diagonal().array().log().sum();
}

double mahalanobis_sq(const Matrix& chol_lower, const Vector& d) {
  Vector z = chol_lower.triangularView<Eigen::Lower>().solve(d);
  return z.squaredNorm();
}

bool chol_rank1_update(Matrix& chol_lower, Vector v, double min_pivot) {
  const Eigen::Index p = chol_lower.rows();
  for (Eigen::Index k = 0; k < p; ++k) {
    const double lkk = chol_lower(k, k);
    const double r2 = lkk * lkk + v(k) * v(k);
    if (!(r2 > min_pivot * min_pivot)) return false;
    const double r = std::sqrt(r2);
    const double c = r / lkk;
    const double s = v(k) / lkk;
    chol_lower(k, k) = r;
    for (Eigen::Index i = k + 1; i < p; ++i) {
      chol_lower(i, k) = (chol_lower(i, k) + s * v(i)) / c;
      v(i) = c * v(i) - s * chol_lower(i, k);
    }
  }
  return true;
}

bool chol_rank1_downdate(Matrix& chol_lower, Vector v, double min_pivot) {
  const Eigen::Index p = chol_lower.rows();
  for (Eigen::Index k = 0; k < p; ++k) {
    const double lkk = chol_lower(k, k);
    const double r2 = lkk * lkk - v(k) * v(k);
    if (!(r2 > min_pivot * min_pivot)) return false;
    const double r = std::sqrt(r2);
    const double c = r / lkk;
    const double s = v(k) / lkk;
    chol_lower(k, k) = r;
    for (Eigen::Index i = k + 1; i < p; ++i) {
      chol_lower(i, k) = (chol_lower(i, k) - s * v(i)) / c;
      v(i) = c * v(i) - s * chol_lower(i, k);
    }
  }
  return true;
}

double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;  // empty or all -inf
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

double log_mean_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  return log_sum_exp(xs) - std::log(static_cast<double>(xs.size()));
}

}  // namespace sdpm
