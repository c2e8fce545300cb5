// Apache License, Version 2.0, refer to LICENSE.txt
#include "sdpm/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "sdpm/rng.hpp"

namespace sdpm {

namespace {

constexpr double kToyMean[3] = {-2.0, 0.0, 2.5};
constexpr double kToyScale[3] = {0.4, 0.3, 0.3};
constexpr double kToyWeight[3] = {0.3, 0.5, 0.2};

std::string indexed_id(const char* prefix, int i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d", prefix, i);
  return buf;
}

Matrix standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

int draw_obs_count(const SimScenario& s, std::mt19937_64& rng) {
  return std::uniform_int_distribution<int>(s.obs_range.first, s.obs_range.second)(rng);
}

}  // namespace

SimScenario SimScenario::case1_defaults() {
  SimScenario s;
  s.sim_case = SimCase::Case1;
  s.p = 50;
  s.n_experiments = 100;
  s.n_classes = 10;
  s.coeff_range = 3.0;
  s.obs_range = {10, 15};
  s.mcmc_draws = 500;
  return s;
}

SimScenario SimScenario::case2_defaults() {
  SimScenario s;
  s.sim_case = SimCase::Case2;
  s.p = 100;
  s.n_experiments = 164;
  s.n_classes = 20;
  s.coeff_range = 2.0;
  s.obs_range = {20, 30};
  s.mcmc_draws = 500;
  return s;
}

void SimScenario::validate() const {
  if (p < 1) throw std::invalid_argument("SimScenario: p must be >= 1");
  if (n_experiments < 1) throw std::invalid_argument("SimScenario: n_experiments must be >= 1");
  if (n_classes < 1 || n_classes > n_experiments)
    throw std::invalid_argument("SimScenario: need 1 <= n_classes <= n_experiments");
  if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("SimScenario: eta must be in [0,1]");
  if (obs_range.first < 1 || obs_range.second < obs_range.first)
    throw std::invalid_argument("SimScenario: bad obs_range");
  if (mcmc_draws < 1) throw std::invalid_argument("SimScenario: mcmc_draws must be >= 1");
  if (noise_sd < 0.0) throw std::invalid_argument("SimScenario: noise_sd must be >= 0");
  if (burn_in < 0) throw std::invalid_argument("SimScenario: burn_in must be >= 0");
}

std::vector<SampleBatch> toy_batches(int n_per_mode, std::uint64_t seed, ToyOptions opts) {
  if (n_per_mode < 1) throw std::invalid_argument("toy_batches: n_per_mode must be >= 1");
  std::vector<SampleBatch> batches;
  for (int m = 0; m < 3; ++m) {
    const int n = opts.proportional
                      ? std::max(1, static_cast<int>(std::lround(3.0 * n_per_mode * kToyWeight[m])))
                      : n_per_mode;
    const double sd = opts.scale_is_sd ? kToyScale[m] : std::sqrt(kToyScale[m]);
    std::mt19937_64 rng = make_rng(seed, "toy", static_cast<std::uint64_t>(m));
    std::normal_distribution<double> normal(kToyMean[m], sd);
    SampleBatch b;
    b.id = indexed_id("mode", m + 1);
    b.label = b.id;
    b.samples.resize(n, 1);
    for (int i = 0; i < n; ++i) b.samples(i, 0) = normal(rng);
    batches.push_back(std::move(b));
  }
  return batches;
}

double toy_density(double y, bool scale_is_sd) {
  double f = 0.0;
  for (int m = 0; m < 3; ++m) {
    const double var = scale_is_sd ? kToyScale[m] * kToyScale[m] : kToyScale[m];
    const double d = y - kToyMean[m];
    f += kToyWeight[m] * std::exp(-0.5 * d * d / var) /
         std::sqrt(2.0 * std::numbers::pi * var);
  }
  return f;
}

ConjugatePosterior conjugate_linreg_posterior(const Matrix& x, const Vector& y,
                                              const Vector& prior_mean) {
  if (x.rows() != y.size() || x.cols() != prior_mean.size())
    throw std::invalid_argument("conjugate_linreg_posterior: dimension mismatch");
  const Eigen::Index p = x.cols();
  Matrix precision = x.transpose() * x + Matrix::Identity(p, p);
  Eigen::LLT<Matrix> llt(precision);
  ConjugatePosterior post;
  post.chol_precision = llt.matrixL();
  post.mean = llt.solve(x.transpose() * y + prior_mean);
  post.cov = llt.solve(Matrix::Identity(p, p));
  return post;
}

Matrix sample_gaussian_posterior(const ConjugatePosterior& posterior, int n_draws,
                                 std::mt19937_64& rng) {
  if (n_draws < 1)
    throw std::invalid_argument("sample_gaussian_posterior: n_draws must be >= 1");
  const Eigen::Index p = posterior.mean.size();
  std::normal_distribution<double> std_normal(0.0, 1.0);
  Matrix draws(n_draws, p);
  Vector z(p);
  // mean + L⁻ᵀ z has covariance (L Lᵀ)⁻¹, the posterior covariance.
  for (int d = 0; d < n_draws; ++d) {
    for (Eigen::Index j = 0; j < p; ++j) z(j) = std_normal(rng);
    draws.row(d) =
        (posterior.mean +
         posterior.chol_precision.transpose().triangularView<Eigen::Upper>().solve(z))
            .transpose();
  }
  return draws;
}

Vector case1_true_coefficients(const SimScenario& scenario, int cls) {
  if (cls < 0 || cls >= scenario.n_classes)
    throw std::invalid_argument("case1_true_coefficients: class out of range");
  std::mt19937_64 rng = make_rng(scenario.seed, "case1-class", static_cast<std::uint64_t>(cls));
  std::uniform_real_distribution<double> unif(-scenario.coeff_range, scenario.coeff_range);
  Vector truth(scenario.p);
  for (int j = 0; j < scenario.p; ++j) truth(j) = unif(rng);
  return truth;
}

std::vector<SampleBatch> gen_case1(const SimScenario& scenario) {
  scenario.validate();
  if (scenario.sim_case != SimCase::Case1)
    throw std::invalid_argument("gen_case1: scenario.sim_case must be Case1");
  const int p = scenario.p;

  std::vector<Vector> class_truth(scenario.n_classes);
  for (int c = 0; c < scenario.n_classes; ++c)
    class_truth[c] = case1_true_coefficients(scenario, c);

  std::vector<SampleBatch> batches;
  std::normal_distribution<double> std_normal(0.0, 1.0);
  for (int i = 0; i < scenario.n_experiments; ++i) {
    const int cls = i % scenario.n_classes;
    std::mt19937_64 rng = make_rng(scenario.seed, "case1-exp", static_cast<std::uint64_t>(i));
    const int n = draw_obs_count(scenario, rng);
    Matrix x = standard_normal_matrix(n, p, rng);
    Vector y = x * class_truth[cls];
    for (int r = 0; r < n; ++r) y(r) += scenario.noise_sd * std_normal(rng);

    ConjugatePosterior post =
        conjugate_linreg_posterior(x, y, scenario.eta * class_truth[cls]);
    SampleBatch b;
    b.id = indexed_id("case1", i);
    b.label = indexed_id("class", cls);
    b.samples = sample_gaussian_posterior(post, scenario.mcmc_draws, rng);
    batches.push_back(std::move(b));
  }
  return batches;
}

Vector case2_lambda_pattern(const std::vector<bool>& is_zero, double eta,
                            std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector lambda(static_cast<Eigen::Index>(is_zero.size()));
  for (std::size_t j = 0; j < is_zero.size(); ++j) {
    const bool truthful = unif(rng) < eta;
    const bool impose_sparsity = is_zero[j] == truthful;
    lambda(static_cast<Eigen::Index>(j)) = impose_sparsity ? 10.0 : 1.0;
  }
  return lambda;
}

std::vector<SampleBatch> gen_case2(const SimScenario& scenario) {
  scenario.validate();
  if (scenario.sim_case != SimCase::Case2)
    throw std::invalid_argument("gen_case2: scenario.sim_case must be Case2");
  const int p = scenario.p;

  std::vector<Vector> class_truth(scenario.n_classes);
  std::vector<std::vector<bool>> class_zero(scenario.n_classes);
  for (int c = 0; c < scenario.n_classes; ++c) {
    std::mt19937_64 rng = make_rng(scenario.seed, "case2-class", static_cast<std::uint64_t>(c));
    const int lo = std::max(1, p / 10);
    const int hi = std::max(lo, p / 2);
    const int active = std::uniform_int_distribution<int>(lo, hi)(rng);
    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_real_distribution<double> unif(-scenario.coeff_range, scenario.coeff_range);
    class_truth[c] = Vector::Zero(p);
    class_zero[c].assign(p, true);
    for (int a = 0; a < active; ++a) {
      class_truth[c](order[a]) = unif(rng);
      class_zero[c][order[a]] = false;
    }
  }

  std::vector<SampleBatch> batches;
  std::normal_distribution<double> std_normal(0.0, 1.0);
  for (int i = 0; i < scenario.n_experiments; ++i) {
    const int cls = i % scenario.n_classes;
    std::mt19937_64 rng = make_rng(scenario.seed, "case2-exp", static_cast<std::uint64_t>(i));
    Vector lambda = case2_lambda_pattern(class_zero[cls], scenario.eta, rng);
    const int n = draw_obs_count(scenario, rng);
    Matrix x = standard_normal_matrix(n, p, rng);
    Vector y = x * class_truth[cls];
    for (int r = 0; r < n; ++r) y(r) += scenario.noise_sd * std_normal(rng);

    SampleBatch b;
    b.id = indexed_id("case2", i);
    b.label = indexed_id("class", cls);
    b.samples = bayesian_lasso_gibbs(x, y, lambda, scenario.mcmc_draws, scenario.burn_in, rng);
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace sdpm
