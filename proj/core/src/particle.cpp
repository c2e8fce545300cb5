// Apache License, Version 2.0, refer to LICENSE.txt
#include "sdpm/particle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sdpm {

Particle::Particle(int dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("Particle: dimension must be >= 1");
}

Particle::Particle(int dim, std::vector<ComponentStats> components,
                   std::vector<std::vector<std::uint64_t>> xi)
    : dim_(dim), components_(std::move(components)), xi_(std::move(xi)) {
  if (dim < 1) throw std::invalid_argument("Particle: dimension must be >= 1");
  for (const auto& c : components_) {
    if (c.dim() != dim_) throw std::invalid_argument("Particle: component dimension mismatch");
    total_ += c.count();
    if (!c.empty()) ++k_;
  }
}

std::vector<int> Particle::active_slots() const {
  std::vector<int> slots;
  slots.reserve(components_.size());
  for (int i = 0; i < static_cast<int>(components_.size()); ++i)
    if (!components_[i].empty()) slots.push_back(i);
  return slots;
}

std::vector<double> Particle::allocation_scores(const Vector& theta, const NiwPrior& prior,
                                                double alpha) const {
  if (theta.size() != dim_)
    throw std::invalid_argument("allocation_scores: dimension mismatch");
  if (!(alpha > 0)) throw std::invalid_argument("allocation_scores: alpha must be > 0");
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(k_) + 1);
  for (int slot : active_slots()) {
    const ComponentStats& c = components_[slot];
    scores.push_back(std::log(static_cast<double>(c.count())) +
                     predictive_existing(theta, c, prior));
  }
  scores.push_back(std::log(alpha) + predictive_new(theta, prior));
  return scores;
}

double Particle::predictive(const Vector& theta, const NiwPrior& prior, double alpha) const {
  const std::vector<double> scores = allocation_scores(theta, prior, alpha);
  return log_sum_exp(scores) - std::log(alpha + static_cast<double>(total_));
}

int Particle::propagate(const Vector& theta, ExperimentIndex experiment, const NiwPrior& prior,
                        double alpha, AllocationMode mode, std::mt19937_64* rng,
                        int recompute_period) {
  const std::vector<int> active = active_slots();
  const std::vector<double> scores = allocation_scores(theta, prior, alpha);

  std::size_t chosen = 0;
  if (mode == AllocationMode::Map) {
    for (std::size_t i = 1; i < scores.size(); ++i)
      if (scores[i] > scores[chosen]) chosen = i;
  } else {
    if (rng == nullptr) throw std::invalid_argument("propagate: Sample mode needs an rng");
    double max = -std::numeric_limits<double>::infinity();
    for (double s : scores) max = std::max(max, s);
    std::vector<double> w(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      w[i] = std::isfinite(scores[i]) ? std::exp(scores[i] - max) : 0.0;
      sum += w[i];
    }
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(*rng) * sum;
    double acc = 0.0;
    chosen = scores.size() - 1;
    for (std::size_t i = 0; i < w.size(); ++i) {
      acc += w[i];
      if (u < acc) {
        chosen = i;
        break;
      }
    }
  }

  int slot;
  if (chosen < active.size()) {
    slot = active[chosen];
    components_[slot].add(theta, prior, recompute_period);
  } else {
    slot = static_cast<int>(components_.size());
    components_.emplace_back(dim_);
    components_.back().add(theta, prior, recompute_period);
    ++k_;
  }
  ++total_;

  if (experiment >= xi_.size()) xi_.resize(experiment + 1);
  auto& row = xi_[experiment];
  if (static_cast<std::size_t>(slot) >= row.size()) row.resize(slot + 1, 0);
  ++row[slot];
  return slot;
}

void Particle::validate() const {
  std::uint64_t count_sum = 0;
  int nonempty = 0;
  for (const auto& c : components_) {
    if (c.dim() != dim_) throw std::logic_error("particle invariant: component dimension");
    count_sum += c.count();
    if (!c.empty()) ++nonempty;
  }
  if (count_sum != total_)
    throw std::logic_error("particle invariant: component counts do not sum to total");
  if (nonempty != k_) throw std::logic_error("particle invariant: k mismatch");
  if (!xi_.empty()) {
    std::uint64_t xi_sum = 0;
    for (const auto& row : xi_) {
      if (row.size() > components_.size())
        throw std::logic_error("particle invariant: xi row longer than component list");
      for (std::uint64_t v : row) xi_sum += v;
    }
    if (xi_sum != total_)
      throw std::logic_error("particle invariant: xi counts do not sum to total");
  }
}

}  // namespace sdpm
