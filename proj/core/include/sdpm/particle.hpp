// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sdpm/niw.hpp"

namespace sdpm {

enum class AllocationMode : std::uint8_t { Map = 0, Sample = 1 };

using ExperimentIndex = std::uint32_t;

/// One partition hypothesis of the sequential Chinese-restaurant process:
/// component sufficient statistics, the nonempty-component count k, the total
/// number of absorbed samples, and per-experiment assignment counts xi.
///
/// Particles are independent values; cloning one clones its entire state.
class Particle {
 public:
  explicit Particle(int dim);
  /// Assembles a particle from pre-computed state; counts and xi must be
  /// mutually consistent where xi is supplied.
  Particle(int dim, std::vector<ComponentStats> components,
           std::vector<std::vector<std::uint64_t>> xi = {});

  int dim() const { return dim_; }
  const std::vector<ComponentStats>& components() const { return components_; }
  int k() const { return k_; }
  std::uint64_t total() const { return total_; }
  /// xi[experiment][component] = number of that experiment's samples assigned
  /// to that component, indexed by absolute component slot. Rows may be
  /// shorter than components(); missing entries are zero.
  const std::vector<std::vector<std::uint64_t>>& xi() const { return xi_; }

  /// Log unnormalized allocation scores for theta: one entry per nonempty
  /// component (count weight times its predictive density) followed by the
  /// fresh-component entry (alpha times the prior predictive).
  std::vector<double> allocation_scores(const Vector& theta, const NiwPrior& prior,
                                        double alpha) const;

  /// Log marginal predictive p(theta | particle): log-sum-exp of the
  /// allocation scores minus log(alpha + total).
  double predictive(const Vector& theta, const NiwPrior& prior, double alpha) const;

  /// Allocates theta to a component (argmax of the scores in Map mode, a
  /// categorical draw in Sample mode), updates that component's statistics,
  /// and increments xi[experiment]. Ties in Map mode resolve to the lowest
  /// component index, so a fresh component loses ties. Returns the chosen
  /// component slot.
  int propagate(const Vector& theta, ExperimentIndex experiment, const NiwPrior& prior,
                double alpha, AllocationMode mode, std::mt19937_64* rng,
                int recompute_period = 32);

  /// Checks the structural invariants (component counts sum to total, k
  /// matches the nonempty count, xi rows sum to total when present); throws
  /// std::logic_error on violation.
  void validate() const;

 private:
  std::vector<int> active_slots() const;

  int dim_;
  std::vector<ComponentStats> components_;
  int k_ = 0;
  std::uint64_t total_ = 0;
  std::vector<std::vector<std::uint64_t>> xi_;
};

// Free-function spellings of the particle operations.
inline std::vector<double> allocation_scores(const Particle& particle, const Vector& theta,
                                             const NiwPrior& prior, double alpha) {
  return particle.allocation_scores(theta, prior, alpha);
}
inline double particle_predictive(const Particle& particle, const Vector& theta,
                                  const NiwPrior& prior, double alpha) {
  return particle.predictive(theta, prior, alpha);
}

}  // namespace sdpm
