// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sdpm/niw.hpp"
#include "sdpm/particle.hpp"
#include "sdpm/sample_batch.hpp"

namespace sdpm {

enum class ResampleScheme : std::uint8_t { Multinomial = 0, Systematic = 1 };

/// Density used for a component when scoring queries and estimating density:
/// the posterior-mean plug-in Gaussian (default) or the component's
/// Student-t predictive.
enum class ComponentDensity : std::uint8_t { PluginGaussian = 0, PredictiveT = 1 };

struct DpmConfig {
  int n_particles = 100;
  double alpha = 2.0;
  /// Base measure; when unset the per-dimension default rule applies.
  std::optional<NiwPrior> prior;
  AllocationMode mode = AllocationMode::Map;
  ResampleScheme resampler = ResampleScheme::Multinomial;
  std::uint64_t seed = 20140306;
  /// Forced full refactorization period for the per-component predictive
  /// cache.
  int recompute_period = 32;
  /// Normalize assignment counts by the experiment's sample count when
  /// scoring, making scores comparable across experiments of different
  /// sizes. Raw counts kept behind this flag.
  bool normalize_xi = true;
  ComponentDensity component_density = ComponentDensity::PluginGaussian;
};

struct ExperimentRecord {
  std::string id;
  std::optional<std::string> label;
  std::uint64_t n_samples = 0;
};

struct RankedEntry {
  std::string experiment_id;
  double log_rho;  // -inf marks a candidate with no shared component mass
};

struct RetrievalRanking {
  std::string query_id;
  std::vector<RankedEntry> entries;  // descending by log_rho
};

/// The N-particle ensemble over all ingested experiments' posterior samples.
/// Raw samples are never retained: each experiment contributes only its
/// component assignment counts inside every particle.
class Supermodel {
 public:
  Supermodel(int dim, DpmConfig config);

  int dim() const { return dim_; }
  const DpmConfig& config() const { return config_; }
  const NiwPrior& prior() const { return prior_; }
  const std::vector<Particle>& particles() const { return particles_; }
  const std::vector<ExperimentRecord>& registry() const { return registry_; }
  std::uint64_t total_ingested() const;
  std::uint32_t format_version() const { return format_version_; }

  bool has_experiment(const std::string& id) const;
  std::vector<std::string> experiment_ids() const;

  /// Sequentially absorbs one experiment's samples, resampling the ensemble
  /// by marginal predictive weight before every propagation step. The
  /// experiment id must be new and the batch nonempty, finite, and of
  /// matching dimension.
  void ingest(const SampleBatch& batch);

  /// Ranks the candidate experiment ids (all must be ingested) by the
  /// relevance of the query batch: per particle, the log-likelihood of the
  /// query samples under the candidate's assignment-weighted component
  /// mixture, averaged over particles on the probability scale. Ties break
  /// by registry order; -inf scores rank last.
  RetrievalRanking score(const SampleBatch& query,
                         const std::vector<std::string>& candidates) const;

  /// Per-particle log relevance scores for one candidate, before averaging.
  std::vector<double> per_particle_scores(const SampleBatch& query,
                                          const std::string& candidate) const;

  /// Ensemble-averaged mixture density at each point.
  std::vector<double> density(const std::vector<Vector>& points) const;

  void save(std::ostream& out) const;
  static Supermodel load(std::istream& in);
  /// Atomic file save: writes to a temporary sibling, then renames.
  void save_file(const std::filesystem::path& path) const;
  static Supermodel load_file(const std::filesystem::path& path);

  /// Structural cross-checks over the whole ensemble; throws on violation.
  void validate() const;

 private:
  Supermodel() = default;

  std::vector<std::size_t> resample_indices(const std::vector<double>& log_weights,
                                            std::uint64_t step) const;

  int dim_ = 0;
  DpmConfig config_;
  NiwPrior prior_ = NiwPrior::defaults_for_dim(1);
  std::vector<Particle> particles_;
  std::vector<ExperimentRecord> registry_;
  std::uint32_t format_version_ = 1;

  friend struct SupermodelCodec;
};

inline Supermodel new_supermodel(int dim, DpmConfig config) {
  return Supermodel(dim, std::move(config));
}

/// Writes `rank,experiment_id,log_rho` rows; top_k = 0 emits the full
/// ranking.
void write_ranking_csv(std::ostream& out, const RetrievalRanking& ranking,
                       std::size_t top_k = 0);

}  // namespace sdpm
