// Apache License, Version 2.0, refer to LICENSE.txt
#include "sdpm/supermodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

#include "sdpm/rng.hpp"

namespace sdpm {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Supermodel::Supermodel(int dim, DpmConfig config)
    : dim_(dim),
      config_(std::move(config)),
      prior_(config_.prior ? *config_.prior : NiwPrior::defaults_for_dim(dim)) {
  if (dim < 1) throw std::invalid_argument("Supermodel: dimension must be >= 1");
  if (config_.n_particles < 1)
    throw std::invalid_argument("Supermodel: n_particles must be >= 1");
  if (!(config_.alpha > 0)) throw std::invalid_argument("Supermodel: alpha must be > 0");
  if (config_.recompute_period < 1)
    throw std::invalid_argument("Supermodel: recompute_period must be >= 1");
  if (prior_.dim() != dim_)
    throw std::invalid_argument("Supermodel: prior dimension does not match model dimension");
  particles_.assign(static_cast<std::size_t>(config_.n_particles), Particle(dim_));
}

std::uint64_t Supermodel::total_ingested() const {
  return particles_.empty() ? 0 : particles_.front().total();
}

bool Supermodel::has_experiment(const std::string& id) const {
  return std::any_of(registry_.begin(), registry_.end(),
                     [&](const ExperimentRecord& r) { return r.id == id; });
}

std::vector<std::string> Supermodel::experiment_ids() const {
  std::vector<std::string> ids;
  ids.reserve(registry_.size());
  for (const auto& r : registry_) ids.push_back(r.id);
  return ids;
}

std::vector<std::size_t> Supermodel::resample_indices(const std::vector<double>& log_weights,
                                                      std::uint64_t step) const {
  const std::size_t n = log_weights.size();
  double max = kNegInf;
  for (double w : log_weights) max = std::max(max, std::isfinite(w) ? w : kNegInf);
  std::vector<double> cumulative(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += std::isfinite(log_weights[i]) ? std::exp(log_weights[i] - max) : 0.0;
    cumulative[i] = sum;
  }
  if (!(sum > 0.0))
    throw std::invalid_argument("resample: all particle weights are -inf (invalid sample)");

  auto pick = [&](double u) {
    auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        it - cumulative.begin(), static_cast<std::ptrdiff_t>(n) - 1));
  };

  std::mt19937_64 rng = make_rng(config_.seed, "resample", step);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::size_t> indices(n);
  if (config_.resampler == ResampleScheme::Multinomial) {
    for (std::size_t i = 0; i < n; ++i) indices[i] = pick(unif(rng) * sum);
  } else {
    const double offset = unif(rng);
    for (std::size_t i = 0; i < n; ++i)
      indices[i] = pick((static_cast<double>(i) + offset) / static_cast<double>(n) * sum);
  }
  return indices;
}

void Supermodel::ingest(const SampleBatch& batch) {
  batch.validate();
  if (batch.dim() != dim_)
    throw std::invalid_argument("ingest: batch '" + batch.id + "' has dimension " +
                                std::to_string(batch.dim()) + ", model expects " +
                                std::to_string(dim_));
  if (has_experiment(batch.id))
    throw std::invalid_argument("ingest: experiment '" + batch.id + "' already ingested");

  const auto experiment = static_cast<ExperimentIndex>(registry_.size());
  const std::size_t n_particles = particles_.size();
  std::vector<double> log_weights(n_particles);

  for (Eigen::Index j = 0; j < batch.samples.rows(); ++j) {
    const Vector theta = batch.samples.row(j).transpose();
    const std::uint64_t step = total_ingested();

    for (std::size_t t = 0; t < n_particles; ++t)
      log_weights[t] = particles_[t].predictive(theta, prior_, config_.alpha);

    const std::vector<std::size_t> indices = resample_indices(log_weights, step);
    std::vector<std::size_t> remaining(n_particles, 0);
    for (std::size_t idx : indices) ++remaining[idx];
    std::vector<Particle> next;
    next.reserve(n_particles);
    for (std::size_t idx : indices) {
      if (--remaining[idx] == 0)
        next.push_back(std::move(particles_[idx]));
      else
        next.push_back(particles_[idx]);
    }
    particles_ = std::move(next);

    for (std::size_t t = 0; t < n_particles; ++t) {
      std::mt19937_64 alloc_rng = make_rng(config_.seed, "alloc", step, t);
      particles_[t].propagate(theta, experiment, prior_, config_.alpha, config_.mode,
                              &alloc_rng, config_.recompute_period);
    }
  }

  registry_.push_back(ExperimentRecord{batch.id, batch.label,
                                       static_cast<std::uint64_t>(batch.samples.rows())});
}

namespace {

/// Per-component log densities of the query rows under one particle, plus
/// the slot order used for xi lookups.
struct ParticleDensities {
  std::vector<int> slots;
  Matrix log_f;  // n_query x slots.size()
};

ParticleDensities component_log_densities(const Particle& particle, const Matrix& queries,
                                          const NiwPrior& prior, ComponentDensity density) {
  ParticleDensities out;
  const auto& comps = particle.components();
  for (int s = 0; s < static_cast<int>(comps.size()); ++s)
    if (!comps[s].empty()) out.slots.push_back(s);
  out.log_f.resize(queries.rows(), static_cast<Eigen::Index>(out.slots.size()));

  for (std::size_t c = 0; c < out.slots.size(); ++c) {
    const ComponentStats& comp = comps[out.slots[c]];
    if (density == ComponentDensity::PluginGaussian) {
      const GaussianMoments g = plugin_moments(comp, prior);
      for (Eigen::Index j = 0; j < queries.rows(); ++j)
        out.log_f(j, c) = gaussian_logpdf(queries.row(j).transpose(), g);
    } else {
      for (Eigen::Index j = 0; j < queries.rows(); ++j)
        out.log_f(j, c) = predictive_existing(queries.row(j).transpose(), comp, prior);
    }
  }
  return out;
}

/// log rho for one candidate under one particle: the sum over query samples
/// of the log mixture likelihood with that candidate's assignment weights.
double candidate_log_rho(const ParticleDensities& pd,
                         const std::vector<std::uint64_t>& xi_row, double log_n,
                         bool normalize) {
  std::vector<std::pair<std::size_t, double>> weighted;  // (column, log weight)
  for (std::size_t c = 0; c < pd.slots.size(); ++c) {
    const auto slot = static_cast<std::size_t>(pd.slots[c]);
    const std::uint64_t count = slot < xi_row.size() ? xi_row[slot] : 0;
    if (count == 0) continue;
    double lw = std::log(static_cast<double>(count));
    if (normalize) lw -= log_n;
    weighted.emplace_back(c, lw);
  }
  if (weighted.empty()) return kNegInf;

  double total = 0.0;
  std::vector<double> terms(weighted.size());
  for (Eigen::Index j = 0; j < pd.log_f.rows(); ++j) {
    for (std::size_t i = 0; i < weighted.size(); ++i)
      terms[i] = weighted[i].second + pd.log_f(j, static_cast<Eigen::Index>(weighted[i].first));
    total += log_sum_exp(terms);
  }
  return total;
}

}  // namespace

RetrievalRanking Supermodel::score(const SampleBatch& query,
                                   const std::vector<std::string>& candidates) const {
  query.validate();
  if (query.dim() != dim_)
    throw std::invalid_argument("score: query dimension mismatch");

  std::vector<std::size_t> cand_index;
  cand_index.reserve(candidates.size());
  std::unordered_set<std::string> seen;
  for (const auto& id : candidates) {
    if (!seen.insert(id).second)
      throw std::invalid_argument("score: duplicate candidate '" + id + "'");
    auto it = std::find_if(registry_.begin(), registry_.end(),
                           [&](const ExperimentRecord& r) { return r.id == id; });
    if (it == registry_.end())
      throw std::invalid_argument("score: unknown candidate '" + id + "'");
    cand_index.push_back(static_cast<std::size_t>(it - registry_.begin()));
  }

  // log rho per candidate per particle; averaged over particles on the
  // probability scale afterwards.
  Matrix log_rho(static_cast<Eigen::Index>(cand_index.size()),
                 static_cast<Eigen::Index>(particles_.size()));
  for (std::size_t t = 0; t < particles_.size(); ++t) {
    const ParticleDensities pd = component_log_densities(
        particles_[t], query.samples, prior_, config_.component_density);
    const auto& xi = particles_[t].xi();
    static const std::vector<std::uint64_t> kEmptyRow;
    for (std::size_t c = 0; c < cand_index.size(); ++c) {
      const std::size_t l = cand_index[c];
      const auto& row = l < xi.size() ? xi[l] : kEmptyRow;
      const double log_n = std::log(static_cast<double>(registry_[l].n_samples));
      log_rho(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) =
          candidate_log_rho(pd, row, log_n, config_.normalize_xi);
    }
  }

  RetrievalRanking ranking;
  ranking.query_id = query.id;
  std::vector<std::size_t> order(cand_index.size());
  std::vector<double> final_scores(cand_index.size());
  for (std::size_t c = 0; c < cand_index.size(); ++c) {
    order[c] = c;
    const Eigen::Index ci = static_cast<Eigen::Index>(c);
    std::vector<double> per_particle(log_rho.row(ci).begin(), log_rho.row(ci).end());
    final_scores[c] = log_mean_exp(per_particle);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (final_scores[a] != final_scores[b]) return final_scores[a] > final_scores[b];
    return cand_index[a] < cand_index[b];  // ties by registry order
  });
  for (std::size_t c : order)
    ranking.entries.push_back(RankedEntry{registry_[cand_index[c]].id, final_scores[c]});
  return ranking;
}

std::vector<double> Supermodel::per_particle_scores(const SampleBatch& query,
                                                    const std::string& candidate) const {
  query.validate();
  auto it = std::find_if(registry_.begin(), registry_.end(),
                         [&](const ExperimentRecord& r) { return r.id == candidate; });
  if (it == registry_.end())
    throw std::invalid_argument("per_particle_scores: unknown candidate '" + candidate + "'");
  const auto l = static_cast<std::size_t>(it - registry_.begin());
  const double log_n = std::log(static_cast<double>(it->n_samples));

  std::vector<double> scores(particles_.size());
  static const std::vector<std::uint64_t> kEmptyRow;
  for (std::size_t t = 0; t < particles_.size(); ++t) {
    const ParticleDensities pd = component_log_densities(
        particles_[t], query.samples, prior_, config_.component_density);
    const auto& xi = particles_[t].xi();
    const auto& row = l < xi.size() ? xi[l] : kEmptyRow;
    scores[t] = candidate_log_rho(pd, row, log_n, config_.normalize_xi);
  }
  return scores;
}

std::vector<double> Supermodel::density(const std::vector<Vector>& points) const {
  if (total_ingested() == 0)
    throw std::invalid_argument("density: model has no ingested samples");
  std::vector<double> out(points.size(), 0.0);

  for (const Particle& particle : particles_) {
    const double log_total = std::log(static_cast<double>(particle.total()));
    std::vector<double> log_w;
    std::vector<GaussianMoments> moments;
    std::vector<const ComponentStats*> comps;
    for (const auto& c : particle.components()) {
      if (c.empty()) continue;
      log_w.push_back(std::log(static_cast<double>(c.count())) - log_total);
      if (config_.component_density == ComponentDensity::PluginGaussian)
        moments.push_back(plugin_moments(c, prior_));
      comps.push_back(&c);
    }
    std::vector<double> terms(log_w.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].size() != dim_)
        throw std::invalid_argument("density: point dimension mismatch");
      for (std::size_t c = 0; c < log_w.size(); ++c) {
        const double lf = config_.component_density == ComponentDensity::PluginGaussian
                              ? gaussian_logpdf(points[i], moments[c])
                              : predictive_existing(points[i], *comps[c], prior_);
        terms[c] = log_w[c] + lf;
      }
      out[i] += std::exp(log_sum_exp(terms));
    }
  }
  for (double& v : out) v /= static_cast<double>(particles_.size());
  return out;
}

void Supermodel::validate() const {
  if (particles_.empty()) throw std::logic_error("supermodel invariant: no particles");
  const std::uint64_t total = particles_.front().total();
  std::uint64_t registered = 0;
  for (const auto& r : registry_) registered += r.n_samples;
  for (const Particle& particle : particles_) {
    if (particle.total() != total)
      throw std::logic_error("supermodel invariant: particles disagree on total");
    particle.validate();
    const auto& xi = particle.xi();
    for (std::size_t l = 0; l < registry_.size(); ++l) {
      std::uint64_t row_sum = 0;
      if (l < xi.size())
        for (std::uint64_t v : xi[l]) row_sum += v;
      if (row_sum != registry_[l].n_samples)
        throw std::logic_error("supermodel invariant: xi row does not match registry count");
    }
  }
  if (total != registered)
    throw std::logic_error("supermodel invariant: total does not match registry");
}

void write_ranking_csv(std::ostream& out, const RetrievalRanking& ranking, std::size_t top_k) {
  out << "rank,experiment_id,log_rho\n";
  const std::size_t limit =
      top_k == 0 ? ranking.entries.size() : std::min(top_k, ranking.entries.size());
  char buf[64];
  for (std::size_t i = 0; i < limit; ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", ranking.entries[i].log_rho);
    out << (i + 1) << ',' << ranking.entries[i].experiment_id << ',' << buf << '\n';
  }
}

}  // namespace sdpm
