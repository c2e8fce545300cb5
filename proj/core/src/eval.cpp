// Apache License, Version 2.0, refer to LICENSE.txt
#include "sdpm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "sdpm/errors.hpp"
#include "sdpm/rng.hpp"

namespace sdpm {

namespace {

void check_relevant(const std::vector<std::string>& ranking,
                    const std::set<std::string>& relevant) {
  if (relevant.empty()) throw std::invalid_argument("average_precision: empty relevant set");
  for (const auto& id : relevant)
    if (std::find(ranking.begin(), ranking.end(), id) == ranking.end())
      throw std::invalid_argument("average_precision: relevant id '" + id +
                                  "' missing from ranking");
}

/// Interpolated precision at recall level r: the best precision achieved at
/// any recall >= r.
double interpolated_precision(const PrCurve& curve, double r) {
  double best = 0.0;
  for (const auto& [recall, precision] : curve.points)
    if (recall >= r - 1e-12) best = std::max(best, precision);
  return best;
}

constexpr int kRecallGridPoints = 51;

}  // namespace

double average_precision(const std::vector<std::string>& ranking,
                         const std::set<std::string>& relevant) {
  check_relevant(ranking, relevant);
  double hits = 0.0, ap = 0.0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (relevant.count(ranking[i])) {
      hits += 1.0;
      ap += hits / static_cast<double>(i + 1);
    }
  }
  return ap / static_cast<double>(relevant.size());
}

PrCurve pr_curve(const std::vector<std::string>& ranking,
                 const std::set<std::string>& relevant) {
  check_relevant(ranking, relevant);
  PrCurve curve;
  double hits = 0.0;
  const auto total_relevant = static_cast<double>(relevant.size());
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (relevant.count(ranking[i])) {
      hits += 1.0;
      curve.average_precision += hits / static_cast<double>(i + 1);
    }
    curve.points.emplace_back(hits / total_relevant, hits / static_cast<double>(i + 1));
  }
  curve.average_precision /= total_relevant;
  return curve;
}

double auprc_trapezoid(const PrCurve& curve) {
  if (curve.points.empty()) return 0.0;
  double area = 0.0;
  double prev_recall = 0.0;
  double prev_precision = curve.points.front().second;
  for (const auto& [recall, precision] : curve.points) {
    area += (recall - prev_recall) * 0.5 * (precision + prev_precision);
    prev_recall = recall;
    prev_precision = precision;
  }
  return area;
}

LooResult leave_one_out(const Supermodel& model, const std::vector<SampleBatch>& batches) {
  if (batches.size() < 2)
    throw std::invalid_argument("leave_one_out: need at least 2 experiments");
  for (const auto& b : batches)
    if (!model.has_experiment(b.id))
      throw std::invalid_argument("leave_one_out: batch '" + b.id +
                                  "' was not ingested into the model");

  LooResult result;
  std::vector<PrCurve> curves;
  for (std::size_t q = 0; q < batches.size(); ++q) {
    std::set<std::string> relevant;
    std::vector<std::string> candidates;
    for (std::size_t l = 0; l < batches.size(); ++l) {
      if (l == q) continue;
      candidates.push_back(batches[l].id);
      if (batches[l].label && batches[q].label && *batches[l].label == *batches[q].label)
        relevant.insert(batches[l].id);
    }
    if (relevant.empty()) {
      result.skipped.push_back(batches[q].id);
      continue;
    }
    RetrievalRanking ranking = model.score(batches[q], candidates);
    std::vector<std::string> ranked_ids;
    ranked_ids.reserve(ranking.entries.size());
    for (const auto& e : ranking.entries) ranked_ids.push_back(e.experiment_id);
    PrCurve curve = pr_curve(ranked_ids, relevant);
    result.per_query_ap.emplace_back(batches[q].id, curve.average_precision);
    curves.push_back(std::move(curve));
  }
  if (curves.empty())
    throw std::invalid_argument("leave_one_out: no query has a same-label partner");

  for (const auto& [id, ap] : result.per_query_ap) result.map += ap;
  result.map /= static_cast<double>(result.per_query_ap.size());

  for (int g = 0; g < kRecallGridPoints; ++g) {
    const double recall = static_cast<double>(g) / (kRecallGridPoints - 1);
    double precision = 0.0;
    for (const auto& c : curves) precision += interpolated_precision(c, recall);
    result.pooled.points.emplace_back(recall, precision / static_cast<double>(curves.size()));
  }
  result.pooled.average_precision = result.map;
  return result;
}

std::vector<std::string> nsbl_rank(const std::vector<SampleBatch>& batches,
                                   std::size_t query_index) {
  if (batches.size() < 2) throw std::invalid_argument("nsbl_rank: need at least 2 batches");
  if (query_index >= batches.size())
    throw std::invalid_argument("nsbl_rank: query index out of range");
  const Vector query_mean = batches[query_index].samples.colwise().mean().transpose();

  std::vector<std::pair<double, std::size_t>> ordered;
  for (std::size_t l = 0; l < batches.size(); ++l) {
    if (l == query_index) continue;
    const Vector mean = batches[l].samples.colwise().mean().transpose();
    ordered.emplace_back((query_mean - mean).norm(), l);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> ids;
  ids.reserve(ordered.size());
  for (const auto& [dist, l] : ordered) ids.push_back(batches[l].id);
  return ids;
}

LooResult nsbl_leave_one_out(const std::vector<SampleBatch>& batches) {
  if (batches.size() < 2)
    throw std::invalid_argument("nsbl_leave_one_out: need at least 2 experiments");
  LooResult result;
  std::vector<PrCurve> curves;
  for (std::size_t q = 0; q < batches.size(); ++q) {
    std::set<std::string> relevant;
    for (std::size_t l = 0; l < batches.size(); ++l)
      if (l != q && batches[l].label && batches[q].label &&
          *batches[l].label == *batches[q].label)
        relevant.insert(batches[l].id);
    if (relevant.empty()) {
      result.skipped.push_back(batches[q].id);
      continue;
    }
    PrCurve curve = pr_curve(nsbl_rank(batches, q), relevant);
    result.per_query_ap.emplace_back(batches[q].id, curve.average_precision);
    curves.push_back(std::move(curve));
  }
  if (curves.empty())
    throw std::invalid_argument("nsbl_leave_one_out: no query has a same-label partner");
  for (const auto& [id, ap] : result.per_query_ap) result.map += ap;
  result.map /= static_cast<double>(result.per_query_ap.size());
  for (int g = 0; g < kRecallGridPoints; ++g) {
    const double recall = static_cast<double>(g) / (kRecallGridPoints - 1);
    double precision = 0.0;
    for (const auto& c : curves) precision += interpolated_precision(c, recall);
    result.pooled.points.emplace_back(recall, precision / static_cast<double>(curves.size()));
  }
  result.pooled.average_precision = result.map;
  return result;
}

OrderRobustness order_robustness(
    const std::function<Supermodel(const std::vector<SampleBatch>&)>& builder,
    const std::vector<SampleBatch>& batches, int n_orders, std::uint64_t seed) {
  if (n_orders < 1) throw std::invalid_argument("order_robustness: n_orders must be >= 1");
  OrderRobustness out;
  for (int o = 0; o < n_orders; ++o) {
    std::vector<SampleBatch> ordered = batches;
    std::mt19937_64 rng = make_rng(seed, "order", static_cast<std::uint64_t>(o));
    std::shuffle(ordered.begin(), ordered.end(), rng);
    Supermodel model = builder(ordered);
    out.per_order_map.push_back(leave_one_out(model, ordered).map);
  }
  for (double m : out.per_order_map) out.mean_map += m;
  out.mean_map /= static_cast<double>(out.per_order_map.size());
  if (n_orders >= 2) {
    double ss = 0.0;
    for (double m : out.per_order_map) ss += (m - out.mean_map) * (m - out.mean_map);
    out.stddev = std::sqrt(ss / static_cast<double>(n_orders - 1));
  }
  return out;
}

void write_per_query_csv(const std::filesystem::path& path, const LooResult& result,
                         const LooResult* baseline) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << (baseline ? "query_id,ap,ap_nsbl\n" : "query_id,ap\n");
  char buf[64];
  for (std::size_t i = 0; i < result.per_query_ap.size(); ++i) {
    const auto& [id, ap] = result.per_query_ap[i];
    std::snprintf(buf, sizeof(buf), "%.17g", ap);
    out << id << ',' << buf;
    if (baseline) {
      std::snprintf(buf, sizeof(buf), "%.17g", baseline->per_query_ap[i].second);
      out << ',' << buf;
    }
    out << '\n';
  }
}

void write_pr_csv(const std::filesystem::path& path, const PrCurve& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "recall,precision\n";
  char buf[128];
  for (const auto& [recall, precision] : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g", recall, precision);
    out << buf << '\n';
  }
}

void write_summary_json(const std::filesystem::path& path, const LooResult& result,
                        const LooResult* baseline, const OrderRobustness* orders) {
  nlohmann::json j;
  j["map"] = result.map;
  j["n_queries"] = result.per_query_ap.size();
  j["skipped"] = result.skipped;
  if (baseline) j["map_nsbl"] = baseline->map;
  if (orders) {
    j["orders"]["per_order_map"] = orders->per_order_map;
    j["orders"]["mean_map"] = orders->mean_map;
    if (orders->stddev)
      j["orders"]["stddev"] = *orders->stddev;
    else
      j["orders"]["stddev"] = nullptr;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

}  // namespace sdpm
