// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sdpm/supermodel.hpp"

namespace sdpm {

/// Precision-recall curve with one point per rank position, and average
/// precision computed as the mean of precision-at-hit over the relevant
/// items.
struct PrCurve {
  std::vector<std::pair<double, double>> points;  // (recall, precision)
  double average_precision = 0.0;
};

double average_precision(const std::vector<std::string>& ranking,
                         const std::set<std::string>& relevant);

PrCurve pr_curve(const std::vector<std::string>& ranking,
                 const std::set<std::string>& relevant);

/// Trapezoidal area under the PR curve, reported alongside AP for
/// comparison.
double auprc_trapezoid(const PrCurve& curve);

struct LooResult {
  double map = 0.0;
  /// Interpolated precision averaged across queries on a fixed recall grid;
  /// its average_precision field carries the MAP.
  PrCurve pooled;
  std::vector<std::pair<std::string, double>> per_query_ap;
  std::vector<std::string> skipped;  // queries with no same-label partner
};

/// Leave-one-out retrieval protocol: the model has ingested every batch
/// once; each experiment's own samples are re-read as the query and scored
/// against all other experiments, with shared labels defining relevance.
LooResult leave_one_out(const Supermodel& model, const std::vector<SampleBatch>& batches);

/// Baseline ranking: candidates ordered by ascending L2 distance between
/// posterior sample means.
std::vector<std::string> nsbl_rank(const std::vector<SampleBatch>& batches,
                                   std::size_t query_index);

/// Leave-one-out protocol evaluated with the mean-distance baseline.
LooResult nsbl_leave_one_out(const std::vector<SampleBatch>& batches);

struct OrderRobustness {
  std::vector<double> per_order_map;
  double mean_map = 0.0;
  std::optional<double> stddev;  // absent when fewer than two orders ran
};

/// Rebuilds the model under random experiment orders and reports the MAP of
/// each order.
OrderRobustness order_robustness(
    const std::function<Supermodel(const std::vector<SampleBatch>&)>& builder,
    const std::vector<SampleBatch>& batches, int n_orders, std::uint64_t seed);

void write_per_query_csv(const std::filesystem::path& path, const LooResult& result,
                         const LooResult* baseline = nullptr);
void write_pr_csv(const std::filesystem::path& path, const PrCurve& curve);
void write_summary_json(const std::filesystem::path& path, const LooResult& result,
                        const LooResult* baseline = nullptr,
                        const OrderRobustness* orders = nullptr);

}  // namespace sdpm
