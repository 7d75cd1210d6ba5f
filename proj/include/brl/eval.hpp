#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "brl/metrics.hpp"
#include "brl/partition.hpp"
#include "brl/sampler.hpp"

namespace brl {

/// Metrics of every kept iteration. Uses the per-iteration metrics recorded during the run
/// when present, otherwise recomputes them from kept labels.
std::vector<LinkageMetrics> posterior_metric_trace(const PosteriorSamples& samples,
                                                   const GroundTruth& truth);

struct PairProbability {
  int a;
  int b;
  double prob;
};

/// Co-clustering probabilities, highest first (ties by record indices).
std::vector<PairProbability> pair_probabilities(const PosteriorSamples& samples);

/// Pairs above 0.5 merged by transitive closure. Under NoWithinDbDuplicates pairs are
/// taken in decreasing probability and a pair that would join two records of the same
/// database is dropped.
LinkageState point_estimate_linkage(const PosteriorSamples& samples, std::vector<int> record_db,
                                    Constraint constraint);
LinkageState point_estimate_linkage(std::span<const PairProbability> pairs,
                                    std::vector<int> record_db, Constraint constraint);

/// Regression posterior with the partition frozen at `labels` (and alpha fixed).
PosteriorSamples plugin_regression(const Model& model, const SamplerConfig& cfg,
                                   std::span<const int> labels);

struct ScalarSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double median = 0.0;
  double q975 = 0.0;
};
ScalarSummary summarize(std::span<const double> values);
/// Linear-interpolation quantile of unsorted values.
double quantile(std::span<const double> values, double q);
/// Most frequent value (smallest on ties).
int mode_of(std::span<const int> values);

struct Histogram {
  double lo = 0.0;
  double width = 1.0;
  std::vector<std::int64_t> counts;
};
/// `bins` equal bins over [min, max]; integer data with a range below `bins` gets one bin
/// per integer.
Histogram histogram(std::span<const double> values, int bins, bool integer_valued);

/// Column `col` of a row-major kept x width matrix.
std::vector<double> column(std::span<const double> matrix, int width, int col);

/// Names of the regression trace columns: beta_1..p, var_y, var_x_1..p.
std::vector<std::string> regression_column_names(int p);

}  // namespace brl
