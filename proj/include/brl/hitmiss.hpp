#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "brl/corpus.hpp"
#include "brl/partition.hpp"

namespace brl {

/// Category frequencies theta for each feature.
class FeatureSpec {
 public:
  FeatureSpec() = default;
  /// Each row must be a probability vector (sum 1 +- 1e-12) with positive entries and at
  /// least two categories.
  explicit FeatureSpec(std::vector<std::vector<double>> theta);

  /// Relative frequencies of the pooled records, floored at `floor` and renormalized.
  static FeatureSpec empirical(const CategoricalRecordView& records, double floor = 1e-9);

  int num_features() const { return static_cast<int>(theta_.size()); }
  int support(int f) const { return static_cast<int>(theta_[f].size()); }
  std::span<const double> theta(int f) const { return theta_[f]; }
  std::span<const double> log_theta(int f) const { return log_theta_[f]; }

 private:
  std::vector<std::vector<double>> theta_;
  std::vector<std::vector<double>> log_theta_;
};

struct BetaPrior {
  double f = 1.0;
  double g = 1.0;
};

struct DistortionParams {
  std::vector<double> alpha;
  BetaPrior prior;
};

struct CodeCount {
  std::int32_t code;
  int count;
};

/// Marginal probability of the observed codes of one feature in one cluster, with the
/// latent true value summed out. Cost is linear in the number of distinct codes.
double cluster_feature_marginal(std::span<const std::int32_t> codes, double alpha,
                                std::span<const double> theta);
double cluster_feature_log_marginal(std::span<const std::int32_t> codes, double alpha,
                                    std::span<const double> theta);

/// Same quantity from a histogram of codes; `n` is the total count.
double log_marginal_from_counts(std::span<const CodeCount> counts, int n, double alpha,
                                std::span<const double> theta, std::span<const double> log_theta);

/// Sum over features of the per-feature log marginals.
double cluster_log_marginal(std::span<const int> cluster, const CategoricalRecordView& records,
                            std::span<const double> alpha, const FeatureSpec& spec);

/// log p(cluster + r) - log p(cluster). With an empty base this is sum_l log theta_{l,v_rl}.
double log_ratio_add_record(std::span<const int> cluster_without_r, int r,
                            const CategoricalRecordView& records, std::span<const double> alpha,
                            const FeatureSpec& spec);

/// Unnormalized log posterior density of alpha_l given the partition: sum over clusters of
/// the feature-l log marginal plus the Beta(f, g) log kernel. -inf outside [0, 1].
double alpha_conditional_log_density(int feature, double alpha, const LinkageState& state,
                                     const CategoricalRecordView& records,
                                     const FeatureSpec& spec, BetaPrior prior);

/// Per-feature scores for adding record r to a singleton cluster {u}:
/// if u agrees with r on feature l the log ratio is `agree[v]` (v = the shared code),
/// otherwise it is log theta_{l,v_rl} + `disagree_shift`.
struct PairScoreTable {
  std::vector<double> agree;
  double disagree_shift = 0.0;
};
PairScoreTable make_pair_score_table(double alpha, std::span<const double> theta);

}  // namespace brl
