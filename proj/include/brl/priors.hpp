#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "brl/partition.hpp"

namespace brl {

/// Labels drawn uniformly from a population of n_pop units.
struct UniformLabels {
  std::int64_t n_pop;
};
/// Uniform distribution over set partitions, labels assigned injectively from n_pop.
struct UniformPartitions {
  std::int64_t n_pop;
};
/// Pitman-Yor allocation with strength and discount.
struct Pyp {
  double strength;
  double discount;
};
/// Two-database Pitman-Yor construction with no within-database duplicates: first-database
/// records are fixed in distinct clusters and each second-database record either joins an
/// unmatched first-database record or opens a new cluster.
struct ConstrainedPyp {
  double strength;
  double discount;
};

using PriorVariant = std::variant<UniformLabels, UniformPartitions, Pyp, ConstrainedPyp>;

class PartitionPrior {
 public:
  /// Validates admissibility; throws ConfigError.
  explicit PartitionPrior(PriorVariant v);

  /// Accepts "pyp:<strength>,<discount>", "constrained-pyp:<strength>,<discount>",
  /// "uniform-labels:<n_pop>" and "uniform-partitions:<n_pop>".
  static PartitionPrior parse(std::string_view text);
  std::string to_string() const;

  const PriorVariant& variant() const { return v_; }
  bool is_constrained() const { return std::holds_alternative<ConstrainedPyp>(v_); }

  /// Checks the prior can be used with N records (n_pop >= N for the uniform variants).
  void check_records(int n) const;

 private:
  PriorVariant v_;
};

struct AllocWeight {
  int target;         // cluster label or LinkageState::kNew
  double log_weight;  // -inf for structurally excluded targets
  double weight() const;
};

/// Unnormalized prior allocation weights for record `r` given every other label.
///
/// `r` is treated as absent from `state`: its own cluster shrinks by one (and is not a
/// candidate if that empties it). Targets whose weight is structurally zero under the
/// constrained prior are still listed with weight 0.
std::vector<AllocWeight> predictive_alloc(const PartitionPrior& prior, const LinkageState& state,
                                          int r);

/// Log weight of joining an existing cluster of `size` records (excluding r), for the
/// exchangeable variants. `k_minus` clusters exist without r among `n_total` records.
double log_existing_weight(const PartitionPrior& prior, int size, int k_minus, int n_total);
/// Log of the total prior mass of opening a new cluster, for the exchangeable variants.
double log_new_weight(const PartitionPrior& prior, int k_minus, int n_total);

/// Constrained prior: log weight of opening a new cluster for second-database record `r`
/// (detached or not; computed as if detached).
double constrained_log_new_weight(const ConstrainedPyp& prior, const LinkageState& state, int r);
/// Constrained prior: whether `r` (second database) may join `label`.
bool constrained_eligible(const LinkageState& state, int r, int label);

/// Log probability of a partition with the given block sizes under the PYP.
double pyp_eppf_log_prob(const PartitionPrior& prior, std::span<const int> sizes);

struct PypMoments {
  double expected_k;
  double var_k;
};

/// Prior mean and variance of the number of clusters among n records. Throws for a zero
/// discount (the closed form divides by it).
PypMoments pyp_moments(const PartitionPrior& prior, int n);

/// log P(T = t) for the number of shared units between two simple random samples of
/// sizes n1, n2 from a population of n_pop. -inf outside the support.
double hypergeometric_t_log_pmf(std::int64_t n_pop, std::int64_t n1, std::int64_t n2,
                                std::int64_t t);

/// Sequential constrained predictive for the (j+1)-th second-database record when the
/// first j (0-based count) have produced k_j distinct clusters together with the n1
/// first-database records. Returns log probability of joining one specific unmatched
/// first-database record and of opening a new cluster.
struct ConstrainedStep {
  double log_link_each;
  double log_new;
  int available;
};
ConstrainedStep constrained_pyp_step(const ConstrainedPyp& prior, int j, int k_j);

/// Log probability of the second-database assignments given the first database, at the
/// partition level (product of the sequential predictive along the second database).
double constrained_pyp_joint_log_prob(const PartitionPrior& prior, const LinkageState& state);

}  // namespace brl
