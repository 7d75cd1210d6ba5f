#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace brl {

/// Entity id of every record (database-major order).
using GroundTruth = std::vector<std::int64_t>;

/// Pairwise linkage quality. A pair is a match when both records share an entity and a
/// declared link when both share a cluster.
struct LinkageMetrics {
  double fnr = 0.0;  // 1 - TP / true_pairs, 0 when there are no true pairs
  double fdr = 0.0;  // (declared - TP) / declared_pairs, 0 when nothing is declared
  std::int64_t true_pairs = 0;
  std::int64_t declared_pairs = 0;
  std::int64_t true_positive_pairs = 0;
};

/// Metrics of a label vector (any integer labels) against the truth.
LinkageMetrics compute_metrics(std::span<const int> labels, const GroundTruth& truth);
/// Metrics of an explicit set of declared pairs (record indices, each pair listed once).
LinkageMetrics compute_metrics(std::span<const std::pair<int, int>> declared,
                               const GroundTruth& truth);

}  // namespace brl
