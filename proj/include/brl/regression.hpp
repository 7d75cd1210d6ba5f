#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "brl/corpus.hpp"
#include "brl/partition.hpp"

namespace brl {

inline constexpr int kMaxCovariates = 8;
/// Added to every observed variance before factorization, in both evaluation paths.
inline constexpr double kCovarianceJitter = 1e-10;

/// Parameters of y = beta' x_true + e with x = x_true + u.
struct RegressionParams {
  Eigen::VectorXd beta;             // p coefficients
  double var_y = 1.0;               // sigma^2_{y|x_true}
  Eigen::MatrixXd cov_x_given_true; // Sigma_{x|x_true}, p x p
  Eigen::MatrixXd cov_true;         // Sigma_{x_true}, p x p

  int dim() const { return static_cast<int>(beta.size()); }
  /// Throws ConfigError on inconsistent sizes or non-SPD blocks.
  void validate() const;
};

/// One record of a cluster together with the observed components (0 = y, 1..p = x_k).
struct ObservedRecord {
  int record;
  std::vector<int> components;
};
using ClusterObsPattern = std::vector<ObservedRecord>;

/// Observed components of the given records, in record order.
ClusterObsPattern observation_pattern(std::span<const int> records,
                                      const RegressionObservations& obs);

/// Joint covariance of n stacked (y, x_1..x_p) blocks sharing one x_true:
///   J_n (x) [[b'Sb, b'S], [Sb, S]] + I_n (x) diag(var_y, Sigma_{x|x_true}).
Eigen::MatrixXd build_full_covariance(int n, const RegressionParams& params);

/// Gaussian log density of the observed components of one cluster (zero mean). Uses the
/// low-rank structure of the covariance; cost is linear in the cluster size.
double cluster_regression_log_lik(const ClusterObsPattern& pattern,
                                  const RegressionObservations& obs,
                                  const RegressionParams& params);

/// Same density through the explicit covariance and a dense Cholesky factorization.
double cluster_regression_log_lik_dense(const ClusterObsPattern& pattern,
                                        const RegressionObservations& obs,
                                        const RegressionParams& params);

/// Sum of cluster terms over all clusters of the state.
double corpus_regression_log_lik(const LinkageState& state, const RegressionObservations& obs,
                                 const RegressionParams& params);

/// Change in corpus_regression_log_lik when `r` moves from cluster `from` to `to`
/// (an active label or LinkageState::kNew). `state` holds r in `from`.
double log_ratio_move_regression(const LinkageState& state, int r, int from, int to,
                                 const RegressionObservations& obs,
                                 const RegressionParams& params);

/// Additive per-cluster statistics behind the structured evaluation. With D the
/// block-diagonal noise covariance and U the loading of x_true on the observed
/// components, a cluster's density only needs sum log|D_r|, z'D^-1 z, U'D^-1 z and
/// U'D^-1 U, each a sum over records.
struct RegressionStats {
  using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxCovariates, 1>;
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxCovariates,
                            kMaxCovariates>;
  int observed = 0;
  double log_det_noise = 0.0;
  double quad = 0.0;
  Vec cross;
  Mat gram;

  explicit RegressionStats(int p = 0);
  RegressionStats& operator+=(const RegressionStats& o);
  friend RegressionStats operator+(RegressionStats a, const RegressionStats& b) {
    return a += b;
  }
};

/// Parameter-dependent precomputation shared by all clusters.
class RegressionEvaluator {
 public:
  explicit RegressionEvaluator(const RegressionParams& params);

  const RegressionParams& params() const { return params_; }
  RegressionStats record_stats(const RegressionObservations& obs, int rec) const;
  RegressionStats cluster_stats(const RegressionObservations& obs,
                                std::span<const int> records) const;
  double log_lik(const RegressionStats& s) const;
  /// log_lik(a + b) without materializing the sum for one covariate or none.
  double log_lik_joined(const RegressionStats& a, const RegressionStats& b) const;

 private:
  RegressionParams params_;
  bool diagonal_noise_ = true;
  Eigen::MatrixXd precision_true_;
  double log_det_true_ = 0.0;
};

}  // namespace brl
