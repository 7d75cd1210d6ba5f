#include "brl/regression.hpp"

#include <cmath>
#include <string>

#include "brl/error.hpp"
#include "brl/math.hpp"

namespace brl {

namespace {

void require_spd(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols()) throw ConfigError(std::string(what) + " is not square");
  if (!m.isApprox(m.transpose(), 1e-12) && m.size() > 0) {
    throw ConfigError(std::string(what) + " is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (m.size() > 0 && llt.info() != Eigen::Success) {
    throw ConfigError(std::string(what) + " is not positive definite");
  }
}

}  // namespace

void RegressionParams::validate() const {
  const auto p = beta.size();
  if (p > kMaxCovariates) throw ConfigError("too many covariates");
  if (cov_x_given_true.rows() != p || cov_true.rows() != p) {
    throw ConfigError("regression parameter dimensions disagree");
  }
  if (!(var_y > 0.0) || !std::isfinite(var_y)) throw ConfigError("var_y must be positive");
  require_spd(cov_x_given_true, "Sigma_{x|x_true}");
  require_spd(cov_true, "Sigma_{x_true}");
}

ClusterObsPattern observation_pattern(std::span<const int> records,
                                      const RegressionObservations& obs) {
  ClusterObsPattern out;
  for (int r : records) {
    ObservedRecord o{r, {}};
    for (int c = 0; c < obs.width(); ++c)
      if (obs.observed(r, c)) o.components.push_back(c);
    if (!o.components.empty()) out.push_back(std::move(o));
  }
  return out;
}

Eigen::MatrixXd build_full_covariance(int n, const RegressionParams& params) {
  if (n < 1) throw Error("build_full_covariance: n must be positive");
  params.validate();
  const int p = params.dim();
  const int w = p + 1;
  // Shared block: G S G' with G = [beta'; I_p].
  Eigen::MatrixXd shared(w, w);
  const Eigen::VectorXd sb = params.cov_true * params.beta;
  shared(0, 0) = params.beta.dot(sb);
  shared.block(1, 0, p, 1) = sb;
  shared.block(0, 1, 1, p) = sb.transpose();
  shared.block(1, 1, p, p) = params.cov_true;
  Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(w, w);
  noise(0, 0) = params.var_y;
  noise.block(1, 1, p, p) = params.cov_x_given_true;

  Eigen::MatrixXd cov(n * w, n * w);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      cov.block(a * w, b * w, w, w) = (a == b) ? Eigen::MatrixXd(shared + noise) : shared;
  return cov;
}

RegressionStats::RegressionStats(int p)
    : cross(RegressionStats::Vec::Zero(p)), gram(RegressionStats::Mat::Zero(p, p)) {}

RegressionStats& RegressionStats::operator+=(const RegressionStats& o) {
  observed += o.observed;
  log_det_noise += o.log_det_noise;
  quad += o.quad;
  cross += o.cross;
  gram += o.gram;
  return *this;
}

RegressionEvaluator::RegressionEvaluator(const RegressionParams& params) : params_(params) {
  params_.validate();
  const int p = params_.dim();
  diagonal_noise_ = params_.cov_x_given_true.isDiagonal(0.0);
  if (p > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(params_.cov_true);
    precision_true_ = llt.solve(Eigen::MatrixXd::Identity(p, p));
    log_det_true_ = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  }
}

RegressionStats RegressionEvaluator::record_stats(const RegressionObservations& obs,
                                                  int rec) const {
  const int p = params_.dim();
  RegressionStats s(p);
  if (obs.observed(rec, 0)) {
    const double d = params_.var_y + kCovarianceJitter;
    const double z = obs.value(rec, 0);
    s.observed += 1;
    s.log_det_noise += std::log(d);
    s.quad += z * z / d;
    s.cross += params_.beta * (z / d);
    s.gram += params_.beta * params_.beta.transpose() / d;
  }
  if (diagonal_noise_) {
    for (int k = 0; k < p; ++k) {
      if (!obs.observed(rec, k + 1)) continue;
      const double d = params_.cov_x_given_true(k, k) + kCovarianceJitter;
      const double z = obs.value(rec, k + 1);
      s.observed += 1;
      s.log_det_noise += std::log(d);
      s.quad += z * z / d;
      s.cross(k) += z / d;
      s.gram(k, k) += 1.0 / d;
    }
    return s;
  }
  int idx[kMaxCovariates];
  int m = 0;
  for (int k = 0; k < p; ++k)
    if (obs.observed(rec, k + 1)) idx[m++] = k;
  if (m == 0) return s;
  RegressionStats::Mat block(m, m);
  RegressionStats::Vec z(m);
  for (int a = 0; a < m; ++a) {
    z(a) = obs.value(rec, idx[a] + 1);
    for (int b = 0; b < m; ++b) block(a, b) = params_.cov_x_given_true(idx[a], idx[b]);
    block(a, a) += kCovarianceJitter;
  }
  Eigen::LLT<RegressionStats::Mat> llt(block);
  if (llt.info() != Eigen::Success) throw NumericalError("noise block is not positive definite");
  const RegressionStats::Mat inv = llt.solve(RegressionStats::Mat::Identity(m, m));
  const RegressionStats::Vec w = inv * z;
  s.observed += m;
  for (int a = 0; a < m; ++a) s.log_det_noise += 2.0 * std::log(llt.matrixLLT()(a, a));
  s.quad += z.dot(w);
  for (int a = 0; a < m; ++a) {
    s.cross(idx[a]) += w(a);
    for (int b = 0; b < m; ++b) s.gram(idx[a], idx[b]) += inv(a, b);
  }
  return s;
}

RegressionStats RegressionEvaluator::cluster_stats(const RegressionObservations& obs,
                                                   std::span<const int> records) const {
  RegressionStats s(params_.dim());
  for (int r : records) s += record_stats(obs, r);
  return s;
}

double RegressionEvaluator::log_lik(const RegressionStats& s) const {
  if (s.observed == 0) return 0.0;
  const int p = params_.dim();
  double log_det_m = 0.0;
  double explained = 0.0;
  if (p == 1) {
    const double m = precision_true_(0, 0) + s.gram(0, 0);
    if (!(m > 0.0)) throw NumericalError("cluster precision is not positive");
    log_det_m = std::log(m);
    explained = s.cross(0) * s.cross(0) / m;
  } else if (p > 1) {
    RegressionStats::Mat m = s.gram;
    m += precision_true_;
    Eigen::LLT<RegressionStats::Mat> llt(m);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("cluster precision is not positive definite");
    }
    const auto& l = llt.matrixLLT();
    for (int a = 0; a < p; ++a) log_det_m += 2.0 * std::log(l(a, a));
    RegressionStats::Vec v = s.cross;
    llt.matrixL().solveInPlace(v);
    explained = v.squaredNorm();
  }
  const double log_det_true = p > 0 ? log_det_true_ : 0.0;
  return -0.5 * (s.observed * kLog2Pi + s.log_det_noise + log_det_true + log_det_m + s.quad -
                 explained);
}

double RegressionEvaluator::log_lik_joined(const RegressionStats& a, const RegressionStats& b) const {
  const int p = params_.dim();
  if (p > 1) return log_lik(a + b);
  const int observed = a.observed + b.observed;
  if (observed == 0) return 0.0;
  const double log_det_noise = a.log_det_noise + b.log_det_noise;
  const double quad = a.quad + b.quad;
  if (p == 0) return -0.5 * (observed * kLog2Pi + log_det_noise + quad);
  const double m = precision_true_(0, 0) + a.gram(0, 0) + b.gram(0, 0);
  if (!(m > 0.0)) throw NumericalError("cluster precision is not positive");
  const double cross = a.cross(0) + b.cross(0);
  return -0.5 * (observed * kLog2Pi + log_det_noise + log_det_true_ + std::log(m) + quad -
                 cross * cross / m);
}

double cluster_regression_log_lik(const ClusterObsPattern& pattern,
                                  const RegressionObservations& obs,
                                  const RegressionParams& params) {
  if (pattern.empty()) throw Error("cluster_regression_log_lik: empty pattern");
  RegressionEvaluator eval(params);
  // The pattern may list a subset of what the observations hold; mask accordingly.
  RegressionObservations sub(obs.num_records(), obs.num_covariates());
  for (const auto& o : pattern) {
    for (int c : o.components) {
      if (c < 0 || c >= obs.width() || !obs.observed(o.record, c)) {
        throw Error("cluster_regression_log_lik: component not observed");
      }
      sub.set(o.record, c, obs.value(o.record, c));
    }
  }
  RegressionStats s(params.dim());
  for (const auto& o : pattern) s += eval.record_stats(sub, o.record);
  return eval.log_lik(s);
}

double cluster_regression_log_lik_dense(const ClusterObsPattern& pattern,
                                        const RegressionObservations& obs,
                                        const RegressionParams& params) {
  if (pattern.empty()) throw Error("cluster_regression_log_lik_dense: empty pattern");
  const int n = static_cast<int>(pattern.size());
  const int w = params.dim() + 1;
  const Eigen::MatrixXd full = build_full_covariance(n, params);
  std::vector<int> rows;
  std::vector<double> values;
  for (int i = 0; i < n; ++i) {
    for (int c : pattern[i].components) {
      rows.push_back(i * w + c);
      values.push_back(obs.value(pattern[i].record, c));
    }
  }
  const int m = static_cast<int>(rows.size());
  if (m == 0) return 0.0;
  Eigen::MatrixXd sub(m, m);
  Eigen::VectorXd z(m);
  for (int a = 0; a < m; ++a) {
    z(a) = values[a];
    for (int b = 0; b < m; ++b) sub(a, b) = full(rows[a], rows[b]);
    sub(a, a) += kCovarianceJitter;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sub);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub);
    throw NumericalError("restricted covariance is not positive definite (min eigenvalue " +
                         std::to_string(es.eigenvalues().minCoeff()) + ")");
  }
  const Eigen::VectorXd v = llt.matrixL().solve(z);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (m * kLog2Pi + log_det + v.squaredNorm());
}

double corpus_regression_log_lik(const LinkageState& state, const RegressionObservations& obs,
                                 const RegressionParams& params) {
  RegressionEvaluator eval(params);
  double acc = 0.0;
  for (int label : state.active_labels()) {
    acc += eval.log_lik(eval.cluster_stats(obs, state.members(label)));
  }
  return acc;
}

double log_ratio_move_regression(const LinkageState& state, int r, int from, int to,
                                 const RegressionObservations& obs,
                                 const RegressionParams& params) {
  if (state.label_of(r) != from) throw Error("log_ratio_move_regression: r is not in `from`");
  if (to == from || !obs.has_any(r)) return 0.0;
  RegressionEvaluator eval(params);
  const auto from_members = state.members(from);
  RegressionStats from_all(params.dim());
  RegressionStats from_rest(params.dim());
  for (int m : from_members) {
    const auto s = eval.record_stats(obs, m);
    from_all += s;
    if (m != r) from_rest += s;
  }
  const RegressionStats rs = eval.record_stats(obs, r);
  double before = eval.log_lik(from_all);
  double after = eval.log_lik(from_rest);
  if (to != LinkageState::kNew) {
    const RegressionStats to_stats = eval.cluster_stats(obs, state.members(to));
    before += eval.log_lik(to_stats);
    after += eval.log_lik(to_stats + rs);
  } else {
    after += eval.log_lik(rs);
  }
  return after - before;
}

}  // namespace brl
