#include "brl/hitmiss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "brl/error.hpp"
#include "brl/math.hpp"

namespace brl {

FeatureSpec::FeatureSpec(std::vector<std::vector<double>> theta) : theta_(std::move(theta)) {
  log_theta_.reserve(theta_.size());
  for (std::size_t f = 0; f < theta_.size(); ++f) {
    const auto& t = theta_[f];
    if (t.size() < 2) throw ConfigError("feature " + std::to_string(f + 1) + ": support < 2");
    double sum = 0.0;
    for (double v : t) {
      if (!(v > 0.0)) throw ConfigError("feature " + std::to_string(f + 1) + ": theta <= 0");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-12) {
      throw ConfigError("feature " + std::to_string(f + 1) + ": theta does not sum to 1");
    }
    std::vector<double> lt(t.size());
    std::transform(t.begin(), t.end(), lt.begin(), [](double v) { return std::log(v); });
    log_theta_.push_back(std::move(lt));
  }
}

FeatureSpec FeatureSpec::empirical(const CategoricalRecordView& records, double floor) {
  std::vector<std::vector<double>> theta;
  for (int f = 0; f < records.num_features(); ++f) {
    std::vector<double> t(records.support(f), 0.0);
    for (std::int32_t c : records.feature(f)) t[c] += 1.0;
    const double n = std::max(1, records.num_records());
    double sum = 0.0;
    for (double& v : t) {
      v = std::max(v / n, floor);
      sum += v;
    }
    for (double& v : t) v /= sum;
    theta.push_back(std::move(t));
  }
  return FeatureSpec(std::move(theta));
}

double log_marginal_from_counts(std::span<const CodeCount> counts, int n, double alpha,
                                std::span<const double> theta, std::span<const double> log_theta) {
  if (n <= 0) throw Error("cluster marginal: empty cluster");
  const double log_alpha = std::log(alpha);
  // Every record missed: prod_r alpha theta_{v_r}.
  double sum_log_theta = 0.0;
  double observed_mass = 0.0;
  for (const auto& cc : counts) {
    sum_log_theta += cc.count * log_theta[cc.code];
    observed_mass += theta[cc.code];
  }

  // Terms for true value s among the observed codes:
  //   theta_s (1 - alpha + alpha theta_s)^{c_s} * prod_{r: v_r != s} alpha theta_{v_r}
  // and one remainder term for all unobserved s: (1 - sum_obs theta) * prod_r alpha theta_{v_r}.
  double hi = kNegInf;
  double terms[64];
  std::vector<double> spill;
  double* t = terms;
  const std::size_t nt = counts.size() + 1;
  if (nt > 64) {
    spill.resize(nt);
    t = spill.data();
  }
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& cc = counts[i];
    const int misses = n - cc.count;
    double v = log_theta[cc.code] +
               cc.count * std::log1p(alpha * (theta[cc.code] - 1.0)) +
               (sum_log_theta - cc.count * log_theta[cc.code]);
    if (misses > 0) v += misses * log_alpha;
    t[i] = v;
    hi = std::max(hi, v);
  }
  const double rest = static_cast<int>(counts.size()) == static_cast<int>(theta.size())
                          ? 0.0
                          : 1.0 - observed_mass;
  t[counts.size()] = rest > 0.0 ? std::log(rest) + n * log_alpha + sum_log_theta : kNegInf;
  hi = std::max(hi, t[counts.size()]);
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (std::size_t i = 0; i < nt; ++i) acc += std::exp(t[i] - hi);
  return hi + std::log(acc);
}

namespace {

void tally(std::span<const std::int32_t> codes, std::vector<CodeCount>& out) {
  out.clear();
  for (std::int32_t c : codes) {
    auto it = std::find_if(out.begin(), out.end(), [c](const CodeCount& cc) { return cc.code == c; });
    if (it == out.end()) {
      out.push_back({c, 1});
    } else {
      ++it->count;
    }
  }
}

void check_codes(std::span<const std::int32_t> codes, std::size_t support) {
  if (codes.empty()) throw Error("cluster marginal: empty cluster");
  for (auto c : codes)
    if (c < 0 || static_cast<std::size_t>(c) >= support) throw Error("cluster marginal: bad code");
}

}  // namespace

double cluster_feature_log_marginal(std::span<const std::int32_t> codes, double alpha,
                                    std::span<const double> theta) {
  check_codes(codes, theta.size());
  std::vector<CodeCount> counts;
  tally(codes, counts);
  std::vector<double> log_theta(theta.size());
  for (const auto& cc : counts) log_theta[cc.code] = std::log(theta[cc.code]);
  return log_marginal_from_counts(counts, static_cast<int>(codes.size()), alpha, theta, log_theta);
}

double cluster_feature_marginal(std::span<const std::int32_t> codes, double alpha,
                                std::span<const double> theta) {
  return std::exp(cluster_feature_log_marginal(codes, alpha, theta));
}

double cluster_log_marginal(std::span<const int> cluster, const CategoricalRecordView& records,
                            std::span<const double> alpha, const FeatureSpec& spec) {
  if (cluster.empty()) throw Error("cluster_log_marginal: empty cluster");
  std::vector<std::int32_t> codes(cluster.size());
  std::vector<CodeCount> counts;
  double acc = 0.0;
  for (int f = 0; f < spec.num_features(); ++f) {
    for (std::size_t i = 0; i < cluster.size(); ++i) codes[i] = records.code(cluster[i], f);
    tally(codes, counts);
    acc += log_marginal_from_counts(counts, static_cast<int>(codes.size()), alpha[f],
                                    spec.theta(f), spec.log_theta(f));
  }
  return acc;
}

double log_ratio_add_record(std::span<const int> cluster_without_r, int r,
                            const CategoricalRecordView& records, std::span<const double> alpha,
                            const FeatureSpec& spec) {
  if (cluster_without_r.empty()) {
    double acc = 0.0;
    for (int f = 0; f < spec.num_features(); ++f) acc += spec.log_theta(f)[records.code(r, f)];
    return acc;
  }
  std::vector<int> with(cluster_without_r.begin(), cluster_without_r.end());
  with.push_back(r);
  return cluster_log_marginal(with, records, alpha, spec) -
         cluster_log_marginal(cluster_without_r, records, alpha, spec);
}

double alpha_conditional_log_density(int feature, double alpha, const LinkageState& state,
                                     const CategoricalRecordView& records,
                                     const FeatureSpec& spec, BetaPrior prior) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) return kNegInf;
  std::vector<std::int32_t> codes;
  std::vector<CodeCount> counts;
  double acc = 0.0;
  for (int label : state.active_labels()) {
    const auto members = state.members(label);
    codes.resize(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) codes[i] = records.code(members[i], feature);
    tally(codes, counts);
    acc += log_marginal_from_counts(counts, static_cast<int>(codes.size()), alpha,
                                    spec.theta(feature), spec.log_theta(feature));
  }
  auto kernel = [](double e, double x) { return e == 0.0 ? 0.0 : e * std::log(x); };
  return acc + kernel(prior.f - 1.0, alpha) + kernel(prior.g - 1.0, 1.0 - alpha);
}

PairScoreTable make_pair_score_table(double alpha, std::span<const double> theta) {
  // Two records, same code v:   p = theta_v (1-a+a theta_v)^2 + (1-theta_v) a^2 theta_v^2
  // Two records, codes a != b:  p = theta_a theta_b a (2 - a)
  // Each divided by the singleton marginal theta of the existing member.
  PairScoreTable t;
  t.agree.resize(theta.size());
  for (std::size_t v = 0; v < theta.size(); ++v) {
    const double th = theta[v];
    const double hit = 1.0 - alpha + alpha * th;
    t.agree[v] = std::log(hit * hit + (1.0 - th) * alpha * alpha * th);
  }
  t.disagree_shift = std::log(alpha) + std::log(2.0 - alpha);
  return t;
}

}  // namespace brl
