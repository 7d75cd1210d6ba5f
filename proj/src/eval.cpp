#include "brl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "brl/error.hpp"

namespace brl {

namespace {

std::int64_t choose2(std::int64_t n) { return n * (n - 1) / 2; }

LinkageMetrics finish(std::int64_t true_pairs, std::int64_t declared, std::int64_t tp) {
  LinkageMetrics m;
  m.true_pairs = true_pairs;
  m.declared_pairs = declared;
  m.true_positive_pairs = tp;
  m.fnr = true_pairs == 0 ? 0.0 : 1.0 - static_cast<double>(tp) / static_cast<double>(true_pairs);
  m.fdr = declared == 0 ? 0.0 : static_cast<double>(declared - tp) / static_cast<double>(declared);
  return m;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
};

}  // namespace

LinkageMetrics compute_metrics(std::span<const int> labels, const GroundTruth& truth) {
  if (labels.size() != truth.size()) throw Error("compute_metrics: size mismatch");
  // Pair counts from cluster, entity and joint contingency tables.
  std::unordered_map<int, std::int64_t> by_label;
  std::unordered_map<std::int64_t, std::int64_t> by_entity;
  std::map<std::pair<int, std::int64_t>, std::int64_t> joint;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++by_label[labels[i]];
    ++by_entity[truth[i]];
    ++joint[{labels[i], truth[i]}];
  }
  std::int64_t declared = 0, true_pairs = 0, tp = 0;
  for (const auto& [_, c] : by_label) declared += choose2(c);
  for (const auto& [_, c] : by_entity) true_pairs += choose2(c);
  for (const auto& [_, c] : joint) tp += choose2(c);
  return finish(true_pairs, declared, tp);
}

LinkageMetrics compute_metrics(std::span<const std::pair<int, int>> declared,
                               const GroundTruth& truth) {
  std::unordered_map<std::int64_t, std::int64_t> by_entity;
  for (auto e : truth) ++by_entity[e];
  std::int64_t true_pairs = 0;
  for (const auto& [_, c] : by_entity) true_pairs += choose2(c);
  std::int64_t tp = 0;
  for (const auto& [a, b] : declared) {
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= truth.size() ||
        static_cast<std::size_t>(b) >= truth.size()) {
      throw Error("compute_metrics: record index out of range");
    }
    if (truth[a] == truth[b]) ++tp;
  }
  return finish(true_pairs, static_cast<std::int64_t>(declared.size()), tp);
}

std::vector<LinkageMetrics> posterior_metric_trace(const PosteriorSamples& samples,
                                                   const GroundTruth& truth) {
  if (!samples.metrics.empty()) return samples.metrics;
  if (samples.labels.empty() && samples.kept() > 0) {
    throw Error("posterior_metric_trace: run kept neither metrics nor labels");
  }
  std::vector<LinkageMetrics> out;
  out.reserve(samples.labels.size());
  for (const auto& l : samples.labels) out.push_back(compute_metrics(l, truth));
  return out;
}

std::vector<PairProbability> pair_probabilities(const PosteriorSamples& samples) {
  std::vector<PairProbability> out;
  out.reserve(samples.co_cluster.size());
  for (const auto& [key, count] : samples.co_cluster) {
    const int a = static_cast<int>(key >> 32);
    const int b = static_cast<int>(key & 0xffffffffu);
    out.push_back({a, b, static_cast<double>(count) / samples.kept()});
  }
  std::sort(out.begin(), out.end(), [](const PairProbability& x, const PairProbability& y) {
    if (x.prob != y.prob) return x.prob > y.prob;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  return out;
}

LinkageState point_estimate_linkage(const PosteriorSamples& samples, std::vector<int> record_db,
                                    Constraint constraint) {
  const auto pairs = pair_probabilities(samples);
  return point_estimate_linkage(pairs, std::move(record_db), constraint);
}

LinkageState point_estimate_linkage(std::span<const PairProbability> pairs,
                                    std::vector<int> record_db, Constraint constraint) {
  const int n = static_cast<int>(record_db.size());
  std::vector<PairProbability> sorted(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end(), [](const PairProbability& x, const PairProbability& y) {
    if (x.prob != y.prob) return x.prob > y.prob;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  int num_db = 0;
  for (int d : record_db) num_db = std::max(num_db, d + 1);
  UnionFind uf(n);
  // databases present in each component, kept at its root
  std::vector<std::vector<bool>> dbs(n, std::vector<bool>(num_db, false));
  for (int r = 0; r < n; ++r) dbs[r][record_db[r]] = true;
  for (const auto& pp : sorted) {
    if (!(pp.prob > 0.5)) break;
    int ra = uf.find(pp.a);
    int rb = uf.find(pp.b);
    if (ra == rb) continue;
    if (constraint == Constraint::NoWithinDbDuplicates) {
      bool clash = false;
      for (int d = 0; d < num_db && !clash; ++d) clash = dbs[ra][d] && dbs[rb][d];
      if (clash) continue;
    }
    if (rb < ra) std::swap(ra, rb);
    uf.parent[rb] = ra;
    for (int d = 0; d < num_db; ++d) dbs[ra][d] = dbs[ra][d] || dbs[rb][d];
  }
  std::vector<int> labels(n);
  for (int r = 0; r < n; ++r) labels[r] = uf.find(r);
  return LinkageState::from_labels(std::move(record_db), labels, constraint);
}

PosteriorSamples plugin_regression(const Model& model, const SamplerConfig& cfg,
                                   std::span<const int> labels) {
  Model m = model;
  m.initial_labels = std::vector<int>(labels.begin(), labels.end());
  SamplerConfig c = cfg;
  c.mode = Mode::Joint;
  c.update_linkage = false;
  c.update_alpha = false;
  c.update_regression = true;
  return run_chain(m, c);
}

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw Error("quantile of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

ScalarSummary summarize(std::span<const double> values) {
  ScalarSummary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  s.q025 = quantile(values, 0.025);
  s.median = quantile(values, 0.5);
  s.q975 = quantile(values, 0.975);
  return s;
}

int mode_of(std::span<const int> values) {
  if (values.empty()) throw Error("mode of an empty sample");
  std::map<int, int> counts;
  for (int v : values) ++counts[v];
  int best = counts.begin()->first, best_count = 0;
  for (const auto& [v, c] : counts) {
    if (c > best_count) {
      best = v;
      best_count = c;
    }
  }
  return best;
}

Histogram histogram(std::span<const double> values, int bins, bool integer_valued) {
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  Histogram h;
  if (values.empty()) {
    h.counts.assign(bins, 0);
    return h;
  }
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  double lo = *mn, hi = *mx;
  if (integer_valued && hi - lo + 1.0 <= bins) {
    h.lo = lo - 0.5;
    h.width = 1.0;
    h.counts.assign(static_cast<std::size_t>(hi - lo + 1.0), 0);
  } else {
    if (hi == lo) {
      lo -= 0.5;
      hi += 0.5;
    }
    h.lo = lo;
    h.width = (hi - lo) / bins;
    h.counts.assign(bins, 0);
  }
  const auto nb = static_cast<std::int64_t>(h.counts.size());
  for (double v : values) {
    auto b = static_cast<std::int64_t>(std::floor((v - h.lo) / h.width));
    b = std::clamp<std::int64_t>(b, 0, nb - 1);
    ++h.counts[b];
  }
  return h;
}

std::vector<double> column(std::span<const double> matrix, int width, int col) {
  std::vector<double> out;
  if (width <= 0) return out;
  out.reserve(matrix.size() / width);
  for (std::size_t i = col; i < matrix.size(); i += width) out.push_back(matrix[i]);
  return out;
}

std::vector<std::string> regression_column_names(int p) {
  std::vector<std::string> out;
  for (int k = 1; k <= p; ++k) out.push_back("beta_" + std::to_string(k));
  out.push_back("var_y");
  for (int k = 1; k <= p; ++k) out.push_back("var_x_" + std::to_string(k));
  return out;
}

}  // namespace brl
