#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "brl/datagen.hpp"
#include "brl/eval.hpp"
#include "brl/metrics.hpp"
#include "brl/sampler.hpp"

using namespace brl;

namespace {

LinkageMetrics brute_metrics(const std::vector<int>& labels, const GroundTruth& truth) {
  LinkageMetrics m;
  const int n = static_cast<int>(labels.size());
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const bool t = truth[a] == truth[b], d = labels[a] == labels[b];
      m.true_pairs += t;
      m.declared_pairs += d;
      m.true_positive_pairs += t && d;
    }
  m.fnr = m.true_pairs ? 1.0 - static_cast<double>(m.true_positive_pairs) / m.true_pairs : 0.0;
  m.fdr = m.declared_pairs ? static_cast<double>(m.declared_pairs - m.true_positive_pairs) / m.declared_pairs : 0.0;
  return m;
}

PosteriorSamples samples_with_pairs(int n, int kept, const std::map<std::pair<int, int>, int>& counts) {
  PosteriorSamples s;
  s.num_records = n;
  for (int i = 0; i < kept; ++i) {
    s.iteration.push_back(i + 1);
    s.k.push_back(n);
    s.t.push_back(-1);
  }
  for (const auto& [p, c] : counts) s.co_cluster[PosteriorSamples::pair_key(p.first, p.second)] = c;
  return s;
}

}  // namespace

TEST_CASE("pairwise metrics: worked cases") {
  const GroundTruth truth{1, 1, 2};
  auto m = compute_metrics(std::vector<int>{5, 5, 7}, truth);
  CHECK(m.fnr == 0.0);
  CHECK(m.fdr == 0.0);
  m = compute_metrics(std::vector<int>{0, 1, 2}, truth);
  CHECK(m.fnr == 1.0);
  CHECK(m.fdr == 0.0);
  m = compute_metrics(std::vector<int>{0, 1, 0}, truth);  // {a,c},{b}
  CHECK(m.fnr == 1.0);
  CHECK(m.fdr == 1.0);
  const std::vector<std::pair<int, int>> declared{{0, 2}};
  m = compute_metrics(declared, truth);
  CHECK(m.fnr == 1.0);
  CHECK(m.fdr == 1.0);
  CHECK(compute_metrics(std::vector<int>{0, 1, 2}, GroundTruth{1, 2, 3}).fnr == 0.0);
}

TEST_CASE("pairwise metrics agree with pair enumeration on random partitions") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 30);
    std::vector<int> labels(n);
    GroundTruth truth(n);
    const int kl = 1 + static_cast<int>(rng() % n), kt = 1 + static_cast<int>(rng() % n);
    for (int i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng() % kl) * 3 + 100;
      truth[i] = static_cast<std::int64_t>(rng() % kt) - 5;
    }
    const auto got = compute_metrics(labels, truth);
    const auto want = brute_metrics(labels, truth);
    CHECK(got.true_pairs == want.true_pairs);
    CHECK(got.declared_pairs == want.declared_pairs);
    CHECK(got.true_positive_pairs == want.true_positive_pairs);
    CHECK(got.fnr == doctest::Approx(want.fnr));
    CHECK(got.fdr == doctest::Approx(want.fdr));
    CHECK(got.fnr >= 0.0);
    CHECK(got.fnr <= 1.0);
    CHECK(got.fdr >= 0.0);
    CHECK(got.fdr <= 1.0);
    std::vector<int> truth_labels(truth.begin(), truth.end());
    CHECK(compute_metrics(truth_labels, truth).fdr == 0.0);
  }
}

TEST_CASE("metric trace from kept labels") {
  PosteriorSamples s;
  s.num_records = 3;
  s.iteration = {1, 2};
  s.labels = {{0, 0, 2}, {0, 1, 0}};
  const auto trace = posterior_metric_trace(s, GroundTruth{1, 1, 2});
  REQUIRE(trace.size() == 2);
  CHECK(trace[0].fnr == 0.0);
  CHECK(trace[0].fdr == 0.0);
  CHECK(trace[1].fnr == 1.0);
  CHECK(trace[1].fdr == 1.0);
}

TEST_CASE("point estimate: threshold, closure and the bipartite rule") {
  {
    const auto s = samples_with_pairs(2, 10, {{{0, 1}, 9}});
    const auto est = point_estimate_linkage(s, {0, 0}, Constraint::Unconstrained);
    CHECK(est.label_of(0) == est.label_of(1));
  }
  {
    const auto s = samples_with_pairs(3, 10, {{{0, 1}, 9}, {{1, 2}, 9}, {{0, 2}, 1}});
    const auto est = point_estimate_linkage(s, {0, 0, 0}, Constraint::Unconstrained);
    CHECK(est.num_clusters() == 1);
  }
  {
    const auto s = samples_with_pairs(3, 10, {{{0, 1}, 5}});
    const auto est = point_estimate_linkage(s, {0, 0, 0}, Constraint::Unconstrained);
    CHECK(est.num_clusters() == 3);  // exactly 0.5 is not above the threshold
  }
  {
    // record 0 in the first database; records 1 and 2 in the second
    const std::vector<PairProbability> pairs{{0, 2, 0.6}, {0, 1, 0.9}};
    const auto est = point_estimate_linkage(pairs, {0, 1, 1}, Constraint::NoWithinDbDuplicates);
    CHECK(est.label_of(0) == est.label_of(1));
    CHECK(est.label_of(2) != est.label_of(0));
    CHECK_NOTHROW(est.validate());
  }
}

TEST_CASE("point estimate is always a valid constrained partition") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    const int n1 = 1 + static_cast<int>(rng() % 6), n2 = 1 + static_cast<int>(rng() % 6);
    std::vector<int> db(n1, 0);
    db.insert(db.end(), n2, 1);
    std::vector<PairProbability> pairs;
    for (int a = 0; a < n1 + n2; ++a)
      for (int b = a + 1; b < n1 + n2; ++b)
        if (rng() % 2) pairs.push_back({a, b, std::uniform_real_distribution<double>(0, 1)(rng)});
    std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) { return x.prob > y.prob; });
    const auto est = point_estimate_linkage(pairs, db, Constraint::NoWithinDbDuplicates);
    CHECK_NOTHROW(est.validate());
    CHECK_NOTHROW(LinkageState::from_labels(db, est.labels(), Constraint::NoWithinDbDuplicates));
  }
}

TEST_CASE("pair probabilities are sorted and normalized by the kept count") {
  const auto s = samples_with_pairs(4, 4, {{{0, 1}, 1}, {{2, 3}, 4}, {{1, 2}, 1}});
  const auto p = pair_probabilities(s);
  REQUIRE(p.size() == 3);
  CHECK(p[0].a == 2);
  CHECK(p[0].prob == 1.0);
  CHECK(p[1].a == 0);
  CHECK(p[2].a == 1);
  CHECK(s.pair_probability(1, 0) == 0.25);
}

TEST_CASE("summaries, quantiles, mode and histograms") {
  const std::vector<double> v{4.0, 1.0, 3.0, 2.0, 5.0};
  const auto s = summarize(v);
  CHECK(s.mean == 3.0);
  CHECK(s.median == 3.0);
  CHECK(s.sd == doctest::Approx(std::sqrt(2.5)));
  CHECK(quantile(v, 0.25) == 2.0);
  CHECK(quantile(v, 0.1) == doctest::Approx(1.4));
  CHECK(mode_of(std::vector<int>{3, 4, 4, 3, 9}) == 3);
  CHECK(mode_of(std::vector<int>{450, 451, 450}) == 450);

  const std::vector<double> ints{448, 450, 450, 451, 452};
  const auto h = histogram(ints, 30, true);
  CHECK(h.counts.size() == 5);
  CHECK(h.counts[2] == 2);
  std::mt19937_64 rng(1);
  std::vector<double> xs(1234);
  for (auto& x : xs) x = std::normal_distribution<double>()(rng);
  const auto hx = histogram(xs, 30, false);
  CHECK(hx.counts.size() == 30);
  std::int64_t total = 0;
  for (auto c : hx.counts) total += c;
  CHECK(total == 1234);
  const auto flat = histogram(std::vector<double>{2.0, 2.0}, 10, false);
  CHECK(std::accumulate(flat.counts.begin(), flat.counts.end(), std::int64_t{0}) == 2);

  CHECK(regression_column_names(2) == std::vector<std::string>{"beta_1", "beta_2", "var_y", "var_x_1", "var_x_2"});
  CHECK(column(std::vector<double>{1, 2, 3, 4, 5, 6}, 3, 1) == std::vector<double>{2, 5});
}

TEST_CASE("plug-in regression: false matches pull beta toward zero") {
  auto gen = generate_corpus(builtin_experiment("ExpII", 21));
  Model m;
  m.corpus = &gen.corpus;
  m.prior = PartitionPrior(Pyp{0.4, 0.98});
  m.features = FeatureSpec::empirical(gen.corpus.categorical);
  m.distortion.alpha.assign(m.features.num_features(), 0.05);
  const int n = gen.corpus.num_records();
  std::vector<int> truth_labels(n);
  std::map<std::int64_t, int> first;
  for (int i = 0; i < n; ++i) truth_labels[i] = first.emplace(gen.truth[i], i).first->second;

  // inject false matches: pair y-only singletons of DB1 with x-only singletons of DB2
  std::vector<int> wrong = truth_labels;
  std::map<int, int> size;
  for (int l : truth_labels) ++size[l];
  std::vector<int> y_single, x_single;
  for (int i = 0; i < n; ++i) {
    if (size[truth_labels[i]] != 1) continue;
    if (gen.corpus.record_db[i] == 0) y_single.push_back(i);
    else x_single.push_back(i);
  }
  const std::size_t inject = std::min<std::size_t>({60, y_single.size(), x_single.size()});
  for (std::size_t i = 0; i < inject; ++i) wrong[x_single[i]] = truth_labels[y_single[i]];

  SamplerConfig cfg;
  cfg.mode = Mode::Joint;
  cfg.iterations = 3000;
  cfg.burn_in = 1000;
  cfg.seed = 4;
  const auto good = plugin_regression(m, cfg, truth_labels);
  const auto bad = plugin_regression(m, cfg, wrong);
  const auto bg = summarize(column(good.regression, good.regression_width(), 0));
  const auto bb = summarize(column(bad.regression, bad.regression_width(), 0));
  MESSAGE("beta | truth " << bg.mean << " [" << bg.q025 << ", " << bg.q975 << "], with false matches " << bb.mean);
  CHECK(bg.q025 <= 3.0);
  CHECK(bg.q975 >= 3.0);
  CHECK(bb.mean < bg.mean);
  CHECK(good.k.front() == static_cast<int>(first.size()));
  for (std::size_t i = 0; i < good.acceptance.alpha_tried.size(); ++i) CHECK(good.acceptance.alpha_tried[i] == 0);
}

TEST_CASE("plug-in regression without duplicated x leaves the noise variance at its prior") {
  auto gen = generate_corpus(builtin_experiment("ExpII", 22));
  Model m;
  m.corpus = &gen.corpus;
  m.prior = PartitionPrior(Pyp{0.4, 0.98});
  m.features = FeatureSpec::empirical(gen.corpus.categorical);
  m.distortion.alpha.assign(m.features.num_features(), 0.05);
  std::vector<int> singletons(gen.corpus.num_records());
  std::iota(singletons.begin(), singletons.end(), 0);
  SamplerConfig cfg;
  cfg.mode = Mode::Joint;
  cfg.iterations = 6000;
  cfg.burn_in = 1000;
  cfg.regression_prior.var_x = VariancePrior::parse("ig:0.01,3");
  const auto out = plugin_regression(m, cfg, singletons);
  const auto vx = summarize(column(out.regression, out.regression_width(), 2));
  // prior: inverse gamma with mean 0.01, shape 3 (median about 0.0075)
  MESSAGE("var_x posterior mean " << vx.mean << ", median " << vx.median);
  CHECK(vx.mean == doctest::Approx(0.01).epsilon(0.3));
  CHECK(vx.median == doctest::Approx(0.02 / 2.674).epsilon(0.3));
}
