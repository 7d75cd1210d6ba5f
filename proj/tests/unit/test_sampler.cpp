#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "brl/datagen.hpp"
#include "brl/error.hpp"
#include "brl/eval.hpp"
#include "brl/math.hpp"
#include "brl/priors.hpp"
#include "brl/regression.hpp"
#include "brl/sampler.hpp"
#include "oracles.hpp"

using namespace brl;

namespace {

// Small corpus: codes given per record (record-major), all features share `support`.
Corpus tiny_corpus(const std::vector<int>& record_db, const std::vector<std::vector<std::int32_t>>& codes, int support) {
  Corpus c;
  const int n = static_cast<int>(record_db.size());
  c.record_db = record_db;
  c.num_databases = record_db.empty() ? 0 : record_db.back() + 1;
  for (int i = 0; i < n; ++i) c.record_key.push_back(i + 1);
  const int p = codes.empty() ? 0 : static_cast<int>(codes.front().size());
  std::vector<std::vector<std::int32_t>> by_feature(p, std::vector<std::int32_t>(n));
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < p; ++f) by_feature[f][i] = codes[i][f];
  for (int f = 0; f < p; ++f) c.feature_names.push_back("f" + std::to_string(f + 1));
  c.categorical = CategoricalRecordView(by_feature, std::vector<int>(p, support));
  c.regression = RegressionObservations(n, 0);
  return c;
}

std::vector<double> uniform_theta(int m) { return std::vector<double>(m, 1.0 / m); }

Model tiny_model(const Corpus& c, PartitionPrior prior, std::vector<std::vector<double>> theta, double alpha) {
  Model m;
  m.corpus = &c;
  m.prior = std::move(prior);
  m.features = FeatureSpec(std::move(theta));
  m.distortion.alpha.assign(c.categorical.num_features(), alpha);
  m.constraint = Constraint::Unconstrained;
  return m;
}

SamplerConfig quiet_config(Mode mode = Mode::LinkageOnly) {
  SamplerConfig cfg;
  cfg.mode = mode;
  cfg.iterations = 10;
  cfg.burn_in = 0;
  cfg.adapt = false;
  return cfg;
}

double log_prior_partition(const PartitionPrior& prior, const LinkageState& s) {
  const auto summary = s.summary();
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Pyp>) {
          return std::log(oracle::pyp_eppf(summary.cluster_sizes, v.strength, v.discount));
        } else if constexpr (std::is_same_v<T, UniformLabels>) {
          return log_falling_factorial(v.n_pop, summary.k);
        } else if constexpr (std::is_same_v<T, UniformPartitions>) {
          return 0.0;
        } else {
          return constrained_pyp_joint_log_prob(prior, s);
        }
      },
      prior.variant());
}

// Unnormalized log posterior of a partition given alpha and regression parameters.
double log_joint(const Model& m, const LinkageState& s, std::span<const double> alpha,
                 const std::optional<RegressionParams>& reg) {
  const Corpus& c = *m.corpus;
  double total = log_prior_partition(m.prior, s);
  for (int l : s.active_labels()) {
    for (int f = 0; f < c.categorical.num_features(); ++f) {
      std::vector<int> codes;
      for (int r : s.members(l)) codes.push_back(c.categorical.code(r, f));
      const auto th = m.features.theta(f);
      total += std::log(oracle::hitmiss_marginal(codes, alpha[f], std::vector<double>(th.begin(), th.end())));
    }
    if (reg) {
      std::vector<int> with_obs;
      for (int r : s.members(l))
        if (c.regression.has_any(r)) with_obs.push_back(r);
      if (!with_obs.empty())
        total += cluster_regression_log_lik_dense(observation_pattern(with_obs, c.regression), c.regression, *reg);
    }
  }
  return total;
}

void check_conditional_against_joint(Sampler& s, const Model& m, int r) {
  const auto cand = s.conditional(r);
  double sum = 0.0;
  for (const auto& c : cand) sum += c.probability;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> lj;
  for (const auto& c : cand) {
    LinkageState moved = s.state();
    double v = kNegInf;
    if (c.target == moved.label_of(r)) {
      v = log_joint(m, moved, s.alpha(), s.regression_params());
    } else {
      try {
        moved.move_record(r, c.target);
        v = log_joint(m, moved, s.alpha(), s.regression_params());
      } catch (const ConstraintError&) {
      }
    }
    lj.push_back(v);
  }
  const double hi = *std::max_element(lj.begin(), lj.end());
  double z = 0.0;
  for (double v : lj) z += std::exp(v - hi);
  for (std::size_t i = 0; i < cand.size(); ++i)
    CHECK(cand[i].probability == doctest::Approx(std::exp(lj[i] - hi) / z).epsilon(1e-10));
}

Corpus random_corpus(std::mt19937_64& rng, std::vector<int> record_db, int p, int m, int q) {
  const int n = static_cast<int>(record_db.size());
  std::vector<std::vector<std::int32_t>> codes(n, std::vector<std::int32_t>(p));
  for (auto& row : codes)
    for (auto& v : row) v = static_cast<std::int32_t>(rng() % m);
  // plant a few duplicates so some clusters are informative
  if (n >= 4) codes[n - 1] = codes[0];
  Corpus c = tiny_corpus(record_db, codes, m);
  if (q >= 0) {
    c.has_response = true;
    c.num_covariates = q;
    c.regression = RegressionObservations(n, q);
    std::normal_distribution<double> z;
    for (int r = 0; r < n; ++r) {
      if (r % 4 == 3) continue;  // no regression data
      for (int k = 0; k <= q; ++k)
        if ((rng() % 3) != 0) c.regression.set(r, k, 2.0 * z(rng));
      if (!c.regression.has_any(r)) c.regression.set(r, 0, z(rng));
    }
  }
  return c;
}

}  // namespace

TEST_CASE("two identical records under low distortion link with posterior near one") {
  const Corpus c = tiny_corpus({0, 0}, {{3, 1}, {3, 1}}, 100);
  Model m = tiny_model(c, PartitionPrior(Pyp{1.0, 0.5}), {uniform_theta(100), uniform_theta(100)}, 1e-4);
  Sampler s(m, quiet_config());
  const auto cand = s.conditional(1);
  REQUIRE(cand.size() == 2);
  // exact: linked  (1 - s)/(1 + th) * prod_f marginal(pair); apart (s + th)/(1 + th) * prod theta^2
  double linked = 0.5 / 2.0, apart = 1.5 / 2.0;
  for (int f = 0; f < 2; ++f) {
    linked *= oracle::hitmiss_marginal({3, 3}, 1e-4, uniform_theta(100));
    apart *= 1e-4;
  }
  const double want = linked / (linked + apart);
  CHECK(want > 0.98);
  const auto link = std::find_if(cand.begin(), cand.end(), [&](const Candidate& x) { return x.target == 0; });
  REQUIRE(link != cand.end());
  CHECK(link->probability == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("without features the conditional is the prior allocation") {
  const Corpus c = tiny_corpus({0, 0, 0, 0}, {{}, {}, {}, {}}, 2);
  Model m = tiny_model(c, PartitionPrior(UniformLabels{10}), {}, 0.5);
  m.initial_labels = std::vector<int>{0, 0, 1, 3};
  Sampler s(m, quiet_config());
  const auto cand = s.conditional(3);
  std::map<int, double> got;
  for (const auto& x : cand) got[x.target] = x.probability;
  CHECK(got.at(0) == doctest::Approx(0.1));
  CHECK(got.at(1) == doctest::Approx(0.1));
  CHECK(got.at(LinkageState::kNew) == doctest::Approx(0.8));
}

TEST_CASE("full conditional matches ratios of the enumerated joint posterior") {
  std::mt19937_64 rng(77);
  const PartitionPrior priors[] = {PartitionPrior(Pyp{1.0, 0.5}), PartitionPrior(Pyp{0.4, 0.9}),
                                   PartitionPrior(UniformLabels{9}), PartitionPrior(UniformPartitions{12})};
  for (int trial = 0; trial < 40; ++trial) {
    const int q = trial % 4 == 0 ? -1 : trial % 4 - 1;  // -1: no regression columns
    const Corpus c = random_corpus(rng, {0, 0, 0, 1, 1, 1, 1}, 2, 3, q);
    const auto& prior = priors[trial % 4];
    Model m = tiny_model(c, prior, {uniform_theta(3), {0.5, 0.3, 0.2}}, 0.3);
    std::vector<int> labels(7);
    for (auto& l : labels) l = static_cast<int>(rng() % 4);
    m.initial_labels = labels;
    const Mode mode = q >= 0 ? Mode::Joint : Mode::LinkageOnly;
    if (q >= 0) {
      RegressionParams rp = initial_regression_params(c);
      for (int k = 0; k < q; ++k) rp.beta(k) = 1.5 - k;
      m.regression = rp;
    }
    Sampler s(m, quiet_config(mode));
    for (int r = 0; r < 7; ++r) check_conditional_against_joint(s, m, r);
    // the state is untouched by conditional()
    CHECK(s.state().labels() == LinkageState::from_labels(c.record_db, labels, Constraint::Unconstrained).labels());
  }
}

TEST_CASE("constrained prior: conditional matches the joint and chains respect the constraint") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Corpus c = random_corpus(rng, {0, 0, 0, 1, 1, 1}, 2, 3, -1);
    Model m = tiny_model(c, PartitionPrior(ConstrainedPyp{1.0, 0.6}), {uniform_theta(3), uniform_theta(3)}, 0.2);
    m.constraint = Constraint::NoWithinDbDuplicates;
    m.initial_labels = std::vector<int>{0, 1, 2, 1, 4, 5};
    Sampler s(m, quiet_config());
    for (int r = 0; r < 6; ++r) check_conditional_against_joint(s, m, r);
    CHECK(s.conditional(0).size() == 1);  // first-database records are fixed
    for (int it = 0; it < 50; ++it) s.sweep();
    CHECK_NOTHROW(s.state().validate());
    CHECK_NOTHROW(LinkageState::from_labels(c.record_db, s.state().labels(), Constraint::NoWithinDbDuplicates));
  }
}

TEST_CASE("joint mode reduces to linkage-only for records without regression data") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const Corpus with = random_corpus(rng, {0, 0, 0, 0, 1, 1, 1, 1}, 3, 4, 1);
    Corpus without = with;
    without.has_response = false;
    without.num_covariates = 0;
    without.regression = RegressionObservations(with.num_records(), 0);
    std::vector<int> labels(8);
    for (auto& l : labels) l = static_cast<int>(rng() % 5);
    Model mj = tiny_model(with, PartitionPrior(Pyp{1.0, 0.3}), {uniform_theta(4), uniform_theta(4), uniform_theta(4)}, 0.1);
    mj.initial_labels = labels;
    Model ml = mj;
    ml.corpus = &without;
    Sampler joint(mj, quiet_config(Mode::Joint));
    Sampler link(ml, quiet_config(Mode::LinkageOnly));
    Sampler joint_no_columns(ml, quiet_config(Mode::Joint));
    for (int r = 0; r < 8; ++r) {
      const auto b = link.conditional(r);
      const auto c = joint_no_columns.conditional(r);
      REQUIRE(b.size() == c.size());
      for (std::size_t i = 0; i < b.size(); ++i) {
        CHECK(b[i].target == c[i].target);
        CHECK(b[i].log_weight == c[i].log_weight);
      }
      if (with.regression.has_any(r)) continue;
      // compared by target: conditional() may reorder the active-label list when r is a singleton
      std::map<int, double> wa, wb;
      for (const auto& x : joint.conditional(r)) wa[x.target] = x.log_weight;
      for (const auto& x : b) wb[x.target] = x.log_weight;
      CHECK(wa == wb);
    }
  }
}

TEST_CASE("run bookkeeping: one kept sample, thinning, determinism") {
  auto gen = generate_corpus(builtin_experiment("ExpII", 3));
  Model m;
  m.corpus = &gen.corpus;
  m.prior = PartitionPrior(Pyp{0.4, 0.98});
  m.features = FeatureSpec::empirical(gen.corpus.categorical);
  m.distortion.alpha.assign(m.features.num_features(), 0.05);
  m.truth = &gen.truth;
  SamplerConfig cfg;
  cfg.mode = Mode::Joint;
  cfg.iterations = 4;
  cfg.burn_in = 3;
  cfg.seed = 99;
  const auto one = run_chain(m, cfg);
  CHECK(one.kept() == 1);
  CHECK(one.iteration.front() == 4);
  CHECK(one.metrics.size() == 1);
  CHECK(one.regression.size() == 3);

  cfg.iterations = 12;
  cfg.burn_in = 2;
  cfg.thin = 3;
  cfg.keep_labels = true;
  const auto a = run_chain(m, cfg);
  const auto b = run_chain(m, cfg);
  CHECK(a.iteration == std::vector<int>{5, 8, 11});
  CHECK(a.k == b.k);
  CHECK(a.alpha == b.alpha);
  CHECK(a.regression == b.regression);
  CHECK(a.co_cluster == b.co_cluster);
  CHECK(a.labels == b.labels);
  for (const auto& [key, count] : a.co_cluster) CHECK(count <= static_cast<std::uint32_t>(a.kept()));
  for (int k : a.k) {
    CHECK(k >= 1);
    CHECK(k <= gen.corpus.num_records());
  }
  cfg.seed = 100;
  const auto other = run_chain(m, cfg);
  CHECK(other.labels != a.labels);

  // merged chains
  const auto chains = run_chains(m, cfg, 2);
  REQUIRE(chains.size() == 2);
  CHECK(chains[0].labels == run_chain(m, [&] { auto c = cfg; c.seed = 100; return c; }()).labels);
  const auto merged = merge_samples(chains);
  CHECK(merged.kept() == 6);
}

TEST_CASE("proposal scale zero means every Metropolis proposal is accepted") {
  std::mt19937_64 rng(2);
  const Corpus c = random_corpus(rng, {0, 0, 0, 1, 1, 1}, 2, 3, 1);
  Model m = tiny_model(c, PartitionPrior(Pyp{1.0, 0.5}), {uniform_theta(3), uniform_theta(3)}, 0.3);
  auto cfg = quiet_config(Mode::Joint);
  cfg.iterations = 200;
  cfg.proposal_sd_alpha = 0.0;
  cfg.proposal_sd_beta = 0.0;
  cfg.proposal_sd_logvar = 0.0;
  const auto out = run_chain(m, cfg);
  for (int f = 0; f < 2; ++f) CHECK(out.acceptance.alpha_accepted[f] == out.acceptance.alpha_tried[f]);
  for (std::size_t i = 0; i < out.acceptance.regression_tried.size(); ++i) {
    CHECK(out.acceptance.regression_tried[i] > 0);
    CHECK(out.acceptance.regression_accepted[i] == out.acceptance.regression_tried[i]);
  }
}

TEST_CASE("regression walk without data is driven by the prior alone") {
  Corpus c = tiny_corpus({0, 0, 0}, {{0}, {1}, {0}}, 2);
  c.has_response = true;
  c.num_covariates = 1;
  c.regression = RegressionObservations(3, 1);  // columns declared, nothing observed
  Model m = tiny_model(c, PartitionPrior(Pyp{1.0, 0.5}), {uniform_theta(2)}, 0.3);
  auto cfg = quiet_config(Mode::Joint);
  cfg.iterations = 300;
  cfg.update_linkage = false;
  cfg.update_alpha = false;
  const auto flat = run_chain(m, cfg);
  REQUIRE(flat.has_regression);
  for (std::size_t i = 0; i < flat.acceptance.regression_tried.size(); ++i)
    CHECK(flat.acceptance.regression_accepted[i] == flat.acceptance.regression_tried[i]);

  // An inverse-gamma prior on var_y rejects some log-scale moves; the MH ratio is the prior ratio.
  cfg.regression_prior.var_y = VariancePrior::parse("ig:1,3");
  Sampler s(m, cfg);
  const double before = s.regression_log_target();
  const double var_y = s.regression_params()->var_y;
  CHECK(before == doctest::Approx(cfg.regression_prior.var_y.log_density(std::log(var_y))));
  const auto informative = run_chain(m, cfg);
  CHECK(informative.acceptance.regression_accepted[1] < informative.acceptance.regression_tried[1]);
}

TEST_CASE("alpha walk on a singleton-only state samples the uniform prior") {
  const Corpus c = tiny_corpus({0, 0, 0}, {{0}, {1}, {2}}, 3);
  Model m = tiny_model(c, PartitionPrior(Pyp{1.0, 0.5}), {uniform_theta(3)}, 0.5);
  m.prior = PartitionPrior(UniformLabels{3});
  SamplerConfig cfg;
  cfg.update_linkage = false;
  cfg.proposal_sd_alpha = 2.5;
  cfg.adapt = false;
  cfg.burn_in = 100;
  cfg.thin = 20;
  cfg.iterations = cfg.burn_in + 20 * 10000;
  cfg.seed = 2024;
  const auto out = run_chain(m, cfg);
  std::vector<double> a = out.alpha;
  REQUIRE(a.size() == 10000);
  std::sort(a.begin(), a.end());
  double d = 0.0;
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    d = std::max({d, std::abs((i + 1) / n - a[i]), std::abs(a[i] - i / n)});
  // Kolmogorov critical value at the 0.1% level
  CHECK(d < 1.95 / std::sqrt(n));
}

TEST_CASE("three-record chains visit partitions at their exact posterior frequencies") {
  std::mt19937_64 rng(31);
  for (const Mode mode : {Mode::LinkageOnly, Mode::Joint}) {
    Corpus c = tiny_corpus({0, 0, 0}, {{0, 1}, {0, 1}, {1, 1}}, 2);
    if (mode == Mode::Joint) {
      c.has_response = true;
      c.num_covariates = 1;
      c.regression = RegressionObservations(3, 1);
      c.regression.set(0, 0, 6.0);
      c.regression.set(1, 1, 2.1);
      c.regression.set(2, 0, -5.0);
      c.regression.set(2, 1, -1.5);
    }
    Model m = tiny_model(c, PartitionPrior(Pyp{1.0, 0.4}), {{0.6, 0.4}, {0.3, 0.7}}, 0.25);
    RegressionParams rp;
    rp.beta = Eigen::VectorXd::Constant(1, 3.0);
    rp.var_y = 4.0;
    rp.cov_x_given_true = Eigen::MatrixXd::Constant(1, 1, 0.5);
    rp.cov_true = Eigen::MatrixXd::Constant(1, 1, 9.0);
    if (mode == Mode::Joint) m.regression = rp;
    SamplerConfig cfg;
    cfg.mode = mode;
    cfg.update_alpha = false;
    cfg.update_regression = false;
    cfg.keep_labels = true;
    cfg.burn_in = 100;
    cfg.iterations = 100 + 100000;
    cfg.seed = 8;
    const auto out = run_chain(m, cfg);

    std::map<std::vector<int>, double> exact;
    double z = 0.0;
    oracle::for_each_partition(3, [&](const std::vector<int>& labels) {
      const auto s = LinkageState::from_labels(c.record_db, labels, Constraint::Unconstrained);
      const std::vector<double> alpha(2, 0.25);
      const double p = std::exp(log_joint(m, s, alpha, mode == Mode::Joint ? std::optional(rp) : std::nullopt));
      exact[labels] = p;
      z += p;
    });
    auto canon = [](const std::vector<int>& l) {
      std::map<int, int> re;
      std::vector<int> out;
      for (int x : l) out.push_back(re.emplace(x, static_cast<int>(re.size())).first->second);
      return out;
    };
    const int batches = 100;
    const int per = out.kept() / batches;
    for (auto& [labels, p] : exact) {
      p /= z;
      std::vector<double> means(batches, 0.0);
      for (int i = 0; i < per * batches; ++i)
        if (canon(out.labels[i]) == labels) means[i / per] += 1.0 / per;
      const double mean = std::accumulate(means.begin(), means.end(), 0.0) / batches;
      double var = 0.0;
      for (double x : means) var += (x - mean) * (x - mean);
      const double se = std::sqrt(var / (batches - 1) / batches);
      CHECK(std::abs(mean - p) <= 3.0 * std::max(se, 1e-4));
    }
  }
}

TEST_CASE("regression posterior covers generating values given the true partition") {
  int cover_beta = 0, cover_var = 0;
  const int reps = 20;
  for (int rep = 0; rep < reps; ++rep) {
    auto gen = generate_corpus(builtin_experiment("ExpI", 1000 + rep));
    Model m;
    m.corpus = &gen.corpus;
    m.prior = PartitionPrior(Pyp{0.4, 0.98});
    m.features = FeatureSpec::empirical(gen.corpus.categorical);
    m.distortion.alpha.assign(m.features.num_features(), 0.05);
    std::vector<int> labels(gen.truth.size());
    std::map<std::int64_t, int> ids;
    for (std::size_t i = 0; i < labels.size(); ++i)
      labels[i] = ids.emplace(gen.truth[i], static_cast<int>(i)).first->second;
    SamplerConfig cfg;
    cfg.mode = Mode::Joint;
    cfg.iterations = 3000;
    cfg.burn_in = 1000;
    cfg.seed = 50 + rep;
    const auto out = plugin_regression(m, cfg, labels);
    const auto beta = summarize(column(out.regression, out.regression_width(), 0));
    const auto var_y = summarize(column(out.regression, out.regression_width(), 1));
    cover_beta += beta.q025 <= 3.0 && 3.0 <= beta.q975;
    cover_var += var_y.q025 <= 4.0 && 4.0 <= var_y.q975;
  }
  MESSAGE("coverage beta " << cover_beta << "/20, var_y " << cover_var << "/20");
  // nominal 95%: 20 replicates give at least 16 with probability > 0.99
  CHECK(cover_beta >= 16);
  CHECK(cover_var >= 16);
}

TEST_CASE("configuration errors surface before sampling") {
  const Corpus c = tiny_corpus({0, 0}, {{0}, {1}}, 2);
  Model m = tiny_model(c, PartitionPrior(Pyp{1.0, 0.5}), {uniform_theta(2)}, 0.3);
  SamplerConfig cfg;
  cfg.iterations = 10;
  cfg.burn_in = 10;
  CHECK_THROWS_AS(Sampler(m, cfg), ConfigError);
  cfg.burn_in = 0;
  m.distortion.alpha = {1.0};
  CHECK_THROWS_AS(Sampler(m, cfg), ConfigError);
  m.distortion.alpha = {0.3};
  m.prior = PartitionPrior(UniformLabels{1});
  CHECK_THROWS_AS(Sampler(m, cfg), ConfigError);
  m.prior = PartitionPrior(ConstrainedPyp{1.0, 0.5});
  CHECK_THROWS_AS(Sampler(m, cfg), ConfigError);
  CHECK_THROWS_AS(VariancePrior::parse("ig:1"), ConfigError);
  CHECK(VariancePrior::parse("ig:2,3").to_string() == "ig:2,3");
  CHECK(VariancePrior::parse("log-flat").kind == VariancePrior::Kind::LogFlat);
}
