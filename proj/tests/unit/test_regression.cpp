#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "brl/corpus.hpp"
#include "brl/error.hpp"
#include "brl/partition.hpp"
#include "brl/regression.hpp"
#include "oracles.hpp"

using namespace brl;

namespace {

RegressionParams simple_params() {
  RegressionParams p;
  p.beta = Eigen::VectorXd::Constant(1, 3.0);
  p.var_y = 4.0;
  p.cov_x_given_true = Eigen::MatrixXd::Constant(1, 1, 0.01);
  p.cov_true = Eigen::MatrixXd::Constant(1, 1, 9.0);
  return p;
}

Eigen::MatrixXd random_spd(std::mt19937_64& rng, int p, double scale) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) a(i, j) = z(rng);
  return scale * (a * a.transpose() / p + Eigen::MatrixXd::Identity(p, p));
}

RegressionParams random_params(std::mt19937_64& rng, int p, bool diagonal_noise) {
  std::normal_distribution<double> z;
  RegressionParams out;
  out.beta.resize(p);
  for (int i = 0; i < p; ++i) out.beta(i) = 2.0 * z(rng);
  out.var_y = std::exp(z(rng));
  out.cov_true = random_spd(rng, p, 3.0);
  if (diagonal_noise) {
    out.cov_x_given_true = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < p; ++i) out.cov_x_given_true(i, i) = 0.05 + std::exp(z(rng));
  } else {
    out.cov_x_given_true = random_spd(rng, p, 0.3);
  }
  return out;
}

// Covariance of one cluster written from the model: y_i = b'x_true + e_i,
// x_i = x_true + u_i, with every record sharing one x_true.
Eigen::MatrixXd model_covariance(int n, const RegressionParams& prm) {
  const int p = prm.dim(), w = p + 1;
  // loading of x_true on each record's (y, x) block, and the noise block
  Eigen::MatrixXd load(w, p);
  load.row(0) = prm.beta.transpose();
  load.bottomRows(p) = Eigen::MatrixXd::Identity(p, p);
  Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(w, w);
  noise(0, 0) = prm.var_y;
  noise.bottomRightCorner(p, p) = prm.cov_x_given_true;
  Eigen::MatrixXd full(n * w, n * w);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      Eigen::MatrixXd blk = load * prm.cov_true * load.transpose();
      if (a == b) blk += noise;
      full.block(a * w, b * w, w, w) = blk;
    }
  return full;
}

double oracle_loglik(const ClusterObsPattern& pattern, const RegressionObservations& obs,
                     const RegressionParams& prm) {
  const int w = prm.dim() + 1;
  const Eigen::MatrixXd full = model_covariance(static_cast<int>(pattern.size()), prm);
  std::vector<int> rows;
  std::vector<double> vals;
  for (std::size_t i = 0; i < pattern.size(); ++i)
    for (int c : pattern[i].components) {
      rows.push_back(static_cast<int>(i) * w + c);
      vals.push_back(obs.value(pattern[i].record, c));
    }
  Eigen::MatrixXd sub(rows.size(), rows.size());
  Eigen::VectorXd z(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    z(i) = vals[i];
    for (std::size_t j = 0; j < rows.size(); ++j) sub(i, j) = full(rows[i], rows[j]);
    sub(i, i) += kCovarianceJitter;
  }
  return oracle::mvn_log_density(z, sub);
}

// Random observations with a random availability mask (at least one per record).
RegressionObservations random_obs(std::mt19937_64& rng, int n, int p, double keep) {
  RegressionObservations obs(n, p);
  std::normal_distribution<double> z;
  std::bernoulli_distribution b(keep);
  for (int r = 0; r < n; ++r) {
    bool any = false;
    for (int c = 0; c <= p; ++c)
      if (b(rng)) {
        obs.set(r, c, 3.0 * z(rng));
        any = true;
      }
    if (!any) obs.set(r, static_cast<int>(rng() % (p + 1)), z(rng));
  }
  return obs;
}

}  // namespace

TEST_CASE("full covariance: worked block and structure") {
  const auto prm = simple_params();
  const Eigen::MatrixXd c1 = build_full_covariance(1, prm);
  REQUIRE(c1.rows() == 2);
  CHECK(c1(0, 0) == doctest::Approx(85.0));
  CHECK(c1(0, 1) == doctest::Approx(27.0));
  CHECK(c1(1, 0) == doctest::Approx(27.0));
  CHECK(c1(1, 1) == doctest::Approx(9.01));

  auto zero_beta = prm;
  zero_beta.beta(0) = 0.0;
  const Eigen::MatrixXd c0 = build_full_covariance(2, zero_beta);
  for (int i = 0; i < 4; i += 2)
    for (int j = 1; j < 4; j += 2) CHECK(c0(i, j) == 0.0);

  const Eigen::MatrixXd c2 = build_full_covariance(2, prm);
  CHECK((c2 - model_covariance(2, prm)).cwiseAbs().maxCoeff() < 1e-12);
  // marginal over the second record is the single-record covariance
  CHECK((c2.topLeftCorner(2, 2) - c1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((c2.bottomRightCorner(2, 2) - c1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("full covariance is symmetric PSD on random parameters") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int p = 1 + static_cast<int>(rng() % 3);
    const int n = 1 + static_cast<int>(rng() % 5);
    const auto prm = random_params(rng, p, trial % 2 == 0);
    const Eigen::MatrixXd c = build_full_covariance(n, prm);
    CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((c - model_covariance(n, prm)).cwiseAbs().maxCoeff() < 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("broken pair recovers the complete single-record density") {
  const auto prm = simple_params();
  RegressionObservations obs(2, 1);
  obs.set(0, 0, 7.5);   // y in the first database
  obs.set(1, 1, -2.0);  // x in the second
  const auto pattern = observation_pattern(std::vector<int>{0, 1}, obs);
  Eigen::MatrixXd cov(2, 2);
  cov << 85.0 + kCovarianceJitter, 27.0, 27.0, 9.01 + kCovarianceJitter;
  Eigen::VectorXd z(2);
  z << 7.5, -2.0;
  const double want = oracle::mvn_log_density(z, cov);
  CHECK(cluster_regression_log_lik(pattern, obs, prm) == doctest::Approx(want).epsilon(1e-12));
  CHECK(cluster_regression_log_lik_dense(pattern, obs, prm) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("singleton y with zero slope is N(0, var_y)") {
  auto prm = simple_params();
  prm.beta(0) = 0.0;
  RegressionObservations obs(1, 1);
  obs.set(0, 0, 1.7);
  const auto pattern = observation_pattern(std::vector<int>{0}, obs);
  const double var = 4.0 + kCovarianceJitter;
  const double want = -0.5 * (std::log(2.0 * M_PI * var) + 1.7 * 1.7 / var);
  CHECK(cluster_regression_log_lik(pattern, obs, prm) == doctest::Approx(want).epsilon(1e-13));
}

TEST_CASE("structured, dense and oracle densities agree for clusters up to six records") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 400; ++trial) {
    const int p = 1 + static_cast<int>(rng() % 4);
    const int n = 1 + static_cast<int>(rng() % 6);
    const auto prm = random_params(rng, p, trial % 3 != 0);
    const auto obs = random_obs(rng, n, p, trial % 2 ? 1.0 : 0.5);
    std::vector<int> recs(n);
    std::iota(recs.begin(), recs.end(), 0);
    const auto pattern = observation_pattern(recs, obs);
    const double want = oracle_loglik(pattern, obs, prm);
    const double s = cluster_regression_log_lik(pattern, obs, prm);
    const double d = cluster_regression_log_lik_dense(pattern, obs, prm);
    CHECK(s == doctest::Approx(want).epsilon(1e-10));
    CHECK(d == doctest::Approx(want).epsilon(1e-10));

    // additive statistics
    const RegressionEvaluator ev(prm);
    RegressionStats acc(p);
    for (int r : recs) acc += ev.record_stats(obs, r);
    CHECK(ev.log_lik(acc) == doctest::Approx(want).epsilon(1e-10));
    CHECK(ev.log_lik(ev.cluster_stats(obs, recs)) == doctest::Approx(want).epsilon(1e-10));
    if (n >= 2) {
      const auto a = ev.cluster_stats(obs, std::span<const int>(recs).first(1));
      const auto b = ev.cluster_stats(obs, std::span<const int>(recs).subspan(1));
      CHECK(ev.log_lik_joined(a, b) == doctest::Approx(want).epsilon(1e-10));
    }

    // record order within the cluster does not matter
    std::vector<int> rev(recs.rbegin(), recs.rend());
    CHECK(cluster_regression_log_lik(observation_pattern(rev, obs), obs, prm) ==
          doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("corpus likelihood and move ratios match recomputation") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const int p = 1 + static_cast<int>(rng() % 2);
    const int n = 7;
    const auto prm = random_params(rng, p, true);
    auto obs = random_obs(rng, n, p, 0.6);
    // two records carry nothing
    for (int c = 0; c <= p; ++c) {
      obs.clear(2, c);
      obs.clear(5, c);
    }
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng() % 3);
    const auto state = LinkageState::from_labels(std::vector<int>(n, 0), labels, Constraint::Unconstrained);
    double want = 0.0;
    for (int l : state.active_labels()) {
      const auto members = state.members(l);
      std::vector<int> with_obs;
      for (int r : members)
        if (obs.has_any(r)) with_obs.push_back(r);
      if (!with_obs.empty()) want += oracle_loglik(observation_pattern(with_obs, obs), obs, prm);
    }
    const double total = corpus_regression_log_lik(state, obs, prm);
    CHECK(total == doctest::Approx(want).epsilon(1e-10));

    const int r = static_cast<int>(rng() % n);
    const int from = state.label_of(r);
    std::vector<int> targets(state.active_labels().begin(), state.active_labels().end());
    targets.push_back(LinkageState::kNew);
    for (int to : targets) {
      if (to == from) continue;
      LinkageState moved = state;
      moved.move_record(r, to);
      const double diff = corpus_regression_log_lik(moved, obs, prm) - total;
      const double got = log_ratio_move_regression(state, r, from, to, obs, prm);
      CHECK(got == doctest::Approx(diff).epsilon(1e-9).scale(1.0));
      if (r == 2 || r == 5) CHECK(got == 0.0);
    }
    if (state.cluster_size(from) == 1)
      CHECK(log_ratio_move_regression(state, r, from, LinkageState::kNew, obs, prm) == 0.0);
  }
  RegressionObservations none(3, 1);
  const LinkageState s(std::vector<int>{0, 0, 0}, Constraint::Unconstrained);
  CHECK(corpus_regression_log_lik(s, none, simple_params()) == 0.0);
}

TEST_CASE("parameter validation") {
  auto prm = simple_params();
  CHECK_NOTHROW(prm.validate());
  prm.cov_true(0, 0) = -1.0;
  CHECK_THROWS_AS(prm.validate(), ConfigError);
  prm = simple_params();
  prm.var_y = 0.0;
  CHECK_THROWS_AS(prm.validate(), ConfigError);
  prm = simple_params();
  prm.cov_x_given_true = Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(prm.validate(), ConfigError);
}
