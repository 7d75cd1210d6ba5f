#include "brl/sampler.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>

#include "brl/error.hpp"
#include "brl/kernels/kernels.hpp"
#include "brl/math.hpp"

namespace brl {

namespace {

double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
  }
  return v;
}

double beta_log_kernel(double a, BetaPrior prior) {
  return (prior.f - 1.0) * std::log(a) + (prior.g - 1.0) * std::log1p(-a);
}

void add_code(std::vector<CodeCount>& counts, std::int32_t code) {
  for (auto& c : counts) {
    if (c.code == code) {
      ++c.count;
      return;
    }
  }
  counts.push_back({code, 1});
}

int tri_size(int p) { return p * (p + 1) / 2; }

}  // namespace

// ---------------------------------------------------------------------------------------
// configuration

VariancePrior VariancePrior::parse(std::string_view text) {
  if (text == "log-flat") return {};
  if (text.starts_with("ig:")) {
    const auto body = text.substr(3);
    const auto comma = body.find(',');
    if (comma == std::string_view::npos) throw ConfigError("inverse-gamma prior needs ig:<mean>,<shape>");
    VariancePrior p;
    p.kind = Kind::InverseGamma;
    p.mean = parse_double(body.substr(0, comma), "prior mean");
    p.strength = parse_double(body.substr(comma + 1), "prior shape");
    if (!(p.mean > 0.0) || !(p.strength > 1.0)) {
      throw ConfigError("inverse-gamma prior needs mean > 0 and shape > 1");
    }
    return p;
  }
  throw ConfigError("unknown variance prior '" + std::string(text) + "'");
}

std::string VariancePrior::to_string() const {
  if (kind == Kind::LogFlat) return "log-flat";
  std::ostringstream os;
  os.precision(17);
  os << "ig:" << mean << ',' << strength;
  return os.str();
}

double VariancePrior::log_density(double log_var) const {
  if (kind == Kind::LogFlat) return 0.0;
  const double scale = mean * (strength - 1.0);
  return -strength * log_var - scale * std::exp(-log_var);
}

void SamplerConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) throw ConfigError("burn-in must lie in [0, iterations)");
  if (thin < 1) throw ConfigError("thin must be positive");
  if (!(proposal_sd_alpha >= 0.0) || !(proposal_sd_beta >= 0.0) || !(proposal_sd_logvar >= 0.0)) {
    throw ConfigError("proposal scales must be non-negative");
  }
  if (adapt_interval < 1) throw ConfigError("adapt interval must be positive");
}

void Model::validate(const SamplerConfig& cfg) const {
  if (corpus == nullptr) throw ConfigError("model has no corpus");
  const Corpus& c = *corpus;
  const int n = c.num_records();
  if (n < 1) throw ConfigError("corpus is empty");
  const auto& cat = c.categorical;
  if (features.num_features() != cat.num_features()) {
    throw ConfigError("feature frequencies do not match the number of features");
  }
  for (int f = 0; f < cat.num_features(); ++f) {
    if (features.support(f) != cat.support(f)) {
      throw ConfigError("feature " + std::to_string(f + 1) + ": frequency vector length differs from its support");
    }
  }
  if (static_cast<int>(distortion.alpha.size()) != cat.num_features()) {
    throw ConfigError("one distortion probability per feature is required");
  }
  for (double a : distortion.alpha) {
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("starting distortion probabilities must lie in (0, 1)");
  }
  if (!(distortion.prior.f > 0.0) || !(distortion.prior.g > 0.0)) {
    throw ConfigError("Beta prior parameters must be positive");
  }
  prior.check_records(n);
  if (prior.is_constrained()) {
    if (c.num_databases != 2 || constraint != Constraint::NoWithinDbDuplicates) {
      throw ConfigError("constrained-pyp needs two databases without within-db duplicates");
    }
  }
  if (regression && cfg.mode == Mode::Joint) {
    if (regression->dim() != c.num_covariates) {
      throw ConfigError("regression parameters do not match the number of covariates");
    }
    regression->validate();
  }
  if (truth != nullptr && static_cast<int>(truth->size()) != n) {
    throw ConfigError("ground truth length differs from the number of records");
  }
  if (initial_labels && static_cast<int>(initial_labels->size()) != n) {
    throw ConfigError("initial labels length differs from the number of records");
  }
}

// ---------------------------------------------------------------------------------------
// samples

std::uint64_t PosteriorSamples::pair_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

double PosteriorSamples::pair_probability(int a, int b) const {
  if (kept() == 0) return 0.0;
  const auto it = co_cluster.find(pair_key(a, b));
  return it == co_cluster.end() ? 0.0 : static_cast<double>(it->second) / kept();
}

PosteriorSamples merge_samples(std::span<const PosteriorSamples> chains) {
  if (chains.empty()) throw Error("merge_samples: no chains");
  PosteriorSamples out;
  const auto& first = chains.front();
  out.num_records = first.num_records;
  out.num_features = first.num_features;
  out.num_covariates = first.num_covariates;
  out.has_regression = first.has_regression;
  out.has_t = first.has_t;
  out.final_proposal_sd = first.final_proposal_sd;
  out.acceptance = first.acceptance;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const auto& s = chains[c];
    out.iteration.insert(out.iteration.end(), s.iteration.begin(), s.iteration.end());
    out.k.insert(out.k.end(), s.k.begin(), s.k.end());
    out.t.insert(out.t.end(), s.t.begin(), s.t.end());
    out.alpha.insert(out.alpha.end(), s.alpha.begin(), s.alpha.end());
    out.regression.insert(out.regression.end(), s.regression.begin(), s.regression.end());
    out.metrics.insert(out.metrics.end(), s.metrics.begin(), s.metrics.end());
    out.labels.insert(out.labels.end(), s.labels.begin(), s.labels.end());
    for (const auto& [key, count] : s.co_cluster) out.co_cluster[key] += count;
    if (c == 0) continue;
    auto add = [](std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
      for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) a[i] += b[i];
    };
    add(out.acceptance.alpha_accepted, s.acceptance.alpha_accepted);
    add(out.acceptance.alpha_tried, s.acceptance.alpha_tried);
    add(out.acceptance.regression_accepted, s.acceptance.regression_accepted);
    add(out.acceptance.regression_tried, s.acceptance.regression_tried);
  }
  return out;
}

RegressionParams initial_regression_params(const Corpus& corpus) {
  const auto& obs = corpus.regression;
  const int p = corpus.num_covariates;
  const int n = corpus.num_records();
  RegressionParams params;
  params.beta = Eigen::VectorXd::Zero(p);

  double sum = 0.0, sum_sq = 0.0;
  int count = 0;
  for (int r = 0; r < n; ++r) {
    if (!corpus.has_response || !obs.observed(r, 0)) continue;
    const double v = obs.value(r, 0);
    sum += v;
    sum_sq += v * v;
    ++count;
  }
  params.var_y = 1.0;
  if (count >= 2) {
    const double mean = sum / count;
    const double var = (sum_sq - count * mean * mean) / (count - 1);
    if (var > 1e-8) params.var_y = var;
  }

  params.cov_true = Eigen::MatrixXd::Identity(p, p);
  if (p > 0) {
    // Per-component variances from every observed value, correlations from complete rows.
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd var = Eigen::VectorXd::Ones(p);
    for (int k = 0; k < p; ++k) {
      double s = 0.0, ss = 0.0;
      int c = 0;
      for (int r = 0; r < n; ++r) {
        if (!obs.observed(r, k + 1)) continue;
        const double v = obs.value(r, k + 1);
        s += v;
        ss += v * v;
        ++c;
      }
      if (c >= 2) {
        mean(k) = s / c;
        const double v = (ss - c * mean(k) * mean(k)) / (c - 1);
        if (v > 1e-8) var(k) = v;
      }
    }
    Eigen::MatrixXd cov = var.asDiagonal();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
    int complete = 0;
    for (int r = 0; r < n; ++r) {
      bool all = true;
      for (int k = 0; k < p && all; ++k) all = obs.observed(r, k + 1);
      if (!all) continue;
      Eigen::VectorXd d(p);
      for (int k = 0; k < p; ++k) d(k) = obs.value(r, k + 1) - mean(k);
      acc += d * d.transpose();
      ++complete;
    }
    if (complete > p + 1) {
      acc /= (complete - 1);
      for (int a = 0; a < p; ++a)
        for (int b = 0; b < p; ++b)
          if (a != b) {
            const double rho = acc(a, b) / std::sqrt(acc(a, a) * acc(b, b));
            cov(a, b) = std::clamp(rho, -0.99, 0.99) * std::sqrt(var(a) * var(b));
          }
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() != Eigen::Success) cov = var.asDiagonal();
    }
    params.cov_true = cov;
  }
  params.cov_x_given_true = Eigen::MatrixXd::Zero(p, p);
  for (int k = 0; k < p; ++k) params.cov_x_given_true(k, k) = 0.05 * params.cov_true(k, k);
  return params;
}

// ---------------------------------------------------------------------------------------
// sampler

Sampler::Sampler(const Model& model, const SamplerConfig& cfg)
    : corpus_(*model.corpus), model_(model), cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate();
  model_.validate(cfg_);
  const int n = corpus_.num_records();
  p_ = model_.features.num_features();

  if (model_.initial_labels) {
    state_ = LinkageState::from_labels(corpus_.record_db, *model_.initial_labels, model_.constraint);
  } else {
    state_ = corpus_.singleton_state(model_.constraint);
  }
  if (model_.prior.is_constrained()) {
    // first-database records must sit in distinct clusters
    std::vector<int> seen(n, 0);
    for (int r = 0; r < state_.db_size(0); ++r) {
      if (seen[state_.label_of(r)]++ != 0) {
        throw ConfigError("constrained prior: first-database records must start unlinked");
      }
    }
  }

  alpha_ = model_.distortion.alpha;
  alpha_sd_.assign(p_, cfg_.proposal_sd_alpha);
  pair_tables_.resize(p_);
  log_rho_.resize(p_);
  log_alpha_.resize(p_);
  log1m_alpha_.resize(p_);
  feature_ptrs_.resize(p_);
  for (int f = 0; f < p_; ++f) {
    rebuild_pair_table(f);
    feature_ptrs_[f] = corpus_.categorical.feature_data(f);
  }
  probe_.resize(p_);
  agree_.resize(p_);
  disagree_.resize(p_);
  cluster_hm_.assign(static_cast<std::size_t>(n) * p_, 0.0);
  cluster_excess_.assign(static_cast<std::size_t>(n) * p_, 0.0);
  acc_.alpha_accepted.assign(p_, 0);
  acc_.alpha_tried.assign(p_, 0);

  // Declared regression columns with no observed cell still get sampled (from the prior).
  const bool use_regression = cfg_.mode == Mode::Joint && corpus_.has_regression();
  if (use_regression) {
    const int q = corpus_.num_covariates;
    if (q > kMaxCovariates) throw ConfigError("too many covariates");
    record_has_reg_.resize(n);
    for (int r = 0; r < n; ++r) record_has_reg_[r] = corpus_.regression.has_any(r) ? 1 : 0;
    cluster_stats_.assign(n, RegressionStats(q));
    cluster_reg_ll_.assign(n, 0.0);
    beta_sd_.assign(q, cfg_.proposal_sd_beta);
    logvar_y_sd_ = cfg_.proposal_sd_logvar;
    logvar_x_sd_.assign(model_.full_noise_covariance ? tri_size(q) : q, cfg_.proposal_sd_logvar);
    const int slots = q + 1 + static_cast<int>(logvar_x_sd_.size());
    acc_.regression_accepted.assign(slots, 0);
    acc_.regression_tried.assign(slots, 0);
    rebuild_regression(model_.regression ? *model_.regression : initial_regression_params(corpus_));
  }
  window_ = acc_;
  for (int label : state_.active_labels()) refresh_cluster(label);
}

void Sampler::rebuild_pair_table(int f) {
  const double a = alpha_[f];
  const auto theta = model_.features.theta(f);
  pair_tables_[f] = make_pair_score_table(a, theta);
  log_alpha_[f] = std::log(a);
  log1m_alpha_[f] = std::log1p(-a);
  auto& lr = log_rho_[f];
  lr.resize(theta.size());
  const double log_a = std::log(a);
  for (std::size_t v = 0; v < theta.size(); ++v) {
    lr[v] = std::log1p(a * (theta[v] - 1.0)) - log_a - model_.features.log_theta(f)[v];
  }
}

void Sampler::rebuild_regression(const RegressionParams& params) {
  reg_params_ = params;
  reg_eval_.emplace(params);
  const int n = corpus_.num_records();
  record_stats_.assign(n, RegressionStats(params.dim()));
  for (int r = 0; r < n; ++r) {
    if (record_has_reg_[r]) record_stats_[r] = reg_eval_->record_stats(corpus_.regression, r);
  }
}

// A cluster's feature marginal factors as
//   prod_r theta_{v_r} * alpha^n * (1 + sum_s theta_s (rho_s^{c_s} - 1)),
// rho_v = (1 - alpha + alpha theta_v) / (alpha theta_v), s over the distinct codes with
// counts c_s. The log of the last factor (the excess) makes adding one record O(1).
void Sampler::refresh_feature(int label, int f) {
  const auto members = state_.members(label);
  const auto& cat = corpus_.categorical;
  const auto theta = model_.features.theta(f);
  const auto log_theta = model_.features.log_theta(f);
  const std::size_t at = static_cast<std::size_t>(label) * p_ + f;
  const int n = static_cast<int>(members.size());
  counts_.clear();
  for (int m : members) add_code(counts_, cat.code(m, f));
  double hi = kNegInf;
  double observed_mass = 0.0;
  double sum_log_theta = 0.0;
  for (const auto& cc : counts_) {
    hi = std::max(hi, log_theta[cc.code] + cc.count * log_rho_[f][cc.code]);
    observed_mass += theta[cc.code];
    sum_log_theta += cc.count * log_theta[cc.code];
  }
  const double rest = static_cast<int>(counts_.size()) == model_.features.support(f) ? 0.0 : 1.0 - observed_mass;
  const double log_rest = rest > 0.0 ? std::log(rest) : kNegInf;
  hi = std::max(hi, log_rest);
  double acc = log_rest == kNegInf ? 0.0 : std::exp(log_rest - hi);
  for (const auto& cc : counts_) acc += std::exp(log_theta[cc.code] + cc.count * log_rho_[f][cc.code] - hi);
  const double excess = hi + std::log(acc);
  cluster_excess_[at] = excess;
  cluster_hm_[at] = sum_log_theta + n * std::log(alpha_[f]) + excess;
}

void Sampler::refresh_cluster(int label) {
  if (!state_.is_active(label)) return;
  for (int f = 0; f < p_; ++f) refresh_feature(label, f);
  if (regression_active()) {
    RegressionStats s(reg_params_->dim());
    for (int m : state_.members(label))
      if (record_has_reg_[m]) s += record_stats_[m];
    cluster_stats_[label] = s;
    cluster_reg_ll_[label] = reg_eval_->log_lik(s);
  }
}

bool Sampler::movable(int r) const {
  return !(model_.prior.is_constrained() && state_.db_of(r) == 0);
}

void Sampler::compute_weights(int r) {
  targets_.clear();
  single_members_.clear();
  const auto& cat = corpus_.categorical;
  const bool constrained = model_.prior.is_constrained();
  const int k_minus = state_.num_clusters();
  const int n_total = state_.num_records();

  double log_new_likelihood = 0.0;
  for (int f = 0; f < p_; ++f) {
    const std::int32_t v = cat.code(r, f);
    const double log_theta = model_.features.log_theta(f)[v];
    probe_[f] = v;
    agree_[f] = pair_tables_[f].agree[v];
    disagree_[f] = log_theta + pair_tables_[f].disagree_shift;
    log_new_likelihood += log_theta;
  }

  std::vector<int>& multi = targets_;  // multi-record clusters first collected here
  for (int label : state_.active_labels()) {
    const bool ok = constrained ? constrained_eligible(state_, r, label) : state_.admits(r, label);
    if (!ok) continue;
    if (state_.cluster_size(label) == 1) {
      single_members_.push_back(state_.members(label)[0]);
    } else {
      multi.push_back(label);
    }
  }
  const std::size_t ns = single_members_.size();
  const std::size_t nm = multi.size();
  // prior weight of joining a cluster, by its size (depends on k_minus, fixed in this call)
  prior_by_size_.assign(prior_by_size_.size(), std::numeric_limits<double>::quiet_NaN());
  weights_.resize(ns + nm + 1);

  // Singletons: per-feature pair scores through the vector kernel.
  kernels::active().match_scores(feature_ptrs_.data(), p_, single_members_.data(), ns,
                                 probe_.data(), agree_.data(), disagree_.data(), weights_.data());
  const bool reg = regression_active() && record_has_reg_[r];
  const RegressionStats* rs = reg ? &record_stats_[r] : nullptr;
  if (ns > 0) {
    const double prior_single = log_existing_weight(model_.prior, 1, k_minus, n_total);
    for (std::size_t i = 0; i < ns; ++i) {
      weights_[i] += prior_single;
      if (reg) {
        const int lu = state_.label_of(single_members_[i]);
        weights_[i] += reg_eval_->log_lik_joined(cluster_stats_[lu], *rs) - cluster_reg_ll_[lu];
      }
    }
  }

  // Larger clusters: one excess update per feature.
  for (std::size_t i = 0; i < nm; ++i) {
    const int label = multi[i];
    const auto members = state_.members(label);
    const int size = static_cast<int>(members.size());
    const double* excess = cluster_excess_.data() + static_cast<std::size_t>(label) * p_;
    if (static_cast<std::size_t>(size) >= prior_by_size_.size()) {
      prior_by_size_.resize(size + 1, std::numeric_limits<double>::quiet_NaN());
    }
    if (std::isnan(prior_by_size_[size])) {
      prior_by_size_[size] = log_existing_weight(model_.prior, size, k_minus, n_total);
    }
    double w = prior_by_size_[size];
    for (int f = 0; f < p_; ++f) {
      const std::int32_t v = probe_[f];
      const std::int32_t* codes = feature_ptrs_[f];
      int c = 0;
      for (int m : members) c += codes[m] == v;
      const double step = c * log_rho_[f][v] + log1m_alpha_[f] - log_alpha_[f];
      w += model_.features.log_theta(f)[v] + log_alpha_[f] + log_add_exp(excess[f], step) - excess[f];
    }
    if (reg) w += reg_eval_->log_lik_joined(cluster_stats_[label], *rs) - cluster_reg_ll_[label];
    weights_[ns + i] = w;
  }

  // New cluster. The entry stands for every unused label at once: the new-cluster prior
  // mass is spread evenly over them, so their total is the full mass.
  double w_new = log_new_likelihood;
  if (constrained) {
    w_new += constrained_log_new_weight(std::get<ConstrainedPyp>(model_.prior.variant()), state_, r);
  } else {
    w_new += log_new_weight(model_.prior, k_minus, n_total);
  }
  if (reg) w_new += reg_eval_->log_lik(*rs);
  weights_[ns + nm] = w_new;

  // Final target order: singletons, larger clusters, new.
  std::vector<int> order;
  order.reserve(ns + nm + 1);
  for (std::int32_t u : single_members_) order.push_back(state_.label_of(u));
  order.insert(order.end(), multi.begin(), multi.end());
  order.push_back(LinkageState::kNew);
  targets_.swap(order);
}

std::vector<Candidate> Sampler::conditional(int r) {
  std::vector<Candidate> out;
  const int old = state_.label_of(r);
  if (!movable(r)) {
    out.push_back({old, 0.0, 1.0});
    return out;
  }
  state_.detach(r);
  refresh_cluster(old);
  compute_weights(r);
  double hi = kNegInf;
  for (double w : weights_) hi = std::max(hi, w);
  double total = 0.0;
  for (double w : weights_) total += std::exp(w - hi);
  for (std::size_t i = 0; i < targets_.size(); ++i) {
    out.push_back({targets_[i], weights_[i], std::exp(weights_[i] - hi) / total});
  }
  state_.attach(r, old);
  refresh_cluster(old);
  return out;
}

void Sampler::gibbs_update_lambda(int r) {
  if (!movable(r)) return;
  const int old = state_.label_of(r);
  state_.detach(r);
  refresh_cluster(old);
  compute_weights(r);

  const auto& kt = kernels::active();
  const std::size_t n = weights_.size();
  const double hi = kt.max_value(weights_.data(), n);
  if (!std::isfinite(hi)) {
    throw NumericalError("record " + std::to_string(r) + ": no admissible cluster");
  }
  const double total = kt.exp_shift_sum(weights_.data(), n, hi);
  std::uniform_real_distribution<double> unif(0.0, total);
  const double u = unif(rng_);
  std::size_t pick = n - 1;
  double cum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += weights_[i];
    if (u < cum) {
      pick = i;
      break;
    }
  }
  // guard against rounding leaving u just past the last positive weight
  while (weights_[pick] <= 0.0 && pick > 0) --pick;
  const int label = state_.attach(r, targets_[pick]);
  refresh_cluster(label);
}

bool Sampler::metropolis_update_alpha(int f) {
  const double a = alpha_[f];
  std::normal_distribution<double> normal(0.0, 1.0);
  const double z = alpha_sd_[f] * normal(rng_);
  const double a_new = logistic(logit(a) + z);
  ++acc_.alpha_tried[f];
  ++window_.alpha_tried[f];
  if (!(a_new > 0.0 && a_new < 1.0)) return false;

  // Singleton clusters do not depend on alpha.
  const auto& cat = corpus_.categorical;
  double cur = 0.0, prop = 0.0;
  for (int label : state_.active_labels()) {
    const auto members = state_.members(label);
    if (members.size() < 2) continue;
    counts_.clear();
    for (int m : members) add_code(counts_, cat.code(m, f));
    const double v = log_marginal_from_counts(counts_, static_cast<int>(members.size()), a_new,
                                              model_.features.theta(f), model_.features.log_theta(f));
    cur += cluster_hm_[static_cast<std::size_t>(label) * p_ + f];
    prop += v;
  }
  const BetaPrior bp = model_.distortion.prior;
  const double log_ratio = prop - cur + beta_log_kernel(a_new, bp) - beta_log_kernel(a, bp) +
                           std::log(a_new) + std::log1p(-a_new) - std::log(a) - std::log1p(-a);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (!(std::log(unif(rng_)) < log_ratio)) return false;

  alpha_[f] = a_new;
  rebuild_pair_table(f);
  for (int label : state_.active_labels()) refresh_feature(label, f);
  ++acc_.alpha_accepted[f];
  ++window_.alpha_accepted[f];
  return true;
}

double Sampler::log_prior_regression(const RegressionParams& p) const {
  double lp = cfg_.regression_prior.var_y.log_density(std::log(p.var_y));
  if (!model_.full_noise_covariance) {
    for (int k = 0; k < p.dim(); ++k) {
      lp += cfg_.regression_prior.var_x.log_density(std::log(p.cov_x_given_true(k, k)));
    }
  }
  return lp;
}

double Sampler::regression_log_target() const {
  if (!regression_active()) return 0.0;
  double ll = 0.0;
  for (int label : state_.active_labels()) ll += cluster_reg_ll_[label];
  return ll + log_prior_regression(*reg_params_);
}

void Sampler::metropolis_update_regression() {
  if (!regression_active()) return;
  const int q = reg_params_->dim();
  const int n = corpus_.num_records();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<RegressionStats> prop_records;
  std::vector<std::pair<int, RegressionStats>> prop_clusters;
  std::vector<double> prop_ll;

  double current = regression_log_target();
  auto attempt = [&](const RegressionParams& proposal, int slot) {
    ++acc_.regression_tried[slot];
    ++window_.regression_tried[slot];
    RegressionEvaluator ev(proposal);
    prop_records.assign(n, RegressionStats(q));
    for (int r = 0; r < n; ++r)
      if (record_has_reg_[r]) prop_records[r] = ev.record_stats(corpus_.regression, r);
    prop_clusters.clear();
    prop_ll.clear();
    double ll = 0.0;
    for (int label : state_.active_labels()) {
      RegressionStats s(q);
      for (int m : state_.members(label))
        if (record_has_reg_[m]) s += prop_records[m];
      const double v = ev.log_lik(s);
      ll += v;
      prop_clusters.emplace_back(label, std::move(s));
      prop_ll.push_back(v);
    }
    const double target = ll + log_prior_regression(proposal);
    if (!(std::log(unif(rng_)) < target - current)) return;
    reg_params_ = proposal;
    reg_eval_.emplace(std::move(ev));
    record_stats_.swap(prop_records);
    for (std::size_t i = 0; i < prop_clusters.size(); ++i) {
      cluster_stats_[prop_clusters[i].first] = std::move(prop_clusters[i].second);
      cluster_reg_ll_[prop_clusters[i].first] = prop_ll[i];
    }
    current = target;
    ++acc_.regression_accepted[slot];
    ++window_.regression_accepted[slot];
  };

  for (int k = 0; k < q; ++k) {
    RegressionParams prop = *reg_params_;
    prop.beta(k) += beta_sd_[k] * normal(rng_);
    attempt(prop, k);
  }
  {
    RegressionParams prop = *reg_params_;
    prop.var_y = std::exp(std::log(prop.var_y) + logvar_y_sd_ * normal(rng_));
    if (prop.var_y > 0.0 && std::isfinite(prop.var_y)) attempt(prop, q);
  }
  if (!model_.full_noise_covariance) {
    for (int k = 0; k < q; ++k) {
      RegressionParams prop = *reg_params_;
      const double v = std::exp(std::log(prop.cov_x_given_true(k, k)) + logvar_x_sd_[k] * normal(rng_));
      if (!(v > 0.0 && std::isfinite(v))) continue;
      prop.cov_x_given_true(k, k) = v;
      attempt(prop, q + 1 + k);
    }
  } else {
    // Random walk on the Cholesky factor: log of the diagonal, raw off-diagonal entries.
    int slot = 0;
    for (int a = 0; a < q; ++a) {
      for (int b = 0; b <= a; ++b, ++slot) {
        Eigen::MatrixXd chol = reg_params_->cov_x_given_true.llt().matrixL();
        const double step = logvar_x_sd_[slot] * normal(rng_);
        if (a == b) {
          chol(a, a) *= std::exp(step);
        } else {
          chol(a, b) += step;
        }
        RegressionParams prop = *reg_params_;
        prop.cov_x_given_true = chol * chol.transpose();
        attempt(prop, q + 1 + slot);
      }
    }
  }
}

std::vector<double> Sampler::proposal_sds() const {
  std::vector<double> out(alpha_sd_);
  if (regression_active()) {
    out.insert(out.end(), beta_sd_.begin(), beta_sd_.end());
    out.push_back(logvar_y_sd_);
    out.insert(out.end(), logvar_x_sd_.begin(), logvar_x_sd_.end());
  }
  return out;
}

void Sampler::adapt_proposals() {
  auto tune = [](double& sd, std::int64_t& accepted, std::int64_t& tried) {
    if (tried == 0) return;
    const double rate = static_cast<double>(accepted) / static_cast<double>(tried);
    if (rate < 0.25) sd *= 0.8;
    if (rate > 0.45) sd *= 1.25;
    accepted = 0;
    tried = 0;
  };
  for (int f = 0; f < p_; ++f) tune(alpha_sd_[f], window_.alpha_accepted[f], window_.alpha_tried[f]);
  if (!regression_active()) return;
  const int q = reg_params_->dim();
  for (int k = 0; k < q; ++k) {
    tune(beta_sd_[k], window_.regression_accepted[k], window_.regression_tried[k]);
  }
  tune(logvar_y_sd_, window_.regression_accepted[q], window_.regression_tried[q]);
  for (std::size_t k = 0; k < logvar_x_sd_.size(); ++k) {
    tune(logvar_x_sd_[k], window_.regression_accepted[q + 1 + k],
         window_.regression_tried[q + 1 + k]);
  }
}

void Sampler::sweep() {
  if (cfg_.update_linkage) {
    const int n = state_.num_records();
    if (cfg_.scan == ScanOrder::Fixed) {
      for (int r = 0; r < n; ++r) gibbs_update_lambda(r);
    } else {
      std::vector<int> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng_);
      for (int r : order) gibbs_update_lambda(r);
    }
  }
  if (cfg_.update_alpha) {
    for (int f = 0; f < p_; ++f) metropolis_update_alpha(f);
  }
  if (cfg_.update_regression) metropolis_update_regression();
  if (cfg_.check_constraint) state_.validate();
  ++sweeps_;
}

void Sampler::record_sample(PosteriorSamples& out) const {
  out.iteration.push_back(sweeps_);
  const auto summary = state_.summary();
  out.k.push_back(summary.k);
  out.t.push_back(summary.t.value_or(-1));
  out.alpha.insert(out.alpha.end(), alpha_.begin(), alpha_.end());
  if (out.has_regression) {
    const auto& rp = *reg_params_;
    for (int k = 0; k < rp.dim(); ++k) out.regression.push_back(rp.beta(k));
    out.regression.push_back(rp.var_y);
    for (int k = 0; k < rp.dim(); ++k) out.regression.push_back(rp.cov_x_given_true(k, k));
  }
  for (int label : state_.active_labels()) {
    const auto m = state_.members(label);
    for (std::size_t a = 0; a < m.size(); ++a)
      for (std::size_t b = a + 1; b < m.size(); ++b)
        ++out.co_cluster[PosteriorSamples::pair_key(m[a], m[b])];
  }
  if (model_.truth != nullptr || cfg_.keep_labels) {
    const auto labels = state_.labels();
    if (model_.truth != nullptr) out.metrics.push_back(compute_metrics(labels, *model_.truth));
    if (cfg_.keep_labels) out.labels.push_back(labels);
  }
}

PosteriorSamples Sampler::run() {
  PosteriorSamples out;
  out.num_records = state_.num_records();
  out.num_features = p_;
  out.num_covariates = regression_active() ? reg_params_->dim() : 0;
  out.has_regression = regression_active();
  out.has_t = state_.constraint() == Constraint::NoWithinDbDuplicates && state_.num_databases() == 2;
  for (int it = 1; it <= cfg_.iterations; ++it) {
    sweep();
    if (cfg_.adapt && it <= cfg_.burn_in && it % cfg_.adapt_interval == 0) adapt_proposals();
    if (it > cfg_.burn_in && (it - cfg_.burn_in) % cfg_.thin == 0) record_sample(out);
  }
  out.acceptance = acc_;
  out.final_proposal_sd = proposal_sds();
  return out;
}

PosteriorSamples run_chain(const Model& model, const SamplerConfig& cfg) {
  Sampler s(model, cfg);
  return s.run();
}

std::vector<PosteriorSamples> run_chains(const Model& model, const SamplerConfig& cfg, int chains) {
  if (chains < 1) throw ConfigError("chains must be positive");
  std::vector<PosteriorSamples> out(chains);
  std::vector<std::exception_ptr> errors(chains);
  auto work = [&](int c) {
    try {
      SamplerConfig local = cfg;
      local.seed = cfg.seed + static_cast<std::uint64_t>(c);
      out[c] = run_chain(model, local);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (chains == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(chains);
    for (int c = 0; c < chains; ++c) threads.emplace_back(work, c);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace brl
