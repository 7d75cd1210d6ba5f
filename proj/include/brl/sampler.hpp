#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "brl/corpus.hpp"
#include "brl/hitmiss.hpp"
#include "brl/metrics.hpp"
#include "brl/partition.hpp"
#include "brl/priors.hpp"
#include "brl/regression.hpp"

namespace brl {

enum class Mode { LinkageOnly, Joint };
enum class ScanOrder { Fixed, Random };

/// Prior on a variance, expressed on the log-variance scale the sampler walks on.
struct VariancePrior {
  enum class Kind { LogFlat, InverseGamma };
  Kind kind = Kind::LogFlat;
  double mean = 0.0;      // inverse-gamma mean
  double strength = 0.0;  // inverse-gamma shape (> 1)

  /// "log-flat" or "ig:<mean>,<shape>".
  static VariancePrior parse(std::string_view text);
  std::string to_string() const;
  /// Log density of u = log(var), up to a constant.
  double log_density(double log_var) const;
};

struct RegressionPrior {
  VariancePrior var_y;
  VariancePrior var_x;
};

struct SamplerConfig {
  int iterations = 2000;
  int burn_in = 500;
  int thin = 1;
  std::uint64_t seed = 1;
  Mode mode = Mode::LinkageOnly;
  double proposal_sd_alpha = 0.5;   // logit scale
  double proposal_sd_beta = 0.25;
  double proposal_sd_logvar = 0.5;
  RegressionPrior regression_prior;
  ScanOrder scan = ScanOrder::Fixed;
  bool adapt = true;        // scale proposals during burn-in only
  int adapt_interval = 50;
  bool update_linkage = true;
  bool update_alpha = true;
  bool update_regression = true;
  bool keep_labels = false;
  bool check_constraint = true;  // validate the partition after every sweep

  void validate() const;
};

/// Everything a chain conditions on besides its configuration.
struct Model {
  const Corpus* corpus = nullptr;
  PartitionPrior prior{Pyp{1.0, 0.0}};
  Constraint constraint = Constraint::Unconstrained;
  FeatureSpec features;
  DistortionParams distortion;                  // starting alpha and its Beta prior
  std::optional<RegressionParams> regression;   // starting values (Joint / plug-in)
  std::optional<std::vector<int>> initial_labels;
  bool full_noise_covariance = false;           // sample all of Sigma_{x|x_true}
  const GroundTruth* truth = nullptr;

  void validate(const SamplerConfig& cfg) const;
};

struct AcceptanceStats {
  std::vector<std::int64_t> alpha_accepted, alpha_tried;
  std::vector<std::int64_t> regression_accepted, regression_tried;
};

struct PosteriorSamples {
  int num_records = 0;
  int num_features = 0;
  int num_covariates = 0;
  bool has_regression = false;
  bool has_t = false;
  std::vector<int> iteration;
  std::vector<int> k;
  std::vector<int> t;                 // -1 when undefined
  std::vector<double> alpha;          // kept x num_features, row-major
  std::vector<double> regression;     // kept x (2p+1): beta_1..p, var_y, var_x_1..p
  std::unordered_map<std::uint64_t, std::uint32_t> co_cluster;  // key a<<32|b, a<b
  std::vector<LinkageMetrics> metrics;                           // when truth supplied
  std::vector<std::vector<int>> labels;                          // when keep_labels
  AcceptanceStats acceptance;
  std::vector<double> final_proposal_sd;  // alpha..., beta..., logvar_y, logvar_x...

  int kept() const { return static_cast<int>(iteration.size()); }
  int regression_width() const { return has_regression ? 2 * num_covariates + 1 : 0; }
  double pair_probability(int a, int b) const;
  static std::uint64_t pair_key(int a, int b);
};

/// Concatenates chains (co-clustering counts add up).
PosteriorSamples merge_samples(std::span<const PosteriorSamples> chains);

/// One entry of the full conditional of a record's label.
struct Candidate {
  int target;         // label or LinkageState::kNew
  double log_weight;  // unnormalized
  double probability;
};

/// Metropolis-within-Gibbs over labels, distortion probabilities and (in Joint mode)
/// regression parameters. One instance owns one chain.
class Sampler {
 public:
  Sampler(const Model& model, const SamplerConfig& cfg);

  /// Normalized full conditional of r's label; the state is left unchanged.
  std::vector<Candidate> conditional(int r);
  void gibbs_update_lambda(int r);
  /// Returns true when the proposal was accepted.
  bool metropolis_update_alpha(int feature);
  void metropolis_update_regression();
  void sweep();

  PosteriorSamples run();

  const LinkageState& state() const { return state_; }
  std::span<const double> alpha() const { return alpha_; }
  const std::optional<RegressionParams>& regression_params() const { return reg_params_; }
  double regression_log_target() const;
  std::mt19937_64& rng() { return rng_; }
  int sweeps_done() const { return sweeps_; }

 private:
  bool regression_active() const { return reg_eval_.has_value(); }
  void refresh_cluster(int label);
  void refresh_feature(int label, int feature);
  void rebuild_pair_table(int feature);
  void rebuild_regression(const RegressionParams& params);
  void compute_weights(int r);
  bool movable(int r) const;
  void adapt_proposals();
  void record_sample(PosteriorSamples& out) const;
  double log_prior_regression(const RegressionParams& p) const;
  std::vector<double> proposal_sds() const;

  const Corpus& corpus_;
  Model model_;
  SamplerConfig cfg_;
  LinkageState state_;
  std::mt19937_64 rng_;
  int sweeps_ = 0;
  int p_ = 0;

  std::vector<double> alpha_;
  std::vector<double> alpha_sd_;
  std::vector<double> log_alpha_, log1m_alpha_;
  std::vector<PairScoreTable> pair_tables_;
  std::vector<const std::int32_t*> feature_ptrs_;
  std::vector<std::vector<double>> log_rho_;  // per feature and code, see refresh_feature
  std::vector<double> cluster_hm_;      // label * p + feature
  std::vector<double> cluster_excess_;  // label * p + feature

  std::optional<RegressionParams> reg_params_;
  std::optional<RegressionEvaluator> reg_eval_;
  std::vector<RegressionStats> record_stats_;
  std::vector<RegressionStats> cluster_stats_;
  std::vector<double> cluster_reg_ll_;
  std::vector<std::uint8_t> record_has_reg_;
  std::vector<double> beta_sd_;
  double logvar_y_sd_ = 0.5;
  std::vector<double> logvar_x_sd_;  // diagonal mode: p entries; full mode: p(p+1)/2

  AcceptanceStats acc_;
  AcceptanceStats window_;

  // scratch
  std::vector<std::int32_t> single_members_;
  std::vector<int> targets_;
  std::vector<double> weights_;
  std::vector<double> prior_by_size_;
  std::vector<std::int32_t> probe_;
  std::vector<double> agree_, disagree_;
  std::vector<CodeCount> counts_;
};

PosteriorSamples run_chain(const Model& model, const SamplerConfig& cfg);
/// Runs `chains` independent chains concurrently with seeds seed, seed+1, ...
std::vector<PosteriorSamples> run_chains(const Model& model, const SamplerConfig& cfg,
                                         int chains);

/// Starting values: beta = 0, var_y = sample variance of y, Sigma_{x_true} = sample
/// covariance of x, Sigma_{x|x_true} = 5% of its diagonal.
RegressionParams initial_regression_params(const Corpus& corpus);

}  // namespace brl
