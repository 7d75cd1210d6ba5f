#include "brl/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "brl/error.hpp"

namespace brl {

namespace {

// Field emulation: two name-like fields with heavy tails, a birth year and a birth day.
struct FieldDefault {
  const char* name;
  int support;
  double exponent;
};
constexpr FieldDefault kFields[] = {
    {"first_name", 1000, 1.0},
    {"last_name", 1000, 1.0},
    {"birth_year", 100, 0.5},
    {"birth_day", 31, 0.1},
};
constexpr double kDefaultAlphaGen = 0.05;

std::vector<GeneratedFeature> default_features() {
  std::vector<GeneratedFeature> out;
  for (const auto& f : kFields) out.push_back({f.name, zipf_frequencies(f.support, f.exponent)});
  return out;
}

RegressionParams simple_params(double beta, double var_y, double var_true, double var_noise) {
  RegressionParams p;
  p.beta = Eigen::VectorXd::Constant(1, beta);
  p.var_y = var_y;
  p.cov_true = Eigen::MatrixXd::Constant(1, 1, var_true);
  p.cov_x_given_true = Eigen::MatrixXd::Constant(1, 1, var_noise);
  return p;
}

GenSpec two_db_base(std::string name, std::uint64_t seed) {
  GenSpec s;
  s.name = std::move(name);
  s.num_databases = 2;
  s.features = default_features();
  s.alpha_gen.assign(s.features.size(), kDefaultAlphaGen);
  s.seed = seed;
  return s;
}

// 28 entities in both databases, 9 duplicated within the first, 13 within the second.
std::vector<Placement> dedup_plan() {
  return {{{1, 1}, 28}, {{2, 0}, 9}, {{0, 2}, 13}, {{1, 0}, 204}, {{0, 1}, 196}};
}
std::vector<Placement> bipartite_plan(int shared) {
  return {{{1, 1}, shared}, {{1, 0}, 250 - shared}, {{0, 1}, 250 - shared}};
}

}  // namespace

int GenSpec::num_entities() const {
  int n = 0;
  for (const auto& p : plan) n += p.count;
  return n;
}

std::vector<int> GenSpec::db_sizes() const {
  std::vector<int> sizes(num_databases, 0);
  for (const auto& p : plan)
    for (int d = 0; d < num_databases && d < static_cast<int>(p.per_db.size()); ++d)
      sizes[d] += p.per_db[d] * p.count;
  return sizes;
}

void GenSpec::validate() const {
  if (num_databases < 1) throw ConfigError("generator needs at least one database");
  if (plan.empty()) throw ConfigError("generator plan is empty");
  for (const auto& p : plan) {
    if (static_cast<int>(p.per_db.size()) != num_databases) {
      throw ConfigError("placement lists " + std::to_string(p.per_db.size()) +
                        " databases, expected " + std::to_string(num_databases));
    }
    if (p.count < 0) throw ConfigError("placement count is negative");
    int total = 0;
    for (int c : p.per_db) {
      if (c < 0) throw ConfigError("placement has a negative record count");
      if (c > 1 && constraint == Constraint::NoWithinDbDuplicates) {
        throw ConfigError("placement puts two records of one entity in the same database");
      }
      total += c;
    }
    if (total < 1) throw ConfigError("placement has no records");
  }
  for (int s : db_sizes())
    if (s < 1) throw ConfigError("generator plan leaves a database empty");
  if (features.empty()) throw ConfigError("generator needs at least one feature");
  if (alpha_gen.size() != features.size()) throw ConfigError("one alpha_gen per feature is required");
  for (double a : alpha_gen)
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha_gen must lie in [0, 1]");
  for (const auto& f : features) {
    if (f.theta.size() < 2) throw ConfigError("feature " + f.name + " needs at least two categories");
    double sum = 0.0;
    for (double t : f.theta) {
      if (!(t >= 0.0)) throw ConfigError("feature " + f.name + " has a negative frequency");
      sum += t;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("feature " + f.name + " frequencies do not sum to 1");
  }
  if (regression != RegressionPlan::None) {
    params.validate();
    if (regression == RegressionPlan::BrokenMultiple && params.dim() < 2) {
      throw ConfigError("broken multiple regression needs at least two covariates");
    }
    if ((regression == RegressionPlan::CompleteSimple || regression == RegressionPlan::BrokenSimple) &&
        params.dim() != 1) {
      throw ConfigError("simple regression needs exactly one covariate");
    }
    if (regression != RegressionPlan::CompleteSimple && num_databases < 2) {
      throw ConfigError("broken regression needs at least two databases");
    }
  }
}

std::vector<double> zipf_frequencies(int support, double exponent) {
  if (support < 2) throw ConfigError("support must be at least 2");
  std::vector<double> theta(support);
  double sum = 0.0;
  for (int v = 0; v < support; ++v) {
    theta[v] = std::pow(static_cast<double>(v + 1), -exponent);
    sum += theta[v];
  }
  for (double& t : theta) t /= sum;
  return theta;
}

GeneratedData generate_corpus(const GenSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const int num_db = spec.num_databases;
  const int p = static_cast<int>(spec.features.size());
  const bool with_reg = spec.regression != RegressionPlan::None;
  const int q = with_reg ? spec.params.dim() : 0;

  std::vector<std::discrete_distribution<int>> draw;
  draw.reserve(p);
  for (const auto& f : spec.features) draw.emplace_back(f.theta.begin(), f.theta.end());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd chol_true, chol_noise;
  if (with_reg) {
    chol_true = spec.params.cov_true.llt().matrixL();
    chol_noise = spec.params.cov_x_given_true.llt().matrixL();
  }

  struct Row {
    std::int64_t entity;
    std::vector<std::int32_t> codes;
    double y;
    Eigen::VectorXd x;
  };
  std::vector<std::vector<Row>> per_db(num_db);

  std::int64_t entity = 0;
  for (const auto& placement : spec.plan) {
    for (int c = 0; c < placement.count; ++c) {
      ++entity;
      std::vector<std::int32_t> truth_codes(p);
      for (int f = 0; f < p; ++f) truth_codes[f] = draw[f](rng);
      Eigen::VectorXd x_true(q);
      if (with_reg) {
        Eigen::VectorXd z(q);
        for (int k = 0; k < q; ++k) z(k) = normal(rng);
        x_true = chol_true * z;
      }
      for (int d = 0; d < num_db; ++d) {
        for (int copy = 0; copy < placement.per_db[d]; ++copy) {
          Row row;
          row.entity = entity;
          row.codes = truth_codes;
          for (int f = 0; f < p; ++f) {
            if (unif(rng) < spec.alpha_gen[f]) row.codes[f] = draw[f](rng);
          }
          row.y = 0.0;
          if (with_reg) {
            row.y = spec.params.beta.dot(x_true) + std::sqrt(spec.params.var_y) * normal(rng);
            Eigen::VectorXd z(q);
            for (int k = 0; k < q; ++k) z(k) = normal(rng);
            row.x = x_true + chol_noise * z;
          }
          per_db[d].push_back(std::move(row));
        }
      }
    }
  }

  GeneratedData out;
  Corpus& corpus = out.corpus;
  corpus.num_databases = num_db;
  for (const auto& f : spec.features) corpus.feature_names.push_back(f.name);
  int n = 0;
  for (auto& rows : per_db) {
    std::shuffle(rows.begin(), rows.end(), rng);
    n += static_cast<int>(rows.size());
  }
  std::vector<std::vector<std::int32_t>> codes(p, std::vector<std::int32_t>(n));
  corpus.has_response = with_reg;
  corpus.num_covariates = q;
  corpus.regression = RegressionObservations(n, q);
  std::vector<std::int64_t> truth(n);
  int r = 0;
  for (int d = 0; d < num_db; ++d) {
    for (std::size_t i = 0; i < per_db[d].size(); ++i, ++r) {
      const Row& row = per_db[d][i];
      corpus.record_db.push_back(d);
      corpus.record_key.push_back(static_cast<std::int64_t>(i) + 1);
      for (int f = 0; f < p; ++f) codes[f][r] = row.codes[f];
      truth[r] = row.entity;
      if (!with_reg) continue;
      const bool complete = spec.regression == RegressionPlan::CompleteSimple;
      if (complete || d == 0) corpus.regression.set(r, 0, row.y);
      if (complete || d > 0)
        for (int k = 0; k < q; ++k) corpus.regression.set(r, k + 1, row.x(k));
    }
  }
  std::vector<int> supports;
  for (const auto& f : spec.features) supports.push_back(static_cast<int>(f.theta.size()));
  corpus.categorical = CategoricalRecordView(std::move(codes), std::move(supports));
  corpus.entity = truth;
  out.truth = std::move(truth);
  return out;
}

std::vector<std::string> builtin_experiment_names() {
  return {"RL500-dedup", "RL500-bipartite", "ExpI", "ExpII", "ExpIII"};
}

GenSpec builtin_experiment(std::string_view name, std::uint64_t seed) {
  if (name == "RL500-dedup") {
    GenSpec s = two_db_base("RL500-dedup", seed);
    s.plan = dedup_plan();
    return s;
  }
  if (name == "RL500-bipartite") {
    GenSpec s = two_db_base("RL500-bipartite", seed);
    s.constraint = Constraint::NoWithinDbDuplicates;
    s.plan = bipartite_plan(50);
    return s;
  }
  if (name == "ExpI") {
    GenSpec s;
    s.name = "ExpI";
    s.num_databases = 1;
    s.features = default_features();
    s.alpha_gen.assign(s.features.size(), kDefaultAlphaGen);
    s.plan = {{{2}, 50}, {{1}, 400}};
    s.regression = RegressionPlan::CompleteSimple;
    s.params = simple_params(3.0, 4.0, 9.0, 0.01);
    s.seed = seed;
    return s;
  }
  if (name == "ExpII") {
    GenSpec s = two_db_base("ExpII", seed);
    s.plan = dedup_plan();
    s.regression = RegressionPlan::BrokenSimple;
    s.params = simple_params(3.0, 4.0, 9.0, 0.01);
    return s;
  }
  if (name == "ExpIII") {
    GenSpec s = two_db_base("ExpIII", seed);
    s.constraint = Constraint::NoWithinDbDuplicates;
    s.plan = bipartite_plan(50);
    s.regression = RegressionPlan::BrokenMultiple;
    s.params.beta = Eigen::Vector2d(2.0, 4.0);
    s.params.var_y = 4.0;
    s.params.cov_true = 9.0 * Eigen::MatrixXd::Identity(2, 2);
    s.params.cov_x_given_true = 0.01 * Eigen::MatrixXd::Identity(2, 2);
    return s;
  }
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

}  // namespace brl
