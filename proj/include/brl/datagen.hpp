#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "brl/corpus.hpp"
#include "brl/metrics.hpp"
#include "brl/partition.hpp"
#include "brl/regression.hpp"

namespace brl {

enum class RegressionPlan { None, CompleteSimple, BrokenSimple, BrokenMultiple };

/// `count` entities, each with `per_db[d]` records in database d.
struct Placement {
  std::vector<int> per_db;
  int count = 1;
};

struct GeneratedFeature {
  std::string name;
  std::vector<double> theta;
};

struct GenSpec {
  std::string name;
  int num_databases = 1;
  Constraint constraint = Constraint::Unconstrained;
  std::vector<Placement> plan;
  std::vector<GeneratedFeature> features;
  std::vector<double> alpha_gen;  // per feature
  RegressionPlan regression = RegressionPlan::None;
  RegressionParams params;        // generating values
  std::uint64_t seed = 1;

  int num_entities() const;
  std::vector<int> db_sizes() const;
  /// Throws ConfigError for infeasible placements or parameters.
  void validate() const;
};

struct GeneratedData {
  Corpus corpus;
  GroundTruth truth;
};

/// Draws entity values from theta, distorts each copy (with probability alpha_gen a value
/// is redrawn from theta), adds regression columns and shuffles records within databases.
GeneratedData generate_corpus(const GenSpec& spec);

/// theta_v proportional to (v + 1)^-exponent.
std::vector<double> zipf_frequencies(int support, double exponent);

/// "RL500-dedup", "RL500-bipartite", "ExpI", "ExpII" or "ExpIII".
GenSpec builtin_experiment(std::string_view name, std::uint64_t seed = 1);
std::vector<std::string> builtin_experiment_names();

}  // namespace brl
