#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "brl/corpus.hpp"
#include "brl/eval.hpp"
#include "brl/hitmiss.hpp"
#include "brl/metrics.hpp"
#include "brl/partition.hpp"
#include "brl/sampler.hpp"

namespace brl::io {

namespace fs = std::filesystem;

struct SchemaFeature {
  std::string name;
  int support = 0;
  std::optional<std::vector<double>> theta;
};

struct Schema {
  int version = 1;
  int num_databases = 1;
  std::vector<SchemaFeature> features;
  bool has_response = false;
  int num_covariates = 0;
  Constraint constraint = Constraint::Unconstrained;
};

/// Locale-independent, 17 significant digits.
std::string format_real(double v);

Schema read_schema(const fs::path& path);
void write_schema(const fs::path& path, const Schema& schema);
Schema schema_of(const Corpus& corpus, Constraint constraint);

/// Parses corpus.csv against the schema. Problems that do not prevent loading (such as
/// a declared category never observed) are appended to `warnings`.
Corpus read_corpus(const fs::path& path, const Schema& schema, std::vector<std::string>* warnings);
void write_corpus(const fs::path& path, const Corpus& corpus, bool with_entity);

/// truth.csv aligned to the corpus record order.
GroundTruth read_truth(const fs::path& path, const Corpus& corpus);
void write_truth(const fs::path& path, const Corpus& corpus, const GroundTruth& truth);

/// Frequencies from the schema when given there, otherwise empirical.
FeatureSpec feature_spec(const Schema& schema, const Corpus& corpus);

/// Per-chain samples written side by side with a leading chain column.
void write_trace(const fs::path& path, std::span<const PosteriorSamples> chains,
                 const std::vector<std::string>& regression_names);
void write_pairs(const fs::path& path, const PosteriorSamples& merged, const Corpus& corpus);
void write_labels(const fs::path& path, std::span<const PosteriorSamples> chains);
void write_metrics(const fs::path& path, std::span<const int> iteration,
                   std::span<const LinkageMetrics> metrics);

/// pairs.csv as record-index pairs, highest probability first (ties by record indices).
std::vector<PairProbability> read_pairs(const fs::path& path, const Corpus& corpus);

/// What a finished run directory holds, as read back by eval.
struct RunRecord {
  std::vector<int> chain;
  std::vector<int> iteration;
  std::vector<int> k;
  std::vector<int> t;           // -1 when undefined
  int num_features = 0;
  std::vector<double> alpha;    // kept x num_features
  std::vector<std::string> regression_names;
  std::vector<double> regression;  // kept x regression_names.size()
  std::vector<double> fnr, fdr;    // present when the run had truth
  std::vector<PairProbability> pairs;  // record indices in corpus order
  std::vector<std::vector<int>> labels;  // empty when labels.csv is absent
};

RunRecord read_run(const fs::path& dir, const Corpus& corpus);

/// Reads a whole file; throws brl::Error when it cannot be opened.
std::string slurp(const fs::path& path);

}  // namespace brl::io
