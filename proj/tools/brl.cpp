// Command-line front end: generate, run, eval, prior.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "brl/datagen.hpp"
#include "brl/error.hpp"
#include "brl/eval.hpp"
#include "brl/io.hpp"
#include "brl/kernels/kernels.hpp"
#include "brl/priors.hpp"
#include "brl/sampler.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Removes the files a failed command had started writing.
class OutputGuard {
 public:
  explicit OutputGuard(fs::path dir) : dir_(std::move(dir)) {}
  fs::path add(const std::string& name) {
    files_.push_back(dir_ / name);
    return files_.back();
  }
  void commit() { committed_ = true; }
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f, ec);
  }

 private:
  fs::path dir_;
  std::vector<fs::path> files_;
  bool committed_ = false;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw brl::Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json summary_json(const brl::ScalarSummary& s) {
  return {{"mean", s.mean}, {"sd", s.sd}, {"q025", s.q025}, {"median", s.median}, {"q975", s.q975}};
}

std::vector<double> as_double(const std::vector<int>& v) { return {v.begin(), v.end()}; }

// ---------------------------------------------------------------------------------------
// generate

struct GenerateOptions {
  std::string experiment;
  std::uint64_t seed = 1;
  std::string out;
  double alpha_gen = -1.0;
  bool write_theta = false;
  bool with_entity = false;
};

int cmd_generate(const GenerateOptions& o) {
  brl::GenSpec spec = brl::builtin_experiment(o.experiment, o.seed);
  if (o.alpha_gen >= 0.0) spec.alpha_gen.assign(spec.features.size(), o.alpha_gen);
  const auto data = brl::generate_corpus(spec);

  fs::create_directories(o.out);
  OutputGuard guard(o.out);
  brl::io::Schema schema = brl::io::schema_of(data.corpus, spec.constraint);
  if (o.write_theta) {
    for (std::size_t f = 0; f < spec.features.size(); ++f) schema.features[f].theta = spec.features[f].theta;
  }
  brl::io::write_corpus(guard.add("corpus.csv"), data.corpus, o.with_entity);
  brl::io::write_truth(guard.add("truth.csv"), data.corpus, data.truth);
  brl::io::write_schema(guard.add("schema.json"), schema);
  guard.commit();

  const auto sizes = data.corpus.db_sizes();
  const auto truth_state = brl::LinkageState::from_labels(
      data.corpus.record_db,
      [&] {
        std::vector<int> l(data.truth.size());
        for (std::size_t i = 0; i < l.size(); ++i) l[i] = static_cast<int>(data.truth[i] - 1);
        return l;
      }(),
      brl::Constraint::Unconstrained);
  std::cout << spec.name << ": " << data.corpus.num_records() << " records";
  for (std::size_t d = 0; d < sizes.size(); ++d) std::cout << (d == 0 ? " (" : ", ") << "db" << d + 1 << "=" << sizes[d];
  std::cout << "), " << spec.num_entities() << " entities, " << truth_state.pairwise_links().size()
            << " true pairs\n";
  return 0;
}

// ---------------------------------------------------------------------------------------
// run

struct RunOptions {
  std::string corpus, schema, truth, out, config;
  std::string mode = "joint";
  std::string prior = "pyp:1,0.5";
  std::string constraint;  // empty: from the schema
  int iterations = 2000;
  int burn_in = 500;
  int thin = 1;
  std::uint64_t seed = 1;
  int chains = 1;
  double alpha_init = 0.05;
  double beta_prior_f = 1.0;
  double beta_prior_g = 1.0;
  double sd_alpha = 0.5;
  double sd_beta = 0.25;
  double sd_logvar = 0.5;
  std::string var_y_prior = "log-flat";
  std::string var_x_prior = "log-flat";
  std::string scan = "fixed";
  bool no_adapt = false;
  bool no_labels = false;
  bool full_noise_covariance = false;
  std::string point_estimate_from;
};

// Config-file keys mirror the long flag names with '-' replaced by '_'.
void apply_config(RunOptions& o, const CLI::App& app, const fs::path& path) {
  json j;
  try {
    j = json::parse(brl::io::slurp(path));
  } catch (const json::parse_error& e) {
    throw brl::ConfigError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw brl::ConfigError(path.string() + ": config must be a JSON object");
  auto given = [&](const std::string& flag) { return app.count("--" + flag) > 0; };
  std::map<std::string, std::function<void(const json&)>> setters;
  auto str = [&](const char* flag, std::string& field) {
    setters[flag] = [&field](const json& v) { field = v.get<std::string>(); };
  };
  auto num = [&](const char* flag, auto& field) {
    setters[flag] = [&field](const json& v) { field = v.get<std::remove_reference_t<decltype(field)>>(); };
  };
  str("corpus", o.corpus);
  str("schema", o.schema);
  str("truth", o.truth);
  str("out", o.out);
  str("mode", o.mode);
  str("prior", o.prior);
  str("constraint", o.constraint);
  num("iterations", o.iterations);
  num("burn-in", o.burn_in);
  num("thin", o.thin);
  num("seed", o.seed);
  num("chains", o.chains);
  num("alpha-init", o.alpha_init);
  num("beta-prior-f", o.beta_prior_f);
  num("beta-prior-g", o.beta_prior_g);
  num("sd-alpha", o.sd_alpha);
  num("sd-beta", o.sd_beta);
  num("sd-logvar", o.sd_logvar);
  str("var-y-prior", o.var_y_prior);
  str("var-x-prior", o.var_x_prior);
  str("scan", o.scan);
  num("no-adapt", o.no_adapt);
  num("no-labels", o.no_labels);
  num("full-noise-covariance", o.full_noise_covariance);
  str("point-estimate-from", o.point_estimate_from);
  for (const auto& [key, value] : j.items()) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    const auto it = setters.find(flag);
    if (it == setters.end()) throw brl::ConfigError(path.string() + ": unknown key '" + key + "'");
    if (given(flag)) continue;
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw brl::ConfigError(path.string() + ": key '" + key + "': " + e.what());
    }
  }
}

json resolved_config(const RunOptions& o) {
  return {{"corpus", o.corpus},
          {"schema", o.schema},
          {"truth", o.truth},
          {"mode", o.mode},
          {"prior", o.prior},
          {"constraint", o.constraint},
          {"iterations", o.iterations},
          {"burn_in", o.burn_in},
          {"thin", o.thin},
          {"seed", o.seed},
          {"chains", o.chains},
          {"alpha_init", o.alpha_init},
          {"beta_prior_f", o.beta_prior_f},
          {"beta_prior_g", o.beta_prior_g},
          {"sd_alpha", o.sd_alpha},
          {"sd_beta", o.sd_beta},
          {"sd_logvar", o.sd_logvar},
          {"var_y_prior", o.var_y_prior},
          {"var_x_prior", o.var_x_prior},
          {"scan", o.scan},
          {"no_adapt", o.no_adapt},
          {"no_labels", o.no_labels},
          {"full_noise_covariance", o.full_noise_covariance},
          {"point_estimate_from", o.point_estimate_from}};
}

int cmd_run(RunOptions o, const CLI::App& app) {
  if (!o.config.empty()) apply_config(o, app, o.config);
  if (o.corpus.empty() || o.schema.empty() || o.out.empty()) {
    throw brl::ConfigError("run needs --corpus, --schema and --out (flags or config)");
  }
  if (o.mode != "joint" && o.mode != "linkage-only" && o.mode != "plugin") {
    throw brl::ConfigError("mode must be joint, linkage-only or plugin");
  }
  if (o.mode == "plugin" && o.point_estimate_from.empty()) {
    throw brl::ConfigError("plugin mode needs --point-estimate-from <run dir>");
  }
  if (o.scan != "fixed" && o.scan != "random") throw brl::ConfigError("scan must be fixed or random");

  const auto schema = brl::io::read_schema(o.schema);
  std::vector<std::string> warnings;
  const brl::Corpus corpus = brl::io::read_corpus(o.corpus, schema, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

  brl::Model model;
  model.corpus = &corpus;
  model.prior = brl::PartitionPrior::parse(o.prior);
  model.constraint = schema.constraint;
  if (o.constraint == "none") {
    model.constraint = brl::Constraint::Unconstrained;
  } else if (o.constraint == "no-within-db-duplicates") {
    model.constraint = brl::Constraint::NoWithinDbDuplicates;
  } else if (!o.constraint.empty()) {
    throw brl::ConfigError("constraint must be none or no-within-db-duplicates");
  }
  model.features = brl::io::feature_spec(schema, corpus);
  model.distortion.alpha.assign(model.features.num_features(), o.alpha_init);
  model.distortion.prior = {o.beta_prior_f, o.beta_prior_g};
  model.full_noise_covariance = o.full_noise_covariance;

  brl::GroundTruth truth;
  if (!o.truth.empty()) {
    truth = brl::io::read_truth(o.truth, corpus);
    model.truth = &truth;
  }

  brl::SamplerConfig cfg;
  cfg.iterations = o.iterations;
  cfg.burn_in = o.burn_in;
  cfg.thin = o.thin;
  cfg.seed = o.seed;
  cfg.mode = o.mode == "linkage-only" ? brl::Mode::LinkageOnly : brl::Mode::Joint;
  cfg.proposal_sd_alpha = o.sd_alpha;
  cfg.proposal_sd_beta = o.sd_beta;
  cfg.proposal_sd_logvar = o.sd_logvar;
  cfg.regression_prior.var_y = brl::VariancePrior::parse(o.var_y_prior);
  cfg.regression_prior.var_x = brl::VariancePrior::parse(o.var_x_prior);
  cfg.scan = o.scan == "random" ? brl::ScanOrder::Random : brl::ScanOrder::Fixed;
  cfg.adapt = !o.no_adapt;
  cfg.keep_labels = !o.no_labels;
  cfg.validate();

  if (cfg.mode == brl::Mode::LinkageOnly && corpus.has_regression()) {
    std::cerr << "warning: linkage-only mode ignores the regression columns\n";
  }
  if (o.mode != "linkage-only" && !corpus.has_regression()) {
    std::cerr << "warning: corpus has no regression columns; running the linkage model only\n";
  }

  std::vector<brl::PosteriorSamples> chains;
  if (o.mode == "plugin") {
    const auto pairs = brl::io::read_pairs(fs::path(o.point_estimate_from) / "pairs.csv", corpus);
    const auto point = brl::point_estimate_linkage(pairs, corpus.record_db, model.constraint);
    const auto labels = point.labels();
    for (int c = 0; c < o.chains; ++c) {
      brl::SamplerConfig local = cfg;
      local.seed = cfg.seed + static_cast<std::uint64_t>(c);
      chains.push_back(brl::plugin_regression(model, local, labels));
    }
  } else {
    chains = brl::run_chains(model, cfg, o.chains);
  }
  const auto merged = brl::merge_samples(chains);

  fs::create_directories(o.out);
  OutputGuard guard(o.out);
  const auto reg_names = brl::regression_column_names(merged.num_covariates);
  brl::io::write_trace(guard.add("trace.csv"), chains, reg_names);
  brl::io::write_pairs(guard.add("pairs.csv"), merged, corpus);
  if (cfg.keep_labels) brl::io::write_labels(guard.add("labels.csv"), chains);

  json s;
  s["mode"] = o.mode;
  s["prior"] = model.prior.to_string();
  s["chains"] = o.chains;
  s["kept"] = merged.kept();
  s["num_records"] = corpus.num_records();
  s["kernels"] = std::string(brl::kernels::isa_name(brl::kernels::active_isa()));
  s["k_mode"] = brl::mode_of(merged.k);
  s["k"] = summary_json(brl::summarize(as_double(merged.k)));
  if (merged.has_t) {
    s["t_mode"] = brl::mode_of(merged.t);
    s["t"] = summary_json(brl::summarize(as_double(merged.t)));
  }
  for (int f = 0; f < merged.num_features; ++f) {
    s["alpha"][corpus.feature_names[f]] =
        summary_json(brl::summarize(brl::column(merged.alpha, merged.num_features, f)));
  }
  for (std::size_t j = 0; j < reg_names.size() && merged.has_regression; ++j) {
    s["regression"][reg_names[j]] = summary_json(
        brl::summarize(brl::column(merged.regression, merged.regression_width(), static_cast<int>(j))));
  }
  if (!merged.metrics.empty()) {
    std::vector<double> fnr, fdr;
    for (const auto& m : merged.metrics) {
      fnr.push_back(m.fnr);
      fdr.push_back(m.fdr);
    }
    s["fnr"] = summary_json(brl::summarize(fnr));
    s["fdr"] = summary_json(brl::summarize(fdr));
  }
  json acc;
  for (std::size_t f = 0; f < merged.acceptance.alpha_tried.size(); ++f) {
    const auto tried = merged.acceptance.alpha_tried[f];
    acc["alpha"].push_back(tried ? double(merged.acceptance.alpha_accepted[f]) / double(tried) : 0.0);
  }
  for (std::size_t j = 0; j < merged.acceptance.regression_tried.size(); ++j) {
    const auto tried = merged.acceptance.regression_tried[j];
    acc["regression"].push_back(tried ? double(merged.acceptance.regression_accepted[j]) / double(tried) : 0.0);
  }
  s["acceptance"] = acc;
  s["config"] = resolved_config(o);
  write_json(guard.add("summary.json"), s);
  guard.commit();
  std::cout << "kept " << merged.kept() << " samples; posterior mode of k = " << s["k_mode"] << '\n';
  return 0;
}

// ---------------------------------------------------------------------------------------
// eval

struct EvalOptions {
  std::string run, plugin, corpus, schema, truth, out;
  int bins = 30;
};

void add_histogram(std::ostream& out, const std::string& name, const std::vector<double>& values,
                   bool integer_valued, int bins) {
  const auto h = brl::histogram(values, bins, integer_valued);
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    const double lo = h.lo + h.width * static_cast<double>(b);
    out << name << ',' << brl::io::format_real(lo) << ',' << brl::io::format_real(lo + h.width) << ','
        << h.counts[b] << '\n';
  }
}

json regression_summaries(const brl::io::RunRecord& r) {
  json j = json::object();
  const int w = static_cast<int>(r.regression_names.size());
  for (int c = 0; c < w; ++c) j[r.regression_names[c]] = summary_json(brl::summarize(brl::column(r.regression, w, c)));
  return j;
}

int cmd_eval(const EvalOptions& o) {
  const auto schema = brl::io::read_schema(o.schema);
  std::vector<std::string> warnings;
  const auto corpus = brl::io::read_corpus(o.corpus, schema, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  const auto truth = brl::io::read_truth(o.truth, corpus);
  const auto run = brl::io::read_run(o.run, corpus);

  std::vector<brl::LinkageMetrics> metrics;
  if (!run.labels.empty()) {
    for (const auto& l : run.labels) metrics.push_back(brl::compute_metrics(l, truth));
  } else if (!run.fnr.empty()) {
    for (std::size_t i = 0; i < run.fnr.size(); ++i) {
      brl::LinkageMetrics m;
      m.fnr = run.fnr[i];
      m.fdr = run.fdr[i];
      metrics.push_back(m);
    }
  } else {
    throw brl::Error("run directory has neither labels.csv nor metric columns in trace.csv");
  }
  if (metrics.size() != run.iteration.size()) throw brl::Error("labels.csv and trace.csv disagree in length");

  fs::create_directories(o.out);
  OutputGuard guard(o.out);
  brl::io::write_metrics(guard.add("metrics.csv"), run.iteration, metrics);

  std::vector<double> fnr, fdr;
  for (const auto& m : metrics) {
    fnr.push_back(m.fnr);
    fdr.push_back(m.fdr);
  }
  {
    std::ofstream h(guard.add("histograms.csv"), std::ios::binary);
    if (!h) throw brl::Error("cannot write histograms.csv");
    h << "quantity,bin_lo,bin_hi,count\n";
    add_histogram(h, "k", as_double(run.k), true, o.bins);
    if (!run.t.empty() && run.t.front() >= 0) add_histogram(h, "t", as_double(run.t), true, o.bins);
    for (int f = 0; f < run.num_features; ++f) {
      add_histogram(h, "alpha_" + std::to_string(f + 1), brl::column(run.alpha, run.num_features, f), false, o.bins);
    }
    const int w = static_cast<int>(run.regression_names.size());
    for (int c = 0; c < w; ++c) add_histogram(h, run.regression_names[c], brl::column(run.regression, w, c), false, o.bins);
    add_histogram(h, "fnr", fnr, false, o.bins);
    add_histogram(h, "fdr", fdr, false, o.bins);
  }

  const auto point = brl::point_estimate_linkage(run.pairs, corpus.record_db, schema.constraint);
  const auto point_metrics = brl::compute_metrics(point.labels(), truth);
  json summary;
  summary["kept"] = run.iteration.size();
  summary["k_mode"] = brl::mode_of(run.k);
  summary["k"] = summary_json(brl::summarize(as_double(run.k)));
  summary["fnr"] = summary_json(brl::summarize(fnr));
  summary["fdr"] = summary_json(brl::summarize(fdr));
  summary["point_estimate"] = {{"k", point.num_clusters()},
                               {"fnr", point_metrics.fnr},
                               {"fdr", point_metrics.fdr},
                               {"declared_pairs", point_metrics.declared_pairs}};
  summary["regression"] = regression_summaries(run);
  write_json(guard.add("eval_summary.json"), summary);

  json cmp;
  cmp["available"] = false;
  if (!o.plugin.empty()) {
    const auto plug = brl::io::read_run(o.plugin, corpus);
    if (plug.regression_names.empty() || run.regression_names.empty()) {
      throw brl::Error("joint/plug-in comparison needs regression traces in both runs");
    }
    if (plug.regression_names != run.regression_names) {
      throw brl::Error("joint and plug-in runs have different regression parameters");
    }
    cmp["available"] = true;
    const int w = static_cast<int>(run.regression_names.size());
    for (int c = 0; c < w; ++c) {
      const auto js = brl::summarize(brl::column(run.regression, w, c));
      const auto ps = brl::summarize(brl::column(plug.regression, w, c));
      cmp["parameters"][run.regression_names[c]] = {{"joint", summary_json(js)},
                                                    {"plugin", summary_json(ps)},
                                                    {"delta_mean", js.mean - ps.mean}};
    }
  }
  write_json(guard.add("comparison.json"), cmp);
  guard.commit();
  std::cout << "posterior mean FNR " << summary["fnr"]["mean"] << ", FDR " << summary["fdr"]["mean"] << '\n';
  return 0;
}

// ---------------------------------------------------------------------------------------
// prior

struct PriorOptions {
  std::string prior;
  int records = 500;
  int n1 = 250;
  int n2 = 250;
  int draws = 100000;
  std::uint64_t seed = 1;
};

int cmd_prior(const PriorOptions& o) {
  const auto prior = brl::PartitionPrior::parse(o.prior);
  if (const auto* cp = std::get_if<brl::ConstrainedPyp>(&prior.variant())) {
    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double sum = 0.0, sum_sq = 0.0;
    for (int d = 0; d < o.draws; ++d) {
      int k = o.n1;
      int matches = 0;
      for (int j = 0; j < o.n2; ++j) {
        const auto step = brl::constrained_pyp_step(*cp, j, k);
        const double p_link = step.available * std::exp(step.log_link_each);
        if (unif(rng) < p_link) {
          ++matches;
        } else {
          ++k;
        }
      }
      sum += matches;
      sum_sq += static_cast<double>(matches) * matches;
    }
    const double mean = sum / o.draws;
    std::cout << "E[matches] ~ " << mean << " (sd " << std::sqrt(sum_sq / o.draws - mean * mean) << ", "
              << o.draws << " draws)\n";
    return 0;
  }
  const auto m = brl::pyp_moments(prior, o.records);
  std::cout << "E[k] = " << m.expected_k << ", Var[k] = " << m.var_k << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian record linkage with a downstream regression"};
  app.require_subcommand(1);
  std::string isa;
  app.add_option("--isa", isa, "Kernel set: scalar or avx2 (default: best available)");

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic corpus, its truth and schema");
  g->add_option("--experiment", gen.experiment, "RL500-dedup, RL500-bipartite, ExpI, ExpII or ExpIII")->required();
  g->add_option("--seed", gen.seed, "Random seed");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--alpha-gen", gen.alpha_gen, "Distortion probability for every feature");
  g->add_flag("--write-theta", gen.write_theta, "Store the generating frequencies in schema.json");
  g->add_flag("--with-entity", gen.with_entity, "Add an entity_id column to corpus.csv");

  RunOptions run;
  auto* r = app.add_subcommand("run", "Sample the posterior");
  r->add_option("--config", run.config, "JSON file with any of the options below (flags win)");
  r->add_option("--corpus", run.corpus, "corpus.csv");
  r->add_option("--schema", run.schema, "schema.json");
  r->add_option("--truth", run.truth, "truth.csv (adds FNR/FDR to the trace)");
  r->add_option("--out", run.out, "Output directory");
  r->add_option("--mode", run.mode, "joint, linkage-only or plugin");
  r->add_option("--prior", run.prior, "pyp:s,d | constrained-pyp:s,d | uniform-labels:n | uniform-partitions:n");
  r->add_option("--constraint", run.constraint, "none or no-within-db-duplicates (default: schema)");
  r->add_option("--iterations", run.iterations);
  r->add_option("--burn-in", run.burn_in);
  r->add_option("--thin", run.thin);
  r->add_option("--seed", run.seed);
  r->add_option("--chains", run.chains, "Chains run in parallel with seeds seed, seed+1, ...");
  r->add_option("--alpha-init", run.alpha_init, "Starting distortion probability");
  r->add_option("--beta-prior-f", run.beta_prior_f);
  r->add_option("--beta-prior-g", run.beta_prior_g);
  r->add_option("--sd-alpha", run.sd_alpha, "Proposal sd of logit(alpha)");
  r->add_option("--sd-beta", run.sd_beta, "Proposal sd of each coefficient");
  r->add_option("--sd-logvar", run.sd_logvar, "Proposal sd of each log variance");
  r->add_option("--var-y-prior", run.var_y_prior, "log-flat or ig:<mean>,<shape>");
  r->add_option("--var-x-prior", run.var_x_prior, "log-flat or ig:<mean>,<shape>");
  r->add_option("--scan", run.scan, "fixed or random");
  r->add_flag("--no-adapt", run.no_adapt, "Keep proposal scales fixed during burn-in");
  r->add_flag("--no-labels", run.no_labels, "Do not write labels.csv");
  r->add_flag("--full-noise-covariance", run.full_noise_covariance, "Sample all of the measurement-error covariance");
  r->add_option("--point-estimate-from", run.point_estimate_from, "Directory whose pairs.csv gives the plug-in partition");

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Linkage metrics, histograms and the joint/plug-in comparison");
  e->add_option("--run", ev.run, "Run directory")->required();
  e->add_option("--plugin", ev.plugin, "Plug-in run directory");
  e->add_option("--corpus", ev.corpus)->required();
  e->add_option("--schema", ev.schema)->required();
  e->add_option("--truth", ev.truth)->required();
  e->add_option("--out", ev.out)->required();
  e->add_option("--bins", ev.bins);

  PriorOptions pr;
  auto* p = app.add_subcommand("prior", "Prior summaries of the partition");
  p->add_option("--prior", pr.prior)->required();
  p->add_option("--records", pr.records);
  p->add_option("--n1", pr.n1);
  p->add_option("--n2", pr.n2);
  p->add_option("--draws", pr.draws);
  p->add_option("--seed", pr.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? 0 : 2;
  }

  try {
    if (!isa.empty()) brl::kernels::set_active_isa(brl::kernels::parse_isa(isa));
    if (g->parsed()) return cmd_generate(gen);
    if (r->parsed()) return cmd_run(run, *r);
    if (e->parsed()) return cmd_eval(ev);
    if (p->parsed()) return cmd_prior(pr);
  } catch (const brl::ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
