#include "brl/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "brl/error.hpp"

namespace brl::io {

using json = nlohmann::json;

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(line);
  }
  return out;
}

std::string where(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

template <typename T>
T parse_int(std::string_view s, const std::string& ctx) {
  T v{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw Error(ctx + ": expected an integer, got '" + std::string(s) + "'");
  return v;
}

double parse_real(std::string_view s, const std::string& ctx) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw Error(ctx + ": expected a number, got '" + std::string(s) + "'");
  return v;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::string constraint_name(Constraint c) {
  return c == Constraint::NoWithinDbDuplicates ? "no-within-db-duplicates" : "none";
}

Constraint parse_constraint(const std::string& s) {
  if (s == "none") return Constraint::Unconstrained;
  if (s == "no-within-db-duplicates") return Constraint::NoWithinDbDuplicates;
  throw ConfigError("unknown constraint '" + s + "'");
}

// Maps (db, rec_id) in file terms to the corpus record index.
std::map<std::pair<int, std::int64_t>, int> record_index(const Corpus& corpus) {
  std::map<std::pair<int, std::int64_t>, int> idx;
  for (int r = 0; r < corpus.num_records(); ++r) idx[{corpus.record_db[r], corpus.record_key[r]}] = r;
  return idx;
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, ptr);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------------------
// schema

Schema read_schema(const fs::path& path) {
  json j;
  try {
    j = json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  Schema s;
  try {
    s.version = j.value("version", 1);
    if (s.version != 1) throw ConfigError("unsupported schema version " + std::to_string(s.version));
    s.num_databases = j.at("num_databases").get<int>();
    if (s.num_databases < 1) throw ConfigError("num_databases must be positive");
    s.constraint = parse_constraint(j.value("constraint", std::string("none")));
    for (const auto& f : j.at("features")) {
      SchemaFeature sf;
      sf.name = f.at("name").get<std::string>();
      sf.support = f.at("support").get<int>();
      if (sf.support < 2) throw ConfigError("feature " + sf.name + ": support must be at least 2");
      if (f.contains("theta")) {
        sf.theta = f.at("theta").get<std::vector<double>>();
        if (static_cast<int>(sf.theta->size()) != sf.support) {
          throw ConfigError("feature " + sf.name + ": theta length differs from support");
        }
      }
      s.features.push_back(std::move(sf));
    }
    if (j.contains("regression")) {
      const auto& r = j.at("regression");
      s.has_response = r.value("response", false);
      s.num_covariates = r.value("covariates", 0);
      if (s.num_covariates < 0) throw ConfigError("covariates must be non-negative");
    }
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (s.features.empty()) throw ConfigError(path.string() + ": schema declares no features");
  return s;
}

void write_schema(const fs::path& path, const Schema& s) {
  json j;
  j["version"] = s.version;
  j["num_databases"] = s.num_databases;
  j["constraint"] = constraint_name(s.constraint);
  j["features"] = json::array();
  for (const auto& f : s.features) {
    json jf{{"name", f.name}, {"support", f.support}};
    if (f.theta) jf["theta"] = *f.theta;
    j["features"].push_back(jf);
  }
  j["regression"] = {{"response", s.has_response}, {"covariates", s.num_covariates}};
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

Schema schema_of(const Corpus& corpus, Constraint constraint) {
  Schema s;
  s.num_databases = corpus.num_databases;
  s.constraint = constraint;
  for (int f = 0; f < corpus.categorical.num_features(); ++f) {
    s.features.push_back({corpus.feature_names[f], corpus.categorical.support(f), std::nullopt});
  }
  s.has_response = corpus.has_response;
  s.num_covariates = corpus.num_covariates;
  return s;
}

// ---------------------------------------------------------------------------------------
// corpus

Corpus read_corpus(const fs::path& path, const Schema& schema, std::vector<std::string>* warnings) {
  const auto lines = lines_of(slurp(path));
  if (lines.empty()) throw Error(path.string() + ": empty file");
  const auto header = split(lines[0]);
  std::map<std::string, int, std::less<>> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!col.emplace(std::string(header[i]), static_cast<int>(i)).second) {
      throw Error(path.string() + ": duplicate column '" + std::string(header[i]) + "'");
    }
  }
  auto need = [&](const std::string& name) {
    const auto it = col.find(name);
    if (it == col.end()) throw Error(path.string() + ": missing column '" + name + "'");
    return it->second;
  };
  const int c_db = need("db_id");
  const int c_rec = need("rec_id");
  const int p = static_cast<int>(schema.features.size());
  std::vector<int> c_feat(p);
  for (int f = 0; f < p; ++f) c_feat[f] = need(schema.features[f].name);
  const int c_y = schema.has_response ? need("y") : -1;
  std::vector<int> c_x(schema.num_covariates);
  for (int k = 0; k < schema.num_covariates; ++k) c_x[k] = need("x" + std::to_string(k + 1));
  const auto ent_it = col.find("entity_id");
  const int c_ent = ent_it == col.end() ? -1 : ent_it->second;

  if (warnings != nullptr) {
    std::vector<int> used{c_db, c_rec, c_y, c_ent};
    used.insert(used.end(), c_feat.begin(), c_feat.end());
    used.insert(used.end(), c_x.begin(), c_x.end());
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (std::find(used.begin(), used.end(), static_cast<int>(i)) == used.end()) {
        warnings->push_back("column '" + std::string(header[i]) + "' is not in the schema and was ignored");
      }
    }
  }

  struct Row {
    int db;
    std::int64_t key;
    std::vector<std::int32_t> codes;
    std::vector<std::optional<double>> reg;
    std::optional<std::int64_t> entity;
  };
  std::vector<Row> rows;
  rows.reserve(lines.size() - 1);
  bool reordered = false;
  int last_db = 0;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto cells = split(lines[li]);
    const std::string ctx = where(path, li + 1);
    if (cells.size() != header.size()) {
      throw Error(ctx + ": expected " + std::to_string(header.size()) + " cells, found " +
                  std::to_string(cells.size()));
    }
    Row row;
    row.db = parse_int<int>(cells[c_db], ctx) - 1;
    if (row.db < 0 || row.db >= schema.num_databases) {
      throw Error(ctx + ": db_id outside 1.." + std::to_string(schema.num_databases));
    }
    if (row.db < last_db) reordered = true;
    last_db = std::max(last_db, row.db);
    row.key = parse_int<std::int64_t>(cells[c_rec], ctx);
    row.codes.resize(p);
    for (int f = 0; f < p; ++f) {
      if (cells[c_feat[f]].empty()) throw Error(ctx + ": feature '" + schema.features[f].name + "' is missing");
      const int v = parse_int<int>(cells[c_feat[f]], ctx);
      if (v < 1 || v > schema.features[f].support) {
        throw Error(ctx + ": code " + std::to_string(v) + " outside 1.." +
                    std::to_string(schema.features[f].support) + " for '" + schema.features[f].name + "'");
      }
      row.codes[f] = v - 1;
    }
    row.reg.resize(1 + schema.num_covariates);
    if (c_y >= 0 && !cells[c_y].empty()) row.reg[0] = parse_real(cells[c_y], ctx);
    for (int k = 0; k < schema.num_covariates; ++k)
      if (!cells[c_x[k]].empty()) row.reg[k + 1] = parse_real(cells[c_x[k]], ctx);
    if (c_ent >= 0 && !cells[c_ent].empty()) row.entity = parse_int<std::int64_t>(cells[c_ent], ctx);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(path.string() + ": no records");
  if (reordered) {
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.db < b.db; });
    if (warnings != nullptr) warnings->push_back("records were not grouped by database and have been reordered");
  }

  Corpus c;
  c.num_databases = schema.num_databases;
  const int n = static_cast<int>(rows.size());
  std::vector<std::vector<std::int32_t>> codes(p, std::vector<std::int32_t>(n));
  std::vector<int> supports;
  for (const auto& f : schema.features) {
    c.feature_names.push_back(f.name);
    supports.push_back(f.support);
  }
  c.has_response = schema.has_response;
  c.num_covariates = schema.num_covariates;
  c.regression = RegressionObservations(n, schema.num_covariates);
  bool all_entities = c_ent >= 0;
  std::vector<std::int64_t> entity(n, 0);
  std::map<std::pair<int, std::int64_t>, int> seen;
  for (int r = 0; r < n; ++r) {
    const Row& row = rows[r];
    if (!seen.emplace(std::make_pair(row.db, row.key), r).second) {
      throw Error(path.string() + ": duplicate rec_id " + std::to_string(row.key) + " in database " +
                  std::to_string(row.db + 1));
    }
    c.record_db.push_back(row.db);
    c.record_key.push_back(row.key);
    for (int f = 0; f < p; ++f) codes[f][r] = row.codes[f];
    for (int comp = 0; comp <= schema.num_covariates; ++comp)
      if (row.reg[comp]) c.regression.set(r, comp, *row.reg[comp]);
    if (row.entity) {
      entity[r] = *row.entity;
    } else {
      all_entities = false;
    }
  }
  std::vector<int> present(schema.num_databases, 0);
  for (int d : c.record_db) present[d] = 1;
  for (int d = 0; d < schema.num_databases; ++d)
    if (!present[d]) throw Error(path.string() + ": database " + std::to_string(d + 1) + " has no records");
  c.categorical = CategoricalRecordView(std::move(codes), std::move(supports));
  if (all_entities) c.entity = std::move(entity);
  return c;
}

void write_corpus(const fs::path& path, const Corpus& corpus, bool with_entity) {
  auto out = open_out(path);
  const int p = corpus.categorical.num_features();
  const int q = corpus.num_covariates;
  out << "db_id,rec_id";
  for (const auto& name : corpus.feature_names) out << ',' << name;
  if (corpus.has_response) out << ",y";
  for (int k = 1; k <= q; ++k) out << ",x" << k;
  const bool ent = with_entity && corpus.entity.has_value();
  if (ent) out << ",entity_id";
  out << '\n';
  for (int r = 0; r < corpus.num_records(); ++r) {
    out << corpus.record_db[r] + 1 << ',' << corpus.record_key[r];
    for (int f = 0; f < p; ++f) out << ',' << corpus.categorical.code(r, f) + 1;
    if (corpus.has_response) {
      out << ',';
      if (corpus.regression.observed(r, 0)) out << format_real(corpus.regression.value(r, 0));
    }
    for (int k = 1; k <= q; ++k) {
      out << ',';
      if (corpus.regression.observed(r, k)) out << format_real(corpus.regression.value(r, k));
    }
    if (ent) out << ',' << (*corpus.entity)[r];
    out << '\n';
  }
}

GroundTruth read_truth(const fs::path& path, const Corpus& corpus) {
  const auto lines = lines_of(slurp(path));
  if (lines.empty()) throw Error(path.string() + ": empty file");
  const auto header = split(lines[0]);
  if (header.size() != 3 || header[0] != "db_id" || header[1] != "rec_id" || header[2] != "entity_id") {
    throw Error(path.string() + ": expected header db_id,rec_id,entity_id");
  }
  const auto idx = record_index(corpus);
  GroundTruth truth(corpus.num_records(), 0);
  std::vector<std::uint8_t> filled(corpus.num_records(), 0);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto cells = split(lines[li]);
    const std::string ctx = where(path, li + 1);
    if (cells.size() != 3) throw Error(ctx + ": expected 3 cells");
    const int db = parse_int<int>(cells[0], ctx) - 1;
    const auto key = parse_int<std::int64_t>(cells[1], ctx);
    const auto it = idx.find({db, key});
    if (it == idx.end()) throw Error(ctx + ": record not in the corpus");
    if (filled[it->second]++) throw Error(ctx + ": record listed twice");
    truth[it->second] = parse_int<std::int64_t>(cells[2], ctx);
  }
  for (int r = 0; r < corpus.num_records(); ++r) {
    if (!filled[r]) {
      throw Error(path.string() + ": no entity for db " + std::to_string(corpus.record_db[r] + 1) +
                  " rec " + std::to_string(corpus.record_key[r]));
    }
  }
  return truth;
}

void write_truth(const fs::path& path, const Corpus& corpus, const GroundTruth& truth) {
  auto out = open_out(path);
  out << "db_id,rec_id,entity_id\n";
  for (int r = 0; r < corpus.num_records(); ++r) {
    out << corpus.record_db[r] + 1 << ',' << corpus.record_key[r] << ',' << truth[r] << '\n';
  }
}

FeatureSpec feature_spec(const Schema& schema, const Corpus& corpus) {
  const FeatureSpec empirical = FeatureSpec::empirical(corpus.categorical);
  std::vector<std::vector<double>> theta;
  for (int f = 0; f < static_cast<int>(schema.features.size()); ++f) {
    const auto& sf = schema.features[f];
    if (sf.theta) {
      theta.push_back(*sf.theta);
    } else {
      const auto e = empirical.theta(f);
      theta.emplace_back(e.begin(), e.end());
    }
  }
  return FeatureSpec(std::move(theta));
}

// ---------------------------------------------------------------------------------------
// run outputs

void write_trace(const fs::path& path, std::span<const PosteriorSamples> chains,
                 const std::vector<std::string>& regression_names) {
  auto out = open_out(path);
  if (chains.empty()) throw Error("write_trace: no chains");
  const auto& first = chains.front();
  const bool with_metrics = !first.metrics.empty();
  out << "chain,iteration,k,t";
  for (int f = 1; f <= first.num_features; ++f) out << ",alpha_" << f;
  if (first.has_regression)
    for (const auto& name : regression_names) out << ',' << name;
  if (with_metrics) out << ",fnr,fdr";
  out << '\n';
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const auto& s = chains[c];
    const int w = s.regression_width();
    for (int i = 0; i < s.kept(); ++i) {
      out << c << ',' << s.iteration[i] << ',' << s.k[i] << ',';
      if (s.t[i] >= 0) out << s.t[i];
      for (int f = 0; f < s.num_features; ++f) out << ',' << format_real(s.alpha[i * s.num_features + f]);
      for (int j = 0; j < w; ++j) out << ',' << format_real(s.regression[i * w + j]);
      if (with_metrics) out << ',' << format_real(s.metrics[i].fnr) << ',' << format_real(s.metrics[i].fdr);
      out << '\n';
    }
  }
}

void write_pairs(const fs::path& path, const PosteriorSamples& merged, const Corpus& corpus) {
  auto out = open_out(path);
  out << "db_a,rec_a,db_b,rec_b,prob\n";
  for (const auto& pp : pair_probabilities(merged)) {
    out << corpus.record_db[pp.a] + 1 << ',' << corpus.record_key[pp.a] << ','
        << corpus.record_db[pp.b] + 1 << ',' << corpus.record_key[pp.b] << ',' << format_real(pp.prob)
        << '\n';
  }
}

void write_labels(const fs::path& path, std::span<const PosteriorSamples> chains) {
  auto out = open_out(path);
  if (chains.empty()) throw Error("write_labels: no chains");
  out << "chain,iteration";
  for (int r = 1; r <= chains.front().num_records; ++r) out << ",r" << r;
  out << '\n';
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const auto& s = chains[c];
    for (std::size_t i = 0; i < s.labels.size(); ++i) {
      out << c << ',' << s.iteration[i];
      for (int l : s.labels[i]) out << ',' << l;
      out << '\n';
    }
  }
}

void write_metrics(const fs::path& path, std::span<const int> iteration,
                   std::span<const LinkageMetrics> metrics) {
  auto out = open_out(path);
  out << "iteration,fnr,fdr\n";
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    out << iteration[i] << ',' << format_real(metrics[i].fnr) << ',' << format_real(metrics[i].fdr) << '\n';
  }
}

std::vector<PairProbability> read_pairs(const fs::path& path, const Corpus& corpus) {
  const auto idx = record_index(corpus);
  const auto lines = lines_of(slurp(path));
  if (lines.empty() || lines[0] != "db_a,rec_a,db_b,rec_b,prob") {
    throw Error(path.string() + ": unexpected header");
  }
  std::vector<PairProbability> pairs;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto cells = split(lines[li]);
    const std::string ctx = where(path, li + 1);
    if (cells.size() != 5) throw Error(ctx + ": expected 5 cells");
    const auto a = idx.find({parse_int<int>(cells[0], ctx) - 1, parse_int<std::int64_t>(cells[1], ctx)});
    const auto b = idx.find({parse_int<int>(cells[2], ctx) - 1, parse_int<std::int64_t>(cells[3], ctx)});
    if (a == idx.end() || b == idx.end()) throw Error(ctx + ": record not in the corpus");
    if (a->second == b->second) throw Error(ctx + ": a record paired with itself");
    const double prob = parse_real(cells[4], ctx);
    if (!(prob >= 0.0 && prob <= 1.0)) throw Error(ctx + ": probability outside [0, 1]");
    pairs.push_back({std::min(a->second, b->second), std::max(a->second, b->second), prob});
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const PairProbability& x, const PairProbability& y) {
    if (x.prob != y.prob) return x.prob > y.prob;
    return std::pair(x.a, x.b) < std::pair(y.a, y.b);
  });
  return pairs;
}

RunRecord read_run(const fs::path& dir, const Corpus& corpus) {
  RunRecord rec;
  {
    const fs::path path = dir / "trace.csv";
    const auto lines = lines_of(slurp(path));
    if (lines.empty()) throw Error(path.string() + ": empty file");
    const auto header = split(lines[0]);
    if (header.size() < 4 || header[0] != "chain" || header[1] != "iteration" || header[2] != "k" ||
        header[3] != "t") {
      throw Error(path.string() + ": unexpected header");
    }
    int c_fnr = -1, c_fdr = -1;
    std::vector<int> c_alpha, c_reg;
    for (std::size_t i = 4; i < header.size(); ++i) {
      const std::string name(header[i]);
      if (name.starts_with("alpha_")) {
        c_alpha.push_back(static_cast<int>(i));
      } else if (name == "fnr") {
        c_fnr = static_cast<int>(i);
      } else if (name == "fdr") {
        c_fdr = static_cast<int>(i);
      } else {
        c_reg.push_back(static_cast<int>(i));
        rec.regression_names.push_back(name);
      }
    }
    rec.num_features = static_cast<int>(c_alpha.size());
    for (std::size_t li = 1; li < lines.size(); ++li) {
      const auto cells = split(lines[li]);
      const std::string ctx = where(path, li + 1);
      if (cells.size() != header.size()) throw Error(ctx + ": wrong number of cells");
      rec.chain.push_back(parse_int<int>(cells[0], ctx));
      rec.iteration.push_back(parse_int<int>(cells[1], ctx));
      rec.k.push_back(parse_int<int>(cells[2], ctx));
      rec.t.push_back(cells[3].empty() ? -1 : parse_int<int>(cells[3], ctx));
      for (int c : c_alpha) rec.alpha.push_back(parse_real(cells[c], ctx));
      for (int c : c_reg) rec.regression.push_back(parse_real(cells[c], ctx));
      if (c_fnr >= 0 && c_fdr >= 0) {
        rec.fnr.push_back(parse_real(cells[c_fnr], ctx));
        rec.fdr.push_back(parse_real(cells[c_fdr], ctx));
      }
    }
  }
  rec.pairs = read_pairs(dir / "pairs.csv", corpus);
  const fs::path labels_path = dir / "labels.csv";
  if (fs::exists(labels_path)) {
    const auto lines = lines_of(slurp(labels_path));
    for (std::size_t li = 1; li < lines.size(); ++li) {
      const auto cells = split(lines[li]);
      const std::string ctx = where(labels_path, li + 1);
      if (static_cast<int>(cells.size()) != corpus.num_records() + 2) {
        throw Error(ctx + ": label row length differs from the corpus size");
      }
      std::vector<int> labels(corpus.num_records());
      for (int r = 0; r < corpus.num_records(); ++r) labels[r] = parse_int<int>(cells[r + 2], ctx);
      rec.labels.push_back(std::move(labels));
    }
  }
  return rec;
}

}  // namespace brl::io
