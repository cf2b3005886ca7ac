#include "topicforge/pipeline.hpp"

#include "topicforge/csv.hpp"
#include "topicforge/error.hpp"
#include "topicforge/hash.hpp"
#include "topicforge/io.hpp"
#include "topicforge/log.hpp"
#include "topicforge/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace topicforge {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known, std::string_view where) {
  if (!obj.is_object()) throw ValidationError(std::string(where) + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ValidationError("unknown key '" + it.key() + "' in " + std::string(where));
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end() && !it->is_null()) out = it->get<T>();
}

template <typename T>
void read_opt(const json& obj, const char* key, std::optional<T>& out) {
  if (auto it = obj.find(key); it != obj.end() && !it->is_null()) out = it->get<T>();
}

void read_path(const json& obj, const char* key, std::optional<fs::path>& out) {
  if (auto it = obj.find(key); it != obj.end() && !it->is_null()) out = fs::path(it->get<std::string>());
}

void require_file(const RunConfig& c, const fs::path& p, std::string_view what) {
  if (!fs::is_regular_file(c.resolve(p)))
    throw ValidationError(std::string(what) + " file not found: " + c.resolve(p).string());
}

std::string to_text(const ojson& j) { return j.dump(2) + "\n"; }

template <typename Fn>
std::string capture(Fn&& fn) {
  std::ostringstream out;
  fn(out);
  return out.str();
}

}  // namespace

void RunConfig::validate() const {
  if (paths.corpus.empty()) throw ValidationError("paths.corpus is required");
  require_file(*this, paths.corpus, "corpus");
  if (paths.census) require_file(*this, *paths.census, "census");
  if (paths.postal_map) require_file(*this, *paths.postal_map, "postal map");
  if (paths.census.has_value() != paths.postal_map.has_value())
    throw ValidationError("paths.census and paths.postal_map must be given together");
  if (paths.vectors) require_file(*this, *paths.vectors, "vectors");
  if (paths.topic_specs) require_file(*this, *paths.topic_specs, "topic specs");
  if (paths.stopwords) require_file(*this, *paths.stopwords, "stopwords");
  if (paths.abbreviations) require_file(*this, *paths.abbreviations, "abbreviations");
  if (paths.lemma_exceptions) require_file(*this, *paths.lemma_exceptions, "lemma exceptions");
  if (preprocess.phrase_min_count > 0 && (preprocess.phrase_max_n < 2 || preprocess.phrase_max_n > 3))
    throw ValidationError("preprocess.phrase_max_n must be 2 or 3");
  if (preprocess.min_df < 1) throw ValidationError("preprocess.min_df must be >= 1");
  if (!(preprocess.max_df_ratio > 0 && preprocess.max_df_ratio <= 1))
    throw ValidationError("preprocess.max_df_ratio must lie in (0, 1]");
  lda.validate();
  if (sweep.k_min < 1 || sweep.k_max < sweep.k_min) throw ValidationError("sweep needs 1 <= k_min <= k_max");
  if (sweep.runs < 1) throw ValidationError("sweep.runs must be >= 1");
  if (sweep.window < 1) throw ValidationError("sweep.window must be >= 1");
  if (sweep.top_n < 2) throw ValidationError("sweep.top_n must be >= 2");
  LdaConfig s = lda;
  if (sweep.iterations) s.iterations = *sweep.iterations;
  if (sweep.burn_in) s.burn_in = *sweep.burn_in;
  s.validate();
  if (analysis.top_words < 1) throw ValidationError("analysis.top_words must be >= 1");
}

RunConfig parse_run_config(std::string_view json_text, const fs::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  try {
    const json j = json::parse(json_text);
    reject_unknown(j, {"seed", "threads", "paths", "columns", "preprocess", "lda", "sweep", "analysis"}, "config");
    if (!j.contains("seed") || j["seed"].is_null()) throw ValidationError("config: 'seed' is required");
    c.seed = j["seed"].get<std::uint64_t>();
    read_opt(j, "threads", c.threads);

    if (!j.contains("paths")) throw ValidationError("config: 'paths' is required");
    const auto& p = j["paths"];
    reject_unknown(p,
                   {"corpus", "census", "postal_map", "vectors", "topic_specs", "stopwords", "abbreviations",
                    "lemma_exceptions", "output_dir"},
                   "paths");
    if (!p.contains("corpus")) throw ValidationError("config: 'paths.corpus' is required");
    c.paths.corpus = p["corpus"].get<std::string>();
    read_path(p, "census", c.paths.census);
    read_path(p, "postal_map", c.paths.postal_map);
    read_path(p, "vectors", c.paths.vectors);
    read_path(p, "topic_specs", c.paths.topic_specs);
    read_path(p, "stopwords", c.paths.stopwords);
    read_path(p, "abbreviations", c.paths.abbreviations);
    read_path(p, "lemma_exceptions", c.paths.lemma_exceptions);
    if (p.contains("output_dir")) c.paths.output_dir = p["output_dir"].get<std::string>();

    if (j.contains("columns")) {
      const auto& col = j["columns"];
      reject_unknown(col, {"doc_id", "response_text", "gender", "nationality", "country", "postal_code", "program", "year"},
                     "columns");
      read_opt(col, "doc_id", c.columns.doc_id);
      read_opt(col, "response_text", c.columns.response_text);
      read_opt(col, "gender", c.columns.gender);
      read_opt(col, "nationality", c.columns.nationality);
      read_opt(col, "country", c.columns.country);
      read_opt(col, "postal_code", c.columns.postal_code);
      read_opt(col, "program", c.columns.program);
      read_opt(col, "year", c.columns.year);
    }
    if (j.contains("preprocess")) {
      const auto& pp = j["preprocess"];
      reject_unknown(pp, {"phrase_min_count", "phrase_max_n", "min_df", "max_df_ratio", "extra_stopwords"}, "preprocess");
      read_opt(pp, "phrase_min_count", c.preprocess.phrase_min_count);
      read_opt(pp, "phrase_max_n", c.preprocess.phrase_max_n);
      read_opt(pp, "min_df", c.preprocess.min_df);
      read_opt(pp, "max_df_ratio", c.preprocess.max_df_ratio);
      read_opt(pp, "extra_stopwords", c.preprocess.extra_stopwords);
    }
    if (j.contains("lda")) {
      const auto& l = j["lda"];
      reject_unknown(l, {"k", "alpha", "beta", "iterations", "burn_in", "sample_lag"}, "lda");
      read_opt(l, "k", c.lda.k);
      read_opt(l, "alpha", c.lda.alpha);
      read_opt(l, "beta", c.lda.beta);
      read_opt(l, "iterations", c.lda.iterations);
      read_opt(l, "burn_in", c.lda.burn_in);
      read_opt(l, "sample_lag", c.lda.sample_lag);
    }
    if (j.contains("sweep")) {
      const auto& s = j["sweep"];
      reject_unknown(s, {"k_min", "k_max", "runs", "window", "top_n", "iterations", "burn_in"}, "sweep");
      read_opt(s, "k_min", c.sweep.k_min);
      read_opt(s, "k_max", c.sweep.k_max);
      read_opt(s, "runs", c.sweep.runs);
      read_opt(s, "window", c.sweep.window);
      read_opt(s, "top_n", c.sweep.top_n);
      read_opt(s, "iterations", c.sweep.iterations);
      read_opt(s, "burn_in", c.sweep.burn_in);
    }
    if (j.contains("analysis")) {
      const auto& a = j["analysis"];
      reject_unknown(a, {"pooled", "top_words"}, "analysis");
      read_opt(a, "pooled", c.analysis.pooled);
      read_opt(a, "top_words", c.analysis.top_words);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed config: ") + e.what());
  }
  c.lda.seed = c.seed;
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ValidationError("config file not found: " + path.string());
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_run_config(read_file(path.string()), base);
}

std::string run_config_json(const RunConfig& c) {
  ojson j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  ojson p;
  p["corpus"] = c.paths.corpus.generic_string();
  auto put = [&p](const char* key, const std::optional<fs::path>& v) {
    if (v) p[key] = v->generic_string();
  };
  put("census", c.paths.census);
  put("postal_map", c.paths.postal_map);
  put("vectors", c.paths.vectors);
  put("topic_specs", c.paths.topic_specs);
  put("stopwords", c.paths.stopwords);
  put("abbreviations", c.paths.abbreviations);
  put("lemma_exceptions", c.paths.lemma_exceptions);
  p["output_dir"] = c.paths.output_dir.generic_string();
  j["paths"] = p;
  ojson col;
  col["doc_id"] = c.columns.doc_id;
  col["response_text"] = c.columns.response_text;
  auto put_col = [&col](const char* key, const std::optional<std::string>& v) {
    if (v) col[key] = *v;
  };
  put_col("gender", c.columns.gender);
  put_col("nationality", c.columns.nationality);
  put_col("country", c.columns.country);
  put_col("postal_code", c.columns.postal_code);
  put_col("program", c.columns.program);
  put_col("year", c.columns.year);
  j["columns"] = col;
  j["preprocess"] = {{"phrase_min_count", c.preprocess.phrase_min_count},
                     {"phrase_max_n", c.preprocess.phrase_max_n},
                     {"min_df", c.preprocess.min_df},
                     {"max_df_ratio", c.preprocess.max_df_ratio},
                     {"extra_stopwords", c.preprocess.extra_stopwords}};
  ojson l;
  l["k"] = c.lda.k;
  if (c.lda.alpha) l["alpha"] = *c.lda.alpha;
  l["beta"] = c.lda.beta;
  l["iterations"] = c.lda.iterations;
  l["burn_in"] = c.lda.burn_in;
  l["sample_lag"] = c.lda.sample_lag;
  j["lda"] = l;
  ojson s;
  s["k_min"] = c.sweep.k_min;
  s["k_max"] = c.sweep.k_max;
  s["runs"] = c.sweep.runs;
  s["window"] = c.sweep.window;
  s["top_n"] = c.sweep.top_n;
  if (c.sweep.iterations) s["iterations"] = *c.sweep.iterations;
  if (c.sweep.burn_in) s["burn_in"] = *c.sweep.burn_in;
  j["sweep"] = s;
  j["analysis"] = {{"pooled", c.analysis.pooled}, {"top_words", c.analysis.top_words}};
  return to_text(j);
}

PreprocessOptions make_preprocess_options(const RunConfig& c) {
  PreprocessOptions o;
  if (c.paths.stopwords) {
    const auto words = load_word_list(c.resolve(*c.paths.stopwords).string());
    o.stopwords = WordSet(words.begin(), words.end());
  }
  for (const auto& w : c.preprocess.extra_stopwords) o.stopwords.insert(to_lower(w));
  if (c.paths.abbreviations) {
    const auto words = load_word_list(c.resolve(*c.paths.abbreviations).string());
    o.abbreviations = WordSet(words.begin(), words.end());
  }
  if (c.paths.lemma_exceptions) {
    o.lemma_exceptions.clear();
    for (const auto& line : load_word_list(c.resolve(*c.paths.lemma_exceptions).string())) {
      std::istringstream ss(line);
      std::string surface, lemma;
      if (ss >> surface >> lemma) o.lemma_exceptions[surface] = lemma;
    }
  }
  return o;
}

Preprocessor make_preprocessor(const RunConfig& c) { return Preprocessor(make_preprocess_options(c)); }

PreparedCorpus prepare_records(std::vector<RawRecord> records, const RunConfig& c) {
  PreparedCorpus pc;
  pc.records = std::move(records);
  const auto pre = make_preprocessor(c);
  if (c.preprocess.phrase_min_count > 0)
    pc.phrases = pre.build_phrase_table(pc.records, c.preprocess.phrase_min_count, c.preprocess.phrase_max_n);
  pc.tokenized.resize(pc.records.size());
  parallel_for(pc.records.size(), c.threads, [&](std::size_t i) { pc.tokenized[i] = pre.preprocess(pc.records[i], pc.phrases); });
  pc.vocab = build_vocabulary(pc.tokenized, c.preprocess.min_df, c.preprocess.max_df_ratio);
  pc.docs.reserve(pc.tokenized.size());
  for (const auto& t : pc.tokenized) pc.docs.push_back(encode(t, pc.vocab));
  return pc;
}

PreparedCorpus prepare_corpus(const RunConfig& c) {
  auto loaded = load_corpus(c.resolve(c.paths.corpus).string(), c.columns);
  for (const auto& r : loaded.rejects) log_warning("corpus line " + std::to_string(r.line) + " rejected: " + r.reason);
  auto pc = prepare_records(std::move(loaded.records), c);
  pc.rejects = std::move(loaded.rejects);
  return pc;
}

std::vector<TopicSpec> load_specs(const RunConfig& c) {
  return c.paths.topic_specs ? load_topic_specs(c.resolve(*c.paths.topic_specs).string()) : default_topic_specs();
}

std::vector<DocTopics> AssignmentRun::doc_topics() const {
  std::vector<DocTopics> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(d.topics);
  return out;
}

std::vector<SentenceAssignment> AssignmentRun::sentences() const {
  std::vector<SentenceAssignment> out;
  for (const auto& d : docs) out.insert(out.end(), d.sentences.begin(), d.sentences.end());
  return out;
}

AssignmentRun run_assignment(const PreparedCorpus& corpus, const VectorStore& store, std::vector<TopicSpec> specs,
                             unsigned threads) {
  AssignmentRun run;
  resolve_centers(store, specs);
  run.specs = std::move(specs);
  run.docs = assign_documents(corpus.tokenized, store, run.specs, threads);
  return run;
}

CohortRun build_cohorts(std::span<const RawRecord> records, std::span<const DocTopics> topics, const CensusTable* census,
                        const PostalMap* postal, std::uint64_t seed) {
  CohortRun run;
  if (census && postal) {
    run.records = join_census(records, *postal, *census, &run.report);
  } else {
    const CensusTable none_census;
    const PostalMap none_postal;
    run.records = join_census(records, none_postal, none_census, &run.report);
  }
  attach_topics(run.records, topics);

  std::size_t with_income = 0;
  for (const auto& r : run.records) with_income += r.income.has_value();
  if (with_income >= 4)
    run.income_cuts = income_groups(run.records);
  else if (census)
    log_warning("fewer than 4 records joined to census incomes; income groups not assigned");

  std::set<std::vector<double>> distinct;
  for (const auto& r : run.records)
    if (r.edu) distinct.insert(std::vector<double>(r.edu->begin(), r.edu->end()));
  if (distinct.size() >= 2)
    run.education = education_groups(run.records, seed);
  else if (census)
    log_warning("fewer than 2 distinct education vectors; education groups not assigned");

  if (run.income_cuts && run.education) {
    try {
      run.income_education = chi_square_independence(income_education_table(run.records));
    } catch (const ValidationError& e) {
      log_warning(std::string("income x education test skipped: ") + e.what());
    }
  }
  return run;
}

std::vector<DiffTable> analyze_tables(const CohortRun& cohorts, std::span<const TopicSpec> specs, Facet facet,
                                      std::optional<Facet> within, bool pooled) {
  if (within && *within == facet) throw ValidationError("--within must differ from --facet");
  if (within) return nested_difference_tables(cohorts.records, specs, facet_spec(*within), facet_spec(facet), pooled);
  return {difference_table(cohorts.records, specs, facet_spec(facet), pooled)};
}

ArtifactWriter::ArtifactWriter(fs::path root) : root_(std::move(root)) {}

void ArtifactWriter::write(const std::string& relative, std::string_view contents) {
  const auto path = root_ / relative;
  fs::create_directories(path.parent_path());
  write_file(path.string(), contents);
  written_.push_back(relative);
  hashes_.emplace_back(relative, fnv1a_hex(contents));
}

void ArtifactWriter::finish() {
  const auto manifest = root_ / "manifest.json";
  std::map<std::string, std::string> entries;
  if (fs::is_regular_file(manifest)) {
    try {
      const auto j = json::parse(read_file(manifest.string()));
      for (auto it = j.at("artifacts").begin(); it != j.at("artifacts").end(); ++it)
        entries[it.key()] = it.value().get<std::string>();
    } catch (const json::exception&) {
      log_warning("existing manifest.json is unreadable; rewriting it");
    }
  }
  for (const auto& [rel, hash] : hashes_) entries[rel] = hash;
  ojson j;
  j["format"] = "topicforge-manifest";
  j["hash"] = "fnv1a64";
  j["artifacts"] = ojson::object();
  for (const auto& [rel, hash] : entries) j["artifacts"][rel] = hash;
  fs::create_directories(root_);
  write_file(manifest.string(), to_text(j));
}

std::string model_file(std::size_t k) { return "lda/model_k" + std::to_string(k) + ".json"; }

std::string cmd_preprocess(const RunConfig& c) {
  c.validate();
  const auto pc = prepare_corpus(c);
  ArtifactWriter w(c.output_dir());
  w.write("preprocess/corpus.jsonl", capture([&](std::ostream& o) { write_corpus(o, pc.docs); }));
  w.write("preprocess/vocab.tsv", capture([&](std::ostream& o) { pc.vocab.save(o); }));
  std::string phrases = "phrase\tcount\n";
  for (const auto& [gram, token] : pc.phrases.phrases) phrases += token + "\t" + std::to_string(pc.phrases.counts.at(gram)) + "\n";
  w.write("preprocess/phrases.tsv", phrases);
  std::string rejects = "line,reason\n";
  for (const auto& r : pc.rejects) rejects += csv_row({std::to_string(r.line), r.reason});
  w.write("preprocess/rejects.csv", rejects);
  w.finish();

  std::size_t empty = 0, tokens = 0;
  for (const auto& r : pc.records) empty += r.empty_text;
  for (const auto& d : pc.docs) tokens += d.length();
  ojson s;
  s["command"] = "preprocess";
  s["records"] = pc.records.size();
  s["rejected"] = pc.rejects.size();
  s["empty_text"] = empty;
  s["phrases"] = pc.phrases.phrases.size();
  s["vocab_size"] = pc.vocab.size();
  s["vocab_hash"] = pc.vocab.hash();
  s["tokens"] = tokens;
  s["artifacts"] = w.written();
  return s.dump();
}

std::string cmd_sweep(const RunConfig& c) {
  c.validate();
  const auto pc = prepare_corpus(c);
  SweepOptions o;
  o.k_min = c.sweep.k_min;
  o.k_max = c.sweep.k_max;
  o.runs_per_k = c.sweep.runs;
  o.base_seed = c.seed;
  o.lda = c.lda;
  if (c.sweep.iterations) o.lda.iterations = *c.sweep.iterations;
  if (c.sweep.burn_in) o.lda.burn_in = *c.sweep.burn_in;
  o.window_size = c.sweep.window;
  o.top_n = c.sweep.top_n;
  o.threads = c.threads;
  const auto streams = pc.streams();
  const auto curve = k_sweep(streams, pc.vocab.size(), o);
  ArtifactWriter w(c.output_dir());
  w.write(kCurveFile, capture([&](std::ostream& out) { write_curve_csv(out, curve); }));
  w.finish();

  ojson s;
  s["command"] = "sweep";
  std::optional<std::size_t> best;
  double best_cv = -1e300;
  for (const auto& p : curve.points)
    if (!p.failed && p.mean_cv > best_cv) {
      best_cv = p.mean_cv;
      best = p.k;
    }
  s["points"] = curve.points.size();
  s["argmax_k"] = best ? ojson(*best) : ojson(nullptr);
  s["failed"] = std::count_if(curve.points.begin(), curve.points.end(), [](const CoherencePoint& p) { return p.failed; });
  s["artifacts"] = w.written();
  return s.dump();
}

namespace {


ojson fit_and_write(const RunConfig& c, const PreparedCorpus& pc, const LdaConfig& lc, ArtifactWriter& w,
                    const std::string& prefix) {
  const auto streams = pc.streams();
  auto model = fit_lda(streams, pc.vocab.size(), lc);
  model.vocab_hash = pc.vocab.hash();
  const auto k = lc.k;

  std::string csv = "topic,rank,token,phi\n";
  std::string report;
  for (std::size_t t = 0; t < model.k(); ++t) {
    const auto top = top_words(model, t, c.analysis.top_words);
    report += "Topic " + std::to_string(t + 1) + ":";
    for (std::size_t r = 0; r < top.size(); ++r) {
      csv += csv_row({std::to_string(t + 1), std::to_string(r + 1), pc.vocab.token(top[r]), format_double(model.phi_at(t, top[r]))});
      report += (r ? ", " : " ") + pc.vocab.token(top[r]);
    }
    report += "\n";
  }
  w.write(prefix + model_file(k), capture([&](std::ostream& o) { save_model(o, model); }));
  w.write(prefix + "lda/topics_k" + std::to_string(k) + ".csv", csv);
  w.write(prefix + "lda/topics_k" + std::to_string(k) + ".txt", report);
  w.write(prefix + "preprocess/vocab.tsv", capture([&](std::ostream& o) { pc.vocab.save(o); }));

  ojson s;
  s["vocab_size"] = pc.vocab.size();
  s["vocab_hash"] = pc.vocab.hash();
  s["documents"] = pc.docs.size();
  s["perplexity"] = perplexity(model, streams);
  return s;
}

std::string partition_slug(const std::string& value) {
  std::string out;
  for (char ch : value) {
    const auto u = static_cast<unsigned char>(ch);
    out.push_back(std::isalnum(u) || ch == '-' ? static_cast<char>(std::tolower(u)) : '_');
  }
  return out.empty() ? "unspecified" : out;
}

}  // namespace

std::string cmd_fit(const RunConfig& c, std::size_t k, const std::optional<std::string>& partition_by) {
  c.validate();
  LdaConfig lc = c.lda;
  lc.k = k;
  lc.seed = c.seed;
  lc.validate();
  auto loaded = load_corpus(c.resolve(c.paths.corpus).string(), c.columns);
  for (const auto& r : loaded.rejects) log_warning("corpus line " + std::to_string(r.line) + " rejected: " + r.reason);

  ArtifactWriter w(c.output_dir());
  ojson s;
  s["command"] = "fit";
  s["k"] = k;
  if (!partition_by) {
    const auto pc = prepare_records(std::move(loaded.records), c);
    s.update(fit_and_write(c, pc, lc, w, ""));
  } else {
    std::map<std::string, std::vector<RawRecord>> groups;
    for (auto& r : loaded.records) {
      auto it = r.fields.find(*partition_by);
      if (it == r.fields.end()) throw ValidationError("--partition-by column '" + *partition_by + "' is not in the corpus");
      groups[it->second].push_back(std::move(r));
    }
    std::map<std::string, std::string> slugs;
    ojson parts = ojson::array();
    for (auto& [value, records] : groups) {
      const auto slug = partition_slug(value);
      if (!slugs.emplace(slug, value).second)
        throw ValidationError("partition values '" + slugs[slug] + "' and '" + value + "' map to the same directory");
      const auto pc = prepare_records(std::move(records), c);
      auto part = fit_and_write(c, pc, lc, w, "partitions/" + slug + "/");
      part["value"] = value;
      part["directory"] = "partitions/" + slug;
      parts.push_back(part);
    }
    s["partition_by"] = *partition_by;
    s["partitions"] = parts;
  }
  w.finish();
  s["artifacts"] = w.written();
  return s.dump();
}

namespace {

VectorStore require_vectors(const RunConfig& c) {
  if (!c.paths.vectors) throw ValidationError("this command needs paths.vectors");
  return load_vectors(c.resolve(*c.paths.vectors).string());
}

}  // namespace

std::string cmd_assign(const RunConfig& c) {
  c.validate();
  const auto store = require_vectors(c);
  auto specs = load_specs(c);
  const auto pc = prepare_corpus(c);
  const auto run = run_assignment(pc, store, std::move(specs), c.threads);
  const auto sentences = run.sentences();
  const auto docs = run.doc_topics();
  ArtifactWriter w(c.output_dir());
  w.write("assign/sentences.csv", capture([&](std::ostream& o) { write_sentence_csv(o, sentences); }));
  w.write("assign/doc_topics.csv", capture([&](std::ostream& o) { write_doc_topics_csv(o, docs); }));
  w.finish();

  std::size_t accepted = 0;
  for (const auto& s : sentences) accepted += s.accepted;
  ojson s;
  s["command"] = "assign";
  s["documents"] = docs.size();
  s["sentences_scored"] = sentences.size();
  s["sentences_accepted"] = accepted;
  ojson per = ojson::object();
  for (const auto& spec : run.specs) {
    std::size_t n = 0;
    for (const auto& d : docs) n += d.topics.count(spec.topic_id);
    per[std::to_string(spec.topic_id)] = n;
  }
  s["documents_per_topic"] = per;
  s["artifacts"] = w.written();
  return s.dump();
}

std::string cmd_analyze(const RunConfig& c, Facet facet, std::optional<Facet> within) {
  c.validate();
  if (within && *within == facet) throw ValidationError("--within must differ from --facet");
  const bool needs_census = facet == Facet::income || facet == Facet::education ||
                            (within && (*within == Facet::income || *within == Facet::education));
  if (needs_census && !c.paths.census) throw ValidationError("income and education facets need paths.census and paths.postal_map");
  const auto store = require_vectors(c);
  auto specs = load_specs(c);
  std::optional<CensusTable> census;
  std::optional<PostalMap> postal;
  if (c.paths.census) {
    census = load_census(c.resolve(*c.paths.census).string());
    postal = load_postal_map(c.resolve(*c.paths.postal_map).string());
  }
  const auto pc = prepare_corpus(c);
  const auto run = run_assignment(pc, store, std::move(specs), c.threads);
  const auto docs = run.doc_topics();
  const auto cohorts = build_cohorts(pc.records, docs, census ? &*census : nullptr, postal ? &*postal : nullptr, c.seed);
  const auto tables = analyze_tables(cohorts, run.specs, facet, within, c.analysis.pooled);

  ArtifactWriter w(c.output_dir());
  w.write("analyze/cohorts.csv", capture([&](std::ostream& o) { write_cohort_csv(o, cohorts.records); }));
  ojson rep;
  rep["total"] = cohorts.report.total;
  rep["joined"] = cohorts.report.joined;
  rep["international"] = cohorts.report.international;
  rep["missing_postal_code"] = cohorts.report.missing_postal_code;
  rep["unmapped_postal_code"] = cohorts.report.unmapped_postal_code;
  rep["unknown_da"] = cohorts.report.unknown_da;
  if (cohorts.income_cuts) rep["income_cuts"] = {{"q1", cohorts.income_cuts->q1}, {"q3", cohorts.income_cuts->q3}};
  if (cohorts.income_education) {
    const auto& t = *cohorts.income_education;
    rep["income_education_chi2"] = {{"statistic", t.statistic}, {"df", *t.df}, {"p_value", t.p_value},
                                    {"stars", stars_text(t.stars)}};
  }
  w.write("analyze/join_report.json", to_text(rep));

  const std::string stem = "analyze/table_" + std::string(to_string(facet)) +
                           (within ? "_within_" + std::string(to_string(*within)) : std::string());
  ojson summary_tables = ojson::array();
  for (std::size_t i = 0; i < tables.size(); ++i) {
    std::string name = stem;
    if (within) {
      std::string label = facet_spec(*within).groups[i].label;
      std::transform(label.begin(), label.end(), label.begin(), [](char ch) { return ch == ' ' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(ch))); });
      name += "_" + label;
    }
    w.write(name + ".csv", capture([&](std::ostream& o) { write_diff_table_csv(o, tables[i]); }));
    w.write(name + ".txt", format_diff_table(tables[i]));
    w.write(name + ".json", diff_table_json(tables[i]) + "\n");
    summary_tables.push_back(name);
  }
  w.finish();

  ojson s;
  s["command"] = "analyze";
  s["facet"] = to_string(facet);
  if (within) s["within"] = to_string(*within);
  s["tables"] = summary_tables;
  s["join"] = rep;
  s["artifacts"] = w.written();
  return s.dump();
}

std::string cmd_centers2d(const RunConfig& c) {
  c.validate();
  const auto store = require_vectors(c);
  auto specs = load_specs(c);
  resolve_centers(store, specs);
  std::vector<Vector> centers;
  for (const auto& s : specs) centers.push_back(*s.center);
  const auto proj = project_centers_2d(centers);
  std::string csv = "topic_id,topic,x,y\n";
  for (std::size_t i = 0; i < specs.size(); ++i)
    csv += csv_row({std::to_string(specs[i].topic_id), specs[i].name, format_double(proj.points[i][0]),
                    format_double(proj.points[i][1])});
  ArtifactWriter w(c.output_dir());
  w.write("centers2d.csv", csv);
  w.finish();
  ojson s;
  s["command"] = "centers2d";
  s["topics"] = specs.size();
  s["rank_deficient"] = proj.rank_deficient;
  s["singular_values"] = proj.singular_values;
  s["artifacts"] = w.written();
  return s.dump();
}

SynthSpec parse_synth_spec(std::string_view json_text) {
  SynthSpec spec;
  try {
    const json j = json::parse(json_text);
    reject_unknown(j, {"seed", "lda", "cohort"}, "synth spec");
    read_opt(j, "seed", spec.seed);
    if (j.contains("lda")) {
      const auto& l = j["lda"];
      reject_unknown(l, {"topics", "words_per_topic", "docs", "doc_length", "doc_concentration", "word_concentration"},
                     "synth lda");
      PlantedCorpusSpec p;
      read_opt(l, "topics", p.topics);
      read_opt(l, "words_per_topic", p.words_per_topic);
      read_opt(l, "docs", p.docs);
      read_opt(l, "doc_length", p.doc_length);
      read_opt(l, "doc_concentration", p.doc_concentration);
      read_opt(l, "word_concentration", p.word_concentration);
      p.seed = spec.seed;
      spec.lda = p;
    }
    if (j.contains("cohort")) {
      const auto& co = j["cohort"];
      reject_unknown(co,
                     {"per_group", "effects", "null_rate", "dim", "noise", "keywords_per_sentence", "filler_sentences",
                      "international_share", "das"},
                     "synth cohort");
      CohortSynthSpec s;
      read_opt(co, "per_group", s.per_group);
      read_opt(co, "null_rate", s.null_rate);
      read_opt(co, "dim", s.dim);
      read_opt(co, "noise", s.noise);
      read_opt(co, "keywords_per_sentence", s.keywords_per_sentence);
      read_opt(co, "filler_sentences", s.filler_sentences);
      read_opt(co, "international_share", s.international_share);
      read_opt(co, "das", s.das);
      if (co.contains("effects")) {
        s.effects.clear();
        for (const auto& e : co["effects"]) {
          reject_unknown(e, {"topic", "male", "female"}, "synth effect");
          s.effects.push_back(CohortEffect{e.at("topic").get<int>(), e.at("male").get<double>(), e.at("female").get<double>()});
        }
      }
      s.seed = spec.seed;
      spec.cohort = s;
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed synth spec: ") + e.what());
  }
  if (!spec.lda && !spec.cohort) throw ValidationError("synth spec needs an 'lda' or 'cohort' section");
  return spec;
}

std::string cmd_synth(const SynthSpec& spec, const fs::path& out_dir) {
  ojson s;
  s["command"] = "synth";
  ojson outputs = ojson::array();
  if (spec.lda) {
    const auto corpus = generate_planted_corpus(*spec.lda);
    ArtifactWriter w(out_dir / "lda");
    w.write("corpus.csv", planted_corpus_csv(corpus));
    RunConfig c;
    c.seed = spec.seed;
    c.paths.corpus = "corpus.csv";
    c.paths.output_dir = "out";
    c.preprocess.phrase_min_count = 0;
    c.lda.k = spec.lda->topics;
    c.sweep.k_min = 1;
    c.sweep.k_max = 10;
    w.write("config.json", run_config_json(c));
    ojson truth;
    truth["topics"] = spec.lda->topics;
    truth["words_per_topic"] = spec.lda->words_per_topic;
    std::vector<std::string> words;
    for (std::size_t i = 0; i < corpus.vocab_size; ++i) words.push_back(synthetic_word(i));
    truth["words"] = words;
    ojson phi = ojson::array();
    for (std::size_t t = 0; t < spec.lda->topics; ++t)
      phi.push_back(std::vector<double>(corpus.phi.begin() + static_cast<std::ptrdiff_t>(t * corpus.vocab_size),
                                        corpus.phi.begin() + static_cast<std::ptrdiff_t>((t + 1) * corpus.vocab_size)));
    truth["phi"] = phi;
    w.write("planted.json", truth.dump() + "\n");
    w.finish();
    outputs.push_back((out_dir / "lda").string());
  }
  if (spec.cohort) {
    const auto ds = generate_cohort_dataset(*spec.cohort);
    ArtifactWriter w(out_dir / "cohort");
    w.write("corpus.csv", records_csv(ds.records));
    w.write("vectors.txt", capture([&](std::ostream& o) { write_vectors(o, ds.store); }));
    w.write("topic_specs.json", topic_specs_json(ds.specs));
    w.write("census.csv", census_csv(ds.census));
    w.write("postal_to_da.csv", postal_map_csv(ds.postal));
    RunConfig c;
    c.seed = spec.seed;
    c.paths.corpus = "corpus.csv";
    c.paths.census = "census.csv";
    c.paths.postal_map = "postal_to_da.csv";
    c.paths.vectors = "vectors.txt";
    c.paths.topic_specs = "topic_specs.json";
    c.paths.output_dir = "out";
    c.columns.gender = "gender";
    c.columns.nationality = "nationality";
    c.columns.country = "country";
    c.columns.postal_code = "postal_code";
    w.write("config.json", run_config_json(c));
    ojson truth;
    truth["group_labels"] = {"Males", "Females"};
    truth["group_sizes"] = ds.group_sizes;
    ojson effects = ojson::array();
    for (const auto& e : spec.cohort->effects) effects.push_back({{"topic", e.topic_id}, {"male", e.rate_male}, {"female", e.rate_female}});
    truth["effects"] = effects;
    truth["null_rate"] = spec.cohort->null_rate;
    ojson planted = ojson::object();
    for (const auto& [topic, counts] : ds.planted) planted[std::to_string(topic)] = counts;
    truth["planted_counts"] = planted;
    w.write("planted.json", to_text(truth));
    w.finish();
    outputs.push_back((out_dir / "cohort").string());
  }
  s["outputs"] = outputs;
  return s.dump();
}

}  // namespace topicforge
