#include "topicforge/service.hpp"

#include "topicforge/error.hpp"
#include "topicforge/hash.hpp"
#include "topicforge/io.hpp"
#include "topicforge/log.hpp"
#include "topicforge/pipeline.hpp"
#include "topicforge/random.hpp"
#include "topicforge/text.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <shared_mutex>
#include <sstream>
#include <thread>

namespace topicforge {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

struct HttpError {
  int status;
  std::string message;
  std::map<std::string, std::string> fields;
};

[[noreturn]] void fail(int status, std::string message, std::map<std::string, std::string> fields = {}) {
  throw HttpError{status, std::move(message), std::move(fields)};
}

HttpResponse reply(int status, const ojson& body) { return {status, body.dump() + "\n", "application/json"}; }

HttpResponse error_reply(const HttpError& e) {
  ojson err;
  err["status"] = e.status;
  err["message"] = e.message;
  if (!e.fields.empty()) {
    err["fields"] = ojson::object();
    for (const auto& [k, v] : e.fields) err["fields"][k] = v;
  }
  return reply(e.status, ojson{{"error", err}});
}

std::optional<std::string> query_value(const QueryParams& q, const std::string& key) {
  auto it = q.find(key);
  if (it == q.end()) return std::nullopt;
  return it->second;
}

long long query_int(const QueryParams& q, const std::string& key, long long fallback, long long lo, long long hi) {
  auto v = query_value(q, key);
  if (!v) return fallback;
  long long out = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size() || out < lo || out > hi)
    fail(422, "invalid query parameter", {{key, "expected an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]"}});
  return out;
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = i;
    while (j < path.size() && path[j] != '/') ++j;
    if (j > i) out.emplace_back(path.substr(i, j - i));
    i = j;
  }
  return out;
}

bool valid_project_id(const std::string& id) {
  if (id.empty() || id.size() > 128 || id[0] == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'; });
}

int parse_topic_id(const std::string& s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) fail(404, "unknown topic '" + s + "'");
  return v;
}

json parse_body(std::string_view body) {
  try {
    auto j = json::parse(body);
    if (!j.is_object()) fail(422, "request body must be a JSON object", {{"body", "expected an object"}});
    return j;
  } catch (const json::parse_error&) {
    fail(422, "request body is not valid JSON", {{"body", "malformed JSON"}});
  }
}

ojson spec_json(const TopicSpec& s) {
  return ojson{{"topic_id", s.topic_id}, {"name", s.name}, {"keywords", s.keywords}, {"threshold", s.threshold}};
}

}  // namespace

// One loaded project. Immutable inputs are read without locks; specs,
// snapshots and the k selection sit behind `state`.
class Project {
 public:
  Project(std::string id_, const fs::path& dir_, unsigned threads_) : id(std::move(id_)), dir(dir_), threads(threads_) {
    cfg = load_run_config(dir / "config.json");
    cfg.threads = threads;
    cfg.validate();
    if (!cfg.paths.vectors) throw ValidationError("project config needs paths.vectors");
    store = load_vectors(cfg.resolve(*cfg.paths.vectors).string());
    if (cfg.paths.census) {
      census = load_census(cfg.resolve(*cfg.paths.census).string());
      postal = load_postal_map(cfg.resolve(*cfg.paths.postal_map).string());
    }
    corpus_hash = fnv1a_hex(read_file(cfg.resolve(cfg.paths.corpus).string()));
    corpus = prepare_corpus(cfg);
    const auto options = make_preprocess_options(cfg);
    for (std::size_t d = 0; d < corpus.records.size(); ++d) {
      auto texts = segment_sentences(corpus.records[d].response_text, options.abbreviations);
      const auto& sentences = corpus.tokenized[d].sentences;
      if (texts.size() != sentences.size()) texts.assign(sentences.size(), std::string());
      for (std::size_t s = 0; s < sentences.size(); ++s) {
        auto v = sentence_vector(store, sentences[s]);
        if (v) pool.push_back({d, s, std::move(texts[s]), std::move(*v)});
      }
    }
    base_specs = load_specs(cfg);
    replay();
    if (fs::is_directory(dir / "snapshots"))
      for (const auto& e : fs::directory_iterator(dir / "snapshots"))
        if (fs::is_regular_file(e.path() / "snapshot.json")) snapshots.push_back(e.path().filename().string());
    std::sort(snapshots.begin(), snapshots.end());
    if (fs::is_regular_file(dir / "selection.json"))
      chosen_k = json::parse(read_file((dir / "selection.json").string())).at("k").get<std::size_t>();
  }

  // Rebuilds specs from the base file plus every logged edit.
  void replay() {
    specs = base_specs;
    version = 0;
    std::ifstream in(dir / "specs_log.jsonl");
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (trim(line).empty()) continue;
      json e;
      try {
        e = json::parse(line);
      } catch (const json::parse_error&) {
        throw ParseError("malformed spec log entry", n);
      }
      apply(specs, e);
      version = e.at("version").get<std::size_t>();
    }
    resolve_centers(store, specs);
  }

  static void apply(std::vector<TopicSpec>& list, const json& e) {
    const int topic = e.at("topic_id").get<int>();
    auto it = std::find_if(list.begin(), list.end(), [&](const TopicSpec& s) { return s.topic_id == topic; });
    if (e.at("op") == "delete") {
      if (it != list.end()) list.erase(it);
      return;
    }
    TopicSpec s;
    s.topic_id = topic;
    s.name = e.at("name").get<std::string>();
    s.keywords = e.at("keywords").get<std::vector<std::string>>();
    s.threshold = e.at("threshold").get<double>();
    if (it != list.end())
      *it = std::move(s);
    else {
      list.push_back(std::move(s));
      std::sort(list.begin(), list.end(), [](const TopicSpec& a, const TopicSpec& b) { return a.topic_id < b.topic_id; });
    }
  }

  void append_log(const ojson& entry) {
    std::ofstream out(dir / "specs_log.jsonl", std::ios::app | std::ios::binary);
    out << entry.dump() << "\n";
    if (!out) fail(500, "could not append to the spec log");
  }

  const TopicSpec& find_spec(int topic) const {
    for (const auto& s : specs)
      if (s.topic_id == topic) return s;
    fail(404, "unknown topic " + std::to_string(topic));
  }

  struct Snapshot {
    std::string id;
    std::size_t spec_version = 0;
    std::vector<TopicSpec> specs;
    std::vector<DocTopics> docs;
  };

  std::shared_ptr<const Snapshot> load_snapshot(const std::string& sid) {
    std::lock_guard lock(cache_mutex);
    if (auto it = snapshot_cache.find(sid); it != snapshot_cache.end()) return it->second;
    const auto sdir = dir / "snapshots" / sid;
    auto snap = std::make_shared<Snapshot>();
    snap->id = sid;
    const auto meta = json::parse(read_file((sdir / "snapshot.json").string()));
    snap->spec_version = meta.at("spec_version").get<std::size_t>();
    snap->specs = load_topic_specs((sdir / "topic_specs.json").string());
    snap->docs = read_doc_topics_csv(read_file((sdir / "doc_topics.csv").string()));
    snapshot_cache[sid] = snap;
    return snap;
  }

  std::string id;
  fs::path dir;
  unsigned threads;
  RunConfig cfg;
  VectorStore store;
  std::optional<CensusTable> census;
  std::optional<PostalMap> postal;
  std::string corpus_hash;
  PreparedCorpus corpus;

  struct PoolSentence {
    std::size_t doc;
    std::size_t sentence;
    std::string text;
    Vector vec;
  };
  std::vector<PoolSentence> pool;  // sentences that have a vector
  std::vector<TopicSpec> base_specs;

  std::shared_mutex state;
  std::vector<TopicSpec> specs;
  std::size_t version = 0;
  std::vector<std::string> snapshots;
  std::optional<std::size_t> chosen_k;

  std::mutex recompute;

  std::mutex cache_mutex;
  std::map<std::string, std::shared_ptr<const Snapshot>> snapshot_cache;
  std::map<std::string, std::string> tables_cache;
};

CurationService::CurationService(ServiceOptions options) : options_(std::move(options)) {}
CurationService::~CurationService() = default;

std::shared_ptr<Project> CurationService::project(const std::string& id) {
  if (!valid_project_id(id)) fail(404, "unknown project '" + id + "'");
  std::lock_guard lock(projects_mutex_);
  if (auto it = projects_.find(id); it != projects_.end()) return it->second;
  const auto dir = options_.data_dir / id;
  if (!fs::is_regular_file(dir / "config.json")) fail(404, "unknown project '" + id + "'");
  try {
    auto p = std::make_shared<Project>(id, dir, options_.threads);
    projects_[id] = p;
    return p;
  } catch (const ValidationError& e) {
    fail(500, "project '" + id + "' failed to load: " + e.what());
  } catch (const Error& e) {
    fail(500, "project '" + id + "' failed to load: " + e.what());
  }
}

namespace {

ojson project_summary(Project& p) {
  std::shared_lock lock(p.state);
  ojson j;
  j["project_id"] = p.id;
  j["corpus_hash"] = p.corpus_hash;
  j["documents"] = p.corpus.records.size();
  j["vocab_size"] = p.corpus.vocab.size();
  j["spec_version"] = p.version;
  j["snapshot_id"] = p.snapshots.empty() ? ojson(nullptr) : ojson(p.snapshots.back());
  j["chosen_k"] = p.chosen_k ? ojson(*p.chosen_k) : ojson(nullptr);
  std::vector<std::size_t> ks;
  const auto lda_dir = p.cfg.output_dir() / "lda";
  if (fs::is_directory(lda_dir))
    for (const auto& e : fs::directory_iterator(lda_dir)) {
      const auto name = e.path().filename().string();
      unsigned k = 0;
      char tail = 0;
      if (std::sscanf(name.c_str(), "model_k%u.jso%c", &k, &tail) == 2 && tail == 'n') ks.push_back(k);
    }
  std::sort(ks.begin(), ks.end());
  j["lda_models"] = ks;
  return j;
}

CoherenceCurve read_curve(Project& p) {
  const auto path = p.cfg.output_dir() / kCurveFile;
  if (!fs::is_regular_file(path)) fail(404, "no coherence curve; run the sweep command first");
  std::ifstream in(path);
  return read_curve_csv(in);
}

HttpResponse get_coherence(Project& p) {
  const auto curve = read_curve(p);
  ojson j;
  j["project_id"] = p.id;
  ojson pts = ojson::array();
  for (const auto& pt : curve.points) {
    ojson o{{"k", pt.k}, {"mean_cv", pt.mean_cv}, {"std_cv", pt.std_cv}, {"runs_ok", pt.runs_ok}, {"failed", pt.failed}};
    if (pt.failed) o["error"] = pt.error;
    pts.push_back(o);
  }
  j["points"] = pts;
  std::shared_lock lock(p.state);
  j["chosen_k"] = p.chosen_k ? ojson(*p.chosen_k) : ojson(nullptr);
  return reply(200, j);
}

HttpResponse put_selection(Project& p, std::string_view body) {
  const auto b = parse_body(body);
  if (!b.contains("k") || !b["k"].is_number_unsigned()) fail(422, "invalid selection", {{"k", "expected a positive integer"}});
  const auto k = b["k"].get<std::size_t>();
  const auto curve = read_curve(p);
  const bool known = std::any_of(curve.points.begin(), curve.points.end(), [&](const CoherencePoint& pt) { return pt.k == k; });
  if (!known) fail(422, "invalid selection", {{"k", "k = " + std::to_string(k) + " is not on the coherence curve"}});
  std::unique_lock lock(p.state);
  write_file((p.dir / "selection.json").string(), ojson{{"k", k}}.dump() + "\n");
  p.chosen_k = k;
  return reply(200, ojson{{"chosen_k", k}});
}

HttpResponse get_lda_topics(Project& p, const std::string& k_text, const QueryParams& q) {
  std::size_t k = 0;
  auto [ptr, ec] = std::from_chars(k_text.data(), k_text.data() + k_text.size(), k);
  if (ec != std::errc() || ptr != k_text.data() + k_text.size() || k == 0) fail(404, "unknown model k = " + k_text);
  const auto n = static_cast<std::size_t>(query_int(q, "n", 10, 1, 1000));
  const auto path = p.cfg.output_dir() / model_file(k);
  if (!fs::is_regular_file(path)) fail(404, "no fitted model for k = " + std::to_string(k));
  LdaModel model;
  try {
    model = load_model_file(path.string(), p.corpus.vocab.hash());
  } catch (const Error& e) {
    fail(409, std::string("model does not match the project corpus: ") + e.what());
  }
  ojson j;
  j["k"] = k;
  ojson topics = ojson::array();
  for (std::size_t t = 0; t < model.k(); ++t) {
    ojson words = ojson::array();
    for (auto w : top_words(model, t, n)) words.push_back({{"token", p.corpus.vocab.token(w)}, {"phi", model.phi_at(t, w)}});
    topics.push_back({{"topic", t + 1}, {"words", words}});
  }
  j["topics"] = topics;
  return reply(200, j);
}

HttpResponse get_specs(Project& p) {
  std::shared_lock lock(p.state);
  ojson list = ojson::array();
  for (const auto& s : p.specs) list.push_back(spec_json(s));
  return reply(200, ojson{{"version", p.version}, {"topics", list}});
}

HttpResponse get_spec(Project& p, int topic) {
  std::shared_lock lock(p.state);
  auto j = spec_json(p.find_spec(topic));
  j["version"] = p.version;
  return reply(200, j);
}

// Field-level validation shared by PUT and preview drafts.
std::vector<std::string> check_keywords(const Project& p, const json& v, std::map<std::string, std::string>& errors) {
  std::vector<std::string> out;
  if (!v.is_array()) {
    errors["keywords"] = "expected an array of strings";
    return out;
  }
  for (const auto& k : v) {
    if (!k.is_string() || trim(k.get<std::string>()).empty()) {
      errors["keywords"] = "keywords must be non-empty strings";
      return out;
    }
    out.emplace_back(trim(k.get<std::string>()));
  }
  if (out.empty()) {
    errors["keywords"] = "at least one keyword is required";
    return out;
  }
  std::string missing;
  for (const auto& k : out)
    if (p.store.lookup(k).empty()) missing += (missing.empty() ? "" : ", ") + k;
  if (!missing.empty()) errors["keywords"] = "no vector for: " + missing;
  return out;
}

std::optional<double> check_threshold(const json& v, std::map<std::string, std::string>& errors) {
  if (!v.is_number()) {
    errors["threshold"] = "expected a number";
    return std::nullopt;
  }
  const double t = v.get<double>();
  if (!(t > -1.0 && t < 1.0)) {
    errors["threshold"] = "threshold must lie in (-1, 1)";
    return std::nullopt;
  }
  return t;
}

HttpResponse put_spec(Project& p, int topic, std::string_view body) {
  const auto b = parse_body(body);
  std::map<std::string, std::string> errors;
  for (auto it = b.begin(); it != b.end(); ++it)
    if (it.key() != "keywords" && it.key() != "threshold" && it.key() != "name" && it.key() != "expected_version")
      errors[it.key()] = "unknown field";
  std::vector<std::string> keywords;
  std::optional<double> threshold;
  if (!b.contains("keywords"))
    errors["keywords"] = "required";
  else
    keywords = check_keywords(p, b["keywords"], errors);
  if (!b.contains("threshold"))
    errors["threshold"] = "required";
  else
    threshold = check_threshold(b["threshold"], errors);
  if (b.contains("name") && (!b["name"].is_string() || trim(b["name"].get<std::string>()).empty()))
    errors["name"] = "expected a non-empty string";

  std::unique_lock lock(p.state);
  if (b.contains("expected_version")) {
    if (!b["expected_version"].is_number_unsigned())
      errors["expected_version"] = "expected a non-negative integer";
    else if (b["expected_version"].get<std::size_t>() != p.version)
      fail(409, "spec version is " + std::to_string(p.version) + ", not " + std::to_string(b["expected_version"].get<std::size_t>()));
  }
  auto it = std::find_if(p.specs.begin(), p.specs.end(), [&](const TopicSpec& s) { return s.topic_id == topic; });
  if (it == p.specs.end() && !b.contains("name")) errors["name"] = "required when creating a topic";
  if (!errors.empty()) fail(422, "invalid topic spec", errors);

  TopicSpec draft;
  draft.topic_id = topic;
  draft.name = b.contains("name") ? std::string(trim(b["name"].get<std::string>())) : it->name;
  draft.keywords = keywords;
  draft.threshold = *threshold;
  try {
    topic_center(p.store, draft);
  } catch (const Error& e) {
    fail(422, "invalid topic spec", {{"keywords", e.what()}});
  }

  ojson entry;
  entry["version"] = p.version + 1;
  entry["op"] = "put";
  entry["topic_id"] = topic;
  entry["name"] = draft.name;
  entry["keywords"] = draft.keywords;
  entry["threshold"] = draft.threshold;
  p.append_log(entry);
  ++p.version;
  if (it != p.specs.end())
    *it = std::move(draft);
  else {
    p.specs.push_back(std::move(draft));
    std::sort(p.specs.begin(), p.specs.end(), [](const TopicSpec& a, const TopicSpec& c) { return a.topic_id < c.topic_id; });
  }
  auto j = spec_json(p.find_spec(topic));
  j["version"] = p.version;
  return reply(200, j);
}

HttpResponse delete_spec(Project& p, int topic) {
  std::unique_lock lock(p.state);
  p.find_spec(topic);
  if (p.specs.size() == 1) fail(422, "cannot delete the last topic", {{"topic_id", "at least one topic must remain"}});
  ojson entry{{"version", p.version + 1}, {"op", "delete"}, {"topic_id", topic}};
  p.append_log(entry);
  ++p.version;
  p.specs.erase(std::find_if(p.specs.begin(), p.specs.end(), [&](const TopicSpec& s) { return s.topic_id == topic; }));
  return reply(200, ojson{{"deleted", topic}, {"version", p.version}});
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i <= s.size()) {
    auto j = s.find(',', i);
    if (j == std::string::npos) j = s.size();
    out.push_back(s.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

HttpResponse get_preview(Project& p, int topic, const QueryParams& q) {
  const auto n = static_cast<std::size_t>(query_int(q, "sample", 20, 1, 100000));
  const auto seed = static_cast<std::uint64_t>(query_int(q, "seed", 0, 0, std::numeric_limits<long long>::max()));
  TopicSpec spec;
  std::size_t version = 0;
  {
    std::shared_lock lock(p.state);
    spec = p.find_spec(topic);
    version = p.version;
  }
  bool draft = false;
  std::map<std::string, std::string> errors;
  if (auto kw = query_value(q, "keywords")) {
    draft = true;
    spec.keywords = check_keywords(p, json(split_list(*kw)), errors);
    spec.center.reset();
  }
  if (auto th = query_value(q, "threshold")) {
    draft = true;
    try {
      if (auto t = check_threshold(json(parse_double(*th, "threshold")), errors)) spec.threshold = *t;
    } catch (const Error&) {
      errors["threshold"] = "expected a number";
    }
  }
  if (!errors.empty()) fail(422, "invalid draft", errors);
  Vector center;
  try {
    center = topic_center(p.store, spec);
  } catch (const Error& e) {
    fail(422, "invalid draft", {{"keywords", e.what()}});
  }

  std::vector<std::size_t> idx(p.pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(std::min(n, idx.size()));
  std::vector<std::pair<double, std::size_t>> scored;
  for (auto i : idx) scored.emplace_back(cosine_similarity(p.pool[i].vec, center), i);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });

  ojson j;
  j["topic_id"] = spec.topic_id;
  j["name"] = spec.name;
  j["keywords"] = spec.keywords;
  j["threshold"] = spec.threshold;
  j["draft"] = draft;
  j["spec_version"] = version;
  j["seed"] = seed;
  ojson items = ojson::array();
  for (const auto& [sim, i] : scored) {
    const auto& s = p.pool[i];
    items.push_back({{"doc_id", p.corpus.records[s.doc].doc_id},
                     {"sentence_index", s.sentence},
                     {"text", s.text},
                     {"tokens", p.corpus.tokenized[s.doc].sentences[s.sentence]},
                     {"similarity", sim},
                     {"accepted", sim >= spec.threshold}});
  }
  j["sentences"] = items;
  return reply(200, j);
}

std::string snapshot_name(std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06zu", n);
  return buf;
}

HttpResponse post_assignments(Project& p, const ServiceOptions& options) {
  std::unique_lock writer(p.recompute, std::try_to_lock);
  if (!writer.owns_lock()) fail(409, "a recompute is already running");
  std::vector<TopicSpec> specs;
  std::size_t version = 0;
  std::size_t next = 0;
  {
    std::shared_lock lock(p.state);
    specs = p.specs;
    version = p.version;
    next = p.snapshots.size() + 1;
  }
  const auto run = run_assignment(p.corpus, p.store, specs, p.threads);
  if (options.recompute_delay.count() > 0) std::this_thread::sleep_for(options.recompute_delay);
  const auto sentences = run.sentences();
  const auto docs = run.doc_topics();
  const auto sid = snapshot_name(next);
  ArtifactWriter w(p.dir / "snapshots" / sid);
  std::ostringstream sc, dc;
  write_sentence_csv(sc, sentences);
  write_doc_topics_csv(dc, docs);
  w.write("sentences.csv", sc.str());
  w.write("doc_topics.csv", dc.str());
  w.write("topic_specs.json", topic_specs_json(run.specs));
  std::size_t accepted = 0;
  for (const auto& s : sentences) accepted += s.accepted;
  ojson meta{{"id", sid}, {"spec_version", version}, {"corpus_hash", p.corpus_hash}, {"documents", docs.size()},
             {"sentences_scored", sentences.size()}, {"sentences_accepted", accepted}};
  w.write("snapshot.json", meta.dump(2) + "\n");
  w.finish();
  {
    std::unique_lock lock(p.state);
    p.snapshots.push_back(sid);
  }
  ojson out = meta;
  out["snapshot_id"] = sid;
  return reply(201, out);
}

HttpResponse get_assignments(Project& p) {
  std::shared_lock lock(p.state);
  if (p.snapshots.empty()) fail(404, "no assignment snapshot yet");
  auto meta = ojson::parse(read_file((p.dir / "snapshots" / p.snapshots.back() / "snapshot.json").string()));
  meta["snapshot_id"] = p.snapshots.back();
  meta["snapshots"] = p.snapshots;
  return reply(200, meta);
}

HttpResponse get_tables(Project& p, const QueryParams& q) {
  const auto facet_name = query_value(q, "facet");
  std::map<std::string, std::string> errors;
  std::optional<Facet> facet, within;
  if (!facet_name)
    errors["facet"] = "required";
  else if (!(facet = parse_facet(*facet_name)))
    errors["facet"] = "expected gender, nationality, income or education";
  if (auto w = query_value(q, "within"); w && !w->empty()) {
    if (!(within = parse_facet(*w)))
      errors["within"] = "expected gender, nationality, income or education";
    else if (facet && *within == *facet)
      errors["within"] = "must differ from facet";
  }
  if (!errors.empty()) fail(422, "invalid table request", errors);
  const bool needs_census = *facet == Facet::income || *facet == Facet::education ||
                            (within && (*within == Facet::income || *within == Facet::education));
  if (needs_census && !p.census) fail(422, "project has no census data", {{"facet", "income and education need census data"}});

  std::string sid;
  {
    std::shared_lock lock(p.state);
    if (auto s = query_value(q, "snapshot")) {
      if (std::find(p.snapshots.begin(), p.snapshots.end(), *s) == p.snapshots.end()) fail(404, "unknown snapshot '" + *s + "'");
      sid = *s;
    } else {
      if (p.snapshots.empty()) fail(404, "no assignment snapshot yet; POST assignments first");
      sid = p.snapshots.back();
    }
  }
  const std::string key = sid + "|" + std::string(to_string(*facet)) + "|" + (within ? std::string(to_string(*within)) : "");
  {
    std::lock_guard lock(p.cache_mutex);
    if (auto it = p.tables_cache.find(key); it != p.tables_cache.end()) return {200, it->second, "application/json"};
  }
  const auto snap = p.load_snapshot(sid);
  const auto cohorts = build_cohorts(p.corpus.records, snap->docs, p.census ? &*p.census : nullptr,
                                     p.postal ? &*p.postal : nullptr, p.cfg.seed);
  std::vector<DiffTable> tables;
  try {
    tables = analyze_tables(cohorts, snap->specs, *facet, within, p.cfg.analysis.pooled);
  } catch (const ValidationError& e) {
    fail(422, e.what(), {{"facet", e.what()}});
  }
  ojson j;
  j["snapshot_id"] = sid;
  j["spec_version"] = snap->spec_version;
  j["facet"] = to_string(*facet);
  j["within"] = within ? ojson(std::string(to_string(*within))) : ojson(nullptr);
  ojson arr = ojson::array();
  for (const auto& t : tables) arr.push_back(ojson::parse(diff_table_json(t)));
  j["tables"] = arr;
  j["legend"] = kStarLegend;
  auto text = j.dump() + "\n";
  std::lock_guard lock(p.cache_mutex);
  auto [it, inserted] = p.tables_cache.emplace(key, std::move(text));
  return {200, it->second, "application/json"};
}

HttpResponse get_centers2d(Project& p) {
  std::vector<TopicSpec> specs;
  std::size_t version = 0;
  {
    std::shared_lock lock(p.state);
    specs = p.specs;
    version = p.version;
  }
  std::vector<Vector> centers;
  for (auto& s : specs) centers.push_back(topic_center(p.store, s));
  Projection2d proj;
  try {
    proj = project_centers_2d(centers);
  } catch (const ValidationError& e) {
    fail(422, e.what());
  }
  ojson pts = ojson::array();
  for (std::size_t i = 0; i < specs.size(); ++i)
    pts.push_back({{"topic_id", specs[i].topic_id}, {"topic", specs[i].name}, {"x", proj.points[i][0]}, {"y", proj.points[i][1]}});
  return reply(200, ojson{{"spec_version", version}, {"rank_deficient", proj.rank_deficient},
                          {"singular_values", proj.singular_values}, {"points", pts}});
}

}  // namespace

HttpResponse CurationService::handle(std::string_view method, std::string_view path, const QueryParams& query,
                                     std::string_view body) {
  try {
    const auto seg = split_path(path);
    if (seg.empty() || seg[0] != "v1") fail(404, "not found");
    const bool get = method == "GET", put = method == "PUT", post = method == "POST", del = method == "DELETE";
    if (seg.size() == 2 && seg[1] == "health" && get) return reply(200, ojson{{"status", "ok"}});
    if (seg.size() < 2 || seg[1] != "projects") fail(404, "not found");
    if (seg.size() == 2 && get) {
      std::vector<std::string> ids;
      if (fs::is_directory(options_.data_dir))
        for (const auto& e : fs::directory_iterator(options_.data_dir))
          if (fs::is_regular_file(e.path() / "config.json") && valid_project_id(e.path().filename().string()))
            ids.push_back(e.path().filename().string());
      std::sort(ids.begin(), ids.end());
      return reply(200, ojson{{"projects", ids}});
    }
    auto p = project(seg[2]);
    const auto n = seg.size();
    auto method_not_allowed = [] { fail(405, "method not allowed"); };
    if (n == 3) return get ? reply(200, project_summary(*p)) : (method_not_allowed(), HttpResponse{});
    const auto& r = seg[3];
    if (r == "coherence") {
      if (n == 4 && get) return get_coherence(*p);
      if (n == 5 && seg[4] == "selection" && put) return put_selection(*p, body);
    } else if (r == "lda" && n == 6 && seg[5] == "topics") {
      if (get) return get_lda_topics(*p, seg[4], query);
    } else if (r == "specs") {
      if (n == 4 && get) return get_specs(*p);
      if (n >= 5) {
        const int topic = parse_topic_id(seg[4]);
        if (n == 5 && get) return get_spec(*p, topic);
        if (n == 5 && put) return put_spec(*p, topic, body);
        if (n == 5 && del) return delete_spec(*p, topic);
        if (n == 6 && seg[5] == "preview" && get) return get_preview(*p, topic, query);
      }
    } else if (r == "assignments" && n == 4) {
      if (post) return post_assignments(*p, options_);
      if (get) return get_assignments(*p);
    } else if (r == "tables" && n == 4) {
      if (get) return get_tables(*p, query);
    } else if (r == "centers2d" && n == 4) {
      if (get) return get_centers2d(*p);
    } else {
      fail(404, "not found");
    }
    if (!get && !put && !post && !del) fail(405, "method not allowed");
    fail(404, "not found");
  } catch (const HttpError& e) {
    return error_reply(e);
  } catch (const ValidationError& e) {
    return error_reply({422, e.what(), {}});
  } catch (const std::exception& e) {
    log_warning(std::string("request failed: ") + e.what());
    return error_reply({500, e.what(), {}});
  }
}

std::pair<std::string, int> parse_listen_address(std::string_view text) {
  std::string host = "127.0.0.1";
  std::string_view port = text;
  if (auto colon = text.rfind(':'); colon != std::string_view::npos) {
    host = std::string(text.substr(0, colon));
    port = text.substr(colon + 1);
    if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
    if (host.empty()) host = "0.0.0.0";
  }
  int p = -1;
  auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), p);
  if (ec != std::errc() || ptr != port.data() + port.size() || p < 0 || p > 65535)
    throw ValidationError("invalid listen address '" + std::string(text) + "'");
  return {host, p};
}

struct HttpServer::Impl {
  CurationService& service;
  httplib::Server server;
  explicit Impl(CurationService& s) : service(s) {}
};

HttpServer::HttpServer(CurationService& service) : impl_(std::make_unique<Impl>(service)) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    QueryParams q(req.params.begin(), req.params.end());
    const auto r = impl_->service.handle(req.method, req.path, q, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  impl_->server.Get(".*", handler);
  impl_->server.Put(".*", handler);
  impl_->server.Post(".*", handler);
  impl_->server.Delete(".*", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("could not bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw Error("could not bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace topicforge
