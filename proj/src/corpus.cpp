#include "topicforge/corpus.hpp"

#include "topicforge/csv.hpp"
#include "topicforge/error.hpp"
#include "topicforge/hash.hpp"
#include "topicforge/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace topicforge {

std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::male:
      return "male";
    case Gender::female:
      return "female";
    default:
      return "unspecified";
  }
}

std::string_view to_string(Nationality n) {
  return n == Nationality::domestic ? "domestic" : "international";
}

Gender parse_gender(std::string_view text) {
  const auto v = to_lower(trim(text));
  if (v == "male" || v == "m" || v == "man") return Gender::male;
  if (v == "female" || v == "f" || v == "woman") return Gender::female;
  return Gender::unspecified;
}

std::optional<Nationality> parse_nationality(std::string_view text) {
  const auto v = to_lower(trim(text));
  if (v == "domestic" || v == "canadian" || v == "canada" || v == "local") return Nationality::domestic;
  if (v == "international" || v == "intl" || v == "foreign") return Nationality::international;
  return std::nullopt;
}

LoadedCorpus parse_corpus(std::string_view csv_text, const ColumnSchema& schema) {
  const CsvTable table = parse_csv(csv_text);

  auto require = [&](const std::string& name) {
    auto col = table.column(name);
    if (!col) throw ValidationError("corpus is missing mapped column '" + name + "'");
    return *col;
  };
  auto optional_col = [&](const std::optional<std::string>& name) -> std::optional<std::size_t> {
    if (!name) return std::nullopt;
    return require(*name);
  };

  const auto id_col = require(schema.doc_id);
  const auto text_col = require(schema.response_text);
  const auto gender_col = optional_col(schema.gender);
  const auto nation_col = optional_col(schema.nationality);
  const auto country_col = optional_col(schema.country);
  const auto postal_col = optional_col(schema.postal_code);
  const auto program_col = optional_col(schema.program);
  const auto year_col = optional_col(schema.year);

  LoadedCorpus out;
  std::map<std::string, std::size_t> seen;
  std::set<std::string> duplicates;

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto line = table.lines[r];
    if (row.size() != table.header.size()) {
      out.rejects.push_back({line, "expected " + std::to_string(table.header.size()) + " fields, found " +
                                       std::to_string(row.size())});
      continue;
    }
    RawRecord rec;
    rec.doc_id = std::string(trim(row[id_col]));
    if (rec.doc_id.empty()) {
      out.rejects.push_back({line, "empty doc_id"});
      continue;
    }
    rec.response_text = row[text_col];
    rec.empty_text = trim(rec.response_text).empty();
    if (gender_col) rec.gender = parse_gender(row[*gender_col]);
    if (nation_col) {
      auto n = parse_nationality(row[*nation_col]);
      if (!n) {
        out.rejects.push_back({line, "unrecognized nationality '" + row[*nation_col] + "'"});
        continue;
      }
      rec.nationality = *n;
    }
    if (country_col) rec.country = std::string(trim(row[*country_col]));
    if (postal_col && !trim(row[*postal_col]).empty()) rec.postal_code = std::string(trim(row[*postal_col]));
    if (program_col && !trim(row[*program_col]).empty()) rec.program = std::string(trim(row[*program_col]));
    if (year_col && !trim(row[*year_col]).empty()) {
      try {
        rec.year = static_cast<int>(parse_int(row[*year_col], "year"));
      } catch (const Error& e) {
        out.rejects.push_back({line, e.what()});
        continue;
      }
    }
    for (std::size_t c = 0; c < table.header.size(); ++c) rec.fields[table.header[c]] = row[c];

    if (seen.count(rec.doc_id)) duplicates.insert(rec.doc_id);
    seen[rec.doc_id] = line;
    out.records.push_back(std::move(rec));
  }

  if (!duplicates.empty()) {
    std::string msg = "duplicate doc_id:";
    for (const auto& d : duplicates) msg += " " + d;
    throw ValidationError(msg);
  }
  return out;
}

LoadedCorpus load_corpus(const std::string& path, const ColumnSchema& schema) {
  return parse_corpus(read_file(path), schema);
}

// ---------------------------------------------------------------------------

namespace {

std::string join_phrase(std::span<const std::string> parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back('_');
    out += parts[i];
  }
  return out;
}

}  // namespace

Sentence PhraseTable::promote(const Sentence& tokens) const {
  if (phrases.empty()) return tokens;
  Sentence out;
  out.reserve(tokens.size());
  std::size_t i = 0;
  while (i < tokens.size()) {
    bool matched = false;
    for (std::size_t n = std::min(max_n, tokens.size() - i); n >= 2; --n) {
      std::vector<std::string> key(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
      if (auto it = phrases.find(key); it != phrases.end()) {
        out.push_back(it->second);
        i += n;
        matched = true;
        break;
      }
    }
    if (!matched) out.push_back(tokens[i++]);
  }
  return out;
}

Preprocessor::Preprocessor(PreprocessOptions options)
    : options_(std::move(options)), lemmatizer_(options_.lemma_exceptions) {}

bool Preprocessor::is_stopword(std::string_view token) const {
  return options_.stopwords.count(std::string(token)) > 0;
}

std::vector<Sentence> Preprocessor::surface_sentences(std::string_view text) const {
  std::vector<Sentence> out;
  for (const auto& s : segment_sentences(text, options_.abbreviations)) out.push_back(tokenize(s));
  return out;
}

PhraseTable Preprocessor::build_phrase_table(std::span<const RawRecord> records, std::size_t min_count,
                                             std::size_t max_n) const {
  PhraseTable table;
  table.min_count = min_count;
  table.max_n = std::clamp<std::size_t>(max_n, 2, 3);

  std::map<std::vector<std::string>, std::size_t> counts;
  for (const auto& rec : records) {
    for (const auto& sentence : surface_sentences(rec.response_text)) {
      for (std::size_t i = 0; i < sentence.size(); ++i) {
        if (is_stopword(sentence[i])) continue;
        for (std::size_t n = 2; n <= table.max_n && i + n <= sentence.size(); ++n) {
          if (is_stopword(sentence[i + n - 1])) continue;
          ++counts[std::vector<std::string>(sentence.begin() + static_cast<std::ptrdiff_t>(i),
                                            sentence.begin() + static_cast<std::ptrdiff_t>(i + n))];
        }
      }
    }
  }
  for (auto& [gram, count] : counts) {
    if (count >= min_count) {
      table.phrases.emplace(gram, join_phrase(gram));
      table.counts.emplace(gram, count);
    }
  }
  return table;
}

Sentence Preprocessor::preprocess_sentence(const Sentence& surface, const PhraseTable& phrases) const {
  Sentence out;
  for (const auto& token : phrases.promote(surface)) {
    if (is_compound(token)) {
      if (!is_stopword(token)) out.push_back(token);
      continue;
    }
    if (is_stopword(token)) continue;
    auto lemma = lemmatizer_.lemmatize(token);
    if (is_stopword(lemma)) continue;
    out.push_back(std::move(lemma));
  }
  return out;
}

TokenizedDoc Preprocessor::preprocess(const RawRecord& record, const PhraseTable& phrases) const {
  TokenizedDoc doc;
  doc.doc_id = record.doc_id;
  for (const auto& sentence : surface_sentences(record.response_text))
    doc.sentences.push_back(preprocess_sentence(sentence, phrases));
  return doc;
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::size_t> doc_freq)
    : tokens_(std::move(tokens)), doc_freq_(std::move(doc_freq)) {
  if (doc_freq_.size() != tokens_.size()) throw Error("vocabulary doc_freq size mismatch");
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second)
      throw Error("duplicate vocabulary token '" + tokens_[i] + "'");
  }
}

std::optional<TokenId> Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string Vocabulary::hash() const {
  Fnv1a h;
  for (const auto& t : tokens_) {
    h.update(t);
    h.update("\n");
  }
  return h.hex();
}

void Vocabulary::save(std::ostream& out) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << doc_freq_[i] << '\n';
}

Vocabulary Vocabulary::load(std::istream& in) {
  std::vector<std::string> tokens;
  std::vector<std::size_t> df;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("vocabulary line needs 'token<TAB>df'", line_no);
    tokens.push_back(line.substr(0, tab));
    df.push_back(static_cast<std::size_t>(parse_int(line.substr(tab + 1), "doc_freq")));
  }
  return Vocabulary(std::move(tokens), std::move(df));
}

Vocabulary build_vocabulary(std::span<const TokenizedDoc> docs, std::size_t min_df, double max_df_ratio) {
  std::map<std::string, std::size_t> df;
  for (const auto& doc : docs) {
    std::set<std::string_view> unique;
    for (const auto& s : doc.sentences)
      for (const auto& t : s) unique.insert(t);
    for (auto t : unique) ++df[std::string(t)];
  }
  const double max_df = max_df_ratio * static_cast<double>(docs.size());
  std::vector<std::string> tokens;
  std::vector<std::size_t> freqs;
  for (const auto& [token, count] : df) {
    if (count < min_df || static_cast<double>(count) > max_df) continue;
    tokens.push_back(token);
    freqs.push_back(count);
  }
  if (tokens.empty()) throw Error("vocabulary is empty after document-frequency filtering");
  return Vocabulary(std::move(tokens), std::move(freqs));
}

std::size_t PreprocessedDoc::length() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

std::vector<std::pair<TokenId, std::uint32_t>> make_bow(const std::vector<std::vector<TokenId>>& sentences) {
  std::map<TokenId, std::uint32_t> counts;
  for (const auto& s : sentences)
    for (auto id : s) ++counts[id];
  return {counts.begin(), counts.end()};
}

PreprocessedDoc encode(const TokenizedDoc& doc, const Vocabulary& vocab) {
  PreprocessedDoc out;
  out.doc_id = doc.doc_id;
  out.sentences.reserve(doc.sentences.size());
  for (const auto& s : doc.sentences) {
    std::vector<TokenId> ids;
    for (const auto& t : s)
      if (auto id = vocab.id(t)) ids.push_back(*id);
    out.sentences.push_back(std::move(ids));
  }
  out.bow = make_bow(out.sentences);
  return out;
}

std::vector<TokenId> token_stream(const PreprocessedDoc& doc) {
  std::vector<TokenId> out;
  out.reserve(doc.length());
  for (const auto& s : doc.sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::vector<std::vector<TokenId>> token_streams(std::span<const PreprocessedDoc> docs) {
  std::vector<std::vector<TokenId>> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(token_stream(d));
  return out;
}

void write_corpus(std::ostream& out, std::span<const PreprocessedDoc> docs) {
  for (const auto& doc : docs) {
    nlohmann::ordered_json j;
    j["doc_id"] = doc.doc_id;
    j["sentences"] = doc.sentences;
    auto bow = nlohmann::json::array();
    for (auto [id, count] : doc.bow) bow.push_back({id, count});
    j["bow"] = std::move(bow);
    out << j.dump() << '\n';
  }
}

std::vector<PreprocessedDoc> read_corpus(std::istream& in, std::optional<std::size_t> vocab_size) {
  std::vector<PreprocessedDoc> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    PreprocessedDoc doc;
    try {
      auto j = nlohmann::json::parse(line);
      doc.doc_id = j.at("doc_id").get<std::string>();
      doc.sentences = j.at("sentences").get<std::vector<std::vector<TokenId>>>();
      for (const auto& pair : j.at("bow")) doc.bow.emplace_back(pair.at(0).get<TokenId>(), pair.at(1).get<std::uint32_t>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed corpus document: ") + e.what(), line_no);
    }
    if (doc.bow != make_bow(doc.sentences)) throw ParseError("bow does not match sentences", line_no);
    if (vocab_size) {
      for (auto [id, count] : doc.bow)
        if (id >= *vocab_size) throw ParseError("token id " + std::to_string(id) + " outside vocabulary", line_no);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

void save_corpus(const std::string& path, std::span<const PreprocessedDoc> docs) {
  std::ostringstream ss;
  write_corpus(ss, docs);
  write_file(path, ss.str());
}

std::vector<PreprocessedDoc> load_corpus_file(const std::string& path, std::optional<std::size_t> vocab_size) {
  std::istringstream in(read_file(path));
  return read_corpus(in, vocab_size);
}

}  // namespace topicforge
