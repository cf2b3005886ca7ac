#pragma once

#include "topicforge/text.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace topicforge {

enum class Gender { male, female, unspecified };
enum class Nationality { domestic, international };

std::string_view to_string(Gender g);
std::string_view to_string(Nationality n);
Gender parse_gender(std::string_view text);
std::optional<Nationality> parse_nationality(std::string_view text);

struct RawRecord {
  std::string doc_id;
  std::string response_text;
  Gender gender = Gender::unspecified;
  Nationality nationality = Nationality::domestic;
  std::string country;
  std::optional<std::string> postal_code;
  std::optional<std::string> program;
  std::optional<int> year;
  bool empty_text = false;
  // Every column of the source row, for --partition-by.
  std::map<std::string, std::string> fields;
};

// Maps record fields to CSV header names. doc_id and response_text are
// always required; any optional column that is named must exist.
struct ColumnSchema {
  std::string doc_id = "doc_id";
  std::string response_text = "response_text";
  std::optional<std::string> gender;
  std::optional<std::string> nationality;
  std::optional<std::string> country;
  std::optional<std::string> postal_code;
  std::optional<std::string> program;
  std::optional<std::string> year;
};

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct LoadedCorpus {
  std::vector<RawRecord> records;
  std::vector<RejectedRow> rejects;
};

LoadedCorpus load_corpus(const std::string& path, const ColumnSchema& schema);
LoadedCorpus parse_corpus(std::string_view csv_text, const ColumnSchema& schema);

using Sentence = std::vector<std::string>;

// Promoted n-grams keyed by their (surface, lowercase) token sequence.
struct PhraseTable {
  std::map<std::vector<std::string>, std::string> phrases;
  std::map<std::vector<std::string>, std::size_t> counts;
  std::size_t min_count = 30;
  std::size_t max_n = 3;

  // Longest-match-first, left to right.
  Sentence promote(const Sentence& tokens) const;
};

struct PreprocessOptions {
  WordSet stopwords = builtin_stopwords();
  WordSet abbreviations = builtin_abbreviations();
  std::unordered_map<std::string, std::string> lemma_exceptions = builtin_lemma_exceptions();
};

// A document after the text pipeline, before vocabulary encoding.
struct TokenizedDoc {
  std::string doc_id;
  std::vector<Sentence> sentences;
};

// Phase-zero text pipeline: segment, tokenize, promote phrases, drop
// stopwords, lemmatize. Phrase tokens and compounds are not lemmatized; a
// token is dropped when either its surface form or its lemma is a stopword.
class Preprocessor {
 public:
  Preprocessor() : Preprocessor(PreprocessOptions{}) {}
  explicit Preprocessor(PreprocessOptions options);

  bool is_stopword(std::string_view token) const;
  const Lemmatizer& lemmatizer() const { return lemmatizer_; }

  // Sentences as lowercase surface tokens (the phrase-counting view).
  std::vector<Sentence> surface_sentences(std::string_view text) const;

  // Counts n-grams (2..max_n) within sentences. Candidates may not begin or
  // end with a stopword. Kept when count >= min_count.
  PhraseTable build_phrase_table(std::span<const RawRecord> records, std::size_t min_count = 30,
                                 std::size_t max_n = 3) const;

  TokenizedDoc preprocess(const RawRecord& record, const PhraseTable& phrases) const;
  Sentence preprocess_sentence(const Sentence& surface, const PhraseTable& phrases) const;

 private:
  PreprocessOptions options_;
  Lemmatizer lemmatizer_;
};

using TokenId = std::uint32_t;

class Vocabulary {
 public:
  Vocabulary() = default;
  // Tokens get ids in the given order; throws on duplicates.
  Vocabulary(std::vector<std::string> tokens, std::vector<std::size_t> doc_freq);

  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  std::optional<TokenId> id(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::size_t doc_freq(TokenId id) const { return doc_freq_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Fingerprint of the token list in id order.
  std::string hash() const;

  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in);

 private:
  std::vector<std::string> tokens_;
  std::vector<std::size_t> doc_freq_;
  std::unordered_map<std::string, TokenId> index_;
};

// Excludes tokens with df < min_df or df > max_df_ratio * |docs|. Ids are
// assigned in lexicographic token order. Throws if nothing survives.
Vocabulary build_vocabulary(std::span<const TokenizedDoc> docs, std::size_t min_df, double max_df_ratio);

struct PreprocessedDoc {
  std::string doc_id;
  std::vector<std::vector<TokenId>> sentences;
  // (token id, count) sorted by id.
  std::vector<std::pair<TokenId, std::uint32_t>> bow;

  std::size_t length() const;
};

// Tokens outside the vocabulary are dropped; empty sentences are kept.
PreprocessedDoc encode(const TokenizedDoc& doc, const Vocabulary& vocab);
std::vector<std::pair<TokenId, std::uint32_t>> make_bow(const std::vector<std::vector<TokenId>>& sentences);

// Flattened token sequence of a document in sentence order.
std::vector<TokenId> token_stream(const PreprocessedDoc& doc);
std::vector<std::vector<TokenId>> token_streams(std::span<const PreprocessedDoc> docs);

// Line-delimited JSON, one object per document:
// {"doc_id":..,"sentences":[[ids..]..],"bow":[[id,count]..]}
void write_corpus(std::ostream& out, std::span<const PreprocessedDoc> docs);
std::vector<PreprocessedDoc> read_corpus(std::istream& in, std::optional<std::size_t> vocab_size = std::nullopt);
void save_corpus(const std::string& path, std::span<const PreprocessedDoc> docs);
std::vector<PreprocessedDoc> load_corpus_file(const std::string& path,
                                              std::optional<std::size_t> vocab_size = std::nullopt);

}  // namespace topicforge
