#pragma once

#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace topicforge {

using WordSet = std::unordered_set<std::string>;

// One entry per line, '#' starts a comment, blank lines ignored.
std::vector<std::string> parse_word_list(std::string_view text);
std::vector<std::string> load_word_list(const std::string& path);

// Lists shipped in data/ and compiled into the library.
WordSet builtin_stopwords();
WordSet builtin_abbreviations();
std::unordered_map<std::string, std::string> builtin_lemma_exceptions();
std::string_view builtin_topic_specs_json();

// Splits on '.', '!' or '?' (plus trailing closing quotes or brackets) when
// followed by whitespace or end of text. A period after a word listed in
// `abbreviations` (lowercase, no trailing period) does not end a sentence.
std::vector<std::string> segment_sentences(std::string_view text, const WordSet& abbreviations);
std::vector<std::string> segment_sentences(std::string_view text);

// Lowercased alphabetic runs. Letters joined by an internal '-' or '_' stay a
// single compound token with '_' as the joiner ("co-op" -> "co_op").
std::vector<std::string> tokenize(std::string_view sentence);

inline bool is_compound(std::string_view token) { return token.find('_') != std::string_view::npos; }

// Rule-based suffix lemmatizer: exceptions table first, then plural, -ed,
// -ing and -iest rules with e-restoration. Rules are applied until a fixed
// point so lemmatize(lemmatize(w)) == lemmatize(w).
class Lemmatizer {
 public:
  Lemmatizer();  // builtin exceptions
  explicit Lemmatizer(std::unordered_map<std::string, std::string> exceptions);

  static std::unordered_map<std::string, std::string> parse_exceptions(std::string_view text);

  std::string lemmatize(std::string_view word) const;

 private:
  std::string step(const std::string& word) const;

  std::unordered_map<std::string, std::string> exceptions_;
};

}  // namespace topicforge
