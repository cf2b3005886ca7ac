#include "topicforge/text.hpp"

#include "topicforge/error.hpp"
#include "topicforge/io.hpp"

#include <cctype>

namespace topicforge {

namespace builtin {
extern const std::string_view stopwords_txt;
extern const std::string_view abbreviations_txt;
extern const std::string_view lemma_exceptions_txt;
extern const std::string_view topic_specs_json;
}  // namespace builtin

std::vector<std::string> parse_word_list(std::string_view text) {
  std::vector<std::string> out;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) out.emplace_back(line);
  }
  return out;
}

std::vector<std::string> load_word_list(const std::string& path) { return parse_word_list(read_file(path)); }

WordSet builtin_stopwords() {
  auto words = parse_word_list(builtin::stopwords_txt);
  return {words.begin(), words.end()};
}

WordSet builtin_abbreviations() {
  auto words = parse_word_list(builtin::abbreviations_txt);
  return {words.begin(), words.end()};
}

std::unordered_map<std::string, std::string> builtin_lemma_exceptions() {
  return Lemmatizer::parse_exceptions(builtin::lemma_exceptions_txt);
}

std::string_view builtin_topic_specs_json() { return builtin::topic_specs_json; }

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

// Word immediately before position `dot` (exclusive), letters and inner dots.
std::string word_before(std::string_view text, std::size_t dot) {
  std::size_t b = dot;
  while (b > 0 && (is_alpha(text[b - 1]) || text[b - 1] == '.')) --b;
  return to_lower(text.substr(b, dot - b));
}

}  // namespace

std::vector<std::string> segment_sentences(std::string_view text, const WordSet& abbreviations) {
  std::vector<std::string> out;
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    auto s = trim(text.substr(start, end - start));
    if (!s.empty()) out.emplace_back(s);
    start = end;
  };

  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_terminal(text[i])) {
      ++i;
      continue;
    }
    std::size_t run_end = i;
    while (run_end < text.size() && is_terminal(text[run_end])) ++run_end;
    while (run_end < text.size() && is_closer(text[run_end])) ++run_end;
    const bool boundary = run_end == text.size() || is_space(text[run_end]);
    if (boundary) {
      const bool single_period = text[i] == '.' && (run_end == i + 1);
      if (!(single_period && abbreviations.count(word_before(text, i)) > 0)) emit(run_end);
    }
    i = run_end;
  }
  emit(text.size());
  return out;
}

std::vector<std::string> segment_sentences(std::string_view text) {
  static const WordSet abbreviations = builtin_abbreviations();
  return segment_sentences(text, abbreviations);
}

std::vector<std::string> tokenize(std::string_view sentence) {
  std::vector<std::string> tokens;
  std::string current;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    const char c = sentence[i];
    if (is_alpha(c)) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      continue;
    }
    const bool joiner = (c == '-' || c == '_') && !current.empty() && i + 1 < sentence.size() &&
                        is_alpha(sentence[i + 1]);
    if (joiner) {
      current.push_back('_');
      continue;
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// ---------------------------------------------------------------------------
// Lemmatizer

namespace {

bool ends_with(std::string_view w, std::string_view suffix) {
  return w.size() >= suffix.size() && w.substr(w.size() - suffix.size()) == suffix;
}

bool is_vowel_at(std::string_view w, std::size_t i) {
  switch (w[i]) {
    case 'a':
    case 'e':
    case 'i':
    case 'o':
    case 'u':
      return true;
    case 'y':
      return i > 0 && !is_vowel_at(w, i - 1);
    default:
      return false;
  }
}

bool has_vowel(std::string_view w) {
  for (std::size_t i = 0; i < w.size(); ++i)
    if (is_vowel_at(w, i)) return true;
  return false;
}

bool consonant_at(std::string_view w, std::size_t i) { return !is_vowel_at(w, i); }

// Number of vowel-consonant sequences (Porter's m).
int measure(std::string_view w) {
  int m = 0;
  bool prev_vowel = false;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const bool v = is_vowel_at(w, i);
    if (prev_vowel && !v) ++m;
    prev_vowel = v;
  }
  return m;
}

bool ends_cvc(std::string_view w) {
  const auto n = w.size();
  if (n < 3) return false;
  const char last = w[n - 1];
  return consonant_at(w, n - 3) && is_vowel_at(w, n - 2) && consonant_at(w, n - 1) && last != 'w' &&
         last != 'x' && last != 'y';
}

// Repairs a stem after removing -ed / -ing.
std::string restore(std::string stem) {
  const auto n = stem.size();
  const char last = stem[n - 1];
  const char prev = stem[n - 2];
  auto before_is_consonant = [&](std::size_t k) { return n > k && consonant_at(stem, n - 1 - k); };

  if (last == prev && consonant_at(stem, n - 1) && last != 'l' && last != 's' && last != 'z') {
    stem.pop_back();
    return stem;
  }
  if (last == 'v' || last == 'c' || last == 'u') return stem + 'e';
  if ((last == 'z' && (prev == 'i' || prev == 'y'))) return stem + 'e';
  if (last == 'g' && (prev == 'd' || prev == 'r')) return stem + 'e';
  if (n >= 5 && (ends_with(stem, "ang") || ends_with(stem, "eng"))) return stem + 'e';
  if ((last == 't' && (prev == 'a' || prev == 'u')) && before_is_consonant(2)) return stem + 'e';
  if ((last == 'r' && (prev == 'i' || prev == 'u' || prev == 'a')) && before_is_consonant(2)) return stem + 'e';
  if (last == 'l' && consonant_at(stem, n - 2) && prev != 'l' && prev != 'r') return stem + 'e';
  if (measure(stem) == 1 && ends_cvc(stem)) return stem + 'e';
  return stem;
}

}  // namespace

Lemmatizer::Lemmatizer() : exceptions_(builtin_lemma_exceptions()) {}

Lemmatizer::Lemmatizer(std::unordered_map<std::string, std::string> exceptions)
    : exceptions_(std::move(exceptions)) {}

std::unordered_map<std::string, std::string> Lemmatizer::parse_exceptions(std::string_view text) {
  std::unordered_map<std::string, std::string> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto sp = line.find_first_of(" \t");
    if (sp == std::string_view::npos) throw ParseError("lemma exception needs 'surface lemma'", line_no);
    out[to_lower(trim(line.substr(0, sp)))] = to_lower(trim(line.substr(sp + 1)));
  }
  return out;
}

std::string Lemmatizer::step(const std::string& w) const {
  if (auto it = exceptions_.find(w); it != exceptions_.end()) return it->second;
  const auto n = w.size();
  if (n < 4 || is_compound(w)) return w;
  if (ends_with(w, "ics")) return w;

  // Plurals and third person singular.
  if (ends_with(w, "ies")) return n > 4 ? w.substr(0, n - 3) + "y" : w.substr(0, n - 1);
  if (ends_with(w, "sses")) return w.substr(0, n - 2);
  if (ends_with(w, "xes") || ends_with(w, "ches") || ends_with(w, "shes") || ends_with(w, "zzes"))
    return w.substr(0, n - 2);
  if (w.back() == 's' && !ends_with(w, "ss") && !ends_with(w, "us") && !ends_with(w, "is"))
    return w.substr(0, n - 1);

  // Past tense / participles.
  if (ends_with(w, "ied")) return n > 4 ? w.substr(0, n - 3) + "y" : w.substr(0, n - 1);
  if (ends_with(w, "eed")) return w;
  if (ends_with(w, "ed")) {
    std::string stem = w.substr(0, n - 2);
    if (stem.size() >= 2 && has_vowel(stem)) return restore(std::move(stem));
    return w;
  }
  if (ends_with(w, "ing")) {
    std::string stem = w.substr(0, n - 3);
    if (stem.size() >= 2 && has_vowel(stem)) return restore(std::move(stem));
    return w;
  }

  if (n >= 6 && ends_with(w, "iest")) return w.substr(0, n - 4) + "y";
  return w;
}

std::string Lemmatizer::lemmatize(std::string_view word) const {
  std::string current = to_lower(word);
  for (int i = 0; i < 8; ++i) {
    std::string next = step(current);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

}  // namespace topicforge
