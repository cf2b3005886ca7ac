#pragma once

#include "topicforge/lda.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace topicforge {

// Boolean sliding-window document frequencies. A window is counted once for
// every distinct word (and word pair) it contains.
struct CooccurrenceStats {
  std::size_t window_size = 110;
  std::uint64_t total_windows = 0;
  std::unordered_map<TokenId, std::uint64_t> word_counts;
  std::unordered_map<std::uint64_t, std::uint64_t> pair_counts;

  std::uint64_t word_count(TokenId w) const;
  // pair_count(w, w) == word_count(w).
  std::uint64_t pair_count(TokenId a, TokenId b) const;
  void merge(const CooccurrenceStats& other);

  static std::uint64_t pair_key(TokenId a, TokenId b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
  }
};

// Slides a window of `window_size` tokens one position at a time; a document
// shorter than the window contributes a single window, an empty one none.
// With `relevant` set, only those words (and pairs among them) are counted.
CooccurrenceStats build_stats(std::span<const TokenStream> docs, std::size_t window_size = 110,
                              const std::optional<std::vector<TokenId>>& relevant = std::nullopt,
                              unsigned threads = 1);

// Normalized PMI from window probabilities. Zero when either word is unseen;
// 1 when both words occur in every window.
double npmi(TokenId a, TokenId b, const CooccurrenceStats& stats, double eps = 1e-12);

// C_v of one topic: NPMI context vector of each top word against the whole
// list, cosine with the summed vector, averaged over words. Requires >= 2
// words. A topic whose words are all unseen scores 0 (with a warning).
double cv_score(std::span<const TokenId> top_words, const CooccurrenceStats& stats, double eps = 1e-12);
double mean_cv(const std::vector<std::vector<TokenId>>& topics, const CooccurrenceStats& stats,
               double eps = 1e-12);

struct CoherencePoint {
  std::size_t k = 0;
  double mean_cv = 0;
  double std_cv = 0;
  std::size_t runs_ok = 0;
  bool failed = false;
  std::string error;
};

struct CoherenceCurve {
  std::vector<CoherencePoint> points;
  std::optional<std::size_t> chosen_k;

  // k strictly increasing; every successful point finite.
  void validate() const;
};

struct SweepOptions {
  std::size_t k_min = 1;
  std::size_t k_max = 30;
  std::size_t runs_per_k = 3;
  std::uint64_t base_seed = 0;
  LdaConfig lda;  // k and seed are overridden per run
  std::size_t window_size = 110;
  std::size_t top_n = 10;
  double eps = 1e-12;
  unsigned threads = 1;
};

// Fits LDA for every k in [k_min, k_max] with seeds base_seed + k*runs + i,
// scores mean C_v over topics, and averages over runs. A failing run marks
// its point failed; the sweep continues. The curve never selects k itself.
CoherenceCurve k_sweep(std::span<const TokenStream> docs, std::size_t vocab_size, const SweepOptions& options);

// CSV columns: k,mean_cv,std_cv,status
void write_curve_csv(std::ostream& out, const CoherenceCurve& curve);
CoherenceCurve read_curve_csv(std::istream& in);

}  // namespace topicforge
