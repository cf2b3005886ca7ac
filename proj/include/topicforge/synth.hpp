#pragma once

#include "topicforge/cohorts.hpp"
#include "topicforge/corpus.hpp"
#include "topicforge/embedding.hpp"
#include "topicforge/lda.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace topicforge {

// Planted LDA corpus: `topics` topics over disjoint blocks of
// `words_per_topic` ids (V = topics * words_per_topic), each document a
// Dirichlet(doc_concentration) mixture.
struct PlantedCorpusSpec {
  std::size_t topics = 5;
  std::size_t words_per_topic = 20;
  std::size_t docs = 500;
  std::size_t doc_length = 100;
  double doc_concentration = 0.5;
  // Within-topic word weights ~ Dirichlet(word_concentration); 0 means uniform.
  double word_concentration = 1.0;
  std::uint64_t seed = 1;
};

struct PlantedCorpus {
  PlantedCorpusSpec spec;
  std::size_t vocab_size = 0;
  std::vector<double> phi;    // topics x V
  std::vector<double> theta;  // docs x topics
  std::vector<TokenStream> docs;

  std::size_t topic_of_word(TokenId w) const { return w / spec.words_per_topic; }
};

PlantedCorpus generate_planted_corpus(const PlantedCorpusSpec& spec);

// Deterministic pronounceable pseudo-word for index i. Letters only, ends in
// a vowel other than 'e' so the lemmatizer leaves it alone.
std::string synthetic_word(std::size_t i, std::string_view prefix = "");

// Word for planted id w is synthetic_word(w). Columns doc_id,response_text;
// each document is split into sentences of `sentence_length` words.
std::string planted_corpus_csv(const PlantedCorpus& corpus, std::size_t sentence_length = 10);

// Topic occurrence planted by gender. Effect topics get exact counts
// (round(rate * per_group) documents per group); every other topic is a
// Bernoulli(null_rate) draw per document.
struct CohortEffect {
  int topic_id = 1;
  double rate_male = 0.55;
  double rate_female = 0.45;
};

struct CohortSynthSpec {
  std::size_t per_group = 2000;
  std::vector<CohortEffect> effects{CohortEffect{}};
  double null_rate = 0.3;
  std::size_t dim = 32;
  double noise = 0.15;
  std::size_t keywords_per_sentence = 3;
  std::size_t filler_sentences = 1;
  double international_share = 0.3;
  std::size_t das = 120;
  std::uint64_t seed = 1;
};

// Records, word vectors and census tables for an end-to-end cohort run over
// the default topic specs. Topic keywords point along their own axis, filler
// words along a separate one.
struct CohortDataset {
  CohortSynthSpec spec;
  std::vector<RawRecord> records;
  VectorStore store;
  std::vector<TopicSpec> specs;
  CensusTable census;
  PostalMap postal;
  // topic id -> documents carrying a sentence for it, {male, female}
  std::map<int, std::array<std::size_t, 2>> planted;
  std::array<std::size_t, 2> group_sizes{0, 0};
};

CohortDataset generate_cohort_dataset(const CohortSynthSpec& spec);

// doc_id,gender,nationality,country,postal_code,response_text
std::string records_csv(std::span<const RawRecord> records);
std::string census_csv(const CensusTable& census);
std::string postal_map_csv(const PostalMap& postal);

}  // namespace topicforge
