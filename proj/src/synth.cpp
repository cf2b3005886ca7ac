#include "topicforge/synth.hpp"

#include "topicforge/error.hpp"
#include "topicforge/random.hpp"

namespace topicforge {

std::string synthetic_word(std::size_t i, std::string_view prefix) {
  static constexpr std::string_view consonants = "bdfgklmnprtvz";
  static constexpr std::string_view vowels = "aiou";
  static constexpr std::string_view endings = "aio";
  std::string word(prefix);
  // Three consonant-vowel syllables: 13*4 * 13*4 * 13*3 distinct words.
  std::size_t x = i;
  for (int s = 0; s < 2; ++s) {
    word.push_back(consonants[x % consonants.size()]);
    x /= consonants.size();
    word.push_back(vowels[x % vowels.size()]);
    x /= vowels.size();
  }
  word.push_back(consonants[x % consonants.size()]);
  x /= consonants.size();
  word.push_back(endings[x % endings.size()]);
  x /= endings.size();
  while (x > 0) {
    word.push_back(consonants[x % consonants.size()]);
    x /= consonants.size();
    word.push_back('a');
  }
  return word;
}

PlantedCorpus generate_planted_corpus(const PlantedCorpusSpec& spec) {
  if (spec.topics == 0 || spec.words_per_topic == 0 || spec.docs == 0)
    throw ValidationError("planted corpus needs topics, words_per_topic and docs >= 1");
  PlantedCorpus c;
  c.spec = spec;
  const std::size_t K = spec.topics;
  const std::size_t W = spec.words_per_topic;
  c.vocab_size = K * W;
  Rng rng(spec.seed);

  c.phi.assign(K * c.vocab_size, 0.0);
  for (std::size_t t = 0; t < K; ++t) {
    std::vector<double> weights =
        spec.word_concentration > 0 ? rng.dirichlet(W, spec.word_concentration) : std::vector<double>(W, 1.0 / W);
    for (std::size_t j = 0; j < W; ++j) c.phi[t * c.vocab_size + t * W + j] = weights[j];
  }

  c.theta.resize(spec.docs * K);
  c.docs.resize(spec.docs);
  for (std::size_t d = 0; d < spec.docs; ++d) {
    auto mix = rng.dirichlet(K, spec.doc_concentration);
    std::copy(mix.begin(), mix.end(), c.theta.begin() + static_cast<std::ptrdiff_t>(d * K));
    c.docs[d].reserve(spec.doc_length);
    for (std::size_t i = 0; i < spec.doc_length; ++i) {
      const auto t = rng.categorical(mix);
      const auto j = rng.categorical(std::span<const double>(c.phi.data() + t * c.vocab_size + t * W, W));
      c.docs[d].push_back(static_cast<TokenId>(t * W + j));
    }
  }
  return c;
}

}  // namespace topicforge
