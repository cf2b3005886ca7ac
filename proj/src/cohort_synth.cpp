#include "topicforge/csv.hpp"
#include "topicforge/error.hpp"
#include "topicforge/io.hpp"
#include "topicforge/random.hpp"
#include "topicforge/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace topicforge {

namespace {

std::string padded(std::string_view prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, i);
  return std::string(prefix) + buf;
}

std::vector<float> noisy_axis(Rng& rng, std::size_t dim, std::size_t axis, double noise) {
  std::vector<float> v(dim);
  const double scale = noise / std::sqrt(static_cast<double>(dim));
  for (auto& x : v) x = static_cast<float>(rng.normal() * scale);
  v[axis] += 1.0f;
  return v;
}

std::string sentence_text(const std::vector<std::string>& words) {
  std::string s;
  for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s + ".";
}

std::string postal_code_for(std::size_t i) {
  static constexpr std::string_view letters = "ABCEGHJKLMNPRSTVXY";
  std::string code;
  code.push_back(letters[i % letters.size()]);
  code.push_back(static_cast<char>('0' + (i / letters.size()) % 10));
  code.push_back(letters[(i / 180) % letters.size()]);
  code += " ";
  code.push_back(static_cast<char>('0' + i % 7));
  code.push_back(letters[(i * 7) % letters.size()]);
  code.push_back(static_cast<char>('0' + (i / 3240) % 10));
  return code;
}

}  // namespace

std::string planted_corpus_csv(const PlantedCorpus& corpus, std::size_t sentence_length) {
  if (sentence_length == 0) throw ValidationError("sentence_length must be >= 1");
  std::vector<std::string> words(corpus.vocab_size);
  for (std::size_t w = 0; w < words.size(); ++w) words[w] = synthetic_word(w);
  std::string out = "doc_id,response_text\n";
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    std::string text;
    const auto& doc = corpus.docs[d];
    for (std::size_t i = 0; i < doc.size(); i += sentence_length) {
      std::vector<std::string> s;
      for (std::size_t j = i; j < std::min(doc.size(), i + sentence_length); ++j) s.push_back(words[doc[j]]);
      text += (text.empty() ? "" : " ") + sentence_text(s);
    }
    out += csv_row({padded("d", d, 5), text});
  }
  return out;
}

CohortDataset generate_cohort_dataset(const CohortSynthSpec& spec) {
  if (spec.per_group == 0) throw ValidationError("per_group must be >= 1");
  if (spec.keywords_per_sentence == 0) throw ValidationError("keywords_per_sentence must be >= 1");
  if (!(spec.null_rate >= 0 && spec.null_rate <= 1)) throw ValidationError("null_rate must lie in [0, 1]");
  if (spec.das == 0) throw ValidationError("das must be >= 1");

  CohortDataset ds;
  ds.spec = spec;
  ds.specs = default_topic_specs();
  const std::size_t n_topics = ds.specs.size();
  if (spec.dim < n_topics + 1) throw ValidationError("dim must exceed the number of topics");
  std::map<int, const CohortEffect*> effects;
  for (const auto& e : spec.effects) {
    if (!(e.rate_male >= 0 && e.rate_male <= 1 && e.rate_female >= 0 && e.rate_female <= 1))
      throw ValidationError("effect rates must lie in [0, 1]");
    if (std::none_of(ds.specs.begin(), ds.specs.end(), [&](const TopicSpec& s) { return s.topic_id == e.topic_id; }))
      throw ValidationError("effect names unknown topic " + std::to_string(e.topic_id));
    effects[e.topic_id] = &e;
  }

  Rng rng(spec.seed);
  ds.store = VectorStore(spec.dim);
  const Preprocessor pre;
  const PhraseTable no_phrases;
  std::vector<std::vector<std::string>> usable(n_topics);
  for (std::size_t t = 0; t < n_topics; ++t)
    for (const auto& kw : ds.specs[t].keywords) {
      ds.store.add(kw, noisy_axis(rng, spec.dim, t, spec.noise));
      RawRecord probe;
      probe.response_text = kw;
      auto doc = pre.preprocess(probe, no_phrases);
      if (doc.sentences.size() == 1 && doc.sentences[0] == Sentence{kw}) usable[t].push_back(kw);
    }
  std::vector<std::string> filler;
  for (std::size_t i = 0; i < 20; ++i) {
    filler.push_back(synthetic_word(4000 + i * 37));
    ds.store.add(filler.back(), noisy_axis(rng, spec.dim, n_topics, spec.noise));
  }

  // Census: two education profiles, incomes loosely tied to education.
  for (std::size_t i = 0; i < spec.das; ++i) {
    CensusRow row;
    row.da_id = padded("DA", i, 5);
    const bool high = i % 2 == 1;
    auto shares = rng.dirichlet(high ? std::vector<double>{6, 6, 14, 8} : std::vector<double>{14, 10, 6, 2});
    std::copy(shares.begin(), shares.end(), row.edu.begin());
    double s = row.edu[0] + row.edu[1] + row.edu[2];
    row.edu[3] = std::max(0.0, 1.0 - s);
    row.avg_income = std::round(std::exp(10.4 + (high ? 0.25 : 0.0) + 0.3 * rng.normal()));
    ds.census.emplace(row.da_id, row);
    ds.postal.emplace(normalize_postal_code(postal_code_for(i)), row.da_id);
  }

  // Exact planted counts for effect topics, chosen per group by shuffle.
  const std::size_t n = spec.per_group;
  std::map<int, std::array<std::vector<char>, 2>> chosen;
  for (const auto& [topic, e] : effects) {
    for (int g = 0; g < 2; ++g) {
      const double rate = g == 0 ? e->rate_male : e->rate_female;
      const auto count = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
      std::vector<char> mask(n, 0);
      std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(count), 1);
      rng.shuffle(mask);
      chosen[topic][static_cast<std::size_t>(g)] = std::move(mask);
    }
  }

  for (const auto& s : ds.specs) ds.planted[s.topic_id] = {0, 0};
  std::size_t doc = 0;
  for (int g = 0; g < 2; ++g) {
    for (std::size_t i = 0; i < n; ++i, ++doc) {
      RawRecord r;
      r.doc_id = padded("r", doc, 6);
      r.gender = g == 0 ? Gender::male : Gender::female;
      const bool intl = rng.uniform() < spec.international_share;
      r.nationality = intl ? Nationality::international : Nationality::domestic;
      r.country = intl ? "XX" : "CA";
      if (!intl) r.postal_code = postal_code_for(rng.index(spec.das));

      std::vector<std::string> sentences;
      for (std::size_t t = 0; t < n_topics; ++t) {
        const int id = ds.specs[t].topic_id;
        bool present;
        if (auto it = chosen.find(id); it != chosen.end())
          present = it->second[static_cast<std::size_t>(g)][i] != 0;
        else
          present = rng.uniform() < spec.null_rate;
        if (!present) continue;
        if (usable[t].empty()) throw Error("topic " + std::to_string(id) + " has no keyword that survives preprocessing");
        ++ds.planted[id][static_cast<std::size_t>(g)];
        std::vector<std::string> words;
        for (std::size_t w = 0; w < spec.keywords_per_sentence; ++w) words.push_back(usable[t][rng.index(usable[t].size())]);
        sentences.push_back(sentence_text(words));
      }
      for (std::size_t f = 0; f < spec.filler_sentences; ++f) {
        std::vector<std::string> words;
        for (int w = 0; w < 4; ++w) words.push_back(filler[rng.index(filler.size())]);
        sentences.push_back(sentence_text(words));
      }
      rng.shuffle(sentences);
      for (const auto& s : sentences) r.response_text += (r.response_text.empty() ? "" : " ") + s;
      r.empty_text = r.response_text.empty();
      ds.records.push_back(std::move(r));
    }
    ds.group_sizes[static_cast<std::size_t>(g)] = n;
  }
  return ds;
}

std::string records_csv(std::span<const RawRecord> records) {
  std::string out = "doc_id,gender,nationality,country,postal_code,response_text\n";
  for (const auto& r : records)
    out += csv_row({r.doc_id, std::string(to_string(r.gender)), std::string(to_string(r.nationality)), r.country,
                    r.postal_code.value_or(""), r.response_text});
  return out;
}

std::string census_csv(const CensusTable& census) {
  std::string out = "da_id,avg_income,edu_high_school,edu_college,edu_bachelor,edu_advanced\n";
  for (const auto& [id, row] : census)
    out += csv_row({id, format_double(row.avg_income), format_double(row.edu[0]), format_double(row.edu[1]),
                    format_double(row.edu[2]), format_double(row.edu[3])});
  return out;
}

std::string postal_map_csv(const PostalMap& postal) {
  std::string out = "postal_code,da_id\n";
  for (const auto& [code, da] : postal) out += csv_row({code, da});
  return out;
}

}  // namespace topicforge
