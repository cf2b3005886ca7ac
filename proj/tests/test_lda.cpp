#include "topicforge/error.hpp"
#include "topicforge/lda.hpp"
#include "topicforge/synth.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

using namespace topicforge;

namespace {

const PlantedCorpus& planted() {
  static const PlantedCorpus c = [] {
    PlantedCorpusSpec spec;
    spec.seed = 2024;
    return generate_planted_corpus(spec);
  }();
  return c;
}

}  // namespace

TEST_CASE("k=1 gives beta-smoothed empirical frequencies and unit theta") {
  std::vector<TokenStream> docs{{0, 1, 1, 2}, {2, 2, 3}, {}};
  LdaConfig cfg;
  cfg.k = 1;
  cfg.iterations = 20;
  cfg.burn_in = 5;
  cfg.seed = 9;
  auto m = fit_lda(docs, 5, cfg);
  const double n = 7, beta = cfg.beta, V = 5;
  const double counts[] = {1, 2, 3, 1, 0};
  for (TokenId w = 0; w < 5; ++w) CHECK(m.phi_at(0, w) == doctest::Approx((counts[w] + beta) / (n + V * beta)).epsilon(1e-12));
  for (std::size_t d = 0; d < 3; ++d) CHECK(m.theta_at(d, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("empty documents get a uniform theta row") {
  std::vector<TokenStream> docs{{0, 1, 0}, {}};
  LdaConfig cfg;
  cfg.k = 4;
  cfg.iterations = 10;
  cfg.burn_in = 2;
  auto m = fit_lda(docs, 2, cfg);
  for (std::size_t t = 0; t < 4; ++t) CHECK(m.theta_at(1, t) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("planted topics are recovered") {
  const auto& c = planted();
  LdaConfig cfg;
  cfg.k = 5;
  cfg.seed = 17;
  auto m = fit_lda(c.docs, c.vocab_size, cfg);
  auto cos = tf_test::matched_cosines(c.phi, m.phi, 5, 5, c.vocab_size);
  const auto good = std::count_if(cos.begin(), cos.end(), [](double x) { return x >= 0.85; });
  CHECK(good >= 4);

  for (std::size_t t = 0; t < 5; ++t) {
    auto top = top_words(m, t, 10);
    const auto planted_topic = c.topic_of_word(top[0]);
    for (auto w : top) CHECK(c.topic_of_word(w) == planted_topic);
  }
}

TEST_CASE("same seed gives bit-identical models") {
  const auto& c = planted();
  LdaConfig cfg;
  cfg.k = 5;
  cfg.iterations = 60;
  cfg.burn_in = 30;
  cfg.seed = 5;
  auto a = fit_lda(c.docs, c.vocab_size, cfg);
  auto b = fit_lda(c.docs, c.vocab_size, cfg);
  CHECK(a.z == b.z);
  CHECK(a.phi == b.phi);
  CHECK(a.theta == b.theta);
  cfg.seed = 6;
  auto other = fit_lda(c.docs, c.vocab_size, cfg);
  CHECK(other.z != a.z);
}

TEST_CASE("count conservation and normalization hold after every sweep") {
  PlantedCorpusSpec spec;
  spec.docs = 50;
  spec.doc_length = 40;
  spec.seed = 3;
  auto c = generate_planted_corpus(spec);
  const std::size_t total_tokens = 50 * 40;
  LdaConfig cfg;
  cfg.k = 6;
  cfg.iterations = 40;
  cfg.burn_in = 10;
  std::size_t sweeps = 0;
  auto m = fit_lda(c.docs, c.vocab_size, cfg, [&](const LdaModel& s, std::size_t) {
    ++sweeps;
    const auto K = s.k();
    CHECK(std::accumulate(s.n_k.begin(), s.n_k.end(), std::int64_t{0}) == static_cast<std::int64_t>(total_tokens));
    for (std::size_t t = 0; t < K; ++t) {
      std::int64_t col = 0;
      for (std::size_t w = 0; w < s.vocab_size; ++w) {
        CHECK(s.n_wk[w * K + t] >= 0);
        col += s.n_wk[w * K + t];
      }
      CHECK(col == s.n_k[t]);
    }
    for (std::size_t d = 0; d < s.num_docs; ++d) {
      std::int64_t row = 0;
      for (std::size_t t = 0; t < K; ++t) row += s.n_dk[d * K + t];
      CHECK(row == static_cast<std::int64_t>(c.docs[d].size()));
    }
    auto phi = s.point_phi();
    for (std::size_t t = 0; t < K; ++t)
      CHECK(std::accumulate(phi.begin() + t * s.vocab_size, phi.begin() + (t + 1) * s.vocab_size, 0.0) ==
            doctest::Approx(1.0).epsilon(1e-9));
    auto theta = s.point_theta();
    for (std::size_t d = 0; d < s.num_docs; ++d)
      CHECK(std::accumulate(theta.begin() + d * K, theta.begin() + (d + 1) * K, 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  });
  CHECK(sweeps == 40);
  for (std::size_t t = 0; t < m.k(); ++t) {
    auto row = m.phi_row(t);
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("exchangeability: permuted documents and seed recover the same topics") {
  const auto& c = planted();
  LdaConfig cfg;
  cfg.k = 5;
  cfg.iterations = 400;
  cfg.burn_in = 200;
  cfg.seed = 100;
  auto a = fit_lda(c.docs, c.vocab_size, cfg);
  std::vector<TokenStream> permuted(c.docs.rbegin(), c.docs.rend());
  cfg.seed = 101;
  auto b = fit_lda(permuted, c.vocab_size, cfg);
  auto cos = tf_test::matched_cosines(a.phi, b.phi, 5, 5, c.vocab_size);
  for (double x : cos) CHECK(x >= 0.99);
}

TEST_CASE("top_words ranking and tie-break") {
  LdaModel m;
  m.config.k = 1;
  m.vocab_size = 3;
  m.phi = {0.5, 0.3, 0.2};
  CHECK(top_words(m, 0, 2) == std::vector<TokenId>{0, 1});
  CHECK(top_words(m, 0, 10).size() == 3);
  m.phi = {0.2, 0.4, 0.4};
  CHECK(top_words(m, 0, 2) == std::vector<TokenId>{1, 2});
  CHECK_THROWS_AS(top_words(m, 1, 2), Error);
}

TEST_CASE("perplexity of a uniform model equals V") {
  const std::size_t V = 8;
  std::vector<TokenStream> docs(4);
  for (auto& d : docs)
    for (TokenId w = 0; w < V; ++w) d.push_back(w);
  LdaConfig cfg;
  cfg.k = 1;
  cfg.iterations = 5;
  cfg.burn_in = 1;
  auto m = fit_lda(docs, V, cfg);
  CHECK(perplexity(m, docs) == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("single-token corpus perplexity has a closed form") {
  // phi[w0] = (1 + beta) / (1 + V beta), theta = 1, so perplexity = 1 / phi[w0].
  const std::size_t V = 10;
  std::vector<TokenStream> docs{{3}};
  LdaConfig cfg;
  cfg.k = 1;
  cfg.beta = 0.05;
  cfg.iterations = 3;
  cfg.burn_in = 0;
  auto m = fit_lda(docs, V, cfg);
  const double expected = (1 + V * 0.05) / (1 + 0.05);
  CHECK(perplexity(m, docs) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(perplexity(m, docs) < static_cast<double>(V));
}

TEST_CASE("perplexity improves with more sweeps on the planted corpus") {
  const auto& c = planted();
  LdaConfig short_cfg;
  short_cfg.k = 5;
  short_cfg.iterations = 5;
  short_cfg.burn_in = 0;
  short_cfg.sample_lag = 1;
  short_cfg.seed = 8;
  LdaConfig long_cfg = short_cfg;
  long_cfg.iterations = 200;
  long_cfg.burn_in = 100;
  long_cfg.sample_lag = 10;
  const double p_short = perplexity(fit_lda(c.docs, c.vocab_size, short_cfg), c.docs);
  const double p_long = perplexity(fit_lda(c.docs, c.vocab_size, long_cfg), c.docs);
  CHECK(p_long <= p_short * 1.01);
}

TEST_CASE("fit rejects bad input") {
  LdaConfig cfg;
  cfg.iterations = 10;
  cfg.burn_in = 1;
  std::vector<TokenStream> none;
  CHECK_THROWS_AS(fit_lda(none, 5, cfg), Error);
  std::vector<TokenStream> docs{{0, 7}};
  CHECK_THROWS_AS(fit_lda(docs, 5, cfg), Error);
  cfg.k = 0;
  std::vector<TokenStream> ok{{0}};
  CHECK_THROWS_AS(fit_lda(ok, 5, cfg), ValidationError);
  cfg.k = 2;
  cfg.burn_in = 10;
  CHECK_THROWS_AS(fit_lda(ok, 5, cfg), ValidationError);
  std::vector<TokenStream> other{{0}, {1}};
  auto m = fit_lda(ok, 5, LdaConfig{.k = 2, .iterations = 3, .burn_in = 0});
  CHECK_THROWS_AS(perplexity(m, other), Error);
}

TEST_CASE("model file round-trip and vocabulary hash check") {
  std::vector<TokenStream> docs{{0, 1, 2}, {2, 3}};
  auto m = fit_lda(docs, 4, LdaConfig{.k = 2, .iterations = 10, .burn_in = 2, .seed = 4});
  m.vocab_hash = "abc123";
  std::stringstream ss;
  save_model(ss, m);
  const std::string first = ss.str();
  auto loaded = load_model(ss, std::string("abc123"));
  CHECK(loaded.phi == m.phi);
  CHECK(loaded.theta == m.theta);
  CHECK(loaded.config.resolved_alpha() == m.config.resolved_alpha());
  std::stringstream again;
  save_model(again, loaded);
  CHECK(again.str() == first);
  std::stringstream ss2(first);
  CHECK_THROWS_AS(load_model(ss2, std::string("different")), Error);
}
