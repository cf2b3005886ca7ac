#include "topicforge/corpus.hpp"
#include "topicforge/error.hpp"

#include <doctest.h>

#include <numeric>
#include <random>
#include <sstream>

using namespace topicforge;

namespace {

RawRecord record(std::string id, std::string text) {
  RawRecord r;
  r.doc_id = std::move(id);
  r.response_text = std::move(text);
  return r;
}

}  // namespace

TEST_CASE("load_corpus reads well-formed rows") {
  auto c = parse_corpus("doc_id,response_text\nA,hello world\nB,\"quoted, text\"\nC,third\n", {});
  CHECK(c.records.size() == 3);
  CHECK(c.rejects.empty());
  CHECK(c.records[1].response_text == "quoted, text");
}

TEST_CASE("empty response text is retained and flagged") {
  auto c = parse_corpus("doc_id,response_text\nA,\nB,text\n", {});
  REQUIRE(c.records.size() == 2);
  CHECK(c.records[0].empty_text);
  CHECK_FALSE(c.records[1].empty_text);
}

TEST_CASE("duplicate doc ids are a hard error naming the offender") {
  try {
    parse_corpus("doc_id,response_text\nA1,x\nB,y\nA1,z\n", {});
    FAIL("expected duplicate-id error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("A1") != std::string::npos);
    CHECK(std::string(e.what()).find("B") == std::string::npos);
  }
}

TEST_CASE("missing mapped column and missing file are errors") {
  ColumnSchema schema;
  schema.gender = "sex";
  CHECK_THROWS_AS(parse_corpus("doc_id,response_text\nA,x\n", schema), ValidationError);
  CHECK_THROWS_AS(load_corpus("/nonexistent/corpus.csv", {}), Error);
}

TEST_CASE("malformed rows are collected, not dropped silently") {
  ColumnSchema schema;
  schema.year = "year";
  schema.nationality = "nat";
  auto c = parse_corpus("doc_id,response_text,year,nat\nA,x,2019,domestic\nB,y\nC,z,soon,domestic\nD,w,2020,martian\n",
                        schema);
  CHECK(c.records.size() == 1);
  REQUIRE(c.rejects.size() == 3);
  CHECK(c.rejects[0].line == 3);
  CHECK(c.rejects[1].line == 4);
  CHECK(c.rejects[2].line == 5);
}

TEST_CASE("preprocess golden: stopwords dropped and lemmas applied") {
  PreprocessOptions opt;
  opt.stopwords = {"i", "am"};
  Preprocessor pre(opt);
  auto doc = pre.preprocess(record("x", "I am solving problems"), PhraseTable{});
  REQUIRE(doc.sentences.size() == 1);
  CHECK(doc.sentences[0] == Sentence{"solve", "problem"});
}

TEST_CASE("all-stopword sentence stays as an empty sentence") {
  Preprocessor pre;
  auto doc = pre.preprocess(record("x", "I am the one. Robots rule!"), PhraseTable{});
  REQUIRE(doc.sentences.size() == 2);
  CHECK(doc.sentences[0] == Sentence{"one"});
  auto doc2 = pre.preprocess(record("y", "It is what it is. Robots rule!"), PhraseTable{});
  REQUIRE(doc2.sentences.size() == 2);
  CHECK(doc2.sentences[0].empty());
}

TEST_CASE("phrase table thresholds and promotion") {
  Preprocessor pre;
  std::vector<RawRecord> recs;
  for (int i = 0; i < 20; ++i) recs.push_back(record("m" + std::to_string(i), "I like machine learning."));
  for (int i = 0; i < 20; ++i) recs.push_back(record("n" + std::to_string(i), "Machine learning matters."));
  for (int i = 0; i < 29; ++i) recs.push_back(record("r" + std::to_string(i), "Robot arms."));
  for (int i = 0; i < 30; ++i) recs.push_back(record("s" + std::to_string(i), "Solar panels."));
  auto table = pre.build_phrase_table(recs, 30, 3);
  CHECK(table.counts.at({"machine", "learning"}) == 40);
  CHECK(table.phrases.count({"robot", "arms"}) == 0);   // 29 < 30
  CHECK(table.phrases.count({"solar", "panels"}) == 1);  // 30 >= 30
  CHECK(table.phrases.count({"i", "like"}) == 0);        // stopword edge
  auto doc = pre.preprocess(recs[0], table);
  CHECK(doc.sentences[0] == Sentence{"like", "machine_learning"});
}

TEST_CASE("longest match wins when a trigram and its prefix bigram both qualify") {
  Preprocessor pre;
  std::vector<RawRecord> recs;
  for (int i = 0; i < 35; ++i) recs.push_back(record("t" + std::to_string(i), "alpha beta gamma."));
  for (int i = 0; i < 5; ++i) recs.push_back(record("b" + std::to_string(i), "alpha beta delta."));
  auto table = pre.build_phrase_table(recs, 30, 3);
  REQUIRE(table.counts.at({"alpha", "beta"}) == 40);
  REQUIRE(table.counts.at({"alpha", "beta", "gamma"}) == 35);
  CHECK(table.promote({"alpha", "beta", "gamma"}) == Sentence{"alpha_beta_gamma"});
  CHECK(table.promote({"alpha", "beta", "delta"}) == Sentence{"alpha_beta", "delta"});
}

TEST_CASE("phrase promotion never increases token count") {
  PhraseTable table;
  table.phrases[{"a", "b"}] = "a_b";
  table.phrases[{"b", "c", "a"}] = "b_c_a";
  std::mt19937 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    Sentence s;
    for (int i = 0; i < static_cast<int>(rng() % 12); ++i) s.push_back(std::string(1, static_cast<char>('a' + rng() % 3)));
    CHECK(table.promote(s).size() <= s.size());
  }
}

TEST_CASE("preprocessing is idempotent on its own output") {
  Preprocessor pre;
  std::vector<RawRecord> recs;
  for (int i = 0; i < 30; ++i) recs.push_back(record("p" + std::to_string(i), "Machine learning is fun."));
  auto table = pre.build_phrase_table(recs, 30, 3);
  const std::vector<std::string> texts{
      "I loved solving puzzles with my brothers and teachers.",
      "The co-op programs inspired me; machine learning studies fascinated me!",
      "Running experiments, building robots and creating designs were my happiest times."};
  for (const auto& text : texts) {
    auto doc = pre.preprocess(record("x", text), table);
    for (const auto& sentence : doc.sentences) {
      std::string joined;
      for (const auto& t : sentence) joined += t + " ";
      auto again = pre.preprocess(record("y", joined), table);
      const Sentence second = again.sentences.empty() ? Sentence{} : again.sentences[0];
      CHECK(second == sentence);
    }
  }
}

TEST_CASE("vocabulary filtering by document frequency") {
  std::vector<TokenizedDoc> docs{
      {"1", {{"a", "b", "c"}}},
      {"2", {{"a", "b"}, {"d"}}},
      {"3", {{"a", "e", "e"}}},
  };
  auto all = build_vocabulary(docs, 1, 1.0);
  CHECK(all.tokens() == std::vector<std::string>{"a", "b", "c", "d", "e"});

  auto min2 = build_vocabulary(docs, 2, 1.0);  // by hand: a in 3 docs, b in 2
  CHECK(min2.tokens() == std::vector<std::string>{"a", "b"});
  CHECK(min2.doc_freq(0) == 3);

  auto capped = build_vocabulary(docs, 1, 0.5);  // a (3/3) and b (2/3) exceed 1.5 docs
  CHECK(capped.tokens() == std::vector<std::string>{"c", "d", "e"});

  CHECK_THROWS_AS(build_vocabulary(docs, 4, 1.0), Error);
}

TEST_CASE("vocabulary bijection and bow totals") {
  Preprocessor pre;
  std::vector<RawRecord> recs{record("a", "Robots are fun. I build robots daily!"),
                              record("b", "Math and physics. Physics rules."), record("c", "")};
  std::vector<TokenizedDoc> tdocs;
  for (const auto& r : recs) tdocs.push_back(pre.preprocess(r, PhraseTable{}));
  auto vocab = build_vocabulary(tdocs, 1, 1.0);
  for (TokenId i = 0; i < vocab.size(); ++i) CHECK(*vocab.id(vocab.token(i)) == i);
  for (const auto& td : tdocs) {
    auto doc = encode(td, vocab);
    std::size_t total = 0;
    for (auto [id, count] : doc.bow) {
      CHECK(id < vocab.size());
      CHECK(count >= 1);
      total += count;
    }
    CHECK(total == doc.length());
  }
}

TEST_CASE("corpus file round-trip is byte identical and validated") {
  std::vector<PreprocessedDoc> docs(2);
  docs[0].doc_id = "d1";
  docs[0].sentences = {{2, 0, 2}, {}};
  docs[0].bow = make_bow(docs[0].sentences);
  docs[1].doc_id = "d\"2";
  docs[1].sentences = {{1}};
  docs[1].bow = make_bow(docs[1].sentences);

  std::ostringstream first;
  write_corpus(first, docs);
  std::istringstream in(first.str());
  auto loaded = read_corpus(in, 3);
  std::ostringstream second;
  write_corpus(second, loaded);
  CHECK(first.str() == second.str());

  std::istringstream bad_id(first.str());
  CHECK_THROWS_AS(read_corpus(bad_id, 2), ParseError);
  std::istringstream bad_bow("{\"doc_id\":\"x\",\"sentences\":[[1]],\"bow\":[[1,2]]}\n");
  CHECK_THROWS_AS(read_corpus(bad_bow), ParseError);
}

TEST_CASE("preprocessing is deterministic") {
  Preprocessor pre;
  auto rec = record("x", "Dreams of flying planes. My uncle, a pilot, taught me!");
  auto a = pre.preprocess(rec, PhraseTable{});
  auto b = pre.preprocess(rec, PhraseTable{});
  CHECK(a.sentences == b.sentences);
}
