#include "topicforge/assignment.hpp"
#include "topicforge/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace topicforge;

namespace {

Vector unit(std::size_t dim, std::size_t axis) {
  Vector v(dim, 0.0);
  v[axis] = 1.0;
  return v;
}

// Default topic specs with center t on axis t-1 of a 12-dim space.
std::vector<TopicSpec> axis_specs(std::size_t dim = 12) {
  auto specs = default_topic_specs();
  for (auto& s : specs) s.center = unit(dim, static_cast<std::size_t>(s.topic_id - 1));
  return specs;
}

// Each keyword of topic t sits near axis t-1; "filler" is on an unused axis.
VectorStore structured_store(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> noise(0.f, 0.05f);
  VectorStore store(12);
  for (const auto& spec : default_topic_specs())
    for (const auto& kw : spec.keywords) {
      std::vector<float> v(12);
      for (auto& x : v) x = noise(gen);
      v[static_cast<std::size_t>(spec.topic_id - 1)] += 1.f;
      store.add(kw, v);
    }
  std::vector<float> filler(12, 0.f);
  filler[11] = 1.f;
  store.add("filler", filler);
  return store;
}

Vector random_vector(std::mt19937_64& gen, std::size_t dim) {
  std::normal_distribution<double> nd(0, 1);
  Vector v(dim);
  for (auto& x : v) x = nd(gen);
  return v;
}

}  // namespace

TEST_CASE("exact center hit is accepted with similarity 1") {
  auto specs = axis_specs();
  auto a = assign_sentence(*specs[2].center, specs);
  CHECK(a.best_topic == 3);
  CHECK(a.similarity == 1.0);
  CHECK(a.accepted);
  CHECK(specs[2].threshold == 0.50);
}

TEST_CASE("exact center hit is accepted at any threshold up to 1") {
  std::mt19937_64 gen(4);
  std::vector<TopicSpec> specs;
  for (int t = 1; t <= 9; ++t) {
    Vector c = random_vector(gen, 30);
    double n = 0;
    for (double x : c) n += x * x;
    for (auto& x : c) x /= std::sqrt(n);
    specs.push_back(TopicSpec{t, "t" + std::to_string(t), {"k"}, 0.5, c});
  }
  for (double tau : {-0.99, 0.0, 0.4, 0.9, 0.999999, 1.0}) {
    for (auto& s : specs) s.threshold = tau;
    for (const auto& s : specs) {
      auto a = assign_sentence(*s.center, specs);
      CHECK(a.best_topic == s.topic_id);
      CHECK(a.accepted);
    }
  }
}

TEST_CASE("Mentorship boundary: 0.39 rejected, exactly 0.40 accepted") {
  auto specs = axis_specs();
  REQUIRE(specs[8].name == "Mentorship");
  REQUIRE(specs[8].threshold == 0.40);

  Vector below(12, 0.0);
  below[8] = 0.39;
  below[11] = std::sqrt(1 - 0.39 * 0.39);
  auto a = assign_sentence(below, specs);
  CHECK(a.best_topic == 9);
  CHECK(a.similarity == doctest::Approx(0.39).epsilon(1e-12));
  CHECK_FALSE(a.accepted);

  // 4 / sqrt(4^2 + 8^2 + 4^2 + 2^2) = 4 / 10, exactly 0.4 in floating point.
  Vector at(12, 0.0);
  at[8] = 4;
  at[9] = 8;
  at[10] = 4;
  at[11] = 2;
  auto b = assign_sentence(at, specs);
  CHECK(b.best_topic == 9);
  CHECK(b.similarity == 0.40);
  CHECK(b.accepted);
}

TEST_CASE("ties go to the lowest topic id regardless of spec order") {
  auto specs = axis_specs();
  Vector v(12, 0.0);
  v[0] = 1;
  v[1] = 1;
  CHECK(assign_sentence(v, specs).best_topic == 1);
  std::reverse(specs.begin(), specs.end());
  CHECK(assign_sentence(v, specs).best_topic == 1);
}

TEST_CASE("assign_sentence preconditions") {
  auto specs = axis_specs();
  CHECK_THROWS_AS(assign_sentence(Vector(12, 0.0), specs), Error);
  CHECK_THROWS_AS(assign_sentence(unit(12, 0), std::span<const TopicSpec>{}), ValidationError);
  specs[0].center.reset();
  CHECK_THROWS_AS(assign_sentence(unit(12, 0), specs), Error);
}

TEST_CASE("assign_document set semantics") {
  auto store = structured_store(1);
  auto specs = default_topic_specs();
  resolve_centers(store, specs);

  TokenizedDoc love{"d5", {specs[4].keywords}};
  auto r5 = assign_document(love, store, specs);
  CHECK(r5.topics.topics == std::set<int>{5});
  REQUIRE(r5.sentences.size() == 1);
  CHECK(r5.sentences[0].similarity == doctest::Approx(1.0).epsilon(1e-9));

  TokenizedDoc twice{"d2", {{"design", "create"}, {"technology", "research"}}};
  auto r2 = assign_document(twice, store, specs);
  CHECK(r2.topics.topics == std::set<int>{2});
  CHECK(r2.topics.n_topics() == 1);
  CHECK(r2.sentences.size() == 2);

  TokenizedDoc off{"d0", {{"filler"}, {"filler", "filler"}}};
  auto r0 = assign_document(off, store, specs);
  CHECK(r0.topics.topics.empty());
  CHECK(r0.sentences.size() == 2);
  for (const auto& s : r0.sentences) CHECK_FALSE(s.accepted);

  TokenizedDoc mixed{"dm", {{"unknownword"}, {}, {"teacher", "uncle"}, {"math"}}};
  auto rm = assign_document(mixed, store, specs);
  CHECK(rm.topics.topics == std::set<int>{5, 9});
  REQUIRE(rm.sentences.size() == 2);
  CHECK(rm.sentences[0].sentence_index == 2);
  CHECK(rm.sentences[1].sentence_index == 3);
  CHECK(rm.sentences[0].doc_id == "dm");

  TokenizedDoc empty{"de", {}};
  CHECK(assign_document(empty, store, specs).topics.topics.empty());
}

TEST_CASE("assign_document over vocabulary ids matches the token form") {
  auto store = structured_store(2);
  auto specs = default_topic_specs();
  resolve_centers(store, specs);
  TokenizedDoc doc{"x", {{"teacher", "father"}, {"physics", "filler"}}};
  std::vector<TokenizedDoc> docs{doc};
  auto vocab = build_vocabulary(docs, 1, 1.0);
  auto encoded = encode(doc, vocab);
  auto a = assign_document(doc, store, specs);
  auto b = assign_document(encoded, vocab, store, specs);
  CHECK(a.topics.topics == b.topics.topics);
  REQUIRE(a.sentences.size() == b.sentences.size());
  for (std::size_t i = 0; i < a.sentences.size(); ++i) CHECK(a.sentences[i].similarity == b.sentences[i].similarity);
}

TEST_CASE("threshold monotonicity over 1000 random sentences") {
  std::mt19937_64 gen(17);
  std::vector<TopicSpec> specs;
  for (int t = 1; t <= 9; ++t) specs.push_back(TopicSpec{t, "t", {"k"}, 0.3, random_vector(gen, 8)});
  std::uniform_real_distribution<double> bump(0.0, 0.3);
  std::uniform_int_distribution<int> pick(0, 8);
  for (int i = 0; i < 1000; ++i) {
    auto v = random_vector(gen, 8);
    auto before = assign_sentence(v, specs);
    auto raised = specs;
    auto& s = raised[static_cast<std::size_t>(pick(gen))];
    s.threshold = std::min(0.999, s.threshold + bump(gen));
    auto after = assign_sentence(v, raised);
    CHECK(after.best_topic == before.best_topic);
    if (after.accepted) CHECK(before.accepted);
  }
}

TEST_CASE("rescaling every center leaves decisions unchanged") {
  std::mt19937_64 gen(23);
  std::vector<TopicSpec> specs;
  for (int t = 1; t <= 9; ++t) specs.push_back(TopicSpec{t, "t", {"k"}, 0.2, random_vector(gen, 10)});
  for (double factor : {0.001, 0.5, 7.0, 1e4}) {
    auto scaled = specs;
    for (auto& s : scaled)
      for (auto& x : *s.center) x *= factor;
    for (int i = 0; i < 300; ++i) {
      auto v = random_vector(gen, 10);
      auto a = assign_sentence(v, specs), b = assign_sentence(v, scaled);
      CHECK(a.best_topic == b.best_topic);
      CHECK(a.accepted == b.accepted);
    }
  }
}

TEST_CASE("removing a topic only moves sentences that chose it") {
  std::mt19937_64 gen(29);
  std::vector<TopicSpec> specs;
  for (int t = 1; t <= 9; ++t) specs.push_back(TopicSpec{t, "t", {"k"}, 0.25, random_vector(gen, 10)});
  for (std::size_t removed = 0; removed < specs.size(); ++removed) {
    auto fewer = specs;
    fewer.erase(fewer.begin() + static_cast<std::ptrdiff_t>(removed));
    for (int i = 0; i < 200; ++i) {
      auto v = random_vector(gen, 10);
      auto a = assign_sentence(v, specs);
      if (a.best_topic == specs[removed].topic_id) continue;
      auto b = assign_sentence(v, fewer);
      CHECK(a.best_topic == b.best_topic);
      CHECK(a.similarity == b.similarity);
      CHECK(a.accepted == b.accepted);
    }
  }
}

TEST_CASE("topic_frequencies counting") {
  const std::vector<int> ids{1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto all = [](const std::string&) { return true; };
  std::vector<DocTopics> one{{"a", {1, 3}}};
  auto f = topic_frequencies(one, ids, all);
  for (std::size_t t = 0; t < ids.size(); ++t) CHECK(f.proportions[t] == ((ids[t] == 1 || ids[t] == 3) ? 1.0 : 0.0));

  std::vector<DocTopics> four{{"a", {2}}, {"b", {2, 5}}, {"c", {}}, {"d", {2}}};
  auto g = topic_frequencies(four, ids, all);
  CHECK(g.proportions[1] == 0.75);
  CHECK(g.counts[1] == 3);
  CHECK(g.cohort_size == 4);

  auto none = [](const std::string&) { return false; };
  CHECK_THROWS_AS(topic_frequencies(four, ids, none), ValidationError);
}

TEST_CASE("topic_frequencies match a planted generator exactly") {
  std::mt19937_64 gen(31);
  std::bernoulli_distribution cohort_pick(0.5);
  const std::vector<int> ids{1, 2, 3, 4, 5, 6, 7, 8, 9};
  const double rate_a[9] = {0.2, 0.3, 0.5, 0.1, 0.7, 0.4, 0.05, 0.3, 0.25};
  const double rate_b[9] = {0.25, 0.2, 0.6, 0.1, 0.5, 0.45, 0.1, 0.2, 0.3};
  std::vector<DocTopics> docs;
  std::set<std::string> in_a;
  std::size_t size_a = 0, size_b = 0;
  std::vector<std::size_t> count_a(9, 0), count_b(9, 0);
  for (int d = 0; d < 200; ++d) {
    const bool a = cohort_pick(gen);
    DocTopics doc{"doc" + std::to_string(d), {}};
    (a ? size_a : size_b)++;
    if (a) in_a.insert(doc.doc_id);
    for (int t = 0; t < 9; ++t)
      if (std::bernoulli_distribution(a ? rate_a[t] : rate_b[t])(gen)) {
        doc.topics.insert(t + 1);
        (a ? count_a : count_b)[static_cast<std::size_t>(t)]++;
      }
    docs.push_back(doc);
  }
  auto fa = topic_frequencies(docs, ids, [&](const std::string& id) { return in_a.count(id) > 0; });
  auto fb = topic_frequencies(docs, ids, [&](const std::string& id) { return in_a.count(id) == 0; });
  CHECK(fa.cohort_size == size_a);
  CHECK(fb.cohort_size == size_b);
  for (std::size_t t = 0; t < 9; ++t) {
    CHECK(fa.proportions[t] == static_cast<double>(count_a[t]) / static_cast<double>(size_a));
    CHECK(fb.proportions[t] == static_cast<double>(count_b[t]) / static_cast<double>(size_b));
    CHECK(fa.proportions[t] >= 0.0);
    CHECK(fa.proportions[t] <= 1.0);
  }
}

TEST_CASE("mean_topic_count") {
  auto all = [](const std::string&) { return true; };
  std::vector<DocTopics> two{{"a", {1, 2}}, {"b", {1, 2, 3}}};
  auto s = mean_topic_count(two, all);
  CHECK(s.mean == 2.5);
  REQUIRE(s.sd.has_value());
  CHECK(*s.sd == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(s.n == 2);

  std::vector<DocTopics> same{{"a", {1, 2}}, {"b", {3, 4}}, {"c", {5, 9}}};
  CHECK(*mean_topic_count(same, all).sd == 0.0);

  std::vector<DocTopics> single{{"a", {1}}};
  auto one = mean_topic_count(single, all);
  CHECK(one.n == 1);
  CHECK_FALSE(one.sd.has_value());

  CHECK_THROWS_AS(mean_topic_count(two, [](const std::string&) { return false; }), ValidationError);
}

TEST_CASE("mean_topic_count matches brute-force recomputation on 1000 docs") {
  std::mt19937_64 gen(37);
  std::uniform_int_distribution<int> topic(1, 9);
  std::uniform_int_distribution<int> how_many(0, 6);
  std::vector<DocTopics> docs;
  for (int d = 0; d < 1000; ++d) {
    DocTopics doc{"d" + std::to_string(d), {}};
    for (int i = how_many(gen); i > 0; --i) doc.topics.insert(topic(gen));
    docs.push_back(doc);
  }
  auto even = [](const std::string& id) { return (id.back() - '0') % 2 == 0; };
  auto s = mean_topic_count(docs, even);

  std::vector<int> counts;
  for (const auto& d : docs)
    if (even(d.doc_id)) counts.push_back(static_cast<int>(d.topics.size()));
  const long total = std::accumulate(counts.begin(), counts.end(), 0L);
  const double mean = static_cast<double>(total) / static_cast<double>(counts.size());
  double ss = 0;
  for (int c : counts) ss += (c - mean) * (c - mean);
  const double sd = std::sqrt(ss / static_cast<double>(counts.size() - 1));
  CHECK(s.n == counts.size());
  CHECK(s.mean == mean);
  CHECK(*s.sd == sd);
}

TEST_CASE("assignment CSV exports") {
  std::vector<SentenceAssignment> rows{{"a,1", 0, 3, 0.5, true}, {"b", 2, 9, 0.125, false}};
  std::ostringstream out;
  write_sentence_csv(out, rows);
  CHECK(out.str() == "doc_id,sentence_index,best_topic,similarity,accepted\n\"a,1\",0,3,0.5,true\nb,2,9,0.125,false\n");

  std::vector<DocTopics> docs{{"a", {3, 1}}, {"b", {}}, {"c", {9}}};
  std::ostringstream dt;
  write_doc_topics_csv(dt, docs);
  CHECK(dt.str() == "doc_id,topics\na,1;3\nb,\nc,9\n");
  auto back = read_doc_topics_csv(dt.str());
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].doc_id == docs[i].doc_id);
    CHECK(back[i].topics == docs[i].topics);
  }
  CHECK_THROWS_AS(read_doc_topics_csv("doc_id,topics\na,1;x\n"), ParseError);
}
