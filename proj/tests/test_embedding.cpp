#include "test_support.hpp"
#include "topicforge/embedding.hpp"
#include "topicforge/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace topicforge;

namespace {

VectorStore store_from(const std::string& text) {
  std::istringstream in(text);
  return read_vectors(in);
}

Vector as_vector(std::span<const float> v) { return Vector(v.begin(), v.end()); }

double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("load_vectors: minimal valid file") {
  auto s = store_from("2 3\nalpha 1 2 3\nbeta -0.5 0 0.25\n");
  CHECK(s.size() == 2);
  CHECK(s.dim() == 3);
  auto b = s.find("beta");
  REQUIRE(b);
  CHECK((*b)[0] == -0.5f);
  CHECK((*b)[2] == 0.25f);
}

TEST_CASE("load_vectors: wrong component count names the line") {
  try {
    store_from("2 3\nalpha 1 2 3\nbeta 1 2\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(store_from("2 3\nalpha 1 2 3 4\nbeta 1 2 3\n"), ParseError);
}

TEST_CASE("load_vectors: malformed inputs are errors, never partial stores") {
  CHECK_THROWS_AS(store_from(""), ParseError);
  CHECK_THROWS_AS(store_from("two 3\na 1 2 3\n"), ParseError);
  CHECK_THROWS_AS(store_from("1 0\n"), ParseError);
  CHECK_THROWS_AS(store_from("1 3 7\na 1 2 3\n"), ParseError);
  CHECK_THROWS_AS(store_from("1 2\na 1 x\n"), ParseError);
  CHECK_THROWS_AS(store_from("1 2\na 1 nan\n"), ParseError);
  CHECK_THROWS_AS(store_from("1 2\na 1 inf\n"), ParseError);
  CHECK_THROWS_AS(store_from("2 2\na 1 2\n"), ParseError);
  CHECK_THROWS_AS(store_from("1 2\na 1 2\nb 3 4\n"), ParseError);
}

TEST_CASE("load_vectors: duplicate token, last wins with a warning") {
  tf_test::WarningCapture warnings;
  auto s = store_from("3 2\na 1 2\nb 3 4\na 5 6\n");
  CHECK(s.size() == 2);
  CHECK(as_vector(*s.find("a")) == Vector{5, 6});
  CHECK(s.tokens() == std::vector<std::string>{"a", "b"});
  REQUIRE(warnings.messages.size() == 1);
  CHECK(warnings.messages[0].find("'a'") != std::string::npos);
}

TEST_CASE("vectors round-trip with exact float equality") {
  std::mt19937_64 gen(7);
  std::normal_distribution<float> nd(0.f, 1.f);
  VectorStore s(5);
  for (int t = 0; t < 50; ++t) {
    std::vector<float> v(5);
    for (auto& x : v) x = nd(gen) * std::pow(10.f, static_cast<float>(t % 7 - 3));
    s.add("tok" + std::to_string(t), v);
  }
  std::ostringstream out;
  write_vectors(out, s);
  auto back = store_from(out.str());
  REQUIRE(back.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(back.tokens()[i] == s.tokens()[i]);
    auto a = s.vector_at(i), b = back.vector_at(i);
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
  std::ostringstream again;
  write_vectors(again, back);
  CHECK(again.str() == out.str());
}

TEST_CASE("lookup normalization order") {
  auto s = store_from("5 1\nschool 1\nSchool 2\nNew 3\nhigh-school 4\nscience 5\n");
  CHECK(s.lookup("School").size() == 1);
  CHECK(s.lookup("School")[0][0] == 1.f);  // lowercase form first
  CHECK(s.lookup("New")[0][0] == 3.f);     // raw when lowercase is absent
  CHECK(s.lookup("high_school")[0][0] == 4.f);
  auto parts = s.lookup("computer_science");
  REQUIRE(parts.size() == 1);
  CHECK(parts[0][0] == 5.f);
  CHECK(s.lookup("missing").empty());
}

TEST_CASE("sentence_vector basics") {
  auto s = store_from("3 2\nw 0.1 0.7\nv 1 3\nu -2 4\n");
  std::vector<std::string> one{"w"};
  CHECK(*sentence_vector(s, one) == as_vector(*s.find("w")));
  std::vector<std::string> twice{"w", "w"};
  CHECK(*sentence_vector(s, twice) == as_vector(*s.find("w")));
  std::vector<std::string> oov{"x", "y"};
  CHECK_FALSE(sentence_vector(s, oov).has_value());
  std::vector<std::string> mixed{"v", "zzz", "u"};
  CHECK(*sentence_vector(s, mixed) == Vector{-0.5, 3.5});
  std::vector<std::string> phrase{"v_u"};
  CHECK(*sentence_vector(s, phrase) == Vector{-0.5, 3.5});
}

TEST_CASE("sentence_vector is exactly permutation-invariant") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<float> ud(-1.f, 1.f);
  VectorStore s(16);
  for (int t = 0; t < 40; ++t) {
    std::vector<float> v(16);
    for (auto& x : v) x = ud(gen);
    s.add("w" + std::to_string(t), v);
  }
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> toks;
    for (int i = 0; i < 12; ++i) toks.push_back("w" + std::to_string(gen() % 45));
    auto base = sentence_vector(s, toks);
    std::shuffle(toks.begin(), toks.end(), gen);
    auto shuffled = sentence_vector(s, toks);
    REQUIRE(base.has_value() == shuffled.has_value());
    if (base) CHECK(*base == *shuffled);
  }
}

TEST_CASE("cosine identities") {
  Vector a{1, 0}, b{1, 1}, c{0, 1};
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(a, c) == 0.0);
  CHECK(cosine_similarity(a, b) == doctest::Approx(std::sqrt(2.0) / 2).epsilon(1e-15));
  Vector z{0, 0};
  CHECK_THROWS_AS(cosine_similarity(a, z), Error);
  CHECK_THROWS_AS(cosine_similarity(a, Vector{1, 2, 3}), Error);

  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd(0, 1);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int t = 0; t < 200; ++t) {
    Vector x(50), y(50);
    for (auto& v : x) v = nd(gen);
    for (auto& v : y) v = nd(gen);
    const double c0 = cosine_similarity(x, y);
    CHECK(c0 == cosine_similarity(y, x));
    CHECK(c0 >= -1.0);
    CHECK(c0 <= 1.0);
    const double lambda = scale(gen);
    Vector sx = x;
    for (auto& v : sx) v *= lambda;
    CHECK(std::abs(cosine_similarity(sx, y) - c0) <= 1e-12);
    CHECK(std::abs(cosine_similarity(x, x) - 1.0) <= 1e-12);
  }
}

TEST_CASE("topic_center: one keyword, degenerate, missing") {
  auto s = store_from("3 2\nup 3 4\ndown -3 -4\nside 0 2\n");
  TopicSpec one{1, "one", {"up"}, 0.5, {}};
  CHECK(topic_center(s, one) == Vector{0.6, 0.8});
  REQUIRE(one.center.has_value());

  TopicSpec opposite{2, "opp", {"up", "down"}, 0.5, {}};
  try {
    topic_center(s, opposite);
    FAIL("expected degenerate center");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("degenerate center") != std::string::npos);
  }

  TopicSpec none{3, "Nothing Here", {"foo", "bar"}, 0.5, {}};
  try {
    topic_center(s, none);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("Nothing Here") != std::string::npos);
  }
}

TEST_CASE("topic_center: childhood dream fixture matches hand computation") {
  auto s = store_from("3 3\ndream 1 2 2\nchildhood 3 0 4\nyoung 0 3 0\n");
  auto specs = default_topic_specs();
  auto& t7 = specs[6];
  REQUIRE(t7.topic_id == 7);
  REQUIRE(t7.keywords == std::vector<std::string>{"dream", "childhood", "young"});
  // mean = (4, 5, 6) / 3, unit direction (4, 5, 6) / sqrt(77)
  const auto& c = topic_center(s, t7);
  const double r = std::sqrt(77.0);
  CHECK(c[0] == doctest::Approx(4 / r).epsilon(1e-15));
  CHECK(c[1] == doctest::Approx(5 / r).epsilon(1e-15));
  CHECK(c[2] == doctest::Approx(6 / r).epsilon(1e-15));
}

TEST_CASE("topic_center: duplicated keyword follows mean semantics") {
  auto s = store_from("2 2\na 1 0\nb 0 1\n");
  TopicSpec dup{1, "dup", {"a", "a", "b"}, 0.5, {}};
  const auto& c = topic_center(s, dup);
  // (2a + b) / 3 normalized = (2, 1) / sqrt(5)
  CHECK(c[0] == doctest::Approx(2 / std::sqrt(5.0)).epsilon(1e-15));
  CHECK(c[1] == doctest::Approx(1 / std::sqrt(5.0)).epsilon(1e-15));
  TopicSpec perm{2, "perm", {"b", "a", "a"}, 0.5, {}};
  CHECK(topic_center(s, perm) == c);
}

TEST_CASE("topic spec JSON") {
  auto specs = default_topic_specs();
  REQUIRE(specs.size() == 9);
  CHECK(specs[8].name == "Mentorship");
  CHECK(specs[8].threshold == 0.40);
  CHECK(specs[2].keywords.size() == 8);
  auto again = parse_topic_specs(topic_specs_json(specs));
  REQUIRE(again.size() == specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    CHECK(again[i].topic_id == specs[i].topic_id);
    CHECK(again[i].name == specs[i].name);
    CHECK(again[i].keywords == specs[i].keywords);
    CHECK(again[i].threshold == specs[i].threshold);
  }
  CHECK_THROWS_AS(parse_topic_specs(R"({"topics":[{"id":1,"name":"x","keywords":[],"threshold":0.5}]})"), ValidationError);
  CHECK_THROWS_AS(parse_topic_specs(R"({"topics":[{"id":1,"name":"x","keywords":["a"],"threshold":1.0}]})"), ValidationError);
  CHECK_THROWS_AS(parse_topic_specs(R"({"topics":[{"id":1,"name":"x","keywords":["a"],"threshold":-1.0}]})"), ValidationError);
  CHECK_THROWS_AS(parse_topic_specs(R"({"topics":[{"id":1,"name":"x","keywords":["a"],"threshold":0.1},
                                                  {"id":1,"name":"y","keywords":["b"],"threshold":0.1}]})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_topic_specs("{"), ValidationError);
  CHECK_THROWS_AS(parse_topic_specs(R"({"topics":[]})"), ValidationError);
}

TEST_CASE("project_centers_2d: rank-2 data keeps pairwise distances") {
  std::mt19937_64 gen(21);
  std::normal_distribution<double> nd(0, 1);
  const std::size_t d = 300;
  Vector e1(d), e2(d), offset(d);
  for (auto& v : e1) v = nd(gen);
  for (auto& v : e2) v = nd(gen);
  for (auto& v : offset) v = nd(gen);
  double n1 = 0;
  for (double v : e1) n1 += v * v;
  for (auto& v : e1) v /= std::sqrt(n1);
  double proj = 0;
  for (std::size_t i = 0; i < d; ++i) proj += e1[i] * e2[i];
  for (std::size_t i = 0; i < d; ++i) e2[i] -= proj * e1[i];
  double n2 = 0;
  for (double v : e2) n2 += v * v;
  for (auto& v : e2) v /= std::sqrt(n2);

  std::vector<Vector> centers;
  for (int i = 0; i < 9; ++i) {
    const double s = nd(gen) * 3, t = nd(gen);
    Vector c(d);
    for (std::size_t j = 0; j < d; ++j) c[j] = offset[j] + s * e1[j] + t * e2[j];
    centers.push_back(c);
  }
  auto p = project_centers_2d(centers);
  CHECK_FALSE(p.rank_deficient);
  for (std::size_t i = 0; i < centers.size(); ++i)
    for (std::size_t j = i + 1; j < centers.size(); ++j) {
      const double a = dist(centers[i], centers[j]);
      const double b = std::hypot(p.points[i][0] - p.points[j][0], p.points[i][1] - p.points[j][1]);
      CHECK(std::abs(a - b) <= 1e-9);
    }
}

TEST_CASE("project_centers_2d: two centers lie on axis 1 at their distance") {
  tf_test::WarningCapture warnings;
  std::vector<Vector> c{{1, 2, 3, 4}, {0, -1, 5, 2}};
  auto p = project_centers_2d(c);
  CHECK(p.rank_deficient);
  CHECK(warnings.messages.size() == 1);
  CHECK(std::abs(std::abs(p.points[0][0] - p.points[1][0]) - dist(c[0], c[1])) <= 1e-12);
  CHECK(p.points[0][1] == 0.0);
  CHECK(p.points[1][1] == 0.0);
}

TEST_CASE("project_centers_2d: identical centers give zeros") {
  tf_test::WarningCapture warnings;
  std::vector<Vector> c{{1, 2}, {1, 2}, {1, 2}};
  auto p = project_centers_2d(c);
  CHECK(p.rank_deficient);
  for (const auto& pt : p.points) CHECK((pt[0] == 0.0 && pt[1] == 0.0));
  CHECK_THROWS_AS(project_centers_2d(std::vector<Vector>{{1, 2}}), ValidationError);
}

TEST_CASE("project_centers_2d matches a power-iteration oracle") {
  std::mt19937_64 gen(99);
  std::normal_distribution<double> nd(0, 1);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Vector> centers(9, Vector(300));
    for (auto& c : centers)
      for (auto& v : c) v = nd(gen);
    auto p = project_centers_2d(centers);
    auto oracle = tf_test::power_iteration_projection(centers);
    for (std::size_t i = 0; i < centers.size(); ++i) {
      CHECK(std::abs(p.points[i][0] - oracle[i][0]) <= 1e-6);
      CHECK(std::abs(p.points[i][1] - oracle[i][1]) <= 1e-6);
    }
  }
}
