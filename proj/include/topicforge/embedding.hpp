#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace topicforge {

using Vector = std::vector<double>;

// Immutable-after-load word vectors in word2vec text layout. Tokens keep
// their file order; a duplicate token overwrites the earlier vector in place.
class VectorStore {
 public:
  explicit VectorStore(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::span<const float> vector_at(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  // Returns true when the token was already present (and is now replaced).
  bool add(const std::string& token, std::span<const float> values);

  // Exact token match.
  std::optional<std::span<const float>> find(std::string_view token) const;

  // Normalized lookup: lowercase form, then the raw token, then for phrase
  // tokens the hyphenated spelling, then the phrase parts individually.
  // Empty when nothing matches.
  std::vector<std::span<const float>> lookup(std::string_view token) const;

 private:
  std::size_t dim_;
  std::vector<std::string> tokens_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

VectorStore read_vectors(std::istream& in);
VectorStore load_vectors(const std::string& path);
void write_vectors(std::ostream& out, const VectorStore& store);
void save_vectors(const std::string& path, const VectorStore& store);

// Mean of the in-store vectors of `tokens` (OOV tokens skipped); nullopt if
// none are found. Summation order is canonical, so token order never
// changes the result.
std::optional<Vector> sentence_vector(const VectorStore& store, std::span<const std::string> tokens);

// dot(a, b) / (|a| |b|) clamped to [-1, 1]. Throws on a zero vector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct TopicSpec {
  int topic_id = 0;
  std::string name;
  std::vector<std::string> keywords;
  double threshold = 0.5;
  std::optional<Vector> center;

  // Non-empty keywords, threshold strictly inside (-1, 1).
  void validate() const;
};

// Mean of keyword vectors renormalized to unit length; cached on the spec.
// Throws when no keyword is in the store or the mean is (numerically) zero.
const Vector& topic_center(const VectorStore& store, TopicSpec& spec);
void resolve_centers(const VectorStore& store, std::vector<TopicSpec>& specs);

// {"topics":[{"id":1,"name":..,"keywords":[..],"threshold":0.6},..]}
std::vector<TopicSpec> parse_topic_specs(std::string_view json_text);
std::vector<TopicSpec> load_topic_specs(const std::string& path);
std::string topic_specs_json(const std::vector<TopicSpec>& specs);
std::vector<TopicSpec> default_topic_specs();

struct Projection2d {
  std::vector<std::array<double, 2>> points;
  std::array<double, 2> singular_values{0, 0};
  bool rank_deficient = false;
};

// Mean-centers the centers and projects onto the top two right singular
// vectors; each singular vector's largest-magnitude component is made
// positive. Rank < 2 leaves the second coordinate at zero (with a warning).
Projection2d project_centers_2d(std::span<const Vector> centers);

}  // namespace topicforge
