#include "topicforge/embedding.hpp"

#include "topicforge/error.hpp"
#include "topicforge/io.hpp"
#include "topicforge/log.hpp"
#include "topicforge/text.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace topicforge {

bool VectorStore::add(const std::string& token, std::span<const float> values) {
  if (values.size() != dim_) throw Error("vector for '" + token + "' has dimension " + std::to_string(values.size()));
  if (auto it = index_.find(token); it != index_.end()) {
    std::copy(values.begin(), values.end(), data_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
    return true;
  }
  index_.emplace(token, tokens_.size());
  tokens_.push_back(token);
  data_.insert(data_.end(), values.begin(), values.end());
  return false;
}

std::optional<std::span<const float>> VectorStore::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return vector_at(it->second);
}

std::vector<std::span<const float>> VectorStore::lookup(std::string_view token) const {
  const std::string lower = to_lower(token);
  if (auto v = find(lower)) return {*v};
  if (auto v = find(token)) return {*v};
  if (!is_compound(lower)) return {};

  std::string hyphenated = lower;
  std::replace(hyphenated.begin(), hyphenated.end(), '_', '-');
  if (auto v = find(hyphenated)) return {*v};

  std::vector<std::span<const float>> parts;
  std::size_t start = 0;
  while (start <= lower.size()) {
    auto end = lower.find('_', start);
    if (end == std::string::npos) end = lower.size();
    if (end > start)
      if (auto v = find(std::string_view(lower).substr(start, end - start))) parts.push_back(*v);
    start = end + 1;
  }
  return parts;
}

VectorStore read_vectors(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing word2vec header", 1);
  std::istringstream header(line);
  long long count = -1, dim = -1;
  std::string extra;
  if (!(header >> count >> dim) || (header >> extra) || count < 0 || dim <= 0)
    throw ParseError("malformed word2vec header '" + line + "' (expected '<vocab_count> <dim>')", 1);

  VectorStore store(static_cast<std::size_t>(dim));
  std::vector<float> values(static_cast<std::size_t>(dim));
  std::size_t line_no = 1;
  long long rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    const char* tok_end = std::find(p, end, ' ');
    std::string token(p, tok_end);
    if (token.empty()) throw ParseError("empty token", line_no);
    p = tok_end;
    std::size_t n = 0;
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      if (n == values.size()) throw ParseError("vector for '" + token + "' has more than " + std::to_string(dim) + " components", line_no);
      auto [next, ec] = std::from_chars(p, end, values[n]);
      if (ec != std::errc() || (next < end && *next != ' '))
        throw ParseError("invalid number in vector for '" + token + "'", line_no);
      if (!std::isfinite(values[n])) throw ParseError("non-finite component in vector for '" + token + "'", line_no);
      ++n;
      p = next;
    }
    if (n != values.size())
      throw ParseError("vector for '" + token + "' has " + std::to_string(n) + " components, expected " + std::to_string(dim),
                       line_no);
    if (store.add(token, values)) log_warning("duplicate vector for '" + token + "' at line " + std::to_string(line_no) + "; last wins");
    ++rows;
  }
  if (rows != count)
    throw ParseError("header declares " + std::to_string(count) + " vectors, found " + std::to_string(rows), line_no);
  return store;
}

VectorStore load_vectors(const std::string& path) {
  std::istringstream in(read_file(path));
  return read_vectors(in);
}

void write_vectors(std::ostream& out, const VectorStore& store) {
  out << store.size() << ' ' << store.dim() << '\n';
  for (std::size_t i = 0; i < store.size(); ++i) {
    out << store.tokens()[i];
    for (float v : store.vector_at(i)) out << ' ' << format_float(v);
    out << '\n';
  }
}

void save_vectors(const std::string& path, const VectorStore& store) {
  std::ostringstream ss;
  write_vectors(ss, store);
  write_file(path, ss.str());
}

namespace {

std::optional<Vector> mean_of(std::vector<std::pair<std::string, std::span<const float>>> items, std::size_t dim) {
  if (items.empty()) return std::nullopt;
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  Vector sum(dim, 0.0);
  for (const auto& [token, v] : items)
    for (std::size_t i = 0; i < dim; ++i) sum[i] += static_cast<double>(v[i]);
  const double n = static_cast<double>(items.size());
  for (auto& x : sum) x /= n;
  return sum;
}

std::vector<std::pair<std::string, std::span<const float>>> collect(const VectorStore& store,
                                                                    std::span<const std::string> tokens) {
  std::vector<std::pair<std::string, std::span<const float>>> items;
  for (const auto& t : tokens)
    for (auto v : store.lookup(t)) items.emplace_back(t, v);
  return items;
}

}  // namespace

std::optional<Vector> sentence_vector(const VectorStore& store, std::span<const std::string> tokens) {
  return mean_of(collect(store, tokens), store.dim());
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("cosine_similarity: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) throw Error("cosine_similarity: zero vector");
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

void TopicSpec::validate() const {
  if (keywords.empty()) throw ValidationError("topic " + std::to_string(topic_id) + " has no keywords");
  for (const auto& k : keywords)
    if (trim(k).empty()) throw ValidationError("topic " + std::to_string(topic_id) + " has an empty keyword");
  if (!(threshold > -1.0 && threshold < 1.0))
    throw ValidationError("topic " + std::to_string(topic_id) + " threshold must lie in (-1, 1)");
}

const Vector& topic_center(const VectorStore& store, TopicSpec& spec) {
  if (spec.center) return *spec.center;
  auto mean = mean_of(collect(store, spec.keywords), store.dim());
  if (!mean) throw Error("topic " + std::to_string(spec.topic_id) + " (" + spec.name + "): no keyword has a vector");
  double norm = 0;
  for (double x : *mean) norm += x * x;
  norm = std::sqrt(norm);
  if (norm < 1e-12) throw Error("topic " + std::to_string(spec.topic_id) + " (" + spec.name + "): degenerate center");
  for (auto& x : *mean) x /= norm;
  spec.center = std::move(*mean);
  return *spec.center;
}

void resolve_centers(const VectorStore& store, std::vector<TopicSpec>& specs) {
  for (auto& s : specs) topic_center(store, s);
}

std::vector<TopicSpec> parse_topic_specs(std::string_view json_text) {
  std::vector<TopicSpec> specs;
  try {
    auto j = nlohmann::json::parse(json_text);
    for (const auto& t : j.at("topics")) {
      TopicSpec s;
      s.topic_id = t.at("id").get<int>();
      s.name = t.at("name").get<std::string>();
      s.keywords = t.at("keywords").get<std::vector<std::string>>();
      s.threshold = t.at("threshold").get<double>();
      specs.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed topic spec file: ") + e.what());
  }
  std::set<int> ids;
  for (const auto& s : specs) {
    s.validate();
    if (!ids.insert(s.topic_id).second) throw ValidationError("duplicate topic id " + std::to_string(s.topic_id));
  }
  if (specs.empty()) throw ValidationError("topic spec file defines no topics");
  return specs;
}

std::vector<TopicSpec> load_topic_specs(const std::string& path) { return parse_topic_specs(read_file(path)); }

std::string topic_specs_json(const std::vector<TopicSpec>& specs) {
  auto topics = nlohmann::ordered_json::array();
  for (const auto& s : specs) {
    nlohmann::ordered_json t;
    t["id"] = s.topic_id;
    t["name"] = s.name;
    t["keywords"] = s.keywords;
    t["threshold"] = s.threshold;
    topics.push_back(std::move(t));
  }
  nlohmann::ordered_json j;
  j["topics"] = std::move(topics);
  return j.dump(2) + "\n";
}

std::vector<TopicSpec> default_topic_specs() { return parse_topic_specs(builtin_topic_specs_json()); }

Projection2d project_centers_2d(std::span<const Vector> centers) {
  if (centers.size() < 2) throw ValidationError("2-D projection needs at least 2 centers");
  const auto m = static_cast<Eigen::Index>(centers.size());
  const auto d = static_cast<Eigen::Index>(centers[0].size());
  Eigen::MatrixXd x(m, d);
  for (Eigen::Index r = 0; r < m; ++r) {
    if (static_cast<Eigen::Index>(centers[r].size()) != d) throw Error("2-D projection: dimension mismatch");
    for (Eigen::Index c = 0; c < d; ++c) x(r, c) = centers[r][c];
  }
  x.rowwise() -= x.colwise().mean();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  Eigen::MatrixXd v = svd.matrixV();

  Projection2d out;
  out.points.assign(centers.size(), {0.0, 0.0});
  const double s1 = sv.size() > 0 ? sv(0) : 0.0;
  const double s2 = sv.size() > 1 ? sv(1) : 0.0;
  out.singular_values = {s1, s2};
  const double tol = 1e-10 * std::max(1.0, s1);
  const int usable = s1 <= tol ? 0 : (s2 <= tol ? 1 : 2);
  out.rank_deficient = usable < 2;
  if (out.rank_deficient) log_warning("2-D projection: centered centers have rank < 2; second coordinate is zero");

  for (int axis = 0; axis < usable; ++axis) {
    Eigen::VectorXd dir = v.col(axis);
    Eigen::Index arg = 0;
    dir.cwiseAbs().maxCoeff(&arg);
    if (dir(arg) < 0) dir = -dir;
    Eigen::VectorXd coords = x * dir;
    for (Eigen::Index r = 0; r < m; ++r) out.points[static_cast<std::size_t>(r)][static_cast<std::size_t>(axis)] = coords(r);
  }
  return out;
}

}  // namespace topicforge
