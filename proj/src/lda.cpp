#include "topicforge/lda.hpp"

#include "topicforge/error.hpp"
#include "topicforge/io.hpp"
#include "topicforge/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace topicforge {

namespace {

constexpr int kModelFormatVersion = 1;

void normalize_rows(std::vector<double>& m, std::size_t cols) {
  for (std::size_t r = 0; r * cols < m.size(); ++r) {
    double s = 0;
    for (std::size_t c = 0; c < cols; ++c) s += m[r * cols + c];
    if (s > 0)
      for (std::size_t c = 0; c < cols; ++c) m[r * cols + c] /= s;
  }
}

}  // namespace

void LdaConfig::validate() const {
  if (k == 0) throw ValidationError("lda: k must be >= 1");
  if (!(resolved_alpha() > 0)) throw ValidationError("lda: alpha must be > 0");
  if (!(beta > 0)) throw ValidationError("lda: beta must be > 0");
  if (iterations <= burn_in) throw ValidationError("lda: iterations must exceed burn_in");
  if (sample_lag == 0) throw ValidationError("lda: sample_lag must be >= 1");
}

std::vector<double> LdaModel::point_phi() const {
  const std::size_t K = config.k;
  const double beta = config.beta;
  std::vector<double> out(K * vocab_size);
  for (std::size_t t = 0; t < K; ++t) {
    const double denom = static_cast<double>(n_k[t]) + static_cast<double>(vocab_size) * beta;
    for (std::size_t w = 0; w < vocab_size; ++w)
      out[t * vocab_size + w] = (static_cast<double>(n_wk[w * K + t]) + beta) / denom;
  }
  return out;
}

std::vector<double> LdaModel::point_theta() const {
  const std::size_t K = config.k;
  const double alpha = config.resolved_alpha();
  std::vector<double> out(num_docs * K);
  for (std::size_t d = 0; d < num_docs; ++d) {
    const double denom = static_cast<double>(z[d].size()) + static_cast<double>(K) * alpha;
    for (std::size_t t = 0; t < K; ++t)
      out[d * K + t] = (static_cast<double>(n_dk[d * K + t]) + alpha) / denom;
  }
  return out;
}

LdaModel fit_lda(std::span<const TokenStream> docs, std::size_t vocab_size, const LdaConfig& config,
                 const SweepObserver& observer) {
  config.validate();
  if (docs.empty()) throw Error("lda: empty corpus");
  if (vocab_size == 0) throw Error("lda: empty vocabulary");
  for (std::size_t d = 0; d < docs.size(); ++d)
    for (auto w : docs[d])
      if (w >= vocab_size)
        throw Error("lda: token id " + std::to_string(w) + " in document " + std::to_string(d) +
                    " is outside the vocabulary");

  const std::size_t K = config.k;
  const std::size_t V = vocab_size;
  const double alpha = config.resolved_alpha();
  const double beta = config.beta;
  const double v_beta = static_cast<double>(V) * beta;

  LdaModel m;
  m.config = config;
  m.config.alpha = alpha;
  m.vocab_size = V;
  m.num_docs = docs.size();
  m.n_wk.assign(V * K, 0);
  m.n_dk.assign(docs.size() * K, 0);
  m.n_k.assign(K, 0);
  m.z.resize(docs.size());

  Rng rng(config.seed);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    m.z[d].resize(docs[d].size());
    for (std::size_t i = 0; i < docs[d].size(); ++i) {
      const auto t = static_cast<std::uint32_t>(rng.index(K));
      m.z[d][i] = t;
      ++m.n_wk[docs[d][i] * K + t];
      ++m.n_dk[d * K + t];
      ++m.n_k[t];
    }
  }

  std::vector<double> cumulative(K);
  std::vector<double> phi_sum(K * V, 0.0);
  std::vector<double> theta_sum(docs.size() * K, 0.0);
  std::size_t samples = 0;
  auto accumulate = [&] {
    auto phi = m.point_phi();
    auto theta = m.point_theta();
    for (std::size_t i = 0; i < phi.size(); ++i) phi_sum[i] += phi[i];
    for (std::size_t i = 0; i < theta.size(); ++i) theta_sum[i] += theta[i];
    ++samples;
  };

  for (std::size_t sweep = 1; sweep <= config.iterations; ++sweep) {
    for (std::size_t d = 0; d < docs.size(); ++d) {
      const auto& doc = docs[d];
      auto* ndk = &m.n_dk[d * K];
      for (std::size_t i = 0; i < doc.size(); ++i) {
        const TokenId w = doc[i];
        auto* nwk = &m.n_wk[w * K];
        std::uint32_t t = m.z[d][i];
        --nwk[t];
        --ndk[t];
        --m.n_k[t];
        if (nwk[t] < 0 || ndk[t] < 0 || m.n_k[t] < 0) throw std::logic_error("lda: negative count in sampler");

        double total = 0;
        for (std::size_t j = 0; j < K; ++j) {
          total += (static_cast<double>(ndk[j]) + alpha) * (static_cast<double>(nwk[j]) + beta) /
                   (static_cast<double>(m.n_k[j]) + v_beta);
          cumulative[j] = total;
        }
        const double u = rng.uniform() * total;
        t = 0;
        while (t + 1 < K && cumulative[t] <= u) ++t;

        m.z[d][i] = t;
        ++nwk[t];
        ++ndk[t];
        ++m.n_k[t];
      }
    }
    if (observer) observer(m, sweep);
    if (sweep > config.burn_in && (sweep - config.burn_in) % config.sample_lag == 0) accumulate();
  }
  if (samples == 0) accumulate();

  const double inv = 1.0 / static_cast<double>(samples);
  for (auto& x : phi_sum) x *= inv;
  for (auto& x : theta_sum) x *= inv;
  normalize_rows(phi_sum, V);
  normalize_rows(theta_sum, K);
  m.phi = std::move(phi_sum);
  m.theta = std::move(theta_sum);
  return m;
}

std::vector<TokenId> top_words(const LdaModel& model, std::size_t topic, std::size_t n) {
  if (topic >= model.k())
    throw Error("topic " + std::to_string(topic) + " out of range (k=" + std::to_string(model.k()) + ")");
  std::vector<TokenId> ids(model.vocab_size);
  std::iota(ids.begin(), ids.end(), TokenId{0});
  const auto row = model.phi_row(topic);
  n = std::min(n, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(), [&](TokenId a, TokenId b) {
    if (row[a] != row[b]) return row[a] > row[b];
    return a < b;
  });
  ids.resize(n);
  return ids;
}

double perplexity(const LdaModel& model, std::span<const TokenStream> docs) {
  if (docs.size() != model.num_docs)
    throw Error("perplexity: expected " + std::to_string(model.num_docs) + " documents, got " +
                std::to_string(docs.size()));
  double log_likelihood = 0;
  std::size_t tokens = 0;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto theta = model.theta_row(d);
    for (auto w : docs[d]) {
      if (w >= model.vocab_size) throw Error("perplexity: token id " + std::to_string(w) + " outside vocabulary");
      double p = 0;
      for (std::size_t t = 0; t < model.k(); ++t) p += theta[t] * model.phi_at(t, w);
      log_likelihood += std::log(p);
      ++tokens;
    }
  }
  if (tokens == 0) throw Error("perplexity: corpus has no tokens");
  return std::exp(-log_likelihood / static_cast<double>(tokens));
}

void save_model(std::ostream& out, const LdaModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "topicforge-lda";
  j["version"] = kModelFormatVersion;
  j["config"] = {{"k", model.config.k},
                 {"alpha", model.config.resolved_alpha()},
                 {"beta", model.config.beta},
                 {"iterations", model.config.iterations},
                 {"burn_in", model.config.burn_in},
                 {"sample_lag", model.config.sample_lag},
                 {"seed", model.config.seed}};
  j["vocab_size"] = model.vocab_size;
  j["vocab_hash"] = model.vocab_hash;
  j["num_docs"] = model.num_docs;
  auto rows = [](const std::vector<double>& m, std::size_t cols) {
    auto arr = nlohmann::json::array();
    for (std::size_t r = 0; r * cols < m.size(); ++r)
      arr.push_back(std::vector<double>(m.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                        m.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols)));
    return arr;
  };
  j["phi"] = rows(model.phi, model.vocab_size);
  j["theta"] = rows(model.theta, model.config.k);
  out << j.dump() << '\n';
}

LdaModel load_model(std::istream& in, const std::optional<std::string>& expected_vocab_hash) {
  LdaModel m;
  try {
    auto j = nlohmann::json::parse(in);
    if (j.at("format") != "topicforge-lda") throw Error("not an LDA model file");
    if (j.at("version").get<int>() != kModelFormatVersion)
      throw Error("unsupported LDA model version " + j.at("version").dump());
    const auto& c = j.at("config");
    m.config.k = c.at("k").get<std::size_t>();
    m.config.alpha = c.at("alpha").get<double>();
    m.config.beta = c.at("beta").get<double>();
    m.config.iterations = c.at("iterations").get<std::size_t>();
    m.config.burn_in = c.at("burn_in").get<std::size_t>();
    m.config.sample_lag = c.at("sample_lag").get<std::size_t>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.vocab_size = j.at("vocab_size").get<std::size_t>();
    m.vocab_hash = j.at("vocab_hash").get<std::string>();
    m.num_docs = j.at("num_docs").get<std::size_t>();
    for (const auto& row : j.at("phi")) {
      auto r = row.get<std::vector<double>>();
      if (r.size() != m.vocab_size) throw Error("phi row has wrong length");
      m.phi.insert(m.phi.end(), r.begin(), r.end());
    }
    for (const auto& row : j.at("theta")) {
      auto r = row.get<std::vector<double>>();
      if (r.size() != m.config.k) throw Error("theta row has wrong length");
      m.theta.insert(m.theta.end(), r.begin(), r.end());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed LDA model file: ") + e.what());
  }
  if (m.phi.size() != m.config.k * m.vocab_size || m.theta.size() != m.num_docs * m.config.k)
    throw Error("LDA model matrices do not match declared shape");
  if (expected_vocab_hash && *expected_vocab_hash != m.vocab_hash)
    throw Error("LDA model vocabulary hash " + m.vocab_hash + " does not match " + *expected_vocab_hash);
  return m;
}

void save_model_file(const std::string& path, const LdaModel& model) {
  std::ostringstream ss;
  save_model(ss, model);
  write_file(path, ss.str());
}

LdaModel load_model_file(const std::string& path, const std::optional<std::string>& expected_vocab_hash) {
  std::istringstream in(read_file(path));
  return load_model(in, expected_vocab_hash);
}

}  // namespace topicforge
