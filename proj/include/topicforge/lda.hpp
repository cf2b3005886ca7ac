#pragma once

#include "topicforge/corpus.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace topicforge {

using TokenStream = std::vector<TokenId>;

struct LdaConfig {
  std::size_t k = 10;
  // Symmetric document-topic prior; unset means 50 / k.
  std::optional<double> alpha;
  double beta = 0.01;
  std::size_t iterations = 1000;
  std::size_t burn_in = 500;
  // Post-burn-in sweeps between retained estimates.
  std::size_t sample_lag = 10;
  std::uint64_t seed = 0;

  double resolved_alpha() const { return alpha ? *alpha : 50.0 / static_cast<double>(k); }
  void validate() const;
};

// Collapsed Gibbs state plus posterior-mean estimates. Matrices are dense
// and row-major: n_wk is V x k, n_dk is D x k, phi is k x V, theta is D x k.
struct LdaModel {
  LdaConfig config;
  std::size_t vocab_size = 0;
  std::size_t num_docs = 0;
  std::string vocab_hash;

  std::vector<std::int64_t> n_wk;
  std::vector<std::int64_t> n_dk;
  std::vector<std::int64_t> n_k;
  std::vector<std::vector<std::uint32_t>> z;

  std::vector<double> phi;
  std::vector<double> theta;

  std::size_t k() const { return config.k; }
  double phi_at(std::size_t topic, TokenId w) const { return phi[topic * vocab_size + w]; }
  double theta_at(std::size_t doc, std::size_t topic) const { return theta[doc * config.k + topic]; }
  std::span<const double> phi_row(std::size_t topic) const {
    return {phi.data() + topic * vocab_size, vocab_size};
  }
  std::span<const double> theta_row(std::size_t doc) const {
    return {theta.data() + doc * config.k, config.k};
  }

  // Smoothed ratios from the current counts (a single-sample estimate).
  std::vector<double> point_phi() const;
  std::vector<double> point_theta() const;
};

// Called after every completed sweep (1-based) with the live state.
using SweepObserver = std::function<void(const LdaModel&, std::size_t sweep)>;

// Throws on an empty corpus, invalid config, or a token id >= vocab_size.
LdaModel fit_lda(std::span<const TokenStream> docs, std::size_t vocab_size, const LdaConfig& config,
                 const SweepObserver& observer = {});

// Ids of the n largest phi entries of `topic`, ties by ascending id.
std::vector<TokenId> top_words(const LdaModel& model, std::size_t topic, std::size_t n);

// exp(-sum log p(w|d) / N) using the model's theta for the same documents.
double perplexity(const LdaModel& model, std::span<const TokenStream> docs);

// Versioned JSON with config, vocabulary hash, phi and theta. Counts and
// assignments are not persisted.
void save_model(std::ostream& out, const LdaModel& model);
LdaModel load_model(std::istream& in, const std::optional<std::string>& expected_vocab_hash = std::nullopt);
void save_model_file(const std::string& path, const LdaModel& model);
LdaModel load_model_file(const std::string& path,
                         const std::optional<std::string>& expected_vocab_hash = std::nullopt);

}  // namespace topicforge
