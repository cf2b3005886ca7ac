#pragma once

// Test-only helpers: independent oracles that never call library code paths
// they are meant to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "topicforge/log.hpp"

namespace tf_test {

inline double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

// Maximum-weight assignment of rows to columns by exhaustive permutation
// search (exact for the small k used in tests). Returns per-row scores.
inline std::vector<double> best_matching(const std::vector<std::vector<double>>& score) {
  const std::size_t n = score.size();
  std::vector<std::size_t> perm(score.empty() ? 0 : score[0].size());
  std::iota(perm.begin(), perm.end(), 0);
  double best_total = -1e300;
  std::vector<double> best;
  do {
    double total = 0;
    for (std::size_t r = 0; r < n; ++r) total += score[r][perm[r]];
    if (total > best_total) {
      best_total = total;
      best.assign(n, 0);
      for (std::size_t r = 0; r < n; ++r) best[r] = score[r][perm[r]];
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Cosine similarity between each planted row and each recovered row, then the
// best one-to-one matching.
inline std::vector<double> matched_cosines(const std::vector<double>& planted, const std::vector<double>& recovered,
                                           std::size_t k_planted, std::size_t k_recovered, std::size_t cols) {
  std::vector<std::vector<double>> s(k_planted, std::vector<double>(k_recovered));
  for (std::size_t a = 0; a < k_planted; ++a)
    for (std::size_t b = 0; b < k_recovered; ++b)
      s[a][b] = cosine({planted.data() + a * cols, cols}, {recovered.data() + b * cols, cols});
  return best_matching(s);
}

// Power iteration on the Gram matrix of the centered rows, with deflation.
// Returns per-row coordinates along the top two right singular vectors,
// using the largest-magnitude-component-positive sign rule on each vector.
inline std::vector<std::array<double, 2>> power_iteration_projection(const std::vector<std::vector<double>>& rows) {
  const std::size_t m = rows.size(), d = rows[0].size();
  std::vector<std::vector<double>> x = rows;
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0;
    for (std::size_t r = 0; r < m; ++r) mean += x[r][c];
    mean /= static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) x[r][c] -= mean;
  }
  std::vector<std::vector<double>> g(m, std::vector<double>(m, 0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t c = 0; c < d; ++c) g[i][j] += x[i][c] * x[j][c];

  std::vector<std::array<double, 2>> out(m, {0, 0});
  for (int axis = 0; axis < 2; ++axis) {
    std::vector<double> u(m);
    for (std::size_t i = 0; i < m; ++i) u[i] = 1.0 + 0.1 * static_cast<double>(i);
    double lambda = 0;
    for (int it = 0; it < 20000; ++it) {
      std::vector<double> next(m, 0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) next[i] += g[i][j] * u[j];
      double n = 0;
      for (double v : next) n += v * v;
      n = std::sqrt(n);
      lambda = n;
      for (std::size_t i = 0; i < m; ++i) u[i] = next[i] / n;
    }
    const double sigma = std::sqrt(lambda);
    std::vector<double> v(d, 0);
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t r = 0; r < m; ++r) v[c] += x[r][c] * u[r];
      v[c] /= sigma;
    }
    std::size_t arg = 0;
    for (std::size_t c = 1; c < d; ++c)
      if (std::abs(v[c]) > std::abs(v[arg])) arg = c;
    const double sign = v[arg] < 0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < m; ++r) {
      double coord = 0;
      for (std::size_t c = 0; c < d; ++c) coord += x[r][c] * v[c];
      out[r][static_cast<std::size_t>(axis)] = sign * coord;
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) g[i][j] -= lambda * u[i] * u[j];
  }
  return out;
}

// Collects warnings for the lifetime of the object.
struct WarningCapture {
  std::vector<std::string> messages;
  topicforge::LogSink previous;
  WarningCapture() {
    previous = topicforge::set_log_sink([this](topicforge::LogLevel level, const std::string& m) {
      if (level == topicforge::LogLevel::warning) messages.push_back(m);
    });
  }
  ~WarningCapture() { topicforge::set_log_sink(std::move(previous)); }
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;
};

}  // namespace tf_test
