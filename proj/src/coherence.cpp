#include "topicforge/coherence.hpp"

#include "topicforge/csv.hpp"
#include "topicforge/error.hpp"
#include "topicforge/io.hpp"
#include "topicforge/log.hpp"
#include "topicforge/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace topicforge {

std::uint64_t CooccurrenceStats::word_count(TokenId w) const {
  auto it = word_counts.find(w);
  return it == word_counts.end() ? 0 : it->second;
}

std::uint64_t CooccurrenceStats::pair_count(TokenId a, TokenId b) const {
  if (a == b) return word_count(a);
  auto it = pair_counts.find(pair_key(a, b));
  return it == pair_counts.end() ? 0 : it->second;
}

void CooccurrenceStats::merge(const CooccurrenceStats& other) {
  total_windows += other.total_windows;
  for (auto [w, c] : other.word_counts) word_counts[w] += c;
  for (auto [k, c] : other.pair_counts) pair_counts[k] += c;
}

namespace {

struct Interval {
  TokenId word;
  std::size_t start;  // first window containing the word
  std::size_t end;    // one past the last window
};

// Presence intervals of every (filtered) word over the document's windows.
std::vector<Interval> presence_intervals(const TokenStream& doc, std::size_t window,
                                         const std::unordered_set<TokenId>* relevant) {
  const std::size_t n = doc.size();
  const std::size_t windows = n <= window ? 1 : n - window + 1;
  std::map<TokenId, std::vector<std::size_t>> positions;
  for (std::size_t p = 0; p < n; ++p)
    if (!relevant || relevant->count(doc[p])) positions[doc[p]].push_back(p);

  std::vector<Interval> out;
  for (const auto& [word, pos] : positions) {
    std::size_t cur_start = 0, cur_end = 0;
    bool open = false;
    for (auto p : pos) {
      const std::size_t s = p + 1 >= window ? p + 1 - window : 0;
      const std::size_t e = std::min(p, windows - 1) + 1;
      if (open && s <= cur_end) {
        cur_end = std::max(cur_end, e);
      } else {
        if (open) out.push_back({word, cur_start, cur_end});
        cur_start = s;
        cur_end = e;
        open = true;
      }
    }
    if (open) out.push_back({word, cur_start, cur_end});
  }
  return out;
}

void accumulate_doc(const TokenStream& doc, std::size_t window, const std::unordered_set<TokenId>* relevant,
                    CooccurrenceStats& stats) {
  if (doc.empty()) return;
  stats.total_windows += doc.size() <= window ? 1 : doc.size() - window + 1;
  auto intervals = presence_intervals(doc, window, relevant);
  for (const auto& iv : intervals) stats.word_counts[iv.word] += iv.end - iv.start;

  // Sweep over window indices. When an interval closes, it overlaps every
  // still-open interval on [max(starts), close).
  std::vector<std::size_t> by_start(intervals.size()), by_end(intervals.size());
  for (std::size_t i = 0; i < intervals.size(); ++i) by_start[i] = by_end[i] = i;
  std::sort(by_start.begin(), by_start.end(),
            [&](auto a, auto b) { return std::tie(intervals[a].start, a) < std::tie(intervals[b].start, b); });
  std::sort(by_end.begin(), by_end.end(),
            [&](auto a, auto b) { return std::tie(intervals[a].end, a) < std::tie(intervals[b].end, b); });

  std::vector<std::size_t> open;
  std::size_t si = 0;
  for (std::size_t ei = 0; ei < by_end.size(); ++ei) {
    const auto& closing = intervals[by_end[ei]];
    while (si < by_start.size() && intervals[by_start[si]].start < closing.end) open.push_back(by_start[si++]);
    open.erase(std::find(open.begin(), open.end(), by_end[ei]));
    for (auto o : open) {
      const auto& other = intervals[o];
      const std::size_t overlap_start = std::max(closing.start, other.start);
      if (overlap_start < closing.end)
        stats.pair_counts[CooccurrenceStats::pair_key(closing.word, other.word)] += closing.end - overlap_start;
    }
  }
}

}  // namespace

CooccurrenceStats build_stats(std::span<const TokenStream> docs, std::size_t window_size,
                              const std::optional<std::vector<TokenId>>& relevant, unsigned threads) {
  if (window_size == 0) throw ValidationError("coherence window size must be >= 1");
  std::unordered_set<TokenId> relevant_set;
  if (relevant) relevant_set.insert(relevant->begin(), relevant->end());
  const auto* filter = relevant ? &relevant_set : nullptr;

  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(threads, docs.size()));
  std::vector<CooccurrenceStats> partial(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    partial[c].window_size = window_size;
    for (std::size_t d = c; d < docs.size(); d += chunks) accumulate_doc(docs[d], window_size, filter, partial[c]);
  });

  CooccurrenceStats stats;
  stats.window_size = window_size;
  for (const auto& p : partial) stats.merge(p);
  if (stats.total_windows == 0) throw Error("coherence: corpus has no tokens");
  return stats;
}

double npmi(TokenId a, TokenId b, const CooccurrenceStats& stats, double eps) {
  const double total = static_cast<double>(stats.total_windows);
  const auto ca = stats.word_count(a);
  const auto cb = stats.word_count(b);
  if (ca == 0 || cb == 0 || total == 0) return 0.0;
  const auto cab = stats.pair_count(a, b);
  if (cab == stats.total_windows) return 1.0;
  const double pa = static_cast<double>(ca) / total;
  const double pb = static_cast<double>(cb) / total;
  const double pab = static_cast<double>(cab) / total + eps;
  return std::clamp(std::log(pab / (pa * pb)) / -std::log(pab), -1.0, 1.0);
}

double cv_score(std::span<const TokenId> top, const CooccurrenceStats& stats, double eps) {
  const std::size_t n = top.size();
  if (n < 2) throw ValidationError("C_v needs at least 2 top words");
  bool any_seen = false;
  for (auto w : top) any_seen = any_seen || stats.word_count(w) > 0;
  if (!any_seen) {
    log_warning("C_v: every top word is out of vocabulary; scoring 0");
    return 0.0;
  }

  std::vector<double> context(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) context[i * n + j] = npmi(top[i], top[j], stats, eps);
  std::vector<double> sum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) sum[j] += context[i * n + j];

  double sum_norm = 0;
  for (double x : sum) sum_norm += x * x;
  sum_norm = std::sqrt(sum_norm);

  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0, norm = 0;
    for (std::size_t j = 0; j < n; ++j) {
      dot += context[i * n + j] * sum[j];
      norm += context[i * n + j] * context[i * n + j];
    }
    norm = std::sqrt(norm);
    if (norm > 0 && sum_norm > 0) total += dot / (norm * sum_norm);
  }
  return total / static_cast<double>(n);
}

double mean_cv(const std::vector<std::vector<TokenId>>& topics, const CooccurrenceStats& stats, double eps) {
  if (topics.empty()) throw ValidationError("mean C_v needs at least one topic");
  double total = 0;
  for (const auto& t : topics) total += cv_score(t, stats, eps);
  return total / static_cast<double>(topics.size());
}

void CoherenceCurve::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i > 0 && points[i].k <= points[i - 1].k) throw Error("coherence curve k values must increase");
    if (!points[i].failed && !(std::isfinite(points[i].mean_cv) && std::isfinite(points[i].std_cv)))
      throw Error("coherence curve has a non-finite value at k=" + std::to_string(points[i].k));
  }
}

CoherenceCurve k_sweep(std::span<const TokenStream> docs, std::size_t vocab_size, const SweepOptions& options) {
  if (options.k_min == 0 || options.k_max < options.k_min) throw ValidationError("sweep: invalid k range");
  if (options.runs_per_k == 0) throw ValidationError("sweep: runs_per_k must be >= 1");
  if (docs.empty()) throw Error("sweep: empty corpus");

  struct Job {
    std::size_t k;
    std::size_t run;
    std::vector<std::vector<TokenId>> topics;
    std::string error;
  };
  std::vector<Job> jobs;
  for (std::size_t k = options.k_min; k <= options.k_max; ++k)
    for (std::size_t r = 0; r < options.runs_per_k; ++r) jobs.push_back({k, r, {}, {}});

  parallel_for(jobs.size(), options.threads, [&](std::size_t j) {
    auto& job = jobs[j];
    LdaConfig cfg = options.lda;
    cfg.k = job.k;
    if (options.lda.alpha) cfg.alpha = options.lda.alpha;
    cfg.seed = options.base_seed + job.k * options.runs_per_k + job.run;
    try {
      auto model = fit_lda(docs, vocab_size, cfg);
      for (std::size_t t = 0; t < model.k(); ++t) job.topics.push_back(top_words(model, t, options.top_n));
    } catch (const std::exception& e) {
      job.error = e.what();
    }
  });

  std::set<TokenId> union_words;
  for (const auto& job : jobs)
    for (const auto& t : job.topics) union_words.insert(t.begin(), t.end());
  const auto stats = build_stats(docs, options.window_size,
                                 std::vector<TokenId>(union_words.begin(), union_words.end()), options.threads);

  CoherenceCurve curve;
  for (std::size_t k = options.k_min; k <= options.k_max; ++k) {
    CoherencePoint point;
    point.k = k;
    std::vector<double> scores;
    for (const auto& job : jobs) {
      if (job.k != k) continue;
      if (!job.error.empty()) {
        point.failed = true;
        point.error = job.error;
        continue;
      }
      scores.push_back(mean_cv(job.topics, stats, options.eps));
    }
    point.runs_ok = scores.size();
    if (!scores.empty()) {
      double mean = 0;
      for (double s : scores) mean += s;
      mean /= static_cast<double>(scores.size());
      double var = 0;
      for (double s : scores) var += (s - mean) * (s - mean);
      point.mean_cv = mean;
      point.std_cv = scores.size() > 1 ? std::sqrt(var / static_cast<double>(scores.size() - 1)) : 0.0;
    } else {
      point.mean_cv = std::nan("");
      point.std_cv = std::nan("");
    }
    if (point.failed) log_warning("sweep: k=" + std::to_string(k) + " had a failed run: " + point.error);
    curve.points.push_back(std::move(point));
  }
  return curve;
}

void write_curve_csv(std::ostream& out, const CoherenceCurve& curve) {
  out << "k,mean_cv,std_cv,status\n";
  for (const auto& p : curve.points)
    out << p.k << ',' << format_double(p.mean_cv) << ',' << format_double(p.std_cv) << ','
        << (p.failed ? "failed" : "ok") << '\n';
}

CoherenceCurve read_curve_csv(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto table = parse_csv(ss.str());
  const auto k_col = table.column("k"), mean_col = table.column("mean_cv"), std_col = table.column("std_cv");
  if (!k_col || !mean_col || !std_col) throw Error("coherence CSV needs k, mean_cv, std_cv columns");
  const auto status_col = table.column("status");
  CoherenceCurve curve;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) throw ParseError("coherence CSV row has wrong field count", table.lines[r]);
    CoherencePoint p;
    p.k = static_cast<std::size_t>(parse_int(row[*k_col], "k"));
    p.mean_cv = parse_double(row[*mean_col], "mean_cv");
    p.std_cv = parse_double(row[*std_col], "std_cv");
    p.failed = status_col && row[*status_col] == "failed";
    curve.points.push_back(p);
  }
  curve.validate();
  return curve;
}

}  // namespace topicforge
