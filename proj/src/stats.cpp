#include "topicforge/stats.hpp"

#include "topicforge/error.hpp"

#include <cmath>
#include <limits>

namespace topicforge {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTiny = 1e-300;
constexpr double kEps = 1e-16;
constexpr int kMaxIter = 100000;

// erf(x) = 2/sqrt(pi) e^{-x^2} sum_n 2^n x^{2n+1} / (1*3*...*(2n+1)); all
// terms positive, so no cancellation.
double erf_series(double x) {
  double term = x, sum = x;
  for (int n = 0; n < kMaxIter; ++n) {
    term *= 2.0 * x * x / (2.0 * n + 3.0);
    sum += term;
    if (term < kEps * sum) break;
  }
  return 2.0 / std::sqrt(kPi) * std::exp(-x * x) * sum;
}

// erfc(x) = e^{-x^2}/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
double erfc_fraction(double x) {
  double f = x, c = x, d = 0;
  for (int n = 1; n < kMaxIter; ++n) {
    const double a = n / 2.0;
    d = x + a * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = x + a / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x * x) / std::sqrt(kPi) / f;
}

double beta_fraction(double a, double b, double x) {
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  throw Error("incomplete beta continued fraction did not converge");
}

double gamma_series(double a, double x) {
  double ap = a, del = 1.0 / a, sum = del;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * kEps) return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw Error("incomplete gamma series did not converge");
}

double gamma_fraction(double a, double x) {
  double b = x + 1.0 - a, c = 1.0 / kTiny, d = 1.0 / b, h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
  }
  throw Error("incomplete gamma continued fraction did not converge");
}

void set_stars(TestResult& r) { r.stars = stars_for(r.p_value); }

}  // namespace

double erfc(double x) {
  if (std::isnan(x)) return x;
  if (x < 0) return 2.0 - erfc(-x);
  if (x < 2.0) return 1.0 - erf_series(x);
  if (x > 27.3) return 0.0;
  return erfc_fraction(x);
}

double normal_sf(double z) { return 0.5 * erfc(z / std::sqrt(2.0)); }
double normal_cdf(double z) { return 0.5 * erfc(-z / std::sqrt(2.0)); }

double regularized_beta(double a, double b, double x) {
  if (!(a > 0 && b > 0)) throw ValidationError("regularized_beta: a and b must be positive");
  if (!(x >= 0 && x <= 1)) throw ValidationError("regularized_beta: x outside [0, 1]");
  if (x == 0 || x == 1) return x;
  const double front =
      std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
  return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double regularized_gamma_p(double a, double x) {
  if (!(a > 0)) throw ValidationError("regularized_gamma: a must be positive");
  if (!(x >= 0)) throw ValidationError("regularized_gamma: x must be non-negative");
  if (x == 0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return x < a + 1.0 ? gamma_series(a, x) : 1.0 - gamma_fraction(a, x);
}

double regularized_gamma_q(double a, double x) {
  if (!(a > 0)) throw ValidationError("regularized_gamma: a must be positive");
  if (!(x >= 0)) throw ValidationError("regularized_gamma: x must be non-negative");
  if (x == 0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return x < a + 1.0 ? 1.0 - gamma_series(a, x) : gamma_fraction(a, x);
}

double student_t_two_sided(double t, double df) {
  if (!(df > 0)) throw ValidationError("student_t: df must be positive");
  if (std::isinf(t)) return 0.0;
  return regularized_beta(df / 2.0, 0.5, df / (df + t * t));
}

double chi_square_sf(double x, double df) {
  if (!(df > 0)) throw ValidationError("chi_square: df must be positive");
  if (x <= 0) return 1.0;
  return regularized_gamma_q(df / 2.0, x / 2.0);
}

Stars stars_for(double p) {
  if (p < 0.01) return Stars::one;
  if (p < 0.05) return Stars::five;
  if (p < 0.10) return Stars::ten;
  return Stars::none;
}

std::string_view stars_text(Stars s) {
  switch (s) {
    case Stars::one: return "***";
    case Stars::five: return "**";
    case Stars::ten: return "*";
    case Stars::none: break;
  }
  return "";
}

TestResult two_proportion_test(double x1, double n1, double x2, double n2, bool pooled) {
  if (!(n1 >= 1 && n2 >= 1)) throw ValidationError("two_proportion_test: trials must be >= 1");
  if (!(x1 >= 0 && x1 <= n1 && x2 >= 0 && x2 <= n2))
    throw ValidationError("two_proportion_test: successes must lie in [0, trials]");
  const double p1 = x1 / n1, p2 = x2 / n2;
  double var;
  if (pooled) {
    const double p = (x1 + x2) / (n1 + n2);
    var = p * (1 - p) * (1 / n1 + 1 / n2);
  } else {
    var = p1 * (1 - p1) / n1 + p2 * (1 - p2) / n2;
  }
  TestResult r;
  if (var <= 0) {
    if (p1 == p2) {
      r.degenerate = true;
      r.p_value = 1.0;
    } else {
      r.infinite = true;
      r.statistic = p1 > p2 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
    set_stars(r);
    return r;
  }
  r.statistic = (p1 - p2) / std::sqrt(var);
  r.p_value = std::min(1.0, erfc(std::abs(r.statistic) / std::sqrt(2.0)));
  set_stars(r);
  return r;
}

TestResult welch_t_test(double mean1, double sd1, double n1, double mean2, double sd2, double n2) {
  if (!(n1 >= 2 && n2 >= 2)) throw ValidationError("welch_t_test: each group needs n >= 2");
  if (!(sd1 >= 0 && sd2 >= 0)) throw ValidationError("welch_t_test: standard deviations must be >= 0");
  if (!std::isfinite(mean1) || !std::isfinite(mean2)) throw ValidationError("welch_t_test: means must be finite");
  const double v1 = sd1 * sd1 / n1, v2 = sd2 * sd2 / n2;
  TestResult r;
  if (v1 + v2 == 0) {
    r.df = n1 + n2 - 2;
    if (mean1 == mean2) {
      r.degenerate = true;
      r.p_value = 1.0;
    } else {
      r.infinite = true;
      r.statistic = mean1 > mean2 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
    set_stars(r);
    return r;
  }
  r.statistic = (mean1 - mean2) / std::sqrt(v1 + v2);
  r.df = (v1 + v2) * (v1 + v2) / (v1 * v1 / (n1 - 1) + v2 * v2 / (n2 - 1));
  r.p_value = student_t_two_sided(r.statistic, *r.df);
  set_stars(r);
  return r;
}

TestResult chi_square_independence(const std::vector<std::vector<double>>& table) {
  const std::size_t rows = table.size();
  if (rows < 2) throw ValidationError("chi_square_independence: need at least 2 rows");
  const std::size_t cols = table[0].size();
  if (cols < 2) throw ValidationError("chi_square_independence: need at least 2 columns");
  std::vector<double> row_sum(rows, 0), col_sum(cols, 0);
  double total = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (table[i].size() != cols) throw ValidationError("chi_square_independence: ragged table");
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = table[i][j];
      if (!(v >= 0) || !std::isfinite(v)) throw ValidationError("chi_square_independence: counts must be finite and >= 0");
      row_sum[i] += v;
      col_sum[j] += v;
      total += v;
    }
  }
  for (std::size_t i = 0; i < rows; ++i)
    if (row_sum[i] == 0) throw ValidationError("chi_square_independence: row " + std::to_string(i) + " sums to zero");
  for (std::size_t j = 0; j < cols; ++j)
    if (col_sum[j] == 0) throw ValidationError("chi_square_independence: column " + std::to_string(j) + " sums to zero");
  double chi2 = 0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double e = row_sum[i] * col_sum[j] / total;
      chi2 += (table[i][j] - e) * (table[i][j] - e) / e;
    }
  TestResult r;
  r.statistic = chi2;
  r.df = static_cast<double>((rows - 1) * (cols - 1));
  r.p_value = chi_square_sf(chi2, *r.df);
  set_stars(r);
  return r;
}

}  // namespace topicforge
