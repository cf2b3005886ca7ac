#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace topicforge {

// Complementary error function. Power series for |x| < 2, Lentz continued
// fraction beyond; absolute error below 1e-13 over the real line.
double erfc(double x);
// Standard normal upper tail P(Z > z).
double normal_sf(double z);
double normal_cdf(double z);

// Regularized incomplete beta I_x(a, b), continued fraction (Lentz).
double regularized_beta(double a, double b, double x);
// Regularized lower/upper incomplete gamma P(a, x), Q(a, x).
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

// Two-sided Student-t tail P(|T| > |t|).
double student_t_two_sided(double t, double df);
// Chi-square upper tail P(X > x).
double chi_square_sf(double x, double df);

enum class Stars { none, ten, five, one };

// *** p < 0.01, ** p < 0.05, * p < 0.10.
Stars stars_for(double p);
std::string_view stars_text(Stars s);
inline constexpr std::string_view kStarLegend = "***: α = 1%; **: α = 5%; *: α = 10%";

struct TestResult {
  double statistic = 0;
  std::optional<double> df;
  double p_value = 1;
  Stars stars = Stars::none;
  // Statistic undefined (zero variance with equal groups); p reported as 1.
  bool degenerate = false;
  // Zero variance with unequal groups; statistic is +-inf, p = 0.
  bool infinite = false;
};

// Two-sided z-test for p1 - p2. Pooled variance by default.
TestResult two_proportion_test(double x1, double n1, double x2, double n2, bool pooled = true);
// Welch's unequal-variance t-test with Satterthwaite df.
TestResult welch_t_test(double mean1, double sd1, double n1, double mean2, double sd2, double n2);
// Pearson chi-square test of independence, no continuity correction.
TestResult chi_square_independence(const std::vector<std::vector<double>>& table);

}  // namespace topicforge
