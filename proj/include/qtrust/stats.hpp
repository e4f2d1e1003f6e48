#pragma once

#include <span>

namespace qtrust::stats {

double mean(std::span<const double> xs);
// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(std::span<const double> xs);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;  // two-sided
  double df = 0.0;       // Welch only
};

// Wilcoxon rank-sum / Mann-Whitney U of a against b. statistic is the
// tie-corrected normal z of U_a, no continuity correction.
TestResult rank_sum_test(std::span<const double> a, std::span<const double> b);

// Welch's unequal-variance t-test of a against b; both need n >= 2.
TestResult welch_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace qtrust::stats
