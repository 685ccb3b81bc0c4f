#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace genefield::stats {

enum class Method { exact, approximate };
enum class Alternative { two_sided, greater, less };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  Method method = Method::approximate;
  std::array<std::size_t, 2> n = {0, 0};
};

/// Average ranks (1-based, ties share the mean rank).
std::vector<double> rank_average(std::span<const double> values);

/// Spearman rank correlation. rho is the Pearson correlation of the rank
/// vectors. p is exact by permutation enumeration for n <= 8, otherwise the
/// two-sided t approximation t = rho sqrt((n-2)/(1-rho^2)). Requires
/// n >= 3 and non-constant inputs.
TestResult spearman(std::span<const double> x, std::span<const double> y);

/// Mann-Whitney U from rank sums (statistic is U of the first sample). Exact
/// enumeration when n_a + n_b <= 12 and there are no ties; otherwise normal
/// approximation with tie and continuity corrections.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                          Alternative alternative = Alternative::two_sided);

struct PermutationNull {
  double observed = 0.0;     // observed Spearman rho
  double mean = 0.0;         // mean of the permuted rho distribution
  double q025 = 0.0;         // 2.5th percentile
  double q975 = 0.0;         // 97.5th percentile
  double q95 = 0.0;          // 95th percentile
  double p_empirical = 1.0;  // (1 + #{|rho_perm| >= |rho_obs|}) / (n_perm + 1)
  std::vector<double> samples;
};

/// Permutation null for Spearman rho: n_perm seeded shuffles of y.
PermutationNull permutation_null(std::span<const double> x, std::span<const double> y, int n_perm,
                                 std::uint64_t seed);

}  // namespace genefield::stats
