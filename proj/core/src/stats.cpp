#include "genefield/stats.hpp"

#include "genefield/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace genefield::stats {

namespace {

bool is_constant(std::span<const double> v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] != v[0]) return false;
  }
  return true;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return sab / std::sqrt(saa * sbb);
}

// regularized incomplete beta I_x(a, b) via Lentz continued fraction
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 200;
  constexpr double kEps = 3e-14, kFpMin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                    b * std::log1p(-x);
  double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

std::vector<double> rank_average(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

TestResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw std::invalid_argument("spearman: need at least 3 observations");
  if (is_constant(x) || is_constant(y)) {
    throw std::invalid_argument("spearman: constant input vector, rho undefined");
  }

  std::vector<double> rx = rank_average(x);
  std::vector<double> ry = rank_average(y);
  double rho = pearson(rx, ry);

  TestResult result;
  result.statistic = rho;
  result.n = {n, n};

  if (n <= 8) {
    // exact permutation enumeration over all n! pairings
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<double> ry_perm(n);
    std::size_t count = 0, total = 0;
    const double threshold = std::abs(rho) - 1e-12;
    do {
      for (std::size_t i = 0; i < n; ++i) ry_perm[i] = ry[perm[i]];
      if (std::abs(pearson(rx, ry_perm)) >= threshold) ++count;
      ++total;
    } while (std::next_permutation(perm.begin(), perm.end()));
    result.p_value = static_cast<double>(count) / static_cast<double>(total);
    result.method = Method::exact;
  } else {
    double rho2 = rho * rho;
    if (rho2 >= 1.0) {
      result.p_value = 0.0;
    } else {
      double df = static_cast<double>(n - 2);
      double t = rho * std::sqrt(df / (1.0 - rho2));
      result.p_value = reg_inc_beta(0.5 * df, 0.5, df / (df + t * t));
    }
    result.method = Method::approximate;
  }
  return result;
}

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                          Alternative alternative) {
  const std::size_t na = a.size(), nb = b.size();
  if (na < 1 || nb < 1) throw std::invalid_argument("mann_whitney_u: empty sample");
  const std::size_t n = na + nb;

  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<double> ranks = rank_average(pooled);

  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < na; ++i) rank_sum_a += ranks[i];
  const double u = rank_sum_a - 0.5 * static_cast<double>(na) * static_cast<double>(na + 1);

  // tie sizes over the pooled sample
  std::vector<double> sorted(pooled);
  std::sort(sorted.begin(), sorted.end());
  bool has_ties = false;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
    double t = static_cast<double>(j - i + 1);
    if (t > 1) {
      has_ties = true;
      tie_term += t * t * t - t;
    }
    i = j + 1;
  }

  TestResult result;
  result.statistic = u;
  result.n = {na, nb};

  if (!has_ties && n <= 12) {
    // enumerate all C(n, na) placements of sample a among the ranks 1..n
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<long>(na), true);
    std::sort(pick.begin(), pick.end());  // lexicographically first arrangement
    std::size_t le = 0, ge = 0, total = 0;
    do {
      double rs = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (pick[i]) rs += static_cast<double>(i + 1);
      }
      double u_perm = rs - 0.5 * static_cast<double>(na) * static_cast<double>(na + 1);
      if (u_perm <= u + 1e-12) ++le;
      if (u_perm >= u - 1e-12) ++ge;
      ++total;
    } while (std::next_permutation(pick.begin(), pick.end()));
    double p_le = static_cast<double>(le) / static_cast<double>(total);
    double p_ge = static_cast<double>(ge) / static_cast<double>(total);
    switch (alternative) {
      case Alternative::greater: result.p_value = p_ge; break;
      case Alternative::less: result.p_value = p_le; break;
      case Alternative::two_sided: result.p_value = std::min(1.0, 2.0 * std::min(p_le, p_ge)); break;
    }
    result.method = Method::exact;
  } else {
    const double mean = 0.5 * static_cast<double>(na) * static_cast<double>(nb);
    const double nd = static_cast<double>(n);
    double var = (static_cast<double>(na) * static_cast<double>(nb) / 12.0) *
                 ((nd + 1.0) - tie_term / (nd * (nd - 1.0)));
    if (var <= 0.0) {
      result.p_value = 1.0;  // every pooled value identical
    } else {
      const double sd = std::sqrt(var);
      switch (alternative) {
        case Alternative::greater:
          result.p_value = normal_sf((u - mean - 0.5) / sd);
          break;
        case Alternative::less:
          result.p_value = 1.0 - normal_sf((u - mean + 0.5) / sd);
          break;
        case Alternative::two_sided: {
          double z = (std::abs(u - mean) - 0.5) / sd;
          result.p_value = std::min(1.0, 2.0 * normal_sf(z));
          break;
        }
      }
    }
    result.method = Method::approximate;
  }
  result.p_value = std::clamp(result.p_value, 0.0, 1.0);
  return result;
}

PermutationNull permutation_null(std::span<const double> x, std::span<const double> y, int n_perm,
                                 std::uint64_t seed) {
  if (n_perm < 1) throw std::invalid_argument("permutation_null: n_perm must be >= 1");
  TestResult observed = spearman(x, y);

  std::vector<double> rx = rank_average(x);
  std::vector<double> ry = rank_average(y);
  Rng rng(seed);

  PermutationNull null;
  null.observed = observed.statistic;
  null.samples.reserve(static_cast<std::size_t>(n_perm));
  std::size_t exceed = 0;
  const double threshold = std::abs(observed.statistic) - 1e-12;
  for (int p = 0; p < n_perm; ++p) {
    // Fisher-Yates on the y ranks
    for (std::size_t i = ry.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(rng.next_below(i + 1));
      std::swap(ry[i], ry[j]);
    }
    double rho = pearson(rx, ry);
    null.samples.push_back(rho);
    if (std::abs(rho) >= threshold) ++exceed;
  }

  null.mean = std::accumulate(null.samples.begin(), null.samples.end(), 0.0) /
              static_cast<double>(n_perm);
  std::vector<double> sorted(null.samples);
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
  };
  null.q025 = quantile(0.025);
  null.q975 = quantile(0.975);
  null.q95 = quantile(0.95);
  null.p_empirical =
      (1.0 + static_cast<double>(exceed)) / (static_cast<double>(n_perm) + 1.0);
  return null;
}

}  // namespace genefield::stats
