#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "genefield/model.hpp"
#include "support/test_support.hpp"

#include <cmath>
#include <numbers>

using namespace genefield;
using namespace genefield::testing;

namespace {

// Eq.-50-style one-gene log-partition evaluated independently of the
// library's branching (direct exponentials; valid while q|g m| stays small).
double one_gene_log_partition_direct(double g, double m, double q, Index s_count) {
  double x = q * std::abs(g * m);
  double sinc = (x == 0.0) ? 2.0 : (std::exp(x) - std::exp(-x)) / x;
  return -0.5 * q * static_cast<double>(s_count) * g * m * m + std::log(2.0) +
         static_cast<double>(s_count) * std::log(sinc);
}

InteractionModel one_gene_model(double g, double q) {
  Matrix gs(1, 1), gi(1, 1);
  gs << g;
  gi << 0.0;
  return InteractionModel::make(gi, {gs}, {q}, {"g0"});
}

InteractionModel zero_model(Index n, double q = 1.0) {
  return InteractionModel::make(Matrix::Zero(n, n), {Matrix::Zero(n, n)}, {q}, {});
}

}  // namespace

TEST_CASE("sufficient statistics: two-spot identity with a single edge") {
  GeneExpressionMatrix expr = make_expr(Matrix::Identity(2, 2));
  SpatialGraph graph = chain_graph(2);
  SufficientStatistics stats = sufficient_statistics(expr, graph);

  Matrix expected_shell(2, 2);
  expected_shell << 0, 1, 1, 0;
  CHECK(stats.c_shells[0].isApprox(expected_shell, 0.0));
  CHECK(stats.c_intra.isApprox(Matrix::Identity(2, 2), 0.0));
  CHECK(stats.m(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(stats.m(1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(stats.n_spots == 2);
}

TEST_CASE("sufficient statistics: one gene on a three-spot chain") {
  Matrix values(3, 1);
  values << 1, 2, 3;
  SufficientStatistics stats = sufficient_statistics(make_expr(values), chain_graph(3));
  CHECK(stats.c_shells[0](0, 0) == doctest::Approx(16.0).epsilon(1e-15));
  CHECK(stats.c_intra(0, 0) == doctest::Approx(14.0).epsilon(1e-15));
  CHECK(stats.m(0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("sufficient statistics: edgeless graph gives zero shell moments") {
  SpatialGraph graph;
  graph.n_spots = 4;
  graph.shells.push_back(SparseMatrix(4, 4));
  SufficientStatistics stats = sufficient_statistics(random_sphere_expr(4, 3, 7), graph);
  CHECK(stats.c_shells[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sufficient statistics: dimension mismatch is an error") {
  CHECK_THROWS_AS(sufficient_statistics(random_sphere_expr(5, 2, 1), chain_graph(4)),
                  std::invalid_argument);
}

TEST_CASE("sufficient statistics: symmetry and positive semidefiniteness") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    SufficientStatistics stats = random_stats(20, 4, seed);
    CHECK((stats.c_intra - stats.c_intra.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((stats.c_shells[0] - stats.c_shells[0].transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eigen(stats.c_intra);
    CHECK(eigen.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("sufficient statistics: permutation invariance within 1e-10") {
  GeneExpressionMatrix expr = random_sphere_expr(12, 3, 5);
  SpatialGraph graph = knn_graph(random_coords(12, 99), 3);
  SufficientStatistics stats = sufficient_statistics(expr, graph);

  // relabel spots by reversal
  std::vector<Index> perm(12);
  for (Index i = 0; i < 12; ++i) perm[static_cast<std::size_t>(i)] = 11 - i;
  GeneExpressionMatrix permuted = expr;
  for (Index i = 0; i < 12; ++i) permuted.values.row(perm[static_cast<std::size_t>(i)]) = expr.values.row(i);
  std::vector<Eigen::Triplet<double>> t;
  const SparseMatrix& base = graph.base();
  for (int outer = 0; outer < base.outerSize(); ++outer) {
    for (SparseMatrix::InnerIterator it(base, outer); it; ++it) {
      t.emplace_back(static_cast<int>(perm[static_cast<std::size_t>(it.row())]),
                     static_cast<int>(perm[static_cast<std::size_t>(it.col())]), 1.0);
    }
  }
  SparseMatrix permuted_base(12, 12);
  permuted_base.setFromTriplets(t.begin(), t.end());
  SpatialGraph permuted_graph;
  permuted_graph.n_spots = 12;
  permuted_graph.shells.push_back(permuted_base);

  SufficientStatistics stats_p = sufficient_statistics(permuted, permuted_graph);
  CHECK((stats.c_intra - stats_p.c_intra).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((stats.c_shells[0] - stats_p.c_shells[0]).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((stats.m - stats_p.m).cwiseAbs().maxCoeff() < 1e-10);

  InteractionModel model = random_model(3, 1, 42, 0.5, {mean_degree(base)});
  CHECK(nll(stats, model) == doctest::Approx(nll(stats_p, model)).epsilon(1e-10));
}

TEST_CASE("sphere log volume: closed forms for n = 1, 2, 3") {
  CHECK(sphere_log_volume(1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(sphere_log_volume(2) == doctest::Approx(std::log(2.0 * std::numbers::pi)).epsilon(1e-15));
  CHECK(sphere_log_volume(3) == doctest::Approx(std::log(4.0 * std::numbers::pi)).epsilon(1e-15));
  CHECK_THROWS_AS(sphere_log_volume(0), std::invalid_argument);
  CHECK(std::isfinite(sphere_log_volume(100000)));
}

TEST_CASE("effective field: zero model and one-gene closed form") {
  Vector m3 = Vector::Constant(3, 0.4);
  CHECK(effective_field(zero_model(3), m3).norm == 0.0);

  double g = 0.7, q = 5.0, m = -0.3;
  Vector mv(1);
  mv << m;
  EffectiveField field = effective_field(one_gene_model(g, q), mv);
  CHECK(field.norm == doctest::Approx(2.0 * q * std::abs(g * m)).epsilon(1e-14));
}

TEST_CASE("effective field and nll: antisymmetric gauge directions are invisible") {
  // dyadic entries keep every addition exact, so equality is bitwise
  Matrix g(2, 2), gi(2, 2), a(2, 2);
  g << 0.5, 0.25, 0.25, -0.75;
  gi << 0.125, -0.5, -0.5, 0.25;
  a << 0.0, 0.375, -0.375, 0.0;  // antisymmetric
  Vector m(2);
  m << 0.5, -0.25;

  InteractionModel base;  // assembled directly to bypass symmetrization
  base.g_intra = gi;
  base.g_shells = {g};
  base.q_shells = {2.0};
  InteractionModel gauged = base;
  gauged.g_shells[0] = g + a;

  CHECK(effective_field(base, m).matrix == effective_field(gauged, m).matrix);
  CHECK(log_partition(base, m, 7) == log_partition(gauged, m, 7));

  SufficientStatistics stats;
  stats.c_intra = Matrix::Identity(2, 2);
  Matrix c(2, 2);
  c << 0.5, 0.25, 0.25, 1.0;  // symmetric
  stats.c_shells = {c};
  stats.m = m;
  stats.n_spots = 7;
  CHECK(nll(stats, base) == nll(stats, gauged));

  // and within 1e-12 for generic (non-dyadic) values
  InteractionModel rnd = random_model(3, 1, 3, 0.8, {1.7});
  InteractionModel rnd_gauged = rnd;
  Matrix ar(3, 3);
  ar << 0, 0.3183, -0.077, -0.3183, 0, 0.4141, 0.077, -0.4141, 0;
  rnd_gauged.g_shells[0] = rnd.g_shells[0] + ar;
  SufficientStatistics rstats = random_stats(15, 3, 77);
  CHECK(nll(rstats, rnd) == doctest::Approx(nll(rstats, rnd_gauged)).epsilon(1e-12));
}

TEST_CASE("log partition: zero model reduces to the sphere volume plus S log 2") {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    Index n = 1 + static_cast<Index>(rng.next_below(6));
    Index s = 1 + static_cast<Index>(rng.next_below(500));
    Vector m(n);
    for (Index i = 0; i < n; ++i) m(i) = rng.uniform(-1.0, 1.0);
    double expected = sphere_log_volume(n) + static_cast<double>(s) * std::log(2.0);
    CHECK(std::abs(log_partition(zero_model(n), m, s) - expected) < 1e-9);
  }
}

TEST_CASE("log partition: one-gene value matches the direct evaluation") {
  double q = 4.0, m = 0.6;
  Index s_count = 50;
  Vector mv(1);
  mv << m;
  for (int i = 0; i < 100; ++i) {
    double g = -2.0 + 4.0 * i / 99.0;
    double direct = one_gene_log_partition_direct(g, m, q, s_count);
    double value = log_partition(one_gene_model(g, q), mv, s_count);
    CHECK(std::abs(value - direct) < 1e-10);
  }
}

TEST_CASE("log partition: large effective fields never overflow") {
  Vector m(2);
  m << 1.0, 1.0;
  Matrix g = Matrix::Constant(2, 2, 400.0);  // H' ~ 4500
  InteractionModel model = InteractionModel::make(Matrix::Zero(2, 2), {g}, {2.0}, {});
  double value = log_partition(model, m, 10);
  CHECK(std::isfinite(value));
  // log-space form: x/2 - log(x/2) + log(1 - e^-x) dominates
  double h = effective_field(model, m).norm;
  CHECK(h > 1400.0);
  double expected = -10.0 * m.dot((model.g_intra + 1.0 * model.g_shells[0]) * m) +
                    sphere_log_volume(2) + 10.0 * (0.5 * h - std::log(0.5 * h));
  CHECK(value == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("log partition: series and direct branches agree at the seams") {
  Vector m(1);
  m << 1.0;
  auto at = [&](double h_target) {
    // q = 2, g chosen so H' = 4|g| = h_target
    return log_partition(one_gene_model(h_target / 4.0, 2.0), m, 100);
  };
  CHECK(at(1e-3 - 1e-12) == doctest::Approx(at(1e-3 + 1e-12)).epsilon(1e-12));
  CHECK(at(30.0 - 1e-9) == doctest::Approx(at(30.0 + 1e-9)).epsilon(1e-10));
}

TEST_CASE("nll: zero model keeps only the constant terms") {
  SufficientStatistics stats = random_stats(30, 4, 21);
  double expected = sphere_log_volume(4) + 30.0 * std::log(2.0);
  CHECK(nll(stats, zero_model(4)) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("nll: one-gene value is the negated scalar objective") {
  double q = 3.0, m = 0.4, c11 = 2.5;
  Index s_count = 40;
  SufficientStatistics stats;
  stats.c_intra = Matrix::Zero(1, 1);
  stats.c_shells = {Matrix::Constant(1, 1, c11)};
  stats.m = Vector::Constant(1, m);
  stats.n_spots = s_count;
  for (double g : {-1.3, -0.2, 0.0, 0.45, 2.0}) {
    double logp = one_gene_derivatives(g, m, q, s_count, c11).logp;
    CHECK(nll(stats, one_gene_model(g, q)) == doctest::Approx(-logp).epsilon(1e-12));
  }
}

TEST_CASE("nll: a small step along the negative gradient decreases the loss") {
  for (std::uint64_t seed : {31u, 32u, 33u}) {
    SufficientStatistics stats = random_stats(25, 3, seed);
    InteractionModel model = random_model(3, 1, seed ^ 0xf00, 0.5, {3.0});
    NllGradient grad = nll_grad(stats, model);
    InteractionModel stepped = model;
    stepped.g_intra -= 1e-4 * grad.d_g_intra;
    stepped.g_shells[0] -= 1e-4 * grad.d_g_shells[0];
    CHECK(nll(stats, stepped) < nll(stats, model));
  }
}

TEST_CASE("nll gradient: at m = 0 the gradient is exactly the negated statistics") {
  SufficientStatistics stats = random_stats(18, 3, 51);
  stats.m = Vector::Zero(3);
  InteractionModel model = random_model(3, 1, 8, 0.7, {2.5});
  NllGradient grad = nll_grad(stats, model);
  CHECK((grad.d_g_intra + stats.c_intra).cwiseAbs().maxCoeff() == 0.0);
  CHECK((grad.d_g_shells[0] + stats.c_shells[0]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("nll gradient: matches central finite differences at 50 random points") {
  Rng rng(404);
  for (int trial = 0; trial < 50; ++trial) {
    Index n = 2 + static_cast<Index>(rng.next_below(3));
    int shells = 1 + static_cast<int>(rng.next_below(2));
    SpatialGraph base = knn_graph(random_coords(14, rng.next_u64()), 3);
    SpatialGraph graph = khop_shells(base.base(), shells);
    GeneExpressionMatrix expr = random_sphere_expr(14, n, rng.next_u64());
    SufficientStatistics stats = sufficient_statistics(expr, graph);
    std::vector<double> q;
    for (int k = 0; k < shells; ++k) q.push_back(mean_degree(graph.shells[static_cast<std::size_t>(k)]));
    InteractionModel model = random_model(n, shells, rng.next_u64(), 1.0, q);

    NllGradient grad = nll_grad(stats, model);
    const double h = 1e-5;
    auto check_component = [&](bool intra, int shell, Index r, Index c, double analytic) {
      auto perturbed = [&](double delta) {
        Matrix gi = model.g_intra;
        std::vector<Matrix> gs = model.g_shells;
        if (intra) {
          gi(r, c) += delta;
        } else {
          gs[static_cast<std::size_t>(shell)](r, c) += delta;
        }
        // make() splits the bump across the symmetric pair
        return nll(stats, InteractionModel::make(gi, gs, model.q_shells, {}));
      };
      double fd = (perturbed(h) - perturbed(-h)) / (2.0 * h);
      // unit floor: gradient components run O(1..1e2) here, and the FD stencil
      // itself carries ~1e-9 of roundoff on the near-zero ones
      double scale = std::max({std::abs(fd), std::abs(analytic), 1.0});
      CHECK(std::abs(fd - analytic) / scale < 1e-6);
    };
    for (Index r = 0; r < n; ++r) {
      for (Index c = 0; c < n; ++c) {
        check_component(true, 0, r, c, grad.d_g_intra(r, c));
        for (int k = 0; k < shells; ++k) {
          check_component(false, k, r, c, grad.d_g_shells[static_cast<std::size_t>(k)](r, c));
        }
      }
    }
  }
}

TEST_CASE("nll gradient: outputs symmetric at any symmetric point") {
  for (std::uint64_t seed : {61u, 62u}) {
    SufficientStatistics stats = random_stats(16, 4, seed);
    InteractionModel model = random_model(4, 1, seed, 0.9, {2.0});
    NllGradient grad = nll_grad(stats, model);
    CHECK((grad.d_g_intra - grad.d_g_intra.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((grad.d_g_shells[0] - grad.d_g_shells[0].transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("one gene: Langevin bound and concavity of the scalar objective") {
  double q = 2.5, m = 0.7;
  Index s_count = 30;
  double sq_m = static_cast<double>(s_count) * q * std::abs(m);
  for (int i = 0; i < 2000; ++i) {
    double g = -5.0 + 10.0 * (i + 0.5) / 2000.0;
    OneGeneDerivatives d = one_gene_derivatives(g, m, q, s_count, 0.0);
    double langevin_term = 0.5 * q * s_count * m * m - d.d1;  // S(q|m| coth - 1/g)
    CHECK(std::abs(langevin_term) <= sq_m + 1e-9);
    CHECK(-d.d2 >= 0.0);  // the negated objective is convex
  }
}

TEST_CASE("one gene: series limits at g11 = 0") {
  double q = 3.0, m = 0.5, c = 1.25;
  Index s_count = 20;
  OneGeneDerivatives d0 = one_gene_derivatives(0.0, m, q, s_count, c);
  CHECK(d0.d1 == doctest::Approx(0.5 * q * s_count * m * m + c).epsilon(1e-14));
  CHECK(-d0.d2 == doctest::Approx(s_count * q * q * m * m / 3.0).epsilon(1e-12));
}

TEST_CASE("one gene: d1 matches a finite difference of logp at 20 random points") {
  Rng rng(555);
  for (int trial = 0; trial < 20; ++trial) {
    double q = rng.uniform(0.5, 6.0);
    double m = rng.uniform(-1.0, 1.0);
    Index s_count = 5 + static_cast<Index>(rng.next_below(100));
    double c = rng.uniform(-5.0, 5.0);
    double g = rng.uniform(-2.0, 2.0);
    if (std::abs(g) < 1e-2) g += 0.05;  // keep the FD stencil away from the branch point
    auto logp = [&](double gg) { return one_gene_derivatives(gg, m, q, s_count, c).logp; };
    double fd = central_difference(logp, g, 1e-6);
    double analytic = one_gene_derivatives(g, m, q, s_count, c).d1;
    CHECK(std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1.0}) < 1e-6);
  }
}

TEST_CASE("one gene: root existence matches the sign-change diagnostic") {
  double q = 2.0, m = 0.5;
  Index s_count = 40;
  double center = -0.5 * q * s_count * m * m;
  double width = s_count * q * std::abs(m);

  // inside the open interval: exactly one sign change, found by bisection
  for (double t : {-0.8, -0.3, 0.0, 0.45, 0.9}) {
    double c = center + t * width;
    CHECK(one_gene_root_exists(c, q, m, s_count));
    double root = bisect_one_gene_root(m, q, s_count, c);
    CHECK(std::abs(one_gene_derivatives(root, m, q, s_count, c).d1) < 1e-7);
  }
  // outside: d1 keeps one sign on a wide grid
  for (double t : {-1.2, 1.2}) {
    double c = center + t * width;
    CHECK_FALSE(one_gene_root_exists(c, q, m, s_count));
    double first = one_gene_derivatives(-64.0, m, q, s_count, c).d1;
    for (double g = -64.0; g <= 64.0; g += 0.25) {
      if (g == 0.0) continue;
      CHECK(one_gene_derivatives(g, m, q, s_count, c).d1 * first > 0.0);
    }
  }
}
