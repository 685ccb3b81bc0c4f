#include "genefield/harness.hpp"

#include "genefield/graph.hpp"
#include "genefield/model.hpp"
#include "genefield/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace genefield {

namespace {

std::vector<double> flatten(const Matrix& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  }
  return flat;
}

bool is_constant(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ConsistencyReport self_consistency(const SelfConsistencyConfig& config) {
  if (config.n_genes < 2) throw std::invalid_argument("self_consistency: n_genes must be >= 2");
  if (config.grid_side < 3) throw std::invalid_argument("self_consistency: grid_side must be >= 3");
  if (config.n_repeats < 1) throw std::invalid_argument("self_consistency: n_repeats must be >= 1");

  const Matrix coords = grid_coordinates(config.grid_side);
  const SpatialGraph graph = radius_graph(coords, 1.5);
  const double q = mean_degree(graph.base());

  ConsistencyReport report;
  std::vector<double> rhos_fitted, rhos_raw;

  for (int rep = 0; rep < config.n_repeats; ++rep) {
    const std::uint64_t base = Rng::derive(config.master_seed, static_cast<std::uint64_t>(rep));

    InteractionModel truth = init_model(config.n_genes, 1, InitScheme::uniform,
                                        Rng::derive(base, 1), config.coupling_scale);
    truth.q_shells[0] = q;

    GenerateConfig gen = config.generation;
    gen.seed = Rng::derive(base, 2);
    GenerateResult generated = generate(truth, graph, gen);

    GenerateConfig raw_cfg = gen;  // same seed, zero steps: the projected noise itself
    raw_cfg.max_steps = 0;
    GenerateResult raw = generate(truth, graph, raw_cfg);

    FitConfig fit_gen = config.fit;
    fit_gen.seed = Rng::derive(base, 3);
    InteractionModel fitted = fit(generated.expr, graph, fit_gen).model;

    FitConfig fit_raw = config.fit;
    fit_raw.seed = Rng::derive(base, 4);
    InteractionModel raw_fitted = fit(raw.expr, graph, fit_raw).model;

    ConsistencyRepeat outcome;
    std::vector<double> truth_flat = flatten(truth.g_shells[0]);
    std::vector<double> fitted_flat = flatten(fitted.g_shells[0]);
    std::vector<double> raw_flat = flatten(raw_fitted.g_shells[0]);

    if (is_constant(truth_flat) || is_constant(fitted_flat) || is_constant(raw_flat)) {
      outcome.degenerate = true;  // e.g. coupling_scale = 0: zero truth, constant flattening
    } else {
      stats::TestResult rf = stats::spearman(truth_flat, fitted_flat);
      stats::PermutationNull nf = stats::permutation_null(truth_flat, fitted_flat,
                                                          config.n_permutations, Rng::derive(base, 5));
      stats::TestResult rr = stats::spearman(truth_flat, raw_flat);
      stats::PermutationNull nr = stats::permutation_null(truth_flat, raw_flat,
                                                          config.n_permutations, Rng::derive(base, 6));
      outcome.rho_fitted = rf.statistic;
      outcome.p_fitted = rf.p_value;
      outcome.p_perm_fitted = nf.p_empirical;
      outcome.rho_raw = rr.statistic;
      outcome.p_raw = rr.p_value;
      outcome.p_perm_raw = nr.p_empirical;
      rhos_fitted.push_back(outcome.rho_fitted);
      rhos_raw.push_back(outcome.rho_raw);
    }
    report.repeats.push_back(outcome);
  }

  report.median_rho_fitted = median(rhos_fitted);
  report.median_rho_raw = median(rhos_raw);
  return report;
}

std::pair<GeneExpressionMatrix, SpatialGraph> induce_subset(const GeneExpressionMatrix& expr,
                                                            const SpatialGraph& graph,
                                                            const std::vector<Index>& spots) {
  if (expr.n_spots() != graph.n_spots) {
    throw std::invalid_argument("induce_subset: expression/graph spot count mismatch");
  }
  GeneExpressionMatrix sub_expr;
  sub_expr.gene_names = expr.gene_names;
  sub_expr.sphere_normalized = expr.sphere_normalized;
  sub_expr.provenance = expr.provenance;
  sub_expr.values.resize(static_cast<Index>(spots.size()), expr.n_genes());
  for (std::size_t r = 0; r < spots.size(); ++r) {
    sub_expr.values.row(static_cast<Index>(r)) = expr.values.row(spots[r]);
    sub_expr.spot_ids.push_back(expr.spot_ids[static_cast<std::size_t>(spots[r])]);
  }

  std::vector<Index> position(static_cast<std::size_t>(graph.n_spots), -1);
  for (std::size_t r = 0; r < spots.size(); ++r) position[static_cast<std::size_t>(spots[r])] = static_cast<Index>(r);

  std::vector<Eigen::Triplet<double>> triplets;
  const SparseMatrix& base = graph.base();
  for (int outer = 0; outer < base.outerSize(); ++outer) {
    for (SparseMatrix::InnerIterator it(base, outer); it; ++it) {
      Index a = position[static_cast<std::size_t>(it.row())];
      Index b = position[static_cast<std::size_t>(it.col())];
      if (a >= 0 && b >= 0) triplets.emplace_back(static_cast<int>(a), static_cast<int>(b), 1.0);
    }
  }
  SparseMatrix sub_base(static_cast<Index>(spots.size()), static_cast<Index>(spots.size()));
  sub_base.setFromTriplets(triplets.begin(), triplets.end());
  sub_base.makeCompressed();

  SpatialGraph sub_graph = khop_shells(sub_base, static_cast<int>(graph.n_shells()));
  if (graph.coordinates) {
    Matrix sub_coords(static_cast<Index>(spots.size()), 2);
    for (std::size_t r = 0; r < spots.size(); ++r) {
      sub_coords.row(static_cast<Index>(r)) = graph.coordinates->row(spots[r]);
    }
    sub_graph.coordinates = std::move(sub_coords);
  }
  return {std::move(sub_expr), std::move(sub_graph)};
}

SplitConsistencyReport split_consistency(const GeneExpressionMatrix& expr,
                                         const SpatialGraph& graph, const SplitSpec& split,
                                         const FitConfig& fit_config, int n_shuffles,
                                         std::uint64_t seed) {
  std::vector<Index> part_a, part_b;
  if (split.mode == SplitSpec::Mode::parity) {
    for (Index i = 0; i < expr.n_spots(); ++i) (i % 2 == 0 ? part_a : part_b).push_back(i);
  } else {
    if (split.in_part_a.size() != static_cast<std::size_t>(expr.n_spots())) {
      throw std::invalid_argument("split_consistency: mask length mismatch");
    }
    if (!split.in_part_b.empty() &&
        split.in_part_b.size() != static_cast<std::size_t>(expr.n_spots())) {
      throw std::invalid_argument("split_consistency: mask length mismatch");
    }
    for (Index i = 0; i < expr.n_spots(); ++i) {
      if (split.in_part_a[static_cast<std::size_t>(i)]) part_a.push_back(i);
      bool in_b = split.in_part_b.empty() ? !split.in_part_a[static_cast<std::size_t>(i)]
                                          : split.in_part_b[static_cast<std::size_t>(i)] != 0;
      if (in_b) part_b.push_back(i);
    }
  }
  if (part_a.size() < 10 || part_b.size() < 10) {
    throw std::invalid_argument("split_consistency: each split part needs at least 10 spots (got " +
                                std::to_string(part_a.size()) + " and " +
                                std::to_string(part_b.size()) + ")");
  }

  auto [expr_a, graph_a] = induce_subset(expr, graph, part_a);
  auto [expr_b, graph_b] = induce_subset(expr, graph, part_b);

  auto fit_with_snapshots = [&](const GeneExpressionMatrix& e, const SpatialGraph& g) {
    std::vector<std::vector<double>> snapshots;
    fit(e, g, fit_config, [&](int, const InteractionModel& m) {
      snapshots.push_back(flatten(m.g_shells[0]));
    });
    return snapshots;
  };
  std::vector<std::vector<double>> snaps_a = fit_with_snapshots(expr_a, graph_a);
  std::vector<std::vector<double>> snaps_b = fit_with_snapshots(expr_b, graph_b);

  SplitConsistencyReport report;
  report.n_spots_a = part_a.size();
  report.n_spots_b = part_b.size();

  const std::size_t epochs = std::min(snaps_a.size(), snaps_b.size());
  report.rho_curve.reserve(epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    if (is_constant(snaps_a[e]) || is_constant(snaps_b[e])) {
      report.rho_curve.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      report.rho_curve.push_back(stats::spearman(snaps_a[e], snaps_b[e]).statistic);
    }
  }

  const std::vector<double>& final_a = snaps_a.back();
  const std::vector<double>& final_b = snaps_b.back();
  stats::TestResult final_test = stats::spearman(final_a, final_b);
  report.final_rho = final_test.statistic;
  report.final_p = final_test.p_value;
  report.shuffled_null = stats::permutation_null(final_a, final_b, n_shuffles, Rng::derive(seed, 1));
  std::vector<double> observed{report.final_rho};
  report.mwu_observed_vs_shuffled =
      stats::mann_whitney_u(observed, report.shuffled_null.samples, stats::Alternative::two_sided);
  return report;
}

double exact_log_partition(const InteractionModel& model, const SpatialGraph& graph) {
  if (model.n_genes() != 1) {
    throw std::invalid_argument("exact_log_partition: only the one-gene model is enumerable");
  }
  if (graph.n_spots > 10) {
    throw std::invalid_argument("exact_log_partition: S <= 10 required (2^S states)");
  }
  if (graph.n_shells() != 1 || model.n_shells() != 1) {
    throw std::invalid_argument("exact_log_partition: single-shell models only");
  }
  const double g_intra = model.g_intra(0, 0);
  const double g = model.g_shells[0](0, 0);
  const Index s_count = graph.n_spots;

  std::vector<std::pair<int, int>> edges;
  const SparseMatrix& base = graph.base();
  for (int outer = 0; outer < base.outerSize(); ++outer) {
    for (SparseMatrix::InnerIterator it(base, outer); it; ++it) {
      if (it.row() < it.col()) edges.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()));
    }
  }

  // H(s) = g' * S + 2 g * sum_edges s_i s_j over s in {-1, +1}^S
  const std::uint64_t n_states = 1ULL << s_count;
  double max_h = -std::numeric_limits<double>::infinity();
  std::vector<double> energies;
  energies.reserve(n_states);
  for (std::uint64_t state = 0; state < n_states; ++state) {
    int bond_sum = 0;
    for (auto [i, j] : edges) {
      bool same = ((state >> i) & 1ULL) == ((state >> j) & 1ULL);
      bond_sum += same ? 1 : -1;
    }
    double h = g_intra * static_cast<double>(s_count) + 2.0 * g * static_cast<double>(bond_sum);
    energies.push_back(h);
    max_h = std::max(max_h, h);
  }
  double sum = 0.0;
  for (double h : energies) sum += std::exp(h - max_h);
  return max_h + std::log(sum);
}

double exact_oracle_nll(const InteractionModel& model, const SpatialGraph& graph,
                        const SufficientStatistics& stats) {
  if (stats.n_genes() != 1 || stats.n_shells() != 1) {
    throw std::invalid_argument("exact_oracle_nll: one gene, one shell only");
  }
  return exact_log_partition(model, graph) - model.g_shells[0](0, 0) * stats.c_shells[0](0, 0) -
         model.g_intra(0, 0) * stats.c_intra(0, 0);
}

}  // namespace genefield
