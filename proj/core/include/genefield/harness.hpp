#pragma once

#include "genefield/generate.hpp"
#include "genefield/infer.hpp"
#include "genefield/stats.hpp"
#include "genefield/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace genefield {

struct SelfConsistencyConfig {
  int n_genes = 4;
  int grid_side = 20;           // square lattice, unit spacing, radius-1.5 graph
  double coupling_scale = 0.1;  // ground-truth entries ~ uniform(-scale, scale)
  GenerateConfig generation;    // generation.max_steps defaults to 500
  FitConfig fit = default_fit();
  int n_repeats = 10;
  int n_permutations = 1000;
  std::uint64_t master_seed = 0;

  static FitConfig default_fit() {
    FitConfig config;
    config.init_scheme = InitScheme::uniform;  // inference starts from a random coupling matrix
    return config;
  }
};

struct ConsistencyRepeat {
  bool degenerate = false;  // constant flattening, correlations not computable
  double rho_fitted = 0.0;
  double p_fitted = 0.0;       // Spearman p
  double p_perm_fitted = 1.0;  // permutation-null empirical p
  double rho_raw = 0.0;
  double p_raw = 0.0;
  double p_perm_raw = 1.0;
};

struct ConsistencyReport {
  std::vector<ConsistencyRepeat> repeats;
  double median_rho_fitted = 0.0;
  double median_rho_raw = 0.0;
};

/// Simulate-then-infer self-consistency: per repeat, sample a symmetric
/// ground truth (g', g), generate expression from noise on the lattice graph,
/// refit a fresh model on the generated data ("fitted") and on the raw
/// projected noise ("raw" baseline), and compare each flattened inter-cellular
/// matrix against the truth by Spearman rho with a permutation null.
ConsistencyReport self_consistency(const SelfConsistencyConfig& config);

struct SplitSpec {
  enum class Mode { parity, masks };
  Mode mode = Mode::parity;
  std::vector<std::uint8_t> in_part_a;  // masks mode; nonzero selects part A
  std::vector<std::uint8_t> in_part_b;  // optional; empty means "complement of A"
};

struct SplitConsistencyReport {
  double final_rho = 0.0;
  double final_p = 1.0;
  std::vector<double> rho_curve;  // per accepted epoch, NaN where undefined
  stats::PermutationNull shuffled_null;
  stats::TestResult mwu_observed_vs_shuffled;
  std::size_t n_spots_a = 0, n_spots_b = 0;
};

/// Fits one model per split part (subgraph induced on the part's spots) and
/// compares the flattened inter-cellular matrices: final Spearman rho, the
/// per-epoch rho curve over the aligned traces, and a shuffled null with a
/// Mann-Whitney U comparison. Each part needs at least 10 spots.
SplitConsistencyReport split_consistency(const GeneExpressionMatrix& expr,
                                         const SpatialGraph& graph, const SplitSpec& split,
                                         const FitConfig& fit_config, int n_shuffles = 1000,
                                         std::uint64_t seed = 0);

/// Exact log Z for the one-gene model by enumerating all 2^S sign patterns
/// (unit-norm one-gene rows are +/-1). Requires N = 1, S <= 10, one shell.
double exact_log_partition(const InteractionModel& model, const SpatialGraph& graph);

/// Exact NLL = exact log Z - g C - g' C'.
double exact_oracle_nll(const InteractionModel& model, const SpatialGraph& graph,
                        const SufficientStatistics& stats);

/// Induced sub-expression and subgraph on the selected spots (shells rebuilt
/// from the restricted base adjacency by BFS). Exposed for the harness and
/// the split-consistency CLI.
std::pair<GeneExpressionMatrix, SpatialGraph> induce_subset(const GeneExpressionMatrix& expr,
                                                            const SpatialGraph& graph,
                                                            const std::vector<Index>& spots);

}  // namespace genefield
