#pragma once

#include "genefield/generate.hpp"
#include "genefield/stats.hpp"
#include "genefield/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace genefield {

/// Knockout request: which gene, and which spot (explicit id, or a random
/// spot expressing the gene, drawn with the given seed).
struct PerturbationSpec {
  std::string gene;
  std::optional<std::string> target_spot;  // nullopt: random positive spot
  std::uint64_t seed = 0;
};

// shell codes: 0 = perturbed center, 1..K = neighbor shells, -1 = unperturbed
inline constexpr int kShellPerturbed = 0;
inline constexpr int kShellUnperturbed = -1;

struct ShellClassification {
  std::vector<int> shell_of_spot;
  int n_shells = 0;

  static std::string label(int code);  // "perturbed", "neighbor1", ..., "unperturbed"
};

/// Distance-band classification around a center spot: shell 1 is (0, radii[0]),
/// shell j >= 2 is [radii[j-2], radii[j-1]) -- strict "less than" at every
/// upper edge. The center itself is "perturbed"; everything else past the last
/// radius is "unperturbed". radii must be strictly increasing.
ShellClassification neighbor_shells_by_distance(const Matrix& coords, Index center,
                                                const std::vector<double>& radii);

/// Marker-derived signature: split spots into marker-positive (value > 0) and
/// marker-zero, rank genes by (mean in positive - mean in zero) descending
/// (ties by gene index), return the top_n genes excluding the marker itself.
std::vector<std::string> derive_signature(const GeneExpressionMatrix& expr,
                                          const std::string& marker_gene, int top_n);

/// Per-spot arithmetic mean of expression over the gene set.
Vector signature_score(const GeneExpressionMatrix& expr, const std::vector<std::string>& genes);

struct PerturbationResult {
  GeneExpressionMatrix before;
  GeneExpressionMatrix after;
  Matrix delta;  // after - before, entrywise
  ShellClassification shells;
  // signature-score trace per shell group; key is ShellClassification::label,
  // one value per generation step (step 0 = projected initial state)
  std::map<std::string, std::vector<double>> score_trace;
  std::vector<double> hamiltonian_trace;
  std::vector<std::string> signature_genes;
  Index target_spot = -1;
  Index target_gene = -1;
};

/// Fig.2-style workflow: zero the target entry, freeze it, relax the tissue
/// with generate() initialized at the modified expression, classify distance
/// shells around the target, and record signature scores per shell group at
/// every generation step.
PerturbationResult run_knockout(const GeneExpressionMatrix& expr, const SpatialGraph& graph,
                                const InteractionModel& model, const PerturbationSpec& spec,
                                const GenerateConfig& gen_config, const std::vector<double>& radii,
                                const std::vector<std::string>& signature_genes);

struct RankedGene {
  std::string gene;
  double score;
};

/// Per gene: mean delta over group_a spots minus mean delta over group_b
/// spots, sorted descending (ties by gene index). Groups are sets of shell
/// codes; both must select at least one spot.
std::vector<RankedGene> delta_rankings(const PerturbationResult& result,
                                       const std::vector<int>& group_a,
                                       const std::vector<int>& group_b);

/// Spearman correlation between two gene rankings over the same gene universe.
stats::TestResult validate_against_observed(const std::vector<RankedGene>& predicted,
                                            const std::vector<RankedGene>& observed);

/// Keep-mask dropping every spot strictly within `distance` of any listed
/// center (the centers themselves are dropped too).
std::vector<bool> exclude_proximal(const Matrix& coords, const std::vector<Index>& centers,
                                   double distance);

/// Row-subset of an expression matrix (keep[i] == true rows survive).
GeneExpressionMatrix filter_spots(const GeneExpressionMatrix& expr, const std::vector<bool>& keep);

}  // namespace genefield
