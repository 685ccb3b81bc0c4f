#pragma once

#include "genefield/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace genefield {

struct GenerateConfig {
  double step_size = 1e-2;
  int max_steps = 500;
  double change_tolerance = 1e-7;  // max per-entry change stopping rule
  std::uint64_t seed = 0;
};

/// Marks expression entries held fixed during generation. Frozen entries keep
/// the value they carry in the initial matrix; per spot the frozen sub-vector
/// must have L2 norm <= 1 so the free part can complete the row to unit norm.
struct FreezeMask {
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> frozen;

  static FreezeMask none(Index n_spots, Index n_genes);
  bool any() const { return frozen.any(); }
};

struct GenerateResult {
  GeneExpressionMatrix expr;
  std::vector<double> hamiltonian_trace;  // step 0 (projected init) onward
};

// Called with the projected initialization (step 0) and after each accepted step.
using GenerateObserver = std::function<void(int step, const Matrix& values)>;

/// H = Tr(g' C'(s)) + sum_k Tr(g^(k) C^(k)(s)), accumulated spot-wise.
double hamiltonian(const GeneExpressionMatrix& expr, const SpatialGraph& graph,
                   const InteractionModel& model);

/// dH/ds = s (g' + g'^T) + sum_k J^(k) s (g^(k) + g^(k)^T); frozen entries 0.
Matrix hamiltonian_grad_s(const GeneExpressionMatrix& expr, const SpatialGraph& graph,
                          const InteractionModel& model, const FreezeMask* mask = nullptr);

/// Projected gradient ascent on H over per-spot unit spheres. Steps along the
/// gradient, then rescales each spot's free sub-vector so the full row has
/// unit norm (frozen entries untouched). A step that lowers H is retried at
/// half the size (up to 30 halvings). Stops at change_tolerance or max_steps.
/// init = std::nullopt draws i.i.d. standard-normal rows and projects them.
GenerateResult generate(const InteractionModel& model, const SpatialGraph& graph,
                        const GenerateConfig& config,
                        const std::optional<GeneExpressionMatrix>& init = std::nullopt,
                        const FreezeMask* mask = nullptr, const GenerateObserver& observer = {});

}  // namespace genefield
