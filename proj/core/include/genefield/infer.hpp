#pragma once

#include "genefield/model.hpp"
#include "genefield/types.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace genefield {

enum class InitScheme { zeros, uniform };

struct FitConfig {
  double learning_rate = 1e-2;
  int max_epochs = 1000;
  double grad_tolerance = 1e-6;  // infinity-norm stopping rule
  InitScheme init_scheme = InitScheme::zeros;
  double init_scale = 0.1;  // uniform scheme draws from (-init_scale, init_scale)
  std::uint64_t seed = 0;
  // When false, g_intra stays at its initialization and is excluded from the
  // gradient step and the stopping norm (the one-gene analysis fits the
  // inter-cellular coupling alone).
  bool update_intra = true;
};

struct FitTraceEntry {
  int epoch;
  double nll;
  double grad_inf_norm;
};

struct FitTrace {
  std::vector<FitTraceEntry> entries;
};

struct FitError : std::runtime_error {
  int epoch;
  FitError(int epoch_, const std::string& msg) : std::runtime_error(msg), epoch(epoch_) {}
};

struct FitResult {
  InteractionModel model;
  FitTrace trace;
};

// Called after initialization (epoch 0) and after every accepted epoch.
using FitObserver = std::function<void(int epoch, const InteractionModel&)>;

/// zeros scheme: all-zero matrices. uniform scheme: entries i.i.d. from
/// (-scale, scale), then symmetrized as (M + M^T)/2. Identical seeds give
/// bit-identical models. q_shells start at zero; fit overwrites them with
/// the graph's mean shell degrees.
InteractionModel init_model(Index n_genes, int n_shells, InitScheme scheme, std::uint64_t seed,
                            double scale = 0.1);

/// Gradient-descent core on frozen statistics. Plain descent with step
/// halving: a step that increases the nll is retried at half the step (up to
/// 30 halvings); the base step is restored after each accepted epoch. Stops
/// at grad_tolerance, at max_epochs, or when no halving yields a
/// non-increasing step. Throws FitError if the loss or gradient turns
/// non-finite at an accepted point.
FitResult fit_model(const SufficientStatistics& stats, InteractionModel init,
                    const FitConfig& config, const FitObserver& observer = {});

/// Full pipeline: statistics and mean shell degrees from (expr, graph), model
/// initialized per config, then fit_model. Requires sphere-normalized input.
FitResult fit(const GeneExpressionMatrix& expr, const SpatialGraph& graph,
              const FitConfig& config, const FitObserver& observer = {});

}  // namespace genefield
