#include "genefield/infer.hpp"

#include "genefield/graph.hpp"
#include "genefield/rng.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace genefield {

namespace {

Matrix draw_symmetric(Index n, Rng& rng, double scale) {
  Matrix m(n, n);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) m(r, c) = rng.uniform(-scale, scale);
  }
  return 0.5 * (m + m.transpose()).eval();
}

}  // namespace

InteractionModel init_model(Index n_genes, int n_shells, InitScheme scheme, std::uint64_t seed,
                            double scale) {
  if (n_genes < 1) throw std::invalid_argument("init_model: n_genes must be >= 1");
  if (n_shells < 1) throw std::invalid_argument("init_model: n_shells must be >= 1");

  InteractionModel model;
  model.q_shells.assign(n_shells, 0.0);
  model.gene_names.reserve(n_genes);
  for (Index i = 0; i < n_genes; ++i) model.gene_names.push_back("g" + std::to_string(i));

  if (scheme == InitScheme::zeros) {
    model.g_intra = Matrix::Zero(n_genes, n_genes);
    for (int k = 0; k < n_shells; ++k) model.g_shells.push_back(Matrix::Zero(n_genes, n_genes));
  } else {
    Rng rng(seed);
    model.g_intra = draw_symmetric(n_genes, rng, scale);
    for (int k = 0; k < n_shells; ++k) model.g_shells.push_back(draw_symmetric(n_genes, rng, scale));
  }
  return model;
}

FitResult fit_model(const SufficientStatistics& stats, InteractionModel model,
                    const FitConfig& config, const FitObserver& observer) {
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("fit: learning_rate must be > 0");
  if (!(config.grad_tolerance > 0.0)) throw std::invalid_argument("fit: grad_tolerance must be > 0");

  double loss = nll(stats, model);
  NllGradient grad = nll_grad(stats, model);
  if (!std::isfinite(loss) || !grad.all_finite()) {
    throw FitError(0, "fit: non-finite loss or gradient at initialization");
  }

  FitResult result;
  result.trace.entries.push_back({0, loss, grad.inf_norm(config.update_intra)});
  if (observer) observer(0, model);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (grad.inf_norm(config.update_intra) < config.grad_tolerance) break;

    double step = config.learning_rate;
    bool accepted = false;
    InteractionModel candidate = model;
    double candidate_loss = loss;
    for (int attempt = 0; attempt <= 30; ++attempt) {
      if (config.update_intra) candidate.g_intra = model.g_intra - step * grad.d_g_intra;
      for (std::size_t k = 0; k < model.g_shells.size(); ++k) {
        candidate.g_shells[k] = model.g_shells[k] - step * grad.d_g_shells[k];
      }
      candidate_loss = nll(stats, candidate);
      if (candidate_loss <= loss) {  // NaN fails the comparison and halves
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no non-increasing step within 30 halvings

    model = std::move(candidate);
    loss = candidate_loss;
    grad = nll_grad(stats, model);
    if (!std::isfinite(loss) || !grad.all_finite()) {
      throw FitError(epoch, "fit: non-finite loss or gradient at epoch " + std::to_string(epoch));
    }
    result.trace.entries.push_back({epoch, loss, grad.inf_norm(config.update_intra)});
    if (observer) observer(epoch, model);
  }

  result.model = std::move(model);
  return result;
}

FitResult fit(const GeneExpressionMatrix& expr, const SpatialGraph& graph,
              const FitConfig& config, const FitObserver& observer) {
  if (!expr.sphere_normalized) {
    throw std::invalid_argument("fit: expression must be sphere-normalized (rows on the unit sphere)");
  }
  expr.validate();
  SufficientStatistics stats = sufficient_statistics(expr, graph);

  InteractionModel init = init_model(expr.n_genes(), static_cast<int>(graph.n_shells()),
                                     config.init_scheme, config.seed, config.init_scale);
  init.gene_names = expr.gene_names;
  for (Index k = 0; k < graph.n_shells(); ++k) {
    init.q_shells[static_cast<std::size_t>(k)] = mean_degree(graph.shells[static_cast<std::size_t>(k)]);
  }
  return fit_model(stats, std::move(init), config, observer);
}

}  // namespace genefield
