#include "genefield/generate.hpp"

#include "genefield/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace genefield {

namespace {

void check_dims(const Matrix& values, const SpatialGraph& graph, const InteractionModel& model) {
  if (values.rows() != graph.n_spots) {
    throw std::invalid_argument("generation: expression has " + std::to_string(values.rows()) +
                                " spots but graph has " + std::to_string(graph.n_spots));
  }
  if (values.cols() != model.n_genes()) {
    throw std::invalid_argument("generation: expression has " + std::to_string(values.cols()) +
                                " genes but model has " + std::to_string(model.n_genes()));
  }
  if (graph.n_shells() != model.n_shells()) {
    throw std::invalid_argument("generation: graph has " + std::to_string(graph.n_shells()) +
                                " shells but model has " + std::to_string(model.n_shells()));
  }
}

double hamiltonian_values(const Matrix& s, const SpatialGraph& graph,
                          const InteractionModel& model) {
  double h = (s * model.g_intra).cwiseProduct(s).sum();
  for (Index k = 0; k < model.n_shells(); ++k) {
    const SparseMatrix& shell = graph.shells[static_cast<std::size_t>(k)];
    h += ((shell * s) * model.g_shells[static_cast<std::size_t>(k)]).cwiseProduct(s).sum();
  }
  return h;
}

Matrix gradient_values(const Matrix& s, const SpatialGraph& graph, const InteractionModel& model,
                       const FreezeMask* mask) {
  Matrix grad = s * (model.g_intra + model.g_intra.transpose());
  for (Index k = 0; k < model.n_shells(); ++k) {
    const SparseMatrix& shell = graph.shells[static_cast<std::size_t>(k)];
    const Matrix& g = model.g_shells[static_cast<std::size_t>(k)];
    grad += (shell * s) * (g + g.transpose());
  }
  if (mask) grad = mask->frozen.select(0.0, grad);
  return grad;
}

// Rescales each row's free sub-vector so the full row has unit L2 norm.
// target_free_norm is precomputed per row from the frozen values; rows whose
// free norm already matches within 1e-12 (squared) are left bit-identical.
// Returns -1 on success, or the first spot whose free part is exactly zero
// while a positive norm is required (the caller decides whether that is an
// error or a rejected line-search step).
Index project_rows(Matrix& s, const FreezeMask* mask, const std::vector<double>& target_free_norm) {
  const Index n_spots = s.rows(), n_genes = s.cols();
  for (Index i = 0; i < n_spots; ++i) {
    double free_sq = 0.0;
    if (mask) {
      for (Index j = 0; j < n_genes; ++j) {
        if (!mask->frozen(i, j)) free_sq += s(i, j) * s(i, j);
      }
    } else {
      free_sq = s.row(i).squaredNorm();
    }
    const double target = target_free_norm[static_cast<std::size_t>(i)];
    if (std::abs(free_sq - target * target) <= 1e-12) continue;
    if (free_sq == 0.0) {
      if (target == 0.0) continue;
      return i;
    }
    const double scale = target / std::sqrt(free_sq);
    if (mask) {
      for (Index j = 0; j < n_genes; ++j) {
        if (!mask->frozen(i, j)) s(i, j) *= scale;
      }
    } else {
      s.row(i) *= scale;
    }
  }
  return -1;
}

}  // namespace

FreezeMask FreezeMask::none(Index n_spots, Index n_genes) {
  FreezeMask mask;
  mask.frozen = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n_spots, n_genes, false);
  return mask;
}

double hamiltonian(const GeneExpressionMatrix& expr, const SpatialGraph& graph,
                   const InteractionModel& model) {
  check_dims(expr.values, graph, model);
  return hamiltonian_values(expr.values, graph, model);
}

Matrix hamiltonian_grad_s(const GeneExpressionMatrix& expr, const SpatialGraph& graph,
                          const InteractionModel& model, const FreezeMask* mask) {
  check_dims(expr.values, graph, model);
  if (mask && (mask->frozen.rows() != expr.n_spots() || mask->frozen.cols() != expr.n_genes())) {
    throw std::invalid_argument("hamiltonian_grad_s: mask shape mismatch");
  }
  return gradient_values(expr.values, graph, model, mask);
}

GenerateResult generate(const InteractionModel& model, const SpatialGraph& graph,
                        const GenerateConfig& config,
                        const std::optional<GeneExpressionMatrix>& init, const FreezeMask* mask,
                        const GenerateObserver& observer) {
  if (!(config.step_size > 0.0)) throw std::invalid_argument("generate: step_size must be > 0");
  if (!(config.change_tolerance > 0.0)) {
    throw std::invalid_argument("generate: change_tolerance must be > 0");
  }
  const Index n_genes = model.n_genes();
  const Index n_spots = graph.n_spots;

  GeneExpressionMatrix out;
  if (init) {
    out = *init;
    check_dims(out.values, graph, model);
  } else {
    Rng rng(config.seed);
    out.values.resize(n_spots, n_genes);
    for (Index i = 0; i < n_spots; ++i) {
      for (Index j = 0; j < n_genes; ++j) out.values(i, j) = rng.normal();
    }
    out.spot_ids.reserve(n_spots);
    for (Index i = 0; i < n_spots; ++i) out.spot_ids.push_back("spot_" + std::to_string(i));
    out.gene_names = model.gene_names;
    out.provenance.push_back("noise_init(seed=" + std::to_string(config.seed) + ")");
  }
  if (mask && (mask->frozen.rows() != n_spots || mask->frozen.cols() != n_genes)) {
    throw std::invalid_argument("generate: mask shape mismatch");
  }

  // frozen values never move, so each row's free-norm target is fixed
  std::vector<double> target(static_cast<std::size_t>(n_spots), 1.0);
  if (mask) {
    for (Index i = 0; i < n_spots; ++i) {
      double frozen_sq = 0.0;
      for (Index j = 0; j < n_genes; ++j) {
        if (mask->frozen(i, j)) frozen_sq += out.values(i, j) * out.values(i, j);
      }
      if (frozen_sq > 1.0 + 1e-12) {
        const std::string id = (static_cast<std::size_t>(i) < out.spot_ids.size())
                                   ? out.spot_ids[static_cast<std::size_t>(i)]
                                   : std::to_string(i);
        throw std::invalid_argument("generate: infeasible freeze mask at spot '" + id +
                                    "': frozen sub-vector norm exceeds 1");
      }
      target[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, 1.0 - frozen_sq));
    }
  }

  Matrix s = out.values;
  if (Index bad = project_rows(s, mask, target); bad >= 0) {
    const std::string id = (static_cast<std::size_t>(bad) < out.spot_ids.size())
                               ? out.spot_ids[static_cast<std::size_t>(bad)]
                               : std::to_string(bad);
    throw std::runtime_error("generate: cannot project spot '" + id +
                             "': free sub-vector is exactly zero");
  }

  GenerateResult result;
  double h = hamiltonian_values(s, graph, model);
  result.hamiltonian_trace.push_back(h);
  if (observer) observer(0, s);

  for (int step = 1; step <= config.max_steps; ++step) {
    Matrix grad = gradient_values(s, graph, model, mask);
    double step_size = config.step_size;
    bool accepted = false;
    Matrix candidate;
    double candidate_h = h;
    for (int attempt = 0; attempt <= 30; ++attempt) {
      candidate = s + step_size * grad;
      if (project_rows(candidate, mask, target) >= 0) {  // exact cancellation: retry smaller
        step_size *= 0.5;
        continue;
      }
      candidate_h = hamiltonian_values(candidate, graph, model);
      if (candidate_h >= h) {
        accepted = true;
        break;
      }
      step_size *= 0.5;
    }
    if (!accepted) break;

    double max_change = (candidate - s).cwiseAbs().maxCoeff();
    s = std::move(candidate);
    h = candidate_h;
    result.hamiltonian_trace.push_back(h);
    if (observer) observer(step, s);
    if (max_change < config.change_tolerance) break;
  }

  out.values = std::move(s);
  out.sphere_normalized = true;
  out.provenance.push_back("generated(steps=" + std::to_string(result.hamiltonian_trace.size() - 1) +
                           ", step_size=" + std::to_string(config.step_size) + ")");
  result.expr = std::move(out);
  return result;
}

}  // namespace genefield
