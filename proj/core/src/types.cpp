#include "genefield/types.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>

namespace genefield {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void GeneExpressionMatrix::validate() const {
  require(values.allFinite(), "GeneExpressionMatrix: non-finite entry");
  require(static_cast<Index>(spot_ids.size()) == values.rows(),
          "GeneExpressionMatrix: spot_ids length " + std::to_string(spot_ids.size()) +
              " does not match row count " + std::to_string(values.rows()));
  require(static_cast<Index>(gene_names.size()) == values.cols(),
          "GeneExpressionMatrix: gene_names length " + std::to_string(gene_names.size()) +
              " does not match column count " + std::to_string(values.cols()));
  if (sphere_normalized) {
    for (Index i = 0; i < values.rows(); ++i) {
      double norm = values.row(i).norm();
      require(std::abs(norm - 1.0) <= 1e-9,
              "GeneExpressionMatrix: sphere_normalized set but row " + std::to_string(i) +
                  " has norm " + std::to_string(norm));
    }
  }
}

void SpatialGraph::validate() const {
  require(n_spots >= 0, "SpatialGraph: negative spot count");
  require(!shells.empty(), "SpatialGraph: no shells");
  // pair -> shell index, for disjointness
  std::unordered_map<std::uint64_t, int> seen;
  for (std::size_t k = 0; k < shells.size(); ++k) {
    const SparseMatrix& a = shells[k];
    require(a.rows() == n_spots && a.cols() == n_spots,
            "SpatialGraph: shell " + std::to_string(k + 1) + " has wrong shape");
    for (int outer = 0; outer < a.outerSize(); ++outer) {
      for (SparseMatrix::InnerIterator it(a, outer); it; ++it) {
        require(it.row() != it.col(), "SpatialGraph: self-loop in shell " + std::to_string(k + 1));
        require(it.value() == 1.0, "SpatialGraph: non-binary entry in shell " + std::to_string(k + 1));
        require(a.coeff(it.col(), it.row()) == 1.0,
                "SpatialGraph: shell " + std::to_string(k + 1) + " not symmetric");
        if (it.row() < it.col()) {
          std::uint64_t key = (static_cast<std::uint64_t>(it.row()) << 32) |
                              static_cast<std::uint64_t>(it.col());
          auto [pos, inserted] = seen.emplace(key, static_cast<int>(k));
          require(inserted, "SpatialGraph: pair appears in shells " +
                                std::to_string(pos->second + 1) + " and " + std::to_string(k + 1));
        }
      }
    }
  }
  if (coordinates) {
    require(coordinates->rows() == n_spots && coordinates->cols() == 2,
            "SpatialGraph: coordinates must be n_spots x 2");
    require(coordinates->allFinite(), "SpatialGraph: non-finite coordinate");
  }
}

InteractionModel InteractionModel::make(Matrix g_intra, std::vector<Matrix> g_shells,
                                        std::vector<double> q_shells,
                                        std::vector<std::string> gene_names) {
  InteractionModel model;
  model.g_intra = 0.5 * (g_intra + g_intra.transpose()).eval();
  model.g_shells.reserve(g_shells.size());
  for (Matrix& g : g_shells) model.g_shells.push_back(0.5 * (g + g.transpose()).eval());
  model.q_shells = std::move(q_shells);
  model.gene_names = std::move(gene_names);
  model.validate();
  return model;
}

void InteractionModel::validate() const {
  const Index n = g_intra.rows();
  require(g_intra.cols() == n, "InteractionModel: g_intra not square");
  require(g_intra.allFinite(), "InteractionModel: non-finite entry in g_intra");
  require((g_intra - g_intra.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
          "InteractionModel: g_intra not symmetric");
  require(g_shells.size() == q_shells.size(),
          "InteractionModel: g_shells and q_shells length mismatch");
  for (std::size_t k = 0; k < g_shells.size(); ++k) {
    const Matrix& g = g_shells[k];
    require(g.rows() == n && g.cols() == n,
            "InteractionModel: g_shells[" + std::to_string(k) + "] has wrong shape");
    require(g.allFinite(), "InteractionModel: non-finite entry in g_shells[" + std::to_string(k) + "]");
    require((g - g.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
            "InteractionModel: g_shells[" + std::to_string(k) + "] not symmetric");
    require(q_shells[k] >= 0.0 && std::isfinite(q_shells[k]),
            "InteractionModel: q_shells[" + std::to_string(k) + "] must be a nonnegative real");
  }
  if (!gene_names.empty()) {
    require(static_cast<Index>(gene_names.size()) == n,
            "InteractionModel: gene_names length does not match gene count");
  }
}

}  // namespace genefield
