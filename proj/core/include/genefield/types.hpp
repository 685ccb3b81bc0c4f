#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <optional>
#include <string>
#include <vector>

namespace genefield {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;

/// S x N expression field: one spot/cell per row, one gene per column.
struct GeneExpressionMatrix {
  Matrix values;
  std::vector<std::string> spot_ids;
  std::vector<std::string> gene_names;
  bool sphere_normalized = false;
  std::vector<std::string> provenance;  // ordered record of processing steps

  Index n_spots() const { return values.rows(); }
  Index n_genes() const { return values.cols(); }

  // throws std::invalid_argument on violated invariants:
  // finite entries, id counts matching the matrix, unit rows when
  // sphere_normalized is set (within 1e-9)
  void validate() const;
};

/// Hop-shell adjacency structure over spots. shells[k-1] holds the pairs at
/// graph distance exactly k as a symmetric 0/1 sparse matrix.
struct SpatialGraph {
  Index n_spots = 0;
  std::vector<SparseMatrix> shells;
  std::optional<Matrix> coordinates;  // S x 2, micrometers

  Index n_shells() const { return static_cast<Index>(shells.size()); }
  const SparseMatrix& base() const { return shells.front(); }

  // symmetry, zero diagonal, pairwise disjoint shells, coordinate shape
  void validate() const;
};

/// Coupling matrices: g_intra acts within a spot, g_shells[k-1] between
/// spots at hop distance k. q_shells[k-1] is the mean shell-k degree.
struct InteractionModel {
  Matrix g_intra;
  std::vector<Matrix> g_shells;
  std::vector<double> q_shells;
  std::vector<std::string> gene_names;

  Index n_genes() const { return g_intra.rows(); }
  Index n_shells() const { return static_cast<Index>(g_shells.size()); }

  // Symmetrizes every matrix as (M + M^T)/2 and validates. All library
  // construction paths go through here; the loss itself is gauge-invariant
  // to the antisymmetric part, so nothing is lost.
  static InteractionModel make(Matrix g_intra, std::vector<Matrix> g_shells,
                               std::vector<double> q_shells,
                               std::vector<std::string> gene_names);

  void validate() const;
};

/// Empirical second moments: c_intra = s^T s, c_shells[k-1] = s^T J^(k) s,
/// m = per-gene column means, n_spots = S.
struct SufficientStatistics {
  Matrix c_intra;
  std::vector<Matrix> c_shells;
  Vector m;
  Index n_spots = 0;

  Index n_genes() const { return c_intra.rows(); }
  Index n_shells() const { return static_cast<Index>(c_shells.size()); }
};

}  // namespace genefield
