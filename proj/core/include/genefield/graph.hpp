#pragma once

#include "genefield/types.hpp"

namespace genefield {

struct GraphConfig {
  enum class Method { radius, knn };
  Method method = Method::radius;
  double radius = 15.0;  // micrometers, radius mode
  int k = 6;             // knn mode
  int max_shell = 1;     // K, hop shells derived from the base adjacency
};

/// Edge {i,j} iff 0 < dist(i,j) < radius (strict on both sides: coincident
/// points stay disconnected). Symmetric, zero diagonal.
SpatialGraph radius_graph(const Matrix& coords, double radius);

/// Directed k-nearest relation symmetrized by union. Distance ties broken by
/// lower spot index. Requires 1 <= k <= S-1.
SpatialGraph knn_graph(const Matrix& coords, int k);

/// Shell k holds the pairs at shortest-path distance exactly k over the base
/// adjacency (BFS). Shells are pairwise disjoint; shell 1 equals the base.
SpatialGraph khop_shells(const SparseMatrix& base, int max_shell);

/// (sum of degrees) / S = 2 |edges| / S.
double mean_degree(const SparseMatrix& shell);

/// Builder dispatch: base graph per config.method, expanded to
/// config.max_shell hop shells, coordinates attached.
SpatialGraph build_graph(const Matrix& coords, const GraphConfig& config);

/// side x side unit-spaced square lattice coordinates, row-major.
Matrix grid_coordinates(int side, double spacing = 1.0);

}  // namespace genefield
