#include "genefield/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

namespace genefield {

namespace {

void check_coords(const Matrix& coords) {
  if (coords.rows() < 1 || coords.cols() != 2) {
    throw std::invalid_argument("coordinates must be an S x 2 matrix with S >= 1");
  }
  if (!coords.allFinite()) throw std::invalid_argument("non-finite coordinate");
}

SparseMatrix edges_to_adjacency(Index n, const std::vector<std::pair<Index, Index>>& edges) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * edges.size());
  for (auto [i, j] : edges) {
    triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), 1.0);
    triplets.emplace_back(static_cast<int>(j), static_cast<int>(i), 1.0);
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();
  return a;
}

}  // namespace

SpatialGraph radius_graph(const Matrix& coords, double radius) {
  check_coords(coords);
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("radius_graph: radius must be a positive real");
  }
  const Index n = coords.rows();
  const double r2 = radius * radius;
  std::vector<std::pair<Index, Index>> edges;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      double d2 = (coords.row(i) - coords.row(j)).squaredNorm();
      if (d2 > 0.0 && d2 < r2) edges.emplace_back(i, j);
    }
  }
  SpatialGraph graph;
  graph.n_spots = n;
  graph.shells.push_back(edges_to_adjacency(n, edges));
  graph.coordinates = coords;
  return graph;
}

SpatialGraph knn_graph(const Matrix& coords, int k) {
  check_coords(coords);
  const Index n = coords.rows();
  if (k < 1 || k >= n) {
    throw std::invalid_argument("knn_graph: k must satisfy 1 <= k <= S-1 (k=" +
                                std::to_string(k) + ", S=" + std::to_string(n) + ")");
  }
  std::vector<std::pair<Index, Index>> edges;
  std::vector<std::pair<double, Index>> order;
  order.reserve(n - 1);
  for (Index i = 0; i < n; ++i) {
    order.clear();
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      order.emplace_back((coords.row(i) - coords.row(j)).squaredNorm(), j);
    }
    // ties resolved toward the lower spot index
    std::sort(order.begin(), order.end());
    for (int t = 0; t < k; ++t) {
      Index j = order[t].second;
      edges.emplace_back(std::min(i, j), std::max(i, j));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  SpatialGraph graph;
  graph.n_spots = n;
  graph.shells.push_back(edges_to_adjacency(n, edges));
  graph.coordinates = coords;
  return graph;
}

SpatialGraph khop_shells(const SparseMatrix& base, int max_shell) {
  if (base.rows() != base.cols()) throw std::invalid_argument("khop_shells: base not square");
  if (max_shell < 1) throw std::invalid_argument("khop_shells: max_shell must be >= 1");
  const Index n = base.rows();

  std::vector<std::vector<Index>> neighbors(n);
  for (int outer = 0; outer < base.outerSize(); ++outer) {
    for (SparseMatrix::InnerIterator it(base, outer); it; ++it) {
      if (it.row() == it.col()) throw std::invalid_argument("khop_shells: base has a self-loop");
      if (base.coeff(it.col(), it.row()) != it.value()) {
        throw std::invalid_argument("khop_shells: base not symmetric");
      }
      neighbors[it.col()].push_back(it.row());
    }
  }

  std::vector<std::vector<std::pair<Index, Index>>> shell_edges(max_shell);
  std::vector<int> dist(n);
  for (Index src = 0; src < n; ++src) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[src] = 0;
    std::deque<Index> queue{src};
    while (!queue.empty()) {
      Index u = queue.front();
      queue.pop_front();
      if (dist[u] >= max_shell) continue;
      for (Index v : neighbors[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          if (v > src) shell_edges[dist[v] - 1].emplace_back(src, v);
          queue.push_back(v);
        }
      }
    }
  }

  SpatialGraph graph;
  graph.n_spots = n;
  for (auto& edges : shell_edges) graph.shells.push_back(edges_to_adjacency(n, edges));
  return graph;
}

double mean_degree(const SparseMatrix& shell) {
  if (shell.rows() == 0) return 0.0;
  return shell.sum() / static_cast<double>(shell.rows());
}

SpatialGraph build_graph(const Matrix& coords, const GraphConfig& config) {
  SpatialGraph base = (config.method == GraphConfig::Method::radius)
                          ? radius_graph(coords, config.radius)
                          : knn_graph(coords, config.k);
  if (config.max_shell <= 1) return base;
  SpatialGraph graph = khop_shells(base.base(), config.max_shell);
  graph.coordinates = base.coordinates;
  return graph;
}

Matrix grid_coordinates(int side, double spacing) {
  if (side < 1) throw std::invalid_argument("grid_coordinates: side must be >= 1");
  Matrix coords(static_cast<Index>(side) * side, 2);
  Index row = 0;
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j, ++row) {
      coords(row, 0) = spacing * j;
      coords(row, 1) = spacing * i;
    }
  }
  return coords;
}

}  // namespace genefield
