#pragma once

#include "oracles.hpp"

#include "gpnav/freespace.hpp"
#include "gpnav/geometry.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <random>
#include <utility>
#include <vector>

// Seeded fixtures shared by the unit tests and the acceptance run.
namespace fixture {

using gpnav::Point2;
using gpnav::Points2;

inline Eigen::MatrixXd random_rows(int n, int dim, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, scale);
  Eigen::MatrixXd out(n, dim);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < dim; ++k) out(i, k) = u(rng);
  return out;
}

// Points scattered inside randomly chosen raster cells, away from cell edges.
inline Points2 random_cell_points(std::uint64_t seed, int cells_per_side, double cell, double fill) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0, 1), inner(0.1, 0.9);
  Points2 pts;
  for (int j = 0; j < cells_per_side; ++j)
    for (int i = 0; i < cells_per_side; ++i)
      if (coin(rng) < fill) pts.emplace_back((i + inner(rng)) * cell, (j + inner(rng)) * cell);
  return pts;
}

// Walls of a 20 x 20 cell maze carved by randomized depth-first search over
// a 10 x 10 room grid, one point per wall cell.
inline Points2 maze_points(std::uint64_t seed, double cell) {
  const int rooms = 10, n = 2 * rooms;
  std::vector<char> open(n * n, 0);
  auto at = [&](int i, int j) -> char& { return open[j * n + i]; };
  std::vector<char> seen(rooms * rooms, 0);
  std::mt19937_64 rng(seed);
  std::vector<std::pair<int, int>> stack{{0, 0}};
  seen[0] = 1;
  at(0, 0) = 1;
  while (!stack.empty()) {
    auto [x, y] = stack.back();
    std::vector<std::pair<int, int>> next;
    const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int a = x + dx[k], b = y + dy[k];
      if (a >= 0 && b >= 0 && a < rooms && b < rooms && !seen[b * rooms + a]) next.push_back({a, b});
    }
    if (next.empty()) {
      stack.pop_back();
      continue;
    }
    auto [a, b] = next[std::uniform_int_distribution<std::size_t>(0, next.size() - 1)(rng)];
    seen[b * rooms + a] = 1;
    at(2 * a, 2 * b) = 1;
    at(x + a, y + b) = 1;  // cell between the two rooms (2x + 2a) / 2
    stack.push_back({a, b});
  }
  Points2 pts;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (!at(i, j)) pts.emplace_back((i + 0.5) * cell, (j + 0.5) * cell);
  return pts;
}

// Free raster cells are 4-connected exactly when their containing free leaves
// are connected in the graph.
inline bool connectivity_matches(const Points2& pts, const gpnav::Box2& bounds, double cell) {
  const gpnav::Quadtree tree = gpnav::Quadtree::build(pts, bounds, cell, 12);
  const gpnav::FreeCellGraph graph = gpnav::build_connectivity_graph(tree);
  const oracle::Raster raster = oracle::flood_fill(pts, bounds, cell);
  const std::vector<int> comp = oracle::components(graph.adjacency);
  std::map<int, int> raster_to_graph, graph_to_raster;
  for (int j = 0; j < raster.ny; ++j)
    for (int i = 0; i < raster.nx; ++i) {
      const int leaf = tree.leaf_at(raster.center(i, j));
      if (leaf < 0) return false;
      const bool free_leaf = !tree.nodes()[leaf].occupied;
      if (free_leaf != (raster.at(i, j) >= 0)) return false;
      if (!free_leaf) continue;
      const int gc = comp[graph.vertex_of_node[leaf]];
      const int rc = raster.at(i, j);
      if (raster_to_graph.emplace(rc, gc).first->second != gc) return false;
      if (graph_to_raster.emplace(gc, rc).first->second != rc) return false;
    }
  return true;
}

}  // namespace fixture
