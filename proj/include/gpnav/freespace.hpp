#pragma once

#include "gpnav/geometry.hpp"

#include "json.hpp"

#include <cstdint>
#include <vector>

namespace gpnav {

class GpdfModel;

/// Region quadtree over projected obstacle points. Cells use a half-open
/// convention [lo, hi) except along the root's upper edges, which are closed.
class Quadtree {
 public:
  struct Node {
    Box2 box;
    int depth = 0;
    int first_child = -1;  // children are stored contiguously, in order SW, SE, NW, NE
    bool occupied = false;

    bool is_leaf() const { return first_child < 0; }
  };

  /// An occupied cell is split while its children stay at least `min_cell`
  /// wide in both axes and `max_depth` is not reached.
  static Quadtree build(const Points2& points, const Box2& bounds, double min_cell, int max_depth);

  const Box2& bounds() const { return nodes_.front().box; }
  double min_cell() const { return min_cell_; }
  int max_depth() const { return max_depth_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<int>& leaves() const { return leaves_; }

  /// Index (into nodes()) of the leaf containing p, or -1 outside the root.
  int leaf_at(const Point2& p) const;

  /// Leaves whose box shares a boundary segment of positive length with
  /// the given side of `node`. side: 0 = -x, 1 = +x, 2 = -y, 3 = +y.
  void neighbours(int node, int side, std::vector<int>& out) const;

  std::size_t free_leaf_count() const;

 private:
  std::vector<Node> nodes_;
  std::vector<int> leaves_;
  double min_cell_ = 0;
  int max_depth_ = 0;
};

struct FreeCellGraph {
  struct Vertex {
    int leaf = -1;  // node index in the quadtree
    Point2 center;
    Point2 half_size;
  };
  struct Edge {
    int to = -1;
    double weight = 0;
  };

  std::vector<Vertex> vertices;
  std::vector<std::vector<Edge>> adjacency;  // undirected, both directions stored
  std::vector<int> vertex_of_node;           // quadtree node -> vertex, -1 if not a free leaf

  std::size_t edge_count() const;
};

FreeCellGraph build_connectivity_graph(const Quadtree& tree);

struct Path2D {
  Points2 waypoints;
  double length() const;
};

/// Edge-weighted shortest path between the free leaves holding `start` and
/// `goal`, returned as [start, centres..., goal].
Path2D astar(const Quadtree& tree, const FreeCellGraph& graph, const Point2& start, const Point2& goal);

/// Vertex sequence of a shortest path on an arbitrary weighted graph with
/// Euclidean heuristic over `positions`. Empty when disconnected.
std::vector<int> astar_vertices(const std::vector<std::vector<FreeCellGraph::Edge>>& adjacency,
                                const Points2& positions, int source, int target);

struct PrmOptions {
  int n_samples = 300;
  int k_neighbors = 10;
  double clearance = 0.0;
  double cell = 0.25;
  std::uint64_t seed = 0;
};

/// Probabilistic roadmap over a binary occupancy grid of the projected points.
Path2D prm_plan(const Points2& points, const Box2& bounds, const Point2& start, const Point2& goal,
                const PrmOptions& options);

enum class LiftMode { kOffsetAtStart, kFollowGround };

/// Vertical extent of the ground training set; bounds the lifting search.
struct GroundSpan {
  double bottom = 0;
  double top = 0;
};

/// Height z at (x, y) where the ground distance equals `height`, found by
/// marching down from above the highest ground point.
double height_for_ground_distance(const GpdfModel& ground, const Point2& xy, double height,
                                  const GroundSpan& span);

/// Lifts a 2D path into 3D. Offset mode holds every waypoint at the start's
/// lifted height; follow-ground mode lifts each waypoint independently.
Points3 lift_path(const Path2D& path, LiftMode mode, const GpdfModel& ground, double height,
                  const GroundSpan& span);

nlohmann::json quadtree_to_json(const Quadtree& tree, const FreeCellGraph& graph);

}  // namespace gpnav
