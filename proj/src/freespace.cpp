#include "gpnav/freespace.hpp"
#include "gpnav/error.hpp"
#include "gpnav/gpdf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <random>

namespace gpnav {

// ---------------------------------------------------------------------------
// Quadtree

namespace {

int child_slot(const Box2& box, const Point2& p) {
  const Point2 mid = box.center();
  return (p.x() >= mid.x() ? 1 : 0) + (p.y() >= mid.y() ? 2 : 0);
}

Box2 child_box(const Box2& box, int slot) {
  const Point2 mid = box.center();
  Box2 out = box;
  (slot & 1 ? out.lo.x() : out.hi.x()) = mid.x();
  (slot & 2 ? out.lo.y() : out.hi.y()) = mid.y();
  return out;
}

double overlap(double a0, double a1, double b0, double b1) { return std::min(a1, b1) - std::max(a0, b0); }

}  // namespace

Quadtree Quadtree::build(const Points2& points, const Box2& bounds, double min_cell, int max_depth) {
  if (!(min_cell > 0)) throw validation_error("quadtree min_cell must be > 0");
  if (max_depth < 1) throw validation_error("quadtree max_depth must be >= 1");
  if (bounds.empty() || !(bounds.size().array() > 0).all())
    throw validation_error("quadtree bounds must have positive area");
  for (const auto& p : points)
    if (!bounds.contains(p))
      throw validation_error("quadtree point (" + std::to_string(p.x()) + ", " + std::to_string(p.y()) +
                             ") lies outside the bounds");

  Quadtree tree;
  tree.min_cell_ = min_cell;
  tree.max_depth_ = max_depth;
  tree.nodes_.push_back({bounds, 0, -1, !points.empty()});

  struct Work {
    int node;
    std::vector<int> members;
  };
  std::vector<Work> stack;
  std::vector<int> all(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) all[i] = static_cast<int>(i);
  stack.push_back({0, std::move(all)});

  while (!stack.empty()) {
    Work work = std::move(stack.back());
    stack.pop_back();
    const Node node = tree.nodes_[work.node];
    const Point2 child_size = 0.5 * node.box.size();
    if (!node.occupied || node.depth >= max_depth || child_size.minCoeff() < min_cell) continue;

    std::array<std::vector<int>, 4> split;
    for (int idx : work.members) split[child_slot(node.box, points[idx])].push_back(idx);
    const int first = static_cast<int>(tree.nodes_.size());
    tree.nodes_[work.node].first_child = first;
    for (int slot = 0; slot < 4; ++slot)
      tree.nodes_.push_back({child_box(node.box, slot), node.depth + 1, -1, !split[slot].empty()});
    // Reverse push keeps the traversal order SW, SE, NW, NE.
    for (int slot = 3; slot >= 0; --slot)
      if (!split[slot].empty()) stack.push_back({first + slot, std::move(split[slot])});
  }

  for (int i = 0; i < static_cast<int>(tree.nodes_.size()); ++i)
    if (tree.nodes_[i].is_leaf()) tree.leaves_.push_back(i);
  return tree;
}

int Quadtree::leaf_at(const Point2& p) const {
  if (!bounds().contains(p)) return -1;
  int idx = 0;
  while (!nodes_[idx].is_leaf()) idx = nodes_[idx].first_child + child_slot(nodes_[idx].box, p);
  return idx;
}

void Quadtree::neighbours(int node, int side, std::vector<int>& out) const {
  const Box2& box = nodes_[node].box;
  const int axis = side / 2;      // 0: x sides, 1: y sides
  const bool upper = side % 2;    // +x / +y
  const int other = 1 - axis;
  const double line = upper ? box.hi[axis] : box.lo[axis];

  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int idx = stack.back();
    stack.pop_back();
    const Node& n = nodes_[idx];
    if (idx == node) continue;
    if (n.box.lo[axis] > line || n.box.hi[axis] < line) continue;
    if (overlap(n.box.lo[other], n.box.hi[other], box.lo[other], box.hi[other]) <= 0) continue;
    if (n.is_leaf()) {
      if ((upper ? n.box.lo[axis] : n.box.hi[axis]) == line) out.push_back(idx);
      continue;
    }
    for (int c = 3; c >= 0; --c) stack.push_back(n.first_child + c);
  }
}

std::size_t Quadtree::free_leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(leaves_.begin(), leaves_.end(), [&](int i) { return !nodes_[i].occupied; }));
}

std::size_t FreeCellGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& adj : adjacency) total += adj.size();
  return total / 2;
}

FreeCellGraph build_connectivity_graph(const Quadtree& tree) {
  FreeCellGraph graph;
  const auto& nodes = tree.nodes();
  graph.vertex_of_node.assign(nodes.size(), -1);
  for (int leaf : tree.leaves()) {
    if (nodes[leaf].occupied) continue;
    graph.vertex_of_node[leaf] = static_cast<int>(graph.vertices.size());
    graph.vertices.push_back({leaf, nodes[leaf].box.center(), 0.5 * nodes[leaf].box.size()});
  }
  graph.adjacency.resize(graph.vertices.size());

  std::vector<int> found;
  for (std::size_t v = 0; v < graph.vertices.size(); ++v) {
    for (int side : {1, 3}) {  // +x and +y; the mirrored side is covered by the neighbour
      found.clear();
      tree.neighbours(graph.vertices[v].leaf, side, found);
      std::sort(found.begin(), found.end());
      for (int leaf : found) {
        const int u = graph.vertex_of_node[leaf];
        if (u < 0) continue;
        const double w = (graph.vertices[v].center - graph.vertices[u].center).norm();
        graph.adjacency[v].push_back({u, w});
        graph.adjacency[u].push_back({static_cast<int>(v), w});
      }
    }
  }
  return graph;
}

// ---------------------------------------------------------------------------
// Search

double Path2D::length() const {
  double total = 0;
  for (std::size_t i = 1; i < waypoints.size(); ++i) total += (waypoints[i] - waypoints[i - 1]).norm();
  return total;
}

std::vector<int> astar_vertices(const std::vector<std::vector<FreeCellGraph::Edge>>& adjacency,
                                const Points2& positions, int source, int target) {
  const std::size_t n = adjacency.size();
  std::vector<double> g(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1);
  std::vector<char> closed(n, 0);
  using Entry = std::pair<double, int>;  // (f, vertex); ties resolve to the smaller index
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;

  auto h = [&](int v) { return (positions[v] - positions[target]).norm(); };
  g[source] = 0;
  open.push({h(source), source});
  while (!open.empty()) {
    const auto [f, v] = open.top();
    open.pop();
    if (closed[v]) continue;
    closed[v] = 1;
    if (v == target) break;
    for (const auto& e : adjacency[v]) {
      if (closed[e.to]) continue;
      const double cand = g[v] + e.weight;
      if (cand < g[e.to]) {
        g[e.to] = cand;
        parent[e.to] = v;
        open.push({cand + h(e.to), e.to});
      }
    }
  }
  if (!closed[target]) return {};
  std::vector<int> path;
  for (int v = target; v >= 0; v = parent[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

namespace {

void push_distinct(Points2& out, const Point2& p) {
  if (out.empty() || out.back() != p) out.push_back(p);
}

}  // namespace

Path2D astar(const Quadtree& tree, const FreeCellGraph& graph, const Point2& start, const Point2& goal) {
  auto locate = [&](const Point2& p, const char* which) {
    const int leaf = tree.leaf_at(p);
    if (leaf < 0 || tree.nodes()[leaf].occupied)
      throw Error(ErrorKind::kBlockedEndpoint, std::string(which) + " (" + std::to_string(p.x()) + ", " +
                                                   std::to_string(p.y()) + ") is not in a free cell");
    return graph.vertex_of_node[leaf];
  };
  const int s = locate(start, "start");
  const int t = locate(goal, "goal");

  Path2D path;
  push_distinct(path.waypoints, start);
  if (s != t) {
    Points2 centers;
    centers.reserve(graph.vertices.size());
    for (const auto& v : graph.vertices) centers.push_back(v.center);
    const auto seq = astar_vertices(graph.adjacency, centers, s, t);
    if (seq.empty()) throw Error(ErrorKind::kDisconnected, "no free-space path between start and goal");
    for (int v : seq) push_distinct(path.waypoints, centers[v]);
  }
  push_distinct(path.waypoints, goal);
  return path;
}

// ---------------------------------------------------------------------------
// PRM baseline

namespace {

class OccupancyGrid {
 public:
  OccupancyGrid(const Points2& points, const Box2& bounds, double cell, double clearance)
      : bounds_(bounds), cell_(cell) {
    nx_ = std::max(1, static_cast<int>(std::ceil(bounds.size().x() / cell)));
    ny_ = std::max(1, static_cast<int>(std::ceil(bounds.size().y() / cell)));
    occ_.assign(static_cast<std::size_t>(nx_) * ny_, 0);
    std::vector<char> raw(occ_.size(), 0);
    for (const auto& p : points) raw[index(cell_of(p))] = 1;
    const int r = static_cast<int>(std::ceil(clearance / cell));
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i) {
        if (!raw[index({i, j})]) continue;
        for (int dj = -r; dj <= r; ++dj)
          for (int di = -r; di <= r; ++di) {
            const int ii = i + di, jj = j + dj;
            if (ii < 0 || jj < 0 || ii >= nx_ || jj >= ny_) continue;
            if (r > 0 && std::hypot(di, dj) * cell > clearance + cell) continue;
            occ_[index({ii, jj})] = 1;
          }
      }
  }

  bool free(const Point2& p) const { return bounds_.contains(p) && !occ_[index(cell_of(p))]; }

  /// Grid traversal over every cell the segment touches; passing exactly
  /// through a corner touches all cells around it.
  bool visible(const Point2& a, const Point2& b) const {
    if (!free(a) || !free(b)) return false;
    auto [i, j] = cell_of(a);
    const auto [ti, tj] = cell_of(b);
    const Point2 d = b - a;
    const int si = d.x() > 0 ? 1 : -1, sj = d.y() > 0 ? 1 : -1;
    auto boundary_t = [&](int axis, int idx, int step) {
      if (d[axis] == 0) return std::numeric_limits<double>::infinity();
      const double edge = bounds_.lo[axis] + (idx + (step > 0 ? 1 : 0)) * cell_;
      return (edge - a[axis]) / d[axis];
    };
    const double dx = d.x() != 0 ? cell_ / std::abs(d.x()) : std::numeric_limits<double>::infinity();
    const double dy = d.y() != 0 ? cell_ / std::abs(d.y()) : std::numeric_limits<double>::infinity();
    double tx = boundary_t(0, i, si), ty = boundary_t(1, j, sj);
    while (i != ti || j != tj) {
      if (std::abs(tx - ty) < 1e-12) {
        if (occupied(i + si, j) || occupied(i, j + sj)) return false;
        i += si;
        j += sj;
        tx += dx;
        ty += dy;
      } else if (tx < ty) {
        i += si;
        tx += dx;
      } else {
        j += sj;
        ty += dy;
      }
      if (tx > 1 + 1e-12 && ty > 1 + 1e-12 && (i != ti || j != tj)) {
        // Rounding left the walk short of the target cell; fall back to it.
        return !occupied(ti, tj);
      }
      if (occupied(i, j)) return false;
    }
    return true;
  }

 private:
  bool occupied(int i, int j) const {
    if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return true;
    return occ_[index({i, j})];
  }

  std::array<int, 2> cell_of(const Point2& p) const {
    const int i = std::clamp(static_cast<int>(std::floor((p.x() - bounds_.lo.x()) / cell_)), 0, nx_ - 1);
    const int j = std::clamp(static_cast<int>(std::floor((p.y() - bounds_.lo.y()) / cell_)), 0, ny_ - 1);
    return {i, j};
  }
  std::size_t index(const std::array<int, 2>& c) const {
    return static_cast<std::size_t>(c[1]) * nx_ + c[0];
  }

  Box2 bounds_;
  double cell_;
  int nx_ = 1, ny_ = 1;
  std::vector<char> occ_;
};

}  // namespace

Path2D prm_plan(const Points2& points, const Box2& bounds, const Point2& start, const Point2& goal,
                const PrmOptions& options) {
  if (options.n_samples < 2) throw validation_error("PRM needs at least two samples");
  if (!(options.clearance >= 0)) throw validation_error("PRM clearance must be >= 0");
  if (!(options.cell > 0)) throw validation_error("PRM grid cell must be > 0");
  const OccupancyGrid grid(points, bounds, options.cell, options.clearance);
  if (!grid.free(start)) throw Error(ErrorKind::kBlockedEndpoint, "PRM start is occupied");
  if (!grid.free(goal)) throw Error(ErrorKind::kBlockedEndpoint, "PRM goal is occupied");

  Points2 nodes{start, goal};
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> ux(bounds.lo.x(), bounds.hi.x());
  std::uniform_real_distribution<double> uy(bounds.lo.y(), bounds.hi.y());
  const long max_attempts = 100L * options.n_samples;
  for (long attempt = 0; attempt < max_attempts && static_cast<int>(nodes.size()) < options.n_samples + 2;
       ++attempt) {
    const Point2 p(ux(rng), uy(rng));
    if (grid.free(p)) nodes.push_back(p);
  }

  const int n = static_cast<int>(nodes.size());
  std::vector<std::vector<FreeCellGraph::Edge>> adj(n);
  std::vector<std::pair<double, int>> order;
  for (int i = 0; i < n; ++i) {
    order.clear();
    for (int j = 0; j < n; ++j)
      if (j != i) order.push_back({(nodes[i] - nodes[j]).norm(), j});
    const int k = std::min<int>(options.k_neighbors, static_cast<int>(order.size()));
    std::partial_sort(order.begin(), order.begin() + k, order.end());
    for (int m = 0; m < k; ++m) {
      const int j = order[m].second;
      const bool known = std::any_of(adj[i].begin(), adj[i].end(), [&](const auto& e) { return e.to == j; });
      if (known || !grid.visible(nodes[i], nodes[j])) continue;
      adj[i].push_back({j, order[m].first});
      adj[j].push_back({i, order[m].first});
    }
  }
  const auto seq = astar_vertices(adj, nodes, 0, 1);
  if (seq.empty()) throw Error(ErrorKind::kDisconnected, "PRM roadmap does not connect start and goal");
  Path2D path;
  for (int v : seq) push_distinct(path.waypoints, nodes[v]);
  return path;
}

// ---------------------------------------------------------------------------
// Lifting

double height_for_ground_distance(const GpdfModel& ground, const Point2& xy, double height,
                                  const GroundSpan& span) {
  if (!(height > 0)) throw validation_error("lift height must be > 0");
  if (ground.max_distance() <= height)
    throw validation_error("ground field distance cap is below the requested height");
  auto dist = [&](double z) {
    QueryVec q(3);
    q << xy.x(), xy.y(), z;
    return ground.distance(q);
  };
  // March down: a unit-Lipschitz distance cannot drop below `height` within
  // one step of size d - height, so the target level is approached from above.
  double z = span.top + height + 0.5;
  double d = dist(z);
  const double floor_z = span.bottom - height;
  double z_above = z;
  for (int it = 0; it < 200 && z > floor_z; ++it) {
    const double gap = d - height;
    if (std::abs(gap) < 1e-7) return z;
    if (gap < 0) break;
    z_above = z;
    z -= std::max(gap, 1e-4);
    d = dist(z);
  }
  if (d >= height) return z;
  // Overshot by the GP approximation: bisect between z and z_above.
  double lo = z, hi = z_above;
  for (int it = 0; it < 60 && hi - lo > 1e-9; ++it) {
    const double mid = 0.5 * (lo + hi);
    (dist(mid) < height ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Points3 lift_path(const Path2D& path, LiftMode mode, const GpdfModel& ground, double height,
                  const GroundSpan& span) {
  if (path.waypoints.empty()) throw validation_error("cannot lift an empty path");
  Points3 out;
  out.reserve(path.waypoints.size());
  if (mode == LiftMode::kOffsetAtStart) {
    const double z = height_for_ground_distance(ground, path.waypoints.front(), height, span);
    for (const auto& p : path.waypoints) out.emplace_back(p.x(), p.y(), z);
  } else {
    for (const auto& p : path.waypoints)
      out.emplace_back(p.x(), p.y(), height_for_ground_distance(ground, p, height, span));
  }
  return out;
}

nlohmann::json quadtree_to_json(const Quadtree& tree, const FreeCellGraph& graph) {
  nlohmann::json doc;
  doc["bounds"] = {tree.bounds().lo.x(), tree.bounds().lo.y(), tree.bounds().hi.x(), tree.bounds().hi.y()};
  doc["min_cell"] = tree.min_cell();
  doc["max_depth"] = tree.max_depth();
  auto& leaves = doc["leaves"] = nlohmann::json::array();
  for (int leaf : tree.leaves()) {
    const auto& n = tree.nodes()[leaf];
    leaves.push_back({{"box", {n.box.lo.x(), n.box.lo.y(), n.box.hi.x(), n.box.hi.y()}},
                      {"depth", n.depth},
                      {"occupied", n.occupied}});
  }
  auto& edges = doc["edges"] = nlohmann::json::array();
  for (std::size_t v = 0; v < graph.adjacency.size(); ++v)
    for (const auto& e : graph.adjacency[v])
      if (static_cast<int>(v) < e.to) edges.push_back({graph.vertices[v].center.x(), graph.vertices[v].center.y(),
                                                       graph.vertices[e.to].center.x(), graph.vertices[e.to].center.y()});
  return doc;
}

}  // namespace gpnav
