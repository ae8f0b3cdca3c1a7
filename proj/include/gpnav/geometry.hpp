#pragma once

#include <Eigen/Core>

#include <limits>
#include <vector>

namespace gpnav {

using Point3 = Eigen::Vector3d;
using Point2 = Eigen::Vector2d;
using Points3 = std::vector<Point3>;
using Points2 = std::vector<Point2>;

/// Axis-aligned box. Default-constructed boxes are empty (lo > hi).
template <int Dim>
struct Box {
  using Vec = Eigen::Matrix<double, Dim, 1>;

  Vec lo = Vec::Constant(std::numeric_limits<double>::infinity());
  Vec hi = Vec::Constant(-std::numeric_limits<double>::infinity());

  Box() = default;
  Box(const Vec& lo_, const Vec& hi_) : lo(lo_), hi(hi_) {}

  bool empty() const { return (lo.array() > hi.array()).any(); }

  void extend(const Vec& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }

  /// Closed containment.
  bool contains(const Vec& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }

  Vec size() const { return hi - lo; }
  Vec center() const { return 0.5 * (lo + hi); }
};

using Box2 = Box<2>;
using Box3 = Box<3>;

template <int Dim>
Box<Dim> bounding_box(const std::vector<Eigen::Matrix<double, Dim, 1>>& points) {
  Box<Dim> box;
  for (const auto& p : points) box.extend(p);
  return box;
}

inline bool is_finite(const Point3& p) { return p.allFinite(); }

}  // namespace gpnav
