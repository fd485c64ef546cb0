#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "pcpbo/scene.hpp"

namespace pcpbo::geom {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
/// Convex polygon, counter-clockwise.
using Polygon = std::vector<Vec2>;

Mat3 rotation(const Pose& p);

/// Oriented box in world coordinates.
struct Box {
  Vec3 center;
  Mat3 rot;   ///< columns are the body axes
  Vec3 half;  ///< half extents along body x, y, z
};

Box box_of(const ItemSpec& spec, const Pose& pose);
std::array<Vec3, 8> corners(const Box& b);

/// Rectangle centred at c with the given yaw and half extents.
Polygon rectangle(const Vec2& c, double yaw, double hx, double hy);
/// Horizontal projection of a box (convex hull of its corners).
Polygon footprint(const Box& b);

double area(const Polygon& poly);
Vec2 centroid(const Polygon& poly);
Polygon convex_hull(std::vector<Vec2> pts);
/// Intersection of two convex polygons (Sutherland-Hodgman).
Polygon clip_convex(const Polygon& subject, const Polygon& clip);
bool contains(const Polygon& convex, const Vec2& p, double tol = 1e-9);
/// True when the polygon touches the origin-centred disk of `radius`.
bool intersects_disk(const Polygon& convex, double radius);

/// Penetration depth of two boxes by separating-axis test; 0 when disjoint or touching.
double penetration_depth(const Box& a, const Box& b);

}  // namespace pcpbo::geom
