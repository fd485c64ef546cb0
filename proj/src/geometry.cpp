#include "pcpbo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pcpbo::geom {

Mat3 rotation(const Pose& p) {
  const double cr = std::cos(p.roll), sr = std::sin(p.roll);
  const double cp = std::cos(p.pitch), sp = std::sin(p.pitch);
  const double cy = std::cos(p.yaw), sy = std::sin(p.yaw);
  Mat3 r;
  r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
       sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
       -sp,     cp * sr,                cp * cr;
  return r;
}

Box box_of(const ItemSpec& spec, const Pose& pose) {
  return Box{Vec3(pose.x, pose.y, pose.z), rotation(pose),
             Vec3(spec.hx, spec.hy, 0.5 * spec.height)};
}

std::array<Vec3, 8> corners(const Box& b) {
  std::array<Vec3, 8> out;
  int k = 0;
  for (int i : {-1, 1})
    for (int j : {-1, 1})
      for (int l : {-1, 1})
        out[k++] = b.center + b.rot.col(0) * (i * b.half.x()) + b.rot.col(1) * (j * b.half.y()) +
                   b.rot.col(2) * (l * b.half.z());
  return out;
}

Polygon rectangle(const Vec2& c, double yaw, double hx, double hy) {
  const Vec2 ax(std::cos(yaw), std::sin(yaw));
  const Vec2 ay(-ax.y(), ax.x());
  return {c - ax * hx - ay * hy, c + ax * hx - ay * hy, c + ax * hx + ay * hy,
          c - ax * hx + ay * hy};
}

Polygon footprint(const Box& b) {
  std::vector<Vec2> pts;
  pts.reserve(8);
  for (const auto& v : corners(b)) pts.emplace_back(v.x(), v.y());
  return convex_hull(std::move(pts));
}

double area(const Polygon& poly) {
  double a = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % n];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

Vec2 centroid(const Polygon& poly) {
  Vec2 c = Vec2::Zero();
  if (poly.empty()) return c;
  for (const auto& p : poly) c += p;
  return c / static_cast<double>(poly.size());
}

namespace {
double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}
}  // namespace

Polygon convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return (a - b).squaredNorm() < 1e-24; }),
            pts.end());
  if (pts.size() < 3) return pts;
  Polygon h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i - 1]) <= 0) --k;
    h[k++] = pts[i - 1];
  }
  h.resize(k - 1);
  return h;
}

Polygon clip_convex(const Polygon& subject, const Polygon& clip) {
  Polygon out = subject;
  const std::size_t n = clip.size();
  for (std::size_t e = 0; e < n && !out.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % n];
    Polygon in;
    in.swap(out);
    out.reserve(in.size() + 2);
    const std::size_t m = in.size();
    for (std::size_t i = 0; i < m; ++i) {
      const Vec2& p = in[i];
      const Vec2& q = in[(i + 1) % m];
      const double sp = cross(a, b, p);
      const double sq = cross(a, b, q);
      if (sp >= 0) out.push_back(p);
      if ((sp >= 0) != (sq >= 0)) {
        const double t = sp / (sp - sq);
        out.push_back(p + (q - p) * t);
      }
    }
  }
  return out;
}

bool contains(const Polygon& convex, const Vec2& p, double tol) {
  const std::size_t n = convex.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = convex[i];
    const Vec2& b = convex[(i + 1) % n];
    const double len = (b - a).norm();
    if (len <= 0) continue;
    if (cross(a, b, p) / len < -tol) return false;
  }
  return true;
}

bool intersects_disk(const Polygon& convex, double radius) {
  const Vec2 o = Vec2::Zero();
  if (contains(convex, o)) return true;
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = convex.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = convex[i];
    const Vec2& b = convex[(i + 1) % n];
    const Vec2 ab = b - a;
    const double t = std::clamp(-a.dot(ab) / std::max(ab.squaredNorm(), 1e-300), 0.0, 1.0);
    best = std::min(best, (a + ab * t).norm());
  }
  return best <= radius;
}

double penetration_depth(const Box& a, const Box& b) {
  const Vec3 d = b.center - a.center;
  double depth = std::numeric_limits<double>::infinity();
  auto test = [&](Vec3 axis) {
    const double n = axis.norm();
    if (n < 1e-9) return true;
    axis /= n;
    double ra = 0, rb = 0;
    for (int k = 0; k < 3; ++k) {
      ra += a.half[k] * std::abs(a.rot.col(k).dot(axis));
      rb += b.half[k] * std::abs(b.rot.col(k).dot(axis));
    }
    const double overlap = ra + rb - std::abs(d.dot(axis));
    if (overlap <= 0) return false;
    depth = std::min(depth, overlap);
    return true;
  };
  for (int k = 0; k < 3; ++k)
    if (!test(a.rot.col(k)) || !test(b.rot.col(k))) return 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (!test(a.rot.col(i).cross(b.rot.col(j)))) return 0.0;
  return depth;
}

}  // namespace pcpbo::geom
