#include "pcpbo/settle.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <thread>

#include "pcpbo/geometry.hpp"

namespace pcpbo {

using geom::Box;
using geom::Polygon;
using geom::Vec2;
using geom::Vec3;

namespace {

constexpr double kAngleEps = 1e-9;
constexpr double kAreaEps = 1e-10;

/// Horizontal top face of an item that rests flat.
struct Support {
  int id;
  double top;
  Polygon rect;
};

struct Extents {
  double ex, ey, ez;  // footprint half extents and vertical half extent
};

Extents flat_extents(const ItemSpec& spec, bool on_side) {
  return on_side ? Extents{spec.hx, 0.5 * spec.height, spec.hy}
                 : Extents{spec.hx, spec.hy, 0.5 * spec.height};
}

bool is_on_side(const Pose& p) { return std::abs(p.roll) > kPi / 4.0; }

Support support_of(const PlacedItem& it) {
  const Extents e = flat_extents(it.spec, is_on_side(it.pose));
  return {it.spec.id, it.pose.z + e.ez,
          geom::rectangle(Vec2(it.pose.x, it.pose.y), it.pose.yaw, e.ex, e.ey)};
}

struct Others {
  std::vector<const PlacedItem*> items;
  std::vector<Support> supports;
  std::vector<Box> boxes;
  std::vector<Vec2> centers;
  std::vector<Polygon> footprints;
};

Others collect(const SceneState& s, int skip_id) {
  Others o;
  for (const auto& it : s.placed) {
    if (it.spec.id == skip_id) continue;
    o.items.push_back(&it);
    if (rests_flat(it.pose)) o.supports.push_back(support_of(it));
    o.boxes.push_back(geom::box_of(it.spec, it.pose));
    o.centers.emplace_back(it.pose.x, it.pose.y);
    o.footprints.push_back(geom::footprint(o.boxes.back()));
  }
  return o;
}

bool supported_among(const PlacedItem& self_item, const std::vector<const PlacedItem*>& others,
                     double tol);

struct Overlap {
  const Support* support;
  Polygon poly;
};

/// Quasi-static settling of one item against a fixed set of others.
Pose settle_item(const Others& others, const ItemSpec& spec, const PlacementAction& a,
                 const SettleConfig& cfg) {
  Vec2 c(a.x, a.y);
  const double yaw = a.yaw;
  const Vec2 ax(std::cos(yaw), std::sin(yaw));
  const Vec2 ay(-ax.y(), ax.x());
  bool on_side = false;
  double roll = 0.0;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    const Extents e = flat_extents(spec, on_side);
    const Polygon f = geom::rectangle(c, yaw, e.ex, e.ey);

    std::vector<Overlap> overlaps;
    for (const auto& sup : others.supports) {
      Polygon p = geom::clip_convex(f, sup.rect);
      if (p.size() >= 3 && geom::area(p) > kAreaEps) overlaps.push_back({&sup, std::move(p)});
    }

    Pose cand{c.x(), c.y(), e.ez, roll, 0.0, yaw};
    bool topple = false;
    Vec2 topple_dir = Vec2::Zero();
    Polygon failed;

    if (!overlaps.empty()) {
      double z_high = 0.0;
      for (const auto& ov : overlaps) z_high = std::max(z_high, ov.support->top);
      std::vector<Vec2> pts;
      for (const auto& ov : overlaps)
        if (ov.support->top >= z_high - 1e-9) pts.insert(pts.end(), ov.poly.begin(), ov.poly.end());
      const Polygon hull = geom::convex_hull(std::move(pts));

      if (geom::contains(hull, c, 1e-9)) {
        cand.z = z_high + e.ez;
      } else {
        double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
        double ymin = xmin, ymax = -xmin;
        for (const auto& v : hull) {
          const Vec2 r = v - c;
          xmin = std::min(xmin, r.dot(ax));
          xmax = std::max(xmax, r.dot(ax));
          ymin = std::min(ymin, r.dot(ay));
          ymax = std::max(ymax, r.dot(ay));
        }
        failed = hull;
        if (xmin > 0.0 || xmax < 0.0) {
          const double s = xmin > 0.0 ? 1.0 : -1.0;
          const double pivot = s > 0 ? xmin : -xmax;
          const double reach = s > 0 ? xmax : -xmin;
          const double overlap_fraction = (reach - pivot) / (2.0 * e.ex);
          // next lower level under the low side of the item
          double z_low = 0.0;
          for (const auto& ov : overlaps) {
            if (ov.support->top >= z_high - 1e-9) continue;
            for (const auto& v : ov.poly)
              if (s * (v - c).dot(ax) < 0.0) {
                z_low = std::max(z_low, ov.support->top);
                break;
              }
          }
          const double reach_low = pivot + e.ex;
          const double dz = z_high - z_low;
          const double lean = dz < reach_low ? std::asin(dz / reach_low) : kPi / 2.0;
          if (overlap_fraction >= cfg.friction_hold && lean <= cfg.tip_angle) {
            const double shift =
                pivot - pivot * std::cos(lean) - e.ez * std::sin(lean);
            const Vec2 cc = c + ax * (s * shift);
            cand = Pose{cc.x(), cc.y(),
                        z_high - pivot * std::sin(lean) + e.ez * std::cos(lean), roll,
                        -s * lean, yaw};
            if (!supported_among(PlacedItem{spec, cand}, others.items, 5e-5)) {
              topple = true;
              topple_dir = -s * ax;
            }
          } else {
            topple = true;
            topple_dir = -s * ax;
          }
        } else {
          double mean_y = 0.0;
          for (const auto& v : hull) mean_y += (v - c).dot(ay);
          const double s = ymin > 0.0 ? 1.0 : (ymax < 0.0 ? -1.0 : (mean_y >= 0.0 ? 1.0 : -1.0));
          topple = true;
          topple_dir = -s * ay;
        }
      }
    }

    if (topple) {
      if (!on_side && spec.height > 2.0 * spec.hy) {
        on_side = true;
        roll = topple_dir.dot(ay) >= 0.0 ? kPi / 2.0 : -kPi / 2.0;
      }
      const Extents ne = flat_extents(spec, on_side);
      double t_hull = -std::numeric_limits<double>::infinity();
      for (const auto& v : failed) t_hull = std::max(t_hull, (v - c).dot(topple_dir));
      const double r_new =
          ne.ex * std::abs(ax.dot(topple_dir)) + ne.ey * std::abs(ay.dot(topple_dir));
      const double shift = std::max(t_hull + r_new + 1e-3, cfg.slide_step);
      c += topple_dir * shift;
      continue;
    }

    const Box b = geom::box_of(spec, cand);
    double worst = 0.0;
    std::size_t worst_k = 0;
    for (std::size_t k = 0; k < others.boxes.size(); ++k) {
      const double d = geom::penetration_depth(b, others.boxes[k]);
      if (d > worst) {
        worst = d;
        worst_k = k;
      }
    }
    if (worst <= cfg.penetration_tolerance) return cand;

    Vec2 away = Vec2(cand.x, cand.y) - others.centers[worst_k];
    if (away.norm() < 1e-12) away = -ax;
    c += away.normalized() * std::min(cfg.slide_step, worst + 2.0 * cfg.penetration_tolerance);
  }

  // Escape radially until the footprint is clear of every other item.
  const Extents e = flat_extents(spec, on_side);
  Vec2 dir = c.norm() > 1e-12 ? Vec2(c.normalized()) : Vec2(-ax);
  for (int k = 0; k < 10000; ++k) {
    const Polygon f = geom::rectangle(c, yaw, e.ex, e.ey);
    bool clear = true;
    for (const auto& fp : others.footprints) {
      const Polygon p = geom::clip_convex(f, fp);
      if (p.size() >= 3 && geom::area(p) > kAreaEps) {
        clear = false;
        break;
      }
    }
    if (clear) break;
    c += dir * cfg.slide_step;
  }
  return Pose{c.x(), c.y(), e.ez, roll, 0.0, yaw};
}

void insert_sorted(SceneState& s, PlacedItem it) {
  auto pos = std::lower_bound(s.placed.begin(), s.placed.end(), it.spec.id,
                              [](const PlacedItem& p, int id) { return p.spec.id < id; });
  s.placed.insert(pos, std::move(it));
}

bool finite_action(const PlacementAction& a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.yaw);
}

}  // namespace

bool rests_flat(const Pose& p) {
  if (std::abs(p.pitch) > kAngleEps) return false;
  const double r = std::abs(p.roll);
  return r < kAngleEps || std::abs(r - kPi / 2.0) < kAngleEps;
}

double top_height(const PlacedItem& it) {
  if (rests_flat(it.pose)) return support_of(it).top;
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& v : geom::corners(geom::box_of(it.spec, it.pose))) top = std::max(top, v.z());
  return top;
}

double drop_height(const SceneState& s, const ItemSpec& item, double x, double y, double yaw,
                   const SettleConfig& cfg, double plate_radius) {
  const Polygon f = geom::rectangle(Vec2(x, y), yaw, item.hx, item.hy);
  if (!geom::intersects_disk(f, plate_radius))
    throw PlacementError("footprint of '" + item.name + "' lies entirely off the plate");
  double base = 0.0;
  for (const auto& it : s.placed) {
    if (it.spec.id == item.id) continue;
    const Polygon fp = geom::footprint(geom::box_of(it.spec, it.pose));
    const Polygon p = geom::clip_convex(f, fp);
    if (p.size() >= 3 && geom::area(p) > kAreaEps) base = std::max(base, top_height(it));
  }
  return base + 0.5 * item.height + cfg.clearance;
}

SceneState step(const TaskDefinition& task, const SceneState& s, const PlacementAction& a) {
  if (s.stage < 0 || s.stage >= task.movable_count())
    throw std::invalid_argument("step: no movable item left to place");
  if (!finite_action(a)) throw PlacementError("step: non-finite action");
  const int id = task.movable_order[static_cast<std::size_t>(s.stage)];
  if (!task.bounds_for(id).contains(a)) throw PlacementError("step: action out of bounds");
  const ItemSpec& spec = task.item(id);
  drop_height(s, spec, a.x, a.y, a.yaw, task.settle, task.plate_radius);

  SceneState next = s;
  const Others others = collect(s, id);
  insert_sorted(next, {spec, normalized(settle_item(others, spec, a, task.settle))});
  next.stage = s.stage + 1;

  // single relaxation pass over earlier movable items
  for (int m = 0; m < s.stage; ++m) {
    const int prev = task.movable_order[static_cast<std::size_t>(m)];
    PlacedItem* it = next.find(prev);
    if (it == nullptr) continue;
    bool ok = supported(next, prev);
    if (ok) {
      const Box b = geom::box_of(it->spec, it->pose);
      for (const auto& o : next.placed)
        if (o.spec.id != prev &&
            geom::penetration_depth(b, geom::box_of(o.spec, o.pose)) > task.settle.penetration_tolerance)
          ok = false;
    }
    if (ok) continue;
    const PlacementAction again{it->pose.x, it->pose.y, it->pose.yaw};
    const Others rest = collect(next, prev);
    it->pose = normalized(settle_item(rest, it->spec, again, task.settle));
  }
  return next;
}

SceneState rollout(const TaskDefinition& task, const SceneState& alpha,
                   std::span<const PlacementAction> actions) {
  SceneState s = alpha;
  for (const auto& a : actions) s = step(task, s, a);
  return s;
}

std::vector<SceneState> batch_rollout(const TaskDefinition& task, const SceneState& alpha,
                                      const std::vector<std::vector<PlacementAction>>& batch,
                                      unsigned workers) {
  std::vector<SceneState> out(batch.size());
  if (workers <= 1 || batch.size() < 2) {
    for (std::size_t i = 0; i < batch.size(); ++i) out[i] = rollout(task, alpha, batch[i]);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < batch.size(); i += workers)
            out[i] = rollout(task, alpha, batch[i]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

double max_penetration(const SceneState& s) {
  double worst = 0.0;
  std::vector<Box> boxes;
  for (const auto& it : s.placed) boxes.push_back(geom::box_of(it.spec, it.pose));
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = i + 1; j < boxes.size(); ++j)
      worst = std::max(worst, geom::penetration_depth(boxes[i], boxes[j]));
  return worst;
}

namespace {

bool supported_among(const PlacedItem& self_item, const std::vector<const PlacedItem*>& others,
                     double tol) {
  const PlacedItem* it = &self_item;
  const int item_id = it->spec.id;
  const Vec2 com(it->pose.x, it->pose.y);

  if (rests_flat(it->pose)) {
    const Support self = support_of(*it);
    const double bottom = self.top - 2.0 * (self.top - it->pose.z);
    if (std::abs(bottom) <= tol) return true;
    std::vector<Vec2> pts;
    for (const PlacedItem* o : others) {
      if (o->spec.id == item_id || !rests_flat(o->pose)) continue;
      const Support sup = support_of(*o);
      if (std::abs(sup.top - bottom) > tol) continue;
      const Polygon p = geom::clip_convex(self.rect, sup.rect);
      if (p.size() >= 3) pts.insert(pts.end(), p.begin(), p.end());
    }
    return geom::contains(geom::convex_hull(std::move(pts)), com, 1e-7);
  }

  // Leaning: the lowest edge must rest on the plate or a top face, and the
  // bottom face must touch the top edge of a higher item.
  const Box b = geom::box_of(it->spec, it->pose);
  int bottom_axis = 0;
  double bottom_sign = 1.0, lowest_nz = 2.0;
  for (int k = 1; k < 3; ++k)  // leans are about the long axis; never the end face
    for (double sg : {-1.0, 1.0})
      if (sg * b.rot(2, k) < lowest_nz) {
        lowest_nz = sg * b.rot(2, k);
        bottom_axis = k;
        bottom_sign = sg;
      }
  const int u = (bottom_axis + 1) % 3, v = (bottom_axis + 2) % 3;
  const Vec3 face_center = b.center + b.rot.col(bottom_axis) * (bottom_sign * b.half[bottom_axis]);
  std::array<Vec3, 4> face;
  int k = 0;
  for (double i : {-1.0, 1.0})
    for (double j : {-1.0, 1.0})
      face[k++] = face_center + b.rot.col(u) * (i * b.half[u]) + b.rot.col(v) * (j * b.half[v]);
  double zmin = std::numeric_limits<double>::infinity(), zmax = -zmin;
  for (const auto& p : face) {
    zmin = std::min(zmin, p.z());
    zmax = std::max(zmax, p.z());
  }

  std::vector<Vec2> contacts;
  bool low_ok = false;
  for (const auto& p : face) {
    if (p.z() > zmin + tol) continue;
    const Vec2 pxy(p.x(), p.y());
    bool rests = std::abs(p.z()) <= tol;
    for (const PlacedItem* o : others) {
      if (rests) break;
      if (o->spec.id == item_id || !rests_flat(o->pose)) continue;
      const Support sup = support_of(*o);
      rests = std::abs(sup.top - p.z()) <= tol && geom::contains(sup.rect, pxy, tol);
    }
    if (rests) {
      low_ok = true;
      contacts.push_back(pxy);
    }
  }
  if (!low_ok) return false;

  bool edge_ok = false;
  for (const PlacedItem* o : others) {
    if (o->spec.id == item_id || !rests_flat(o->pose)) continue;
    const Support sup = support_of(*o);
    if (sup.top <= zmin + tol || sup.top > zmax + tol) continue;
    // segment where the bottom face crosses the support's top height
    std::vector<Vec2> seg;
    const std::array<std::pair<int, int>, 4> edges{{{0, 1}, {1, 3}, {3, 2}, {2, 0}}};
    for (const auto& [i0, i1] : edges) {
      const Vec3& p = face[static_cast<std::size_t>(i0)];
      const Vec3& q = face[static_cast<std::size_t>(i1)];
      const double dp = p.z() - sup.top, dq = q.z() - sup.top;
      if ((dp <= 0 && dq >= 0) || (dp >= 0 && dq <= 0)) {
        const double t = std::abs(dp - dq) < 1e-15 ? 0.0 : dp / (dp - dq);
        const Vec3 x = p + (q - p) * t;
        seg.emplace_back(x.x(), x.y());
      }
    }
    if (seg.size() < 2) continue;
    // clip the crossing segment against the support's top face
    Vec2 a0 = seg.front(), a1 = seg.back();
    for (const auto& sp : seg)
      if ((sp - a0).norm() > (a1 - a0).norm()) a1 = sp;
    const Polygon& rect = sup.rect;
    double t0 = 0.0, t1 = 1.0;
    bool inside = true;
    for (std::size_t i = 0; i < rect.size() && inside; ++i) {
      const Vec2& ra = rect[i];
      const Vec2& rb = rect[(i + 1) % rect.size()];
      const Vec2 edge = rb - ra;
      const Vec2 n(-edge.y(), edge.x());  // inward for CCW
      const double f0 = n.dot(a0 - ra) + tol * edge.norm();
      const double f1 = n.dot(a1 - ra) + tol * edge.norm();
      if (f0 < 0 && f1 < 0) inside = false;
      else if (f0 < 0) t0 = std::max(t0, f0 / (f0 - f1));
      else if (f1 < 0) t1 = std::min(t1, f0 / (f0 - f1));
    }
    if (!inside || t0 > t1) continue;
    // food edges are rounded: once the crossing line touches the support face
    // the item rests on it across its full width
    edge_ok = true;
    contacts.push_back(a0);
    contacts.push_back(a1);
  }
  if (!edge_ok) return false;
  const Polygon hull = geom::convex_hull(contacts);
  if (hull.size() < 3) return false;
  return geom::contains(hull, com, 1e-7);
}

}  // namespace

bool supported(const SceneState& s, int item_id, double tol) {
  const PlacedItem* it = s.find(item_id);
  if (it == nullptr) throw std::out_of_range("supported: unknown item");
  std::vector<const PlacedItem*> others;
  for (const auto& o : s.placed)
    if (o.spec.id != item_id) others.push_back(&o);
  return supported_among(*it, others, tol);
}

InvariantReport check_invariants(const SceneState& s) {
  InvariantReport r;
  r.max_penetration = max_penetration(s);
  for (const auto& it : s.placed)
    if (!it.spec.fixed && !supported(s, it.spec.id)) r.unsupported.push_back(it.spec.id);
  return r;
}

void write_scene_dump(std::ostream& os, const SceneState& s) {
  os << "scene " << s.task_id << " stage " << s.stage << '\n';
  os << std::setprecision(17);
  for (const auto& it : s.placed)
    os << "item " << it.spec.id << ' ' << it.spec.name << ' ' << it.pose.x << ' ' << it.pose.y
       << ' ' << it.pose.z << ' ' << it.pose.roll << ' ' << it.pose.pitch << ' ' << it.pose.yaw
       << '\n';
}

}  // namespace pcpbo
