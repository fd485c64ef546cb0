#include "pcpbo/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pcpbo {

namespace {

constexpr int kPlateSides = 32;
// looking at the plate from the front (-x side), 40 degrees above the table
constexpr double kElevation = 40.0 * std::numbers::pi / 180.0;

geom::Vec2 project(const geom::Vec3& p, View v) {
  if (v == View::top) return {p.x(), p.y()};
  return oblique_project(p);
}

}  // namespace

std::string to_string(View v) { return v == View::top ? "top" : "oblique"; }

View view_from_string(const std::string& s) {
  if (s == "top") return View::top;
  if (s == "oblique") return View::oblique;
  throw std::invalid_argument("view must be top or oblique (got '" + s + "')");
}

geom::Vec2 oblique_project(const geom::Vec3& p) {
  // screen u runs along -y so the plate's right (y < 0) is on the right
  return {-p.y(), p.x() * std::sin(kElevation) + p.z() * std::cos(kElevation)};
}

RenderedScene render(const SceneState& s, double plate_radius, View view, bool reference) {
  RenderedScene out;
  out.view = view;
  out.reference = reference;

  Primitive plate;
  plate.tag = "plate";
  plate.fill = "#f4f1ea";
  for (int k = 0; k < kPlateSides; ++k) {
    const double a = 2.0 * std::numbers::pi * k / kPlateSides;
    plate.vertices.push_back(project({plate_radius * std::cos(a), plate_radius * std::sin(a), 0.0}, view));
  }
  out.primitives.push_back(std::move(plate));

  struct Entry {
    double base;
    int id;
    Primitive prim;
  };
  std::vector<Entry> items;
  for (const auto& it : s.placed) {
    const auto box = geom::box_of(it.spec, it.pose);
    const auto cs = geom::corners(box);
    std::vector<geom::Vec2> pts;
    double base = cs[0].z();
    for (const auto& c : cs) {
      pts.push_back(project(c, view));
      base = std::min(base, c.z());
    }
    Primitive p;
    p.item_id = it.spec.id;
    p.tag = it.spec.name;
    p.fill = it.spec.color;
    p.vertices = geom::convex_hull(std::move(pts));
    items.push_back({base, it.spec.id, std::move(p)});
  }
  std::stable_sort(items.begin(), items.end(), [](const Entry& a, const Entry& b) {
    if (a.base != b.base) return a.base < b.base;
    return a.id < b.id;
  });
  int z = 1;
  for (auto& e : items) {
    e.prim.z_order = z++;
    out.primitives.push_back(std::move(e.prim));
  }
  return out;
}

RenderedScene render(const SceneState& s, const TaskDefinition& task, View view, bool reference) {
  return render(s, task.plate_radius, view, reference);
}

nlohmann::json to_json(const RenderedScene& r) {
  nlohmann::json prims = nlohmann::json::array();
  for (const auto& p : r.primitives) {
    nlohmann::json verts = nlohmann::json::array();
    for (const auto& v : p.vertices) verts.push_back({v.x(), v.y()});
    prims.push_back({{"item_id", p.item_id},
                     {"tag", p.tag},
                     {"fill", p.fill},
                     {"z_order", p.z_order},
                     {"vertices", std::move(verts)}});
  }
  return {{"view", to_string(r.view)}, {"reference", r.reference}, {"primitives", std::move(prims)}};
}

}  // namespace pcpbo
