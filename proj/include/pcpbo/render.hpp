#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "pcpbo/geometry.hpp"
#include "pcpbo/scene.hpp"

namespace pcpbo {

enum class View { top, oblique };
std::string to_string(View v);
View view_from_string(const std::string& s);

/// One filled convex polygon in view coordinates (meters, +v up on screen).
struct Primitive {
  int item_id = -1;  ///< -1 for the plate
  std::string tag;   ///< item name, or "plate"
  std::string fill;
  int z_order = 0;
  geom::Polygon vertices;

  bool operator==(const Primitive&) const = default;
};

struct RenderedScene {
  View view = View::top;
  bool reference = false;
  std::vector<Primitive> primitives;  ///< plate first, then items in painter order

  bool operator==(const RenderedScene&) const = default;
};

/// Schematic projection of a settled scene. Items are painted by base height,
/// then id; the oblique view tilts the plate toward the viewer.
RenderedScene render(const SceneState& s, double plate_radius, View view, bool reference = false);
RenderedScene render(const SceneState& s, const TaskDefinition& task, View view,
                     bool reference = false);

/// Projection used by the oblique view.
geom::Vec2 oblique_project(const geom::Vec3& p);

nlohmann::json to_json(const RenderedScene& r);

}  // namespace pcpbo
