#pragma once

#include <string>

#include <fmt/core.h>

#include "pcpbo/scene.hpp"

// One fixed block at the origin and one movable item; used to exercise the
// settling rules in isolation.
inline pcpbo::TaskDefinition mini_task(double block_hx = 0.02, double block_hy = 0.03, double block_h = 0.03,
                                       double item_hx = 0.03, double item_hy = 0.008, double item_h = 0.01,
                                       double clearance = 0.002) {
  const std::string text = fmt::format(R"({{
  "task_id": "mini", "plate_radius": 0.12, "points_per_dim": 21,
  "items": [
    {{"id": 0, "name": "block", "half_extents": [{}, {}], "height": {}, "mass": 0.05, "fixed": true,
      "pose": [0, 0, {}, 0, 0, 0]}},
    {{"id": 1, "name": "stick", "half_extents": [{}, {}], "height": {}, "mass": 0.005, "fixed": false}}
  ],
  "movable_order": [1],
  "action_bounds": [{{"item": 1, "x": [-0.11, 0.11], "y": [-0.11, 0.11], "yaw": [-3.2, 3.2]}}],
  "settle": {{"clearance": {}, "penetration_tolerance": 1e-5, "tip_angle": 1.0, "friction_hold": 0.25,
             "slide_step": 0.004, "max_iterations": 96}},
  "rule_template": {{"back_direction": [1, 0], "items": [
    {{"item": 1, "lean_target": 0, "anchor": [0, 0], "yaw_range": [-1.0, 1.0], "yaw_center": 0.0,
      "contact_base": 0.65, "contact_gain": 0.2, "lean_min": 0.1}}]}},
  "cem": {{"population": 16, "elite_fraction": 0.25, "iterations": 4, "initial_std": [0.005, 0.005, 0.05],
          "min_std": 0.001, "smoothing": 0.5, "seed": 3, "restarts": 2}},
  "gp": {{"signal_variance": 1.0, "length_scales": [0.15], "noise": 0.1, "jitter": 1e-8}},
  "acquisition": {{"n_init": 1, "min_separation": 0.1, "max_reselect": 10}}
}})",
                                       block_hx, block_hy, block_h, block_h / 2, item_hx, item_hy, item_h,
                                       clearance);
  return pcpbo::parse_task(text);
}
