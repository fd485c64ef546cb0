#include "pcpbo/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace pcpbo {

using nlohmann::json;

double wrap_angle(double a) {
  if (!std::isfinite(a)) return a;
  if (a > -kPi && a <= kPi) return a;  // exact for angles already in range
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r <= 0.0) r += 2.0 * kPi;
  return r - kPi;
}

Pose normalized(Pose p) {
  p.roll = wrap_angle(p.roll);
  p.pitch = wrap_angle(p.pitch);
  p.yaw = wrap_angle(p.yaw);
  return p;
}

const PlacedItem* SceneState::find(int id) const {
  for (const auto& p : placed)
    if (p.spec.id == id) return &p;
  return nullptr;
}

PlacedItem* SceneState::find(int id) {
  for (auto& p : placed)
    if (p.spec.id == id) return &p;
  return nullptr;
}

Eigen::VectorXd flatten_state(const SceneState& s) {
  Eigen::VectorXd v(6 * static_cast<Eigen::Index>(s.placed.size()));
  Eigen::Index k = 0;
  for (const auto& p : s.placed) {
    v[k++] = p.pose.x;
    v[k++] = p.pose.y;
    v[k++] = p.pose.z;
    v[k++] = p.pose.roll;
    v[k++] = p.pose.pitch;
    v[k++] = p.pose.yaw;
  }
  return v;
}

SceneState unflatten_state(const SceneState& like, const Eigen::VectorXd& v) {
  if (v.size() != 6 * static_cast<Eigen::Index>(like.placed.size()))
    throw std::invalid_argument("unflatten_state: length mismatch");
  SceneState s = like;
  Eigen::Index k = 0;
  for (auto& p : s.placed) {
    p.pose = Pose{v[k], v[k + 1], v[k + 2], v[k + 3], v[k + 4], v[k + 5]};
    k += 6;
  }
  return s;
}

WeightVector::WeightVector(std::vector<double> components)
    : components_(std::move(components)) {
  if (components_.empty() || components_.size() > 3)
    throw std::invalid_argument("WeightVector: dimension must be 1, 2 or 3");
  for (double c : components_)
    if (!(c >= 0.0 && c <= 1.0))
      throw std::invalid_argument("WeightVector: components must lie in [0, 1]");
}

double w_distance(const WeightVector& a, const WeightVector& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("w_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double grid_value(int index, int points_per_dim) {
  if (points_per_dim < 2)
    throw std::invalid_argument("grid_value: need at least two points per dimension");
  if (index < 0 || index >= points_per_dim)
    throw std::out_of_range("grid_value: index out of range");
  return static_cast<double>(index) / static_cast<double>(points_per_dim - 1);
}

WeightGrid::WeightGrid(int dims, int points_per_dim)
    : dims_(dims), points_(points_per_dim), size_(1) {
  if (dims < 1 || dims > 3)
    throw std::invalid_argument("WeightGrid: dims must be 1, 2 or 3");
  if (points_per_dim < 2)
    throw std::invalid_argument("WeightGrid: need at least two points per dimension");
  for (int d = 0; d < dims; ++d) size_ *= static_cast<std::size_t>(points_per_dim);
}

std::vector<int> WeightGrid::multi_index(std::size_t index) const {
  if (index >= size_) throw std::out_of_range("WeightGrid: index out of range");
  std::vector<int> m(static_cast<std::size_t>(dims_));
  for (int d = dims_ - 1; d >= 0; --d) {
    m[static_cast<std::size_t>(d)] = static_cast<int>(index % static_cast<std::size_t>(points_));
    index /= static_cast<std::size_t>(points_);
  }
  return m;
}

std::size_t WeightGrid::flat_index(const std::vector<int>& multi) const {
  if (multi.size() != static_cast<std::size_t>(dims_))
    throw std::invalid_argument("WeightGrid: multi-index dimension mismatch");
  std::size_t idx = 0;
  for (int k : multi) {
    if (k < 0 || k >= points_) throw std::out_of_range("WeightGrid: multi-index out of range");
    idx = idx * static_cast<std::size_t>(points_) + static_cast<std::size_t>(k);
  }
  return idx;
}

WeightVector WeightGrid::point(std::size_t index) const {
  const auto m = multi_index(index);
  std::vector<double> c;
  c.reserve(m.size());
  for (int k : m) c.push_back(grid_value(k, points_));
  return WeightVector(std::move(c));
}

std::size_t WeightGrid::nearest(const WeightVector& w) const {
  if (w.size() != static_cast<std::size_t>(dims_))
    throw std::invalid_argument("WeightGrid::nearest: dimension mismatch");
  std::vector<int> m;
  for (std::size_t d = 0; d < w.size(); ++d)
    m.push_back(static_cast<int>(std::lround(w[d] * (points_ - 1))));
  return flat_index(m);
}

void SettleConfig::validate() const {
  if (!(clearance > 0 && penetration_tolerance > 0 && tip_angle > 0 && friction_hold > 0 &&
        slide_step > 0))
    throw ConfigError("SettleConfig: all parameters must be positive");
  if (!(penetration_tolerance < clearance))
    throw ConfigError("SettleConfig: penetration_tolerance must be below clearance");
  if (max_iterations < 1) throw ConfigError("SettleConfig: max_iterations must be >= 1");
}

bool ActionBounds::contains(const PlacementAction& a) const {
  return a.x >= x_min && a.x <= x_max && a.y >= y_min && a.y <= y_max && a.yaw >= yaw_min &&
         a.yaw <= yaw_max;
}

PlacementAction ActionBounds::clamp(const PlacementAction& a) const {
  return {std::clamp(a.x, x_min, x_max), std::clamp(a.y, y_min, y_max),
          std::clamp(a.yaw, yaw_min, yaw_max)};
}

int CemConfig::elite_count() const {
  return std::max(1, static_cast<int>(std::ceil(population * elite_fraction - 1e-9)));
}

void CemConfig::validate() const {
  if (population < 2 || iterations < 1 || restarts < 1)
    throw ConfigError("CemConfig: population >= 2, iterations >= 1, restarts >= 1 required");
  if (!(elite_fraction > 0.0 && elite_fraction <= 1.0))
    throw ConfigError("CemConfig: elite_fraction must lie in (0, 1]");
  if (population * elite_fraction < 2.0)
    throw ConfigError("CemConfig: population * elite_fraction must be >= 2");
  if (initial_std.size() != 3) throw ConfigError("CemConfig: initial_std needs 3 entries");
  for (double s : initial_std)
    if (!(s > 0.0)) throw ConfigError("CemConfig: initial_std must be positive");
  if (!(min_std > 0.0)) throw ConfigError("CemConfig: min_std must be positive");
  if (!(smoothing >= 0.0 && smoothing < 1.0))
    throw ConfigError("CemConfig: smoothing must lie in [0, 1)");
}

double GpHyperparams::length_scale(std::size_t d) const {
  if (length_scales.empty()) throw ConfigError("GpHyperparams: no length scale");
  return length_scales.size() == 1 ? length_scales[0] : length_scales.at(d);
}

void GpHyperparams::validate() const {
  if (!(signal_variance > 0 && noise > 0 && jitter > 0))
    throw ConfigError("GpHyperparams: parameters must be positive");
  if (length_scales.empty()) throw ConfigError("GpHyperparams: no length scale");
  for (double l : length_scales)
    if (!(l > 0)) throw ConfigError("GpHyperparams: length scales must be positive");
}

void AcquisitionConfig::validate() const {
  if (n_init < 0 || !(min_separation > 0) || max_reselect < 1)
    throw ConfigError("AcquisitionConfig: n_init >= 0, min_separation > 0, max_reselect >= 1");
}

const ItemSpec& TaskDefinition::item(int id) const {
  for (const auto& it : items)
    if (it.id == id) return it;
  throw std::out_of_range("TaskDefinition: unknown item id " + std::to_string(id));
}

const ActionBounds& TaskDefinition::bounds_for(int item_id) const {
  for (const auto& b : bounds)
    if (b.item == item_id) return b;
  throw std::out_of_range("TaskDefinition: no action bounds for item " + std::to_string(item_id));
}

void TaskDefinition::validate() const {
  if (task_id.empty()) throw ConfigError("task: missing task_id");
  if (!(plate_radius > 0)) throw ConfigError("task: plate_radius must be positive");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    if (it.id != static_cast<int>(i))
      throw ConfigError("task: item ids must be contiguous from 0 in order");
    if (!(it.hx > 0 && it.hy > 0 && it.height > 0 && it.mass > 0))
      throw ConfigError("task: item '" + it.name + "' needs positive extents and mass");
  }
  for (const auto& it : items) {
    const bool listed =
        std::find(movable_order.begin(), movable_order.end(), it.id) != movable_order.end();
    if (it.fixed == listed)
      throw ConfigError("task: item '" + it.name + "' must be either fixed or movable");
    if (it.fixed && initial.find(it.id) == nullptr)
      throw ConfigError("task: fixed item '" + it.name + "' has no initial pose");
  }
  if (bounds.size() != movable_order.size())
    throw ConfigError("task: one action bound per movable item required");
  for (std::size_t m = 0; m < movable_order.size(); ++m)
    if (bounds[m].item != movable_order[m])
      throw ConfigError("task: action bounds must follow movable_order");
  if (rule.items.size() != movable_order.size())
    throw ConfigError("task: rule template needs one entry per movable item");
  if (rule.items.empty() || rule.items.size() > 3)
    throw ConfigError("task: weight dimension must be 1, 2 or 3");
  for (std::size_t m = 0; m < rule.items.size(); ++m) {
    const auto& r = rule.items[m];
    if (r.item != movable_order[m]) throw ConfigError("task: rule items must follow movable_order");
    if (!(r.yaw_min < r.yaw_max)) throw ConfigError("task: rule yaw range must be increasing");
    if (!item(r.lean_target).fixed) throw ConfigError("task: lean targets must be fixed items");
  }
  if (points_per_dim < 2) throw ConfigError("task: points_per_dim must be >= 2");
  settle.validate();
  cem.validate();
  gp.validate();
  acquisition.validate();
}

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::pair<double, double> range_of(const json& j, const char* key) {
  const auto& r = j.at(key);
  if (!r.is_array() || r.size() != 2) throw ConfigError(std::string("task: '") + key + "' must be [min, max]");
  return {r[0].get<double>(), r[1].get<double>()};
}

}  // namespace

TaskDefinition parse_task(const std::string& json_text) {
  TaskDefinition t;
  try {
    const json j = json::parse(json_text);
    t.task_id = j.at("task_id").get<std::string>();
    t.plate_radius = get_or(j, "plate_radius", 0.12);
    t.points_per_dim = get_or(j, "points_per_dim", 21);
    t.initial.task_id = t.task_id;
    for (const auto& ji : j.at("items")) {
      ItemSpec it;
      it.id = ji.at("id").get<int>();
      it.name = get_or<std::string>(ji, "name", "item" + std::to_string(it.id));
      const auto he = ji.at("half_extents");
      it.hx = he.at(0).get<double>();
      it.hy = he.at(1).get<double>();
      it.height = ji.at("height").get<double>();
      it.mass = get_or(ji, "mass", 0.01);
      it.fixed = get_or(ji, "fixed", false);
      it.color = get_or<std::string>(ji, "color", "#999999");
      t.items.push_back(it);
      if (it.fixed) {
        const auto p = ji.at("pose");
        if (p.size() != 6) throw ConfigError("task: fixed pose must have 6 entries");
        t.initial.placed.push_back(
            {it, normalized(Pose{p[0].get<double>(), p[1].get<double>(), p[2].get<double>(),
                                 p[3].get<double>(), p[4].get<double>(), p[5].get<double>()})});
      }
    }
    t.movable_order = j.at("movable_order").get<std::vector<int>>();
    for (const auto& jb : j.at("action_bounds")) {
      ActionBounds b;
      b.item = jb.at("item").get<int>();
      std::tie(b.x_min, b.x_max) = range_of(jb, "x");
      std::tie(b.y_min, b.y_max) = range_of(jb, "y");
      std::tie(b.yaw_min, b.yaw_max) = range_of(jb, "yaw");
      t.bounds.push_back(b);
    }
    if (j.contains("settle")) {
      const auto& js = j.at("settle");
      t.settle.clearance = get_or(js, "clearance", t.settle.clearance);
      t.settle.penetration_tolerance = get_or(js, "penetration_tolerance", t.settle.penetration_tolerance);
      t.settle.tip_angle = get_or(js, "tip_angle", t.settle.tip_angle);
      t.settle.friction_hold = get_or(js, "friction_hold", t.settle.friction_hold);
      t.settle.slide_step = get_or(js, "slide_step", t.settle.slide_step);
      t.settle.max_iterations = get_or(js, "max_iterations", t.settle.max_iterations);
    }
    const auto& jr = j.at("rule_template");
    t.rule.task_id = t.task_id;
    if (jr.contains("back_direction")) {
      t.rule.back_x = jr.at("back_direction").at(0).get<double>();
      t.rule.back_y = jr.at("back_direction").at(1).get<double>();
    }
    for (const auto& ri : jr.at("items")) {
      RuleItem r;
      r.item = ri.at("item").get<int>();
      r.lean_target = ri.at("lean_target").get<int>();
      r.anchor_x = ri.at("anchor").at(0).get<double>();
      r.anchor_y = ri.at("anchor").at(1).get<double>();
      std::tie(r.yaw_min, r.yaw_max) = range_of(ri, "yaw_range");
      r.yaw_center = get_or(ri, "yaw_center", 0.5 * (r.yaw_min + r.yaw_max));
      r.contact_base = get_or(ri, "contact_base", r.contact_base);
      r.contact_gain = get_or(ri, "contact_gain", r.contact_gain);
      r.lean_min = get_or(ri, "lean_min", r.lean_min);
      t.rule.items.push_back(r);
    }
    if (j.contains("cem")) {
      const auto& jc = j.at("cem");
      t.cem.population = get_or(jc, "population", t.cem.population);
      t.cem.elite_fraction = get_or(jc, "elite_fraction", t.cem.elite_fraction);
      t.cem.iterations = get_or(jc, "iterations", t.cem.iterations);
      t.cem.initial_std = get_or(jc, "initial_std", t.cem.initial_std);
      t.cem.min_std = get_or(jc, "min_std", t.cem.min_std);
      t.cem.smoothing = get_or(jc, "smoothing", t.cem.smoothing);
      t.cem.seed = get_or(jc, "seed", t.cem.seed);
      t.cem.restarts = get_or(jc, "restarts", t.cem.restarts);
    }
    if (j.contains("gp")) {
      const auto& jg = j.at("gp");
      t.gp.signal_variance = get_or(jg, "signal_variance", t.gp.signal_variance);
      t.gp.length_scales = get_or(jg, "length_scales", t.gp.length_scales);
      t.gp.noise = get_or(jg, "noise", t.gp.noise);
      t.gp.jitter = get_or(jg, "jitter", t.gp.jitter);
    }
    if (j.contains("acquisition")) {
      const auto& ja = j.at("acquisition");
      t.acquisition.n_init = get_or(ja, "n_init", t.acquisition.n_init);
      t.acquisition.min_separation = get_or(ja, "min_separation", t.acquisition.min_separation);
      t.acquisition.max_reselect = get_or(ja, "max_reselect", t.acquisition.max_reselect);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("task: malformed JSON: ") + e.what());
  }
  std::sort(t.initial.placed.begin(), t.initial.placed.end(),
            [](const PlacedItem& a, const PlacedItem& b) { return a.spec.id < b.spec.id; });
  t.validate();
  return t;
}

TaskDefinition load_task(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open task file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_task(ss.str());
}

std::string task_to_json(const TaskDefinition& t) {
  json j;
  j["task_id"] = t.task_id;
  j["plate_radius"] = t.plate_radius;
  j["points_per_dim"] = t.points_per_dim;
  j["items"] = json::array();
  for (const auto& it : t.items) {
    json ji{{"id", it.id},         {"name", it.name},   {"half_extents", {it.hx, it.hy}},
            {"height", it.height}, {"mass", it.mass},   {"fixed", it.fixed},
            {"color", it.color}};
    if (const auto* p = t.initial.find(it.id))
      ji["pose"] = {p->pose.x, p->pose.y, p->pose.z, p->pose.roll, p->pose.pitch, p->pose.yaw};
    j["items"].push_back(ji);
  }
  j["movable_order"] = t.movable_order;
  j["action_bounds"] = json::array();
  for (const auto& b : t.bounds)
    j["action_bounds"].push_back({{"item", b.item},
                                  {"x", {b.x_min, b.x_max}},
                                  {"y", {b.y_min, b.y_max}},
                                  {"yaw", {b.yaw_min, b.yaw_max}}});
  j["settle"] = {{"clearance", t.settle.clearance},
                 {"penetration_tolerance", t.settle.penetration_tolerance},
                 {"tip_angle", t.settle.tip_angle},
                 {"friction_hold", t.settle.friction_hold},
                 {"slide_step", t.settle.slide_step},
                 {"max_iterations", t.settle.max_iterations}};
  json jr;
  jr["back_direction"] = {t.rule.back_x, t.rule.back_y};
  jr["items"] = json::array();
  for (const auto& r : t.rule.items)
    jr["items"].push_back({{"item", r.item},
                           {"lean_target", r.lean_target},
                           {"anchor", {r.anchor_x, r.anchor_y}},
                           {"yaw_range", {r.yaw_min, r.yaw_max}},
                           {"yaw_center", r.yaw_center},
                           {"contact_base", r.contact_base},
                           {"contact_gain", r.contact_gain},
                           {"lean_min", r.lean_min}});
  j["rule_template"] = jr;
  j["cem"] = {{"population", t.cem.population}, {"elite_fraction", t.cem.elite_fraction},
              {"iterations", t.cem.iterations}, {"initial_std", t.cem.initial_std},
              {"min_std", t.cem.min_std},       {"smoothing", t.cem.smoothing},
              {"seed", t.cem.seed},             {"restarts", t.cem.restarts}};
  j["gp"] = {{"signal_variance", t.gp.signal_variance},
             {"length_scales", t.gp.length_scales},
             {"noise", t.gp.noise},
             {"jitter", t.gp.jitter}};
  j["acquisition"] = {{"n_init", t.acquisition.n_init},
                      {"min_separation", t.acquisition.min_separation},
                      {"max_reselect", t.acquisition.max_reselect}};
  return j.dump(2);
}

}  // namespace pcpbo
