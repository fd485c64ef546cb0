#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pcpbo {

/// Base for all library errors that carry a domain meaning.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A placement whose footprint misses the plate, or an action outside the
/// task bounds.
class PlacementError : public Error {
public:
  using Error::Error;
};

/// Malformed configuration or task file.
class ConfigError : public Error {
public:
  using Error::Error;
};

constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// Rigid item approximated by a cuboid. Footprint half extents are along the
/// item's local x (long axis) and y; height is the full z extent.
struct ItemSpec {
  int id = 0;
  std::string name;
  double hx = 0.0;
  double hy = 0.0;
  double height = 0.0;
  double mass = 0.0;
  bool fixed = false;
  std::string color = "#999999";

  bool operator==(const ItemSpec&) const = default;
};

/// Position in meters, orientation as roll/pitch/yaw (R = Rz(yaw) Ry(pitch) Rx(roll)).
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  bool operator==(const Pose&) const = default;
};

/// Returns the pose with all angles wrapped into (-pi, pi].
Pose normalized(Pose p);

struct PlacedItem {
  ItemSpec spec;
  Pose pose;

  bool operator==(const PlacedItem&) const = default;
};

/// Poses of every item present on the plate, ordered by item id.
struct SceneState {
  std::string task_id;
  std::vector<PlacedItem> placed;
  int stage = 0;  ///< number of movable items placed so far

  bool operator==(const SceneState&) const = default;

  const PlacedItem* find(int id) const;
  PlacedItem* find(int id);
};

/// In-plane placement command for the next movable item.
struct PlacementAction {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  bool operator==(const PlacementAction&) const = default;
};

/// Flattens the scene into (x, y, z, roll, pitch, yaw) blocks ordered by id.
Eigen::VectorXd flatten_state(const SceneState& s);

/// Inverse of flatten_state: replaces the poses of `like` with the values in v.
SceneState unflatten_state(const SceneState& like, const Eigen::VectorXd& v);

/// Preference parameter in [0, 1]^n, n in {1, 2, 3}.
class WeightVector {
public:
  WeightVector() = default;
  explicit WeightVector(std::vector<double> components);

  std::size_t size() const { return components_.size(); }
  double operator[](std::size_t i) const { return components_[i]; }
  const std::vector<double>& components() const { return components_; }

  bool operator==(const WeightVector&) const = default;

private:
  std::vector<double> components_;
};

/// Euclidean distance between two weight vectors.
double w_distance(const WeightVector& a, const WeightVector& b);

/// Value of grid index k along one axis: k / (points_per_dim - 1).
double grid_value(int index, int points_per_dim);

/// Cartesian grid over [0, 1]^dims, enumerated row-major (first dim slowest).
class WeightGrid {
public:
  WeightGrid(int dims, int points_per_dim = 21);

  int dims() const { return dims_; }
  int points_per_dim() const { return points_; }
  std::size_t size() const { return size_; }

  WeightVector point(std::size_t index) const;
  std::vector<int> multi_index(std::size_t index) const;
  std::size_t flat_index(const std::vector<int>& multi) const;
  /// Grid point closest to w (per-axis rounding).
  std::size_t nearest(const WeightVector& w) const;

private:
  int dims_;
  int points_;
  std::size_t size_;
};

/// Quasi-static settling parameters (see settle.hpp).
struct SettleConfig {
  double clearance = 0.002;
  double penetration_tolerance = 1e-4;
  double tip_angle = 1.0;
  double friction_hold = 0.25;
  double slide_step = 0.004;
  int max_iterations = 96;

  void validate() const;
};

struct ActionBounds {
  int item = 0;
  double x_min = 0.0, x_max = 0.0;
  double y_min = 0.0, y_max = 0.0;
  double yaw_min = 0.0, yaw_max = 0.0;

  bool contains(const PlacementAction& a) const;
  PlacementAction clamp(const PlacementAction& a) const;
};

/// Per-movable-item part of the rule template.
struct RuleItem {
  int item = 0;
  int lean_target = 0;            ///< fixed item the item rests against
  double anchor_x = 0.0;          ///< point on the lean target the long axis aims at
  double anchor_y = 0.0;
  double yaw_min = -kPi / 3.0;
  double yaw_max = kPi / 3.0;
  double yaw_center = 0.0;        ///< yaw where the contact fraction is smallest
  double contact_base = 0.65;     ///< fraction of length from low end to the contact edge
  double contact_gain = 0.2;      ///< added at the ends of the yaw range
  double lean_min = 0.15;         ///< minimum |pitch| for the item to count as leaning
};

/// Hand-authored rule map: weight component m drives the yaw of movable item m,
/// position and lean follow from the yaw.
struct RuleTemplate {
  std::string task_id;
  double back_x = 1.0;  ///< unit direction pointing to the back of the dish
  double back_y = 0.0;
  std::vector<RuleItem> items;
};

struct CemConfig {
  int population = 128;
  double elite_fraction = 0.1;
  int iterations = 20;
  std::vector<double> initial_std{0.01, 0.01, 0.15};  ///< per (x, y, yaw)
  double min_std = 1e-3;
  double smoothing = 0.5;
  unsigned long long seed = 7;
  int restarts = 10;

  int elite_count() const;
  void validate() const;
};

struct GpHyperparams {
  double signal_variance = 1.0;
  std::vector<double> length_scales{0.15};
  double noise = 0.1;
  double jitter = 1e-8;

  double length_scale(std::size_t d) const;
  void validate() const;
};

struct AcquisitionConfig {
  int n_init = 1;
  double min_separation = 0.1;
  int max_reselect = 10;

  void validate() const;
};

struct TaskDefinition {
  std::string task_id;
  double plate_radius = 0.12;
  std::vector<ItemSpec> items;
  SceneState initial;                 ///< fixed items only (alpha)
  std::vector<int> movable_order;     ///< placement order of movable items
  std::vector<ActionBounds> bounds;   ///< parallel to movable_order
  SettleConfig settle;
  RuleTemplate rule;
  CemConfig cem;
  GpHyperparams gp;
  AcquisitionConfig acquisition;
  int points_per_dim = 21;

  int weight_dims() const { return static_cast<int>(rule.items.size()); }
  int movable_count() const { return static_cast<int>(movable_order.size()); }
  const ItemSpec& item(int id) const;
  const ActionBounds& bounds_for(int item_id) const;
  WeightGrid grid() const { return WeightGrid(weight_dims(), points_per_dim); }

  void validate() const;
};

/// Loads a task from its JSON configuration file.
TaskDefinition load_task(const std::string& path);
/// Parses a task from JSON text.
TaskDefinition parse_task(const std::string& json_text);
/// Serializes a task back to JSON text (round-trips through parse_task).
std::string task_to_json(const TaskDefinition& task);

}  // namespace pcpbo
