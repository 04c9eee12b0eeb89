#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "scoopsim/geometry.hpp"
#include "scoopsim/rng.hpp"

namespace scoopsim {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double deg_to_rad(double d) { return d * kPi / 180.0; }

// ---------------------------------------------------------------------------
// Food catalog
// ---------------------------------------------------------------------------

enum class Deformability { Robust, Fragile };
enum class Brittleness { Compliant, Brittle };

struct DiscShape {
  double radius = 0.0;
  bool operator==(const DiscShape&) const = default;
};
struct BoxShape {
  double width = 0.0;
  double height = 0.0;
  bool operator==(const BoxShape&) const = default;
};
// Convex, counter-clockwise, in the item's body frame (origin arbitrary; the
// simulator recenters on the centroid).
struct PolygonShape {
  std::vector<Vec2> vertices;
  bool operator==(const PolygonShape&) const = default;
};
using FoodShape = std::variant<DiscShape, BoxShape, PolygonShape>;

inline constexpr double kRobustBreakSentinel = 1e6;

struct FoodClassSpec {
  std::string name;
  Deformability deformability = Deformability::Robust;
  Brittleness brittleness = Brittleness::Compliant;
  FoodShape shape = DiscShape{0.01};
  double mass = 0.0;                   // kg
  double friction_mu = 0.5;
  double break_force = kRobustBreakSentinel;  // N
  double compression_stiffness = 0.0;  // N/m, Fragile only
  double stickiness = 0.0;             // mass fraction shed per separation
  double albedo = 0.5;

  bool fragile() const { return deformability == Deformability::Fragile; }
  bool operator==(const FoodClassSpec&) const = default;
};

struct Catalog {
  std::vector<FoodClassSpec> classes;

  std::optional<std::size_t> index_of(const std::string& name) const;
  const FoodClassSpec& at(const std::string& name) const;
  bool operator==(const Catalog&) const = default;
};

Catalog load_catalog(const std::filesystem::path& path);
Catalog parse_catalog(const std::string& json_text);
std::string serialize_catalog(const Catalog& catalog);
void validate_class(const FoodClassSpec& spec);
// Catalog shipped with the project (data/catalog.json).
std::filesystem::path default_catalog_path();

const char* to_string(Deformability d);
const char* to_string(Brittleness b);

// Body-frame outline of a shape scaled by `scale`, recentred on its centroid.
// Discs return an empty vector.
std::vector<Vec2> body_polygon(const FoodShape& shape, double scale = 1.0);
double shape_radius(const FoodShape& shape, double scale = 1.0);  // discs only
double shape_area(const FoodShape& shape, double scale = 1.0);
// Moment of inertia per unit mass about the centroid.
double unit_inertia(const FoodShape& shape, double scale = 1.0);
// Horizontal extent when resting at angle 0.
double shape_width(const FoodShape& shape, double scale = 1.0);

// ---------------------------------------------------------------------------
// World state
// ---------------------------------------------------------------------------

enum class Phase { Idle, Pushing, Scooping, Transfer, Done };
const char* to_string(Phase p);

struct ToolEpisode {
  bool active = false;
  double peak_force = 0.0;
  int quiet_steps = 0;
  bool operator==(const ToolEpisode&) const = default;
};

struct FoodItem {
  int id = 0;
  std::size_t class_ref = 0;
  Pose pose;
  Vec2 velocity;
  double omega = 0.0;
  double current_mass = 0.0;
  double compression = 0.0;
  bool broken = false;
  std::optional<int> fragment_of;

  // Per-instance physical variation drawn at spawn.
  double size_scale = 1.0;
  double break_force = kRobustBreakSentinel;
  double compression_stiffness = 0.0;

  // Bookkeeping refreshed by the physics step.
  double squeeze = 0.0;
  Vec2 squeeze_point;
  double pusher_contact_force = 0.0;
  double scooper_contact_force = 0.0;
  ToolEpisode pusher_episode;
  ToolEpisode scooper_episode;

  // Fragments are crumbs lying on the plate; they take no part in dynamics.
  bool inert() const { return fragment_of.has_value(); }
  bool operator==(const FoodItem&) const = default;
};

struct ToolGeometry {
  double bowl_radius = 0.025;
  double mouth_chord = 0.045;
  double lip_thickness = 0.008;
  double mount_angle = kPi / 4.0;
  int bowl_segments = 16;
  // The lip rides this far below the plate surface so resting items slide
  // onto the inner face instead of catching on the tip.
  double lip_sink = 0.0003;
  // Items protruding this far past the mouth chord still count as carried.
  double mouth_height = 0.02;
  double pusher_face_length = 0.03;
  double pusher_thickness = 0.01;

  double half_arc_angle() const;
  bool operator==(const ToolGeometry&) const = default;
};

struct ToolVelocity {
  Vec2 linear;
  double angular = 0.0;
  bool operator==(const ToolVelocity&) const = default;
};

// Scooper pose: position is the centre of the bowl arc, angle is the pitch
// (equal to the mount angle when the lip is tangent to the plate).
// Pusher pose: position is the bottom edge of the face, angle is the tilt
// (top of the face leaning away from the scooper).
struct ToolState {
  Pose scooper;
  Pose pusher;
  ToolVelocity scooper_velocity;
  ToolVelocity pusher_velocity;
  ToolGeometry geometry;

  // Angle of the lip as seen from the arc centre.
  double lip_direction() const;
  Vec2 lip_point() const;
  // Inner-surface arc points, lip first (bowl_segments + 1 points).
  std::vector<Vec2> spoon_inner() const;
  std::vector<Vec2> spoon_outer() const;
  // Closed bowl region: the inner arc plus a band of mouth_height beyond the
  // mouth chord.
  std::vector<Vec2> bowl_region() const;
  // Convex quad of the pusher body (face on the +x side).
  std::vector<Vec2> pusher_quad() const;
  Vec2 pusher_face_normal() const;

  // Pose helpers used by the primitive planner.
  static Pose scooper_pose_for_lip(Vec2 lip, double pitch, const ToolGeometry& g);

  bool operator==(const ToolState&) const = default;
};

struct StrategyToggles {
  bool angled_pushing = true;
  bool adaptive_cupping = true;
  bool pinning = true;
  bool operator==(const StrategyToggles&) const = default;
};

struct ItemRequest {
  std::string class_name;
  int count = 1;
};

struct ScenarioConfig {
  std::vector<ItemRequest> items;
  double placement_jitter = 0.0;  // m
  std::uint64_t seed = 0;
  StrategyToggles toggles;
  std::string policy = "CARBS";
  // Fractional spread of per-instance break force, stiffness and size.
  double property_jitter = 0.0;
};

ScenarioConfig parse_scenario_config(const std::string& json_text);
std::string serialize_scenario_config(const ScenarioConfig& config);

enum class Surface { Plate, PusherFace, SpoonLip, SpoonBowl, OtherItem };
const char* to_string(Surface s);

// One penalty contact on an item. `normal` points from the other surface
// into the item (the direction the normal force acts on the item).
struct Contact {
  int item_id = -1;
  Surface surface = Surface::Plate;
  int other_id = -1;  // OtherItem only
  Vec2 point;
  Vec2 normal;
  double penetration = 0.0;
  double normal_force = 0.0;
  double tangent_force = 0.0;
  bool operator==(const Contact&) const = default;
};

struct WorldState {
  std::vector<FoodItem> items;
  ToolState tools;
  double time = 0.0;
  Phase phase = Phase::Idle;
  double residue_mass = 0.0;
  double initial_total_mass = 0.0;
  int next_item_id = 0;
  RngStreams rng;
  // Contacts and pusher reaction force from the most recent physics substep.
  std::vector<Contact> contacts;
  Vec2 pusher_force;
  // Catalog the items refer to; shared and immutable over a rollout.
  std::shared_ptr<const Catalog> catalog;

  const FoodClassSpec& spec_of(const FoodItem& item) const {
    return catalog->classes.at(item.class_ref);
  }
  const FoodItem* find_item(int id) const;
  FoodItem* find_item(int id);
  double item_mass_total() const;
  // Enforces Idle -> Pushing -> Scooping -> Transfer -> Done.
  void advance_phase(Phase next);
};

// Byte-exact dump of the dynamic state, used for determinism checks.
std::string serialize_state(const WorldState& world);

WorldState spawn_scenario(const Catalog& catalog, const ScenarioConfig& config);
WorldState spawn_scenario(std::shared_ptr<const Catalog> catalog,
                          const ScenarioConfig& config);

// Tools parked above the plate, clear of any food.
ToolState idle_tools(double food_center_x, const ToolGeometry& geometry = {});

// Lowest point of an item in world coordinates.
double item_bottom(const WorldState& world, const FoodItem& item);
// World-frame outline of an item (empty for discs).
std::vector<Vec2> item_outline(const WorldState& world, const FoodItem& item);
double item_radius(const WorldState& world, const FoodItem& item);
bool item_is_disc(const WorldState& world, const FoodItem& item);

}  // namespace scoopsim
