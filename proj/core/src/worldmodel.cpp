#include "scoopsim/worldmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "scoopsim/errors.hpp"

namespace scoopsim {

using nlohmann::json;

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::NonConvexPolygon: return "NonConvexPolygon";
    case ErrorKind::UnknownClass: return "UnknownClass";
    case ErrorKind::OverlapUnresolvable: return "OverlapUnresolvable";
    case ErrorKind::NumericalBlowup: return "NumericalBlowup";
    case ErrorKind::UnknownItem: return "UnknownItem";
    case ErrorKind::InvalidPhase: return "InvalidPhase";
    case ErrorKind::PhysicsFault: return "PhysicsFault";
    case ErrorKind::NoFoodDetected: return "NoFoodDetected";
    case ErrorKind::NormNotFitted: return "NormNotFitted";
    case ErrorKind::EmptyCatalog: return "EmptyCatalog";
    case ErrorKind::NoBreakObserved: return "NoBreakObserved";
    case ErrorKind::DivergedLoss: return "DivergedLoss";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptySet: return "EmptySet";
    case ErrorKind::InvalidDataset: return "InvalidDataset";
    case ErrorKind::ModelMissing: return "ModelMissing";
    case ErrorKind::InvalidAlpha: return "InvalidAlpha";
    case ErrorKind::IncompleteRecord: return "IncompleteRecord";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

const char* to_string(Deformability d) {
  return d == Deformability::Fragile ? "Fragile" : "Robust";
}
const char* to_string(Brittleness b) {
  return b == Brittleness::Brittle ? "Brittle" : "Compliant";
}
const char* to_string(Surface s) {
  switch (s) {
    case Surface::Plate: return "Plate";
    case Surface::PusherFace: return "PusherFace";
    case Surface::SpoonLip: return "SpoonLip";
    case Surface::SpoonBowl: return "SpoonBowl";
    case Surface::OtherItem: return "OtherItem";
  }
  return "?";
}

const char* to_string(Phase p) {
  switch (p) {
    case Phase::Idle: return "Idle";
    case Phase::Pushing: return "Pushing";
    case Phase::Scooping: return "Scooping";
    case Phase::Transfer: return "Transfer";
    case Phase::Done: return "Done";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Shapes
// ---------------------------------------------------------------------------

std::vector<Vec2> body_polygon(const FoodShape& shape, double scale) {
  std::vector<Vec2> poly;
  if (const auto* box = std::get_if<BoxShape>(&shape)) {
    const double hw = 0.5 * box->width * scale, hh = 0.5 * box->height * scale;
    poly = {{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}};
  } else if (const auto* pg = std::get_if<PolygonShape>(&shape)) {
    const Vec2 c = polygon_centroid(pg->vertices);
    poly.reserve(pg->vertices.size());
    for (Vec2 v : pg->vertices) poly.push_back((v - c) * scale);
  }
  return poly;
}

double shape_radius(const FoodShape& shape, double scale) {
  if (const auto* d = std::get_if<DiscShape>(&shape)) return d->radius * scale;
  double r = 0.0;
  for (Vec2 v : body_polygon(shape, scale)) r = std::max(r, norm(v));
  return r;
}

double shape_area(const FoodShape& shape, double scale) {
  if (const auto* d = std::get_if<DiscShape>(&shape)) {
    return kPi * d->radius * d->radius * scale * scale;
  }
  return signed_area(body_polygon(shape, scale));
}

double unit_inertia(const FoodShape& shape, double scale) {
  if (const auto* d = std::get_if<DiscShape>(&shape)) {
    const double r = d->radius * scale;
    return 0.5 * r * r;
  }
  const auto poly = body_polygon(shape, scale);
  return polygon_area_moment(poly) / signed_area(poly);
}

double shape_width(const FoodShape& shape, double scale) {
  if (const auto* d = std::get_if<DiscShape>(&shape)) return 2.0 * d->radius * scale;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Vec2 v : body_polygon(shape, scale)) {
    lo = std::min(lo, v.x);
    hi = std::max(hi, v.x);
  }
  return hi - lo;
}

// ---------------------------------------------------------------------------
// Catalog I/O
// ---------------------------------------------------------------------------

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& cls, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw SchemaViolation(cls, where.empty() ? it.key() : where + "." + it.key(),
                            "unknown key");
    }
  }
}

double get_number(const json& obj, const std::string& key, const std::string& cls,
                  const std::string& field) {
  if (!obj.contains(key)) throw SchemaViolation(cls, field, "missing");
  const json& v = obj.at(key);
  if (!v.is_number()) throw SchemaViolation(cls, field, "not a number");
  return v.get<double>();
}

FoodShape parse_shape(const json& j, const std::string& cls) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw SchemaViolation(cls, "shape", "expected object with 'kind'");
  }
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "Disc") {
    reject_unknown_keys(j, {"kind", "radius"}, cls, "shape");
    return DiscShape{get_number(j, "radius", cls, "shape.radius")};
  }
  if (kind == "Box") {
    reject_unknown_keys(j, {"kind", "width", "height"}, cls, "shape");
    return BoxShape{get_number(j, "width", cls, "shape.width"),
                    get_number(j, "height", cls, "shape.height")};
  }
  if (kind == "Polygon") {
    reject_unknown_keys(j, {"kind", "vertices"}, cls, "shape");
    if (!j.contains("vertices") || !j.at("vertices").is_array()) {
      throw SchemaViolation(cls, "shape.vertices", "expected array");
    }
    PolygonShape pg;
    for (const auto& v : j.at("vertices")) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw SchemaViolation(cls, "shape.vertices", "expected [x, z] pairs");
      }
      pg.vertices.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    return pg;
  }
  throw SchemaViolation(cls, "shape.kind", "unknown shape kind '" + kind + "'");
}

json shape_to_json(const FoodShape& shape) {
  json j;
  if (const auto* d = std::get_if<DiscShape>(&shape)) {
    j = {{"kind", "Disc"}, {"radius", d->radius}};
  } else if (const auto* b = std::get_if<BoxShape>(&shape)) {
    j = {{"kind", "Box"}, {"width", b->width}, {"height", b->height}};
  } else {
    const auto& pg = std::get<PolygonShape>(shape);
    json verts = json::array();
    for (Vec2 v : pg.vertices) verts.push_back({v.x, v.z});
    j = {{"kind", "Polygon"}, {"vertices", verts}};
  }
  return j;
}

FoodClassSpec parse_class(const json& j) {
  if (!j.is_object()) throw SchemaViolation("", "classes[]", "expected object");
  std::string name;
  if (j.contains("name") && j.at("name").is_string()) name = j.at("name").get<std::string>();
  if (name.empty()) throw SchemaViolation("", "name", "missing or empty");
  reject_unknown_keys(j,
                      {"name", "deformability", "brittleness", "shape", "mass",
                       "friction_mu", "break_force", "compression_stiffness",
                       "stickiness", "albedo"},
                      name, "");
  FoodClassSpec s;
  s.name = name;
  auto get_enum = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) {
      throw SchemaViolation(name, key, "missing or not a string");
    }
    return j.at(key).get<std::string>();
  };
  const std::string def = get_enum("deformability");
  if (def == "Robust") s.deformability = Deformability::Robust;
  else if (def == "Fragile") s.deformability = Deformability::Fragile;
  else throw SchemaViolation(name, "deformability", "expected Robust|Fragile");
  const std::string brit = get_enum("brittleness");
  if (brit == "Compliant") s.brittleness = Brittleness::Compliant;
  else if (brit == "Brittle") s.brittleness = Brittleness::Brittle;
  else throw SchemaViolation(name, "brittleness", "expected Compliant|Brittle");
  if (!j.contains("shape")) throw SchemaViolation(name, "shape", "missing");
  s.shape = parse_shape(j.at("shape"), name);
  s.mass = get_number(j, "mass", name, "mass");
  s.friction_mu = get_number(j, "friction_mu", name, "friction_mu");
  s.break_force = get_number(j, "break_force", name, "break_force");
  s.compression_stiffness =
      j.contains("compression_stiffness")
          ? get_number(j, "compression_stiffness", name, "compression_stiffness")
          : 0.0;
  s.stickiness = j.contains("stickiness") ? get_number(j, "stickiness", name, "stickiness")
                                          : 0.0;
  s.albedo = get_number(j, "albedo", name, "albedo");
  validate_class(s);
  return s;
}

void validate_albedo_overlap(const Catalog& c) {
  double rlo = 2, rhi = -1, flo = 2, fhi = -1;
  for (const auto& s : c.classes) {
    if (s.fragile()) { flo = std::min(flo, s.albedo); fhi = std::max(fhi, s.albedo); }
    else { rlo = std::min(rlo, s.albedo); rhi = std::max(rhi, s.albedo); }
  }
  if (rhi < 0 || fhi < 0) return;  // only one group present
  if (rlo > fhi || flo > rhi) {
    throw SchemaViolation("<root>", "albedo",
                          "Robust and Fragile albedo ranges must overlap");
  }
}

}  // namespace

void validate_class(const FoodClassSpec& s) {
  const std::string& n = s.name;
  if (!(s.mass > 0.0) || !std::isfinite(s.mass)) throw SchemaViolation(n, "mass", "must be > 0");
  if (!(s.friction_mu >= 0.0)) throw SchemaViolation(n, "friction_mu", "must be >= 0");
  if (!(s.break_force > 0.0)) throw SchemaViolation(n, "break_force", "must be > 0");
  if (!(s.stickiness >= 0.0 && s.stickiness <= 0.2)) {
    throw SchemaViolation(n, "stickiness", "must lie in [0, 0.2]");
  }
  if (!(s.albedo > 0.3 && s.albedo <= 1.0)) {
    throw SchemaViolation(n, "albedo", "must lie in (0.3, 1.0]");
  }
  if (s.compression_stiffness < 0.0) {
    throw SchemaViolation(n, "compression_stiffness", "must be >= 0");
  }
  if (s.fragile()) {
    if (!(s.break_force < kRobustBreakSentinel)) {
      throw SchemaViolation(n, "break_force", "Fragile classes need a finite threshold");
    }
    if (!(s.compression_stiffness > 0.0)) {
      throw SchemaViolation(n, "compression_stiffness", "Fragile classes need stiffness > 0");
    }
  }
  if (const auto* d = std::get_if<DiscShape>(&s.shape)) {
    if (!(d->radius > 0.0)) throw SchemaViolation(n, "shape.radius", "must be > 0");
  } else if (const auto* b = std::get_if<BoxShape>(&s.shape)) {
    if (!(b->width > 0.0)) throw SchemaViolation(n, "shape.width", "must be > 0");
    if (!(b->height > 0.0)) throw SchemaViolation(n, "shape.height", "must be > 0");
  } else {
    const auto& pg = std::get<PolygonShape>(s.shape);
    if (pg.vertices.size() < 3 || !is_convex_ccw(pg.vertices)) {
      throw ScoopError(ErrorKind::NonConvexPolygon,
                       "class '" + n + "' polygon must be convex, CCW, >= 3 vertices");
    }
  }
}

Catalog parse_catalog(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaViolation("<root>", "<root>", e.what());
  }
  if (!root.is_object()) throw SchemaViolation("<root>", "<root>", "expected object");
  reject_unknown_keys(root, {"classes"}, "<root>", "");
  if (!root.contains("classes") || !root.at("classes").is_array()) {
    throw SchemaViolation("<root>", "classes", "expected array");
  }
  Catalog c;
  std::set<std::string> seen;
  for (const auto& jc : root.at("classes")) {
    auto spec = parse_class(jc);
    if (!seen.insert(spec.name).second) throw SchemaViolation(spec.name, "name", "duplicate");
    c.classes.push_back(std::move(spec));
  }
  validate_albedo_overlap(c);
  return c;
}

Catalog load_catalog(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScoopError(ErrorKind::MissingFile, path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_catalog(ss.str());
}

std::string serialize_catalog(const Catalog& catalog) {
  json classes = json::array();
  for (const auto& s : catalog.classes) {
    classes.push_back({{"name", s.name},
                       {"deformability", to_string(s.deformability)},
                       {"brittleness", to_string(s.brittleness)},
                       {"shape", shape_to_json(s.shape)},
                       {"mass", s.mass},
                       {"friction_mu", s.friction_mu},
                       {"break_force", s.break_force},
                       {"compression_stiffness", s.compression_stiffness},
                       {"stickiness", s.stickiness},
                       {"albedo", s.albedo}});
  }
  return json{{"classes", classes}}.dump(2) + "\n";
}

std::filesystem::path default_catalog_path() {
  if (const char* env = std::getenv("SCOOPSIM_CATALOG")) return env;
#ifdef SCOOPSIM_DEFAULT_CATALOG
  return SCOOPSIM_DEFAULT_CATALOG;
#else
  return "data/catalog.json";
#endif
}

std::optional<std::size_t> Catalog::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i].name == name) return i;
  }
  return std::nullopt;
}

const FoodClassSpec& Catalog::at(const std::string& name) const {
  const auto idx = index_of(name);
  if (!idx) throw ScoopError(ErrorKind::UnknownClass, name);
  return classes[*idx];
}

// ---------------------------------------------------------------------------
// Tools
// ---------------------------------------------------------------------------

double ToolGeometry::half_arc_angle() const {
  return std::asin(std::clamp(0.5 * mouth_chord / bowl_radius, 0.0, 1.0));
}

double ToolState::lip_direction() const {
  return -0.5 * kPi - geometry.mount_angle + scooper.angle;
}

Vec2 ToolState::lip_point() const {
  return scooper.position + from_angle(lip_direction()) * geometry.bowl_radius;
}

std::vector<Vec2> ToolState::spoon_inner() const {
  const int n = geometry.bowl_segments;
  const double a0 = lip_direction(), span = 2.0 * geometry.half_arc_angle();
  std::vector<Vec2> pts;
  pts.reserve(n + 1);
  for (int i = 0; i <= n; ++i) {
    pts.push_back(scooper.position + from_angle(a0 + span * i / n) * geometry.bowl_radius);
  }
  return pts;
}

std::vector<Vec2> ToolState::spoon_outer() const {
  const int n = geometry.bowl_segments;
  const double a0 = lip_direction(), span = 2.0 * geometry.half_arc_angle();
  const double r = geometry.bowl_radius + geometry.lip_thickness;
  std::vector<Vec2> pts;
  pts.reserve(n + 1);
  for (int i = 0; i <= n; ++i) pts.push_back(scooper.position + from_angle(a0 + span * i / n) * r);
  return pts;
}

std::vector<Vec2> ToolState::bowl_region() const {
  auto pts = spoon_inner();
  const Vec2 lip = pts.front(), far = pts.back();
  // Out of the mouth: from the deepest arc point through the chord midpoint.
  const Vec2 n = normalized((lip + far) * 0.5 - pts[pts.size() / 2]);
  pts.push_back(far + n * geometry.mouth_height);
  pts.push_back(lip + n * geometry.mouth_height);
  make_ccw(pts);
  return pts;
}

Vec2 ToolState::pusher_face_normal() const { return from_angle(pusher.angle); }

std::vector<Vec2> ToolState::pusher_quad() const {
  const Vec2 n = pusher_face_normal();
  const Vec2 up = perp(n);  // face direction, bottom to top
  const Vec2 b = pusher.position;
  const Vec2 t = b + up * geometry.pusher_face_length;
  const double th = geometry.pusher_thickness;
  std::vector<Vec2> q{b, t, t - n * th, b - n * th};
  make_ccw(q);
  return q;
}

Pose ToolState::scooper_pose_for_lip(Vec2 lip, double pitch, const ToolGeometry& g) {
  const double dir = -0.5 * kPi - g.mount_angle + pitch;
  return Pose{lip - from_angle(dir) * g.bowl_radius, pitch};
}

ToolState idle_tools(double food_center_x, const ToolGeometry& geometry) {
  ToolState t;
  t.geometry = geometry;
  t.scooper = ToolState::scooper_pose_for_lip({food_center_x + 0.10, 0.05},
                                              geometry.mount_angle, geometry);
  t.pusher = Pose{{food_center_x - 0.11, 0.05}, 0.0};
  return t;
}

// ---------------------------------------------------------------------------
// World
// ---------------------------------------------------------------------------

const FoodItem* WorldState::find_item(int id) const {
  for (const auto& it : items) if (it.id == id) return &it;
  return nullptr;
}
FoodItem* WorldState::find_item(int id) {
  for (auto& it : items) if (it.id == id) return &it;
  return nullptr;
}

double WorldState::item_mass_total() const {
  double m = 0.0;
  for (const auto& it : items) m += it.current_mass;
  return m;
}

void WorldState::advance_phase(Phase next) {
  if (static_cast<int>(next) != static_cast<int>(phase) + 1) {
    throw ScoopError(ErrorKind::InvalidPhase, std::string("cannot go from ") +
                                                  to_string(phase) + " to " + to_string(next));
  }
  phase = next;
}

std::vector<Vec2> item_outline(const WorldState& world, const FoodItem& item) {
  auto poly = body_polygon(world.spec_of(item).shape, item.size_scale);
  for (auto& v : poly) v = item.pose.to_world(v);
  return poly;
}

bool item_is_disc(const WorldState& world, const FoodItem& item) {
  return std::holds_alternative<DiscShape>(world.spec_of(item).shape);
}

double item_radius(const WorldState& world, const FoodItem& item) {
  return shape_radius(world.spec_of(item).shape, item.size_scale);
}

double item_bottom(const WorldState& world, const FoodItem& item) {
  if (item_is_disc(world, item)) return item.pose.position.z - item_radius(world, item);
  double lo = std::numeric_limits<double>::infinity();
  for (Vec2 v : item_outline(world, item)) lo = std::min(lo, v.z);
  return lo;
}

std::string serialize_state(const WorldState& w) {
  std::ostringstream os;
  os << std::hexfloat;
  os << "t=" << w.time << " phase=" << to_string(w.phase) << " residue=" << w.residue_mass
     << '\n';
  for (const auto& it : w.items) {
    os << it.id << ' ' << it.class_ref << ' ' << it.pose.position.x << ' '
       << it.pose.position.z << ' ' << it.pose.angle << ' ' << it.velocity.x << ' '
       << it.velocity.z << ' ' << it.omega << ' ' << it.current_mass << ' '
       << it.compression << ' ' << it.broken << ' ' << it.fragment_of.value_or(-1) << ' '
       << it.size_scale << ' ' << it.break_force << '\n';
  }
  const auto& t = w.tools;
  os << "scooper " << t.scooper.position.x << ' ' << t.scooper.position.z << ' '
     << t.scooper.angle << " pusher " << t.pusher.position.x << ' ' << t.pusher.position.z
     << ' ' << t.pusher.angle << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

ScenarioConfig parse_scenario_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScoopError(ErrorKind::ConfigInvalid, e.what());
  }
  auto bad = [](const std::string& m) { return ScoopError(ErrorKind::ConfigInvalid, m); };
  if (!j.is_object()) throw bad("scenario must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::set<std::string> allowed{"items", "placement_jitter", "seed",
                                                "toggles", "policy", "property_jitter"};
    if (!allowed.count(it.key())) throw bad("unknown key '" + it.key() + "'");
  }
  ScenarioConfig c;
  if (!j.contains("items") || !j["items"].is_array()) throw bad("items must be an array");
  for (const auto& ji : j["items"]) {
    if (!ji.is_object() || !ji.contains("class") || !ji["class"].is_string()) {
      throw bad("item entries need a 'class' string");
    }
    for (auto it = ji.begin(); it != ji.end(); ++it) {
      if (it.key() != "class" && it.key() != "count") throw bad("unknown item key '" + it.key() + "'");
    }
    c.items.push_back({ji["class"].get<std::string>(), ji.value("count", 1)});
  }
  c.placement_jitter = j.value("placement_jitter", 0.0);
  c.seed = j.value("seed", std::uint64_t{0});
  c.policy = j.value("policy", std::string("CARBS"));
  c.property_jitter = j.value("property_jitter", 0.0);
  if (j.contains("toggles")) {
    const auto& t = j["toggles"];
    for (auto it = t.begin(); it != t.end(); ++it) {
      if (it.key() != "angled_pushing" && it.key() != "adaptive_cupping" && it.key() != "pinning") {
        throw bad("unknown toggle '" + it.key() + "'");
      }
    }
    c.toggles.angled_pushing = t.value("angled_pushing", true);
    c.toggles.adaptive_cupping = t.value("adaptive_cupping", true);
    c.toggles.pinning = t.value("pinning", true);
  }
  return c;
}

std::string serialize_scenario_config(const ScenarioConfig& c) {
  json items = json::array();
  for (const auto& r : c.items) items.push_back({{"class", r.class_name}, {"count", r.count}});
  json j{{"items", items},
         {"placement_jitter", c.placement_jitter},
         {"seed", c.seed},
         {"toggles",
          {{"angled_pushing", c.toggles.angled_pushing},
           {"adaptive_cupping", c.toggles.adaptive_cupping},
           {"pinning", c.toggles.pinning}}},
         {"policy", c.policy},
         {"property_jitter", c.property_jitter}};
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Spawning
// ---------------------------------------------------------------------------

namespace {

constexpr double kGravity = 9.81;
constexpr double kContactStiffness = 5e3;
constexpr double kPlacementHalfRange = 0.06;

// Number of outline vertices on the lowest level when resting at angle 0.
int support_points(const std::vector<Vec2>& poly) {
  double lo = std::numeric_limits<double>::infinity();
  for (Vec2 v : poly) lo = std::min(lo, v.z);
  int n = 0;
  for (Vec2 v : poly) if (v.z - lo < 1e-9) ++n;
  return std::max(n, 1);
}

}  // namespace

WorldState spawn_scenario(const Catalog& catalog, const ScenarioConfig& config) {
  return spawn_scenario(std::make_shared<const Catalog>(catalog), config);
}

WorldState spawn_scenario(std::shared_ptr<const Catalog> catalog, const ScenarioConfig& config) {
  int total = 0;
  for (const auto& r : config.items) {
    if (r.count < 1) throw ScoopError(ErrorKind::ConfigInvalid, "item count must be >= 1");
    total += r.count;
  }
  if (total < 1 || total > 3) {
    throw ScoopError(ErrorKind::ConfigInvalid, "scenario must hold 1 to 3 items");
  }
  if (config.placement_jitter < 0.0 || config.property_jitter < 0.0 ||
      config.property_jitter >= 1.0) {
    throw ScoopError(ErrorKind::ConfigInvalid, "jitter out of range");
  }

  WorldState w;
  w.catalog = std::move(catalog);
  w.rng = RngStreams(config.seed);
  w.tools = idle_tools(0.0);

  for (const auto& r : config.items) {
    const auto idx = w.catalog->index_of(r.class_name);
    if (!idx) throw ScoopError(ErrorKind::UnknownClass, r.class_name);
    const FoodClassSpec& spec = w.catalog->classes[*idx];
    for (int k = 0; k < r.count; ++k) {
      FoodItem it;
      it.id = w.next_item_id++;
      it.class_ref = *idx;
      const double pj = config.property_jitter;
      auto draw = [&] { return pj > 0.0 ? w.rng.properties.uniform(1.0 - pj, 1.0 + pj) : 1.0; };
      it.break_force = spec.break_force < kRobustBreakSentinel ? spec.break_force * draw()
                                                               : spec.break_force;
      it.compression_stiffness = spec.compression_stiffness * draw();
      // Size varies at a third of the property spread; mass follows area.
      it.size_scale = pj > 0.0 ? w.rng.properties.uniform(1.0 - pj / 3.0, 1.0 + pj / 3.0) : 1.0;
      it.current_mass = spec.mass * it.size_scale * it.size_scale;
      w.items.push_back(it);
    }
  }

  // Row placement: items touch their neighbours, the group centre is
  // jittered around the nominal food centre (plate origin) and each item gets
  // its own jitter, then a relaxation pass closes gaps and removes overlaps.
  const std::size_t n = w.items.size();
  std::vector<double> half(n), x(n);
  double width = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    half[i] = 0.5 * shape_width(w.spec_of(w.items[i]).shape, w.items[i].size_scale);
    width += 2.0 * half[i];
  }
  const double jitter = config.placement_jitter;
  const double group_center = jitter > 0.0 ? w.rng.placement.uniform(-jitter, jitter) : 0.0;
  double cursor = group_center - 0.5 * width;
  for (std::size_t i = 0; i < n; ++i) {
    const double own = jitter > 0.0 ? w.rng.placement.uniform(-jitter, jitter) : 0.0;
    x[i] = cursor + half[i] + own;
    cursor += 2.0 * half[i];
  }
  bool settled = n < 2;
  for (int iter = 0; iter < 1000 && !settled; ++iter) {
    settled = true;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double gap = (x[i + 1] - half[i + 1]) - (x[i] + half[i]);
      if (std::abs(gap) > 1e-9) {
        settled = false;
        x[i] += 0.5 * gap;
        x[i + 1] -= 0.5 * gap;
      }
    }
  }
  if (!settled) throw ScoopError(ErrorKind::OverlapUnresolvable, "row relaxation did not converge");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(x[i]) + half[i] > kPlacementHalfRange) {
      throw ScoopError(ErrorKind::OverlapUnresolvable,
                       "jitter pushes items outside the placement window");
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    FoodItem& it = w.items[i];
    const auto& spec = w.spec_of(it);
    it.pose.angle = 0.0;
    // Start at the penalty-contact equilibrium so the first step is at rest.
    if (std::holds_alternative<DiscShape>(spec.shape)) {
      const double sink = it.current_mass * kGravity / kContactStiffness;
      it.pose.position = {x[i], item_radius(w, it) - sink};
    } else {
      const auto poly = body_polygon(spec.shape, it.size_scale);
      double lo = std::numeric_limits<double>::infinity();
      for (Vec2 v : poly) lo = std::min(lo, v.z);
      const double sink =
          it.current_mass * kGravity / (kContactStiffness * support_points(poly));
      it.pose.position = {x[i], -lo - sink};
    }
    w.initial_total_mass += it.current_mass;
  }
  return w;
}

}  // namespace scoopsim
