#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "scoopsim/errors.hpp"
#include "scoopsim/worldmodel.hpp"
#include "test_util.hpp"

using namespace scoopsim;
using scoopsim::testing::shipped_catalog;

namespace {

std::string tofu_json(const std::string& override_field = {}, const std::string& value = {}) {
  std::string mass = "0.03", bf = "1.4", shape = R"({"kind":"Box","width":0.025,"height":0.02})";
  if (override_field == "break_force") bf = value;
  if (override_field == "shape") shape = value;
  return R"({"classes":[{"name":"tofu","deformability":"Fragile","brittleness":"Brittle",)"
         R"("shape":)" + shape + R"(,"mass":)" + mass + R"(,"friction_mu":0.8,"break_force":)" +
         bf + R"(,"compression_stiffness":400,"stickiness":0,"albedo":0.8}]})";
}

template <typename F>
void expect_schema_violation(F&& f, const std::string& cls, const std::string& field) {
  try {
    f();
    FAIL() << "no SchemaViolation";
  } catch (const SchemaViolation& e) {
    EXPECT_EQ(e.class_name(), cls);
    EXPECT_EQ(e.field(), field);
  }
}

}  // namespace

TEST(Catalog, ShippedCatalogHasFifteenClasses) {
  const auto& c = *shipped_catalog();
  EXPECT_EQ(c.classes.size(), 15u);
  for (const char* n : {"tofu", "grape", "cheesecake", "red_square_jello", "orange_triangle_jello"}) {
    EXPECT_TRUE(c.index_of(n)) << n;
  }
  EXPECT_TRUE(c.at("tofu").fragile());
  EXPECT_FALSE(c.at("grape").fragile());
  EXPECT_EQ(c.at("grape").break_force, kRobustBreakSentinel);
}

TEST(Catalog, NegativeBreakForceNamesClassAndField) {
  expect_schema_violation([] { parse_catalog(tofu_json("break_force", "-1")); }, "tofu",
                          "break_force");
}

TEST(Catalog, EmptyFileIsRootViolation) {
  expect_schema_violation([] { parse_catalog(""); }, "<root>", "<root>");
}

TEST(Catalog, UnknownKeyRejected) {
  std::string text = tofu_json();
  text.insert(text.find("\"albedo\""), "\"colour\":1,");
  expect_schema_violation([&] { parse_catalog(text); }, "tofu", "colour");
}

TEST(Catalog, NonConvexPolygonRejected) {
  const std::string dart = R"({"kind":"Polygon","vertices":[[0,0],[0.02,0],[0.01,0.002],[0.01,0.02]]})";
  try {
    parse_catalog(tofu_json("shape", dart));
    FAIL();
  } catch (const ScoopError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonConvexPolygon);
  }
}

TEST(Catalog, SerializeRoundTrip) {
  const Catalog& c = *shipped_catalog();
  EXPECT_EQ(parse_catalog(serialize_catalog(c)), c);
}

TEST(Catalog, MissingFile) {
  try {
    load_catalog("/nonexistent/catalog.json");
    FAIL();
  } catch (const ScoopError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingFile);
  }
}

TEST(Catalog, UnknownClassLookup) {
  EXPECT_THROW(shipped_catalog()->at("durian"), ScoopError);
}

TEST(Shapes, AreaAndInertiaOracles) {
  const double r = 0.01;
  EXPECT_NEAR(shape_area(DiscShape{r}), std::acos(-1.0) * r * r, 1e-15);
  EXPECT_NEAR(unit_inertia(DiscShape{r}), 0.5 * r * r, 1e-18);
  const BoxShape b{0.02, 0.01};
  EXPECT_NEAR(shape_area(b), 2e-4, 1e-15);
  EXPECT_NEAR(unit_inertia(b), (0.02 * 0.02 + 0.01 * 0.01) / 12.0, 1e-15);
  EXPECT_NEAR(shape_width(b, 2.0), 0.04, 1e-15);
  const auto poly = body_polygon(b);
  const Vec2 c = polygon_centroid(poly);
  EXPECT_NEAR(c.x, 0.0, 1e-15);
  EXPECT_NEAR(c.z, 0.0, 1e-15);
}

TEST(Spawn, ZeroJitterGrapeRestsAtOrigin) {
  ScenarioConfig cfg;
  cfg.items = {{"grape", 1}};
  cfg.seed = 7;
  const WorldState w = spawn_scenario(shipped_catalog(), cfg);
  ASSERT_EQ(w.items.size(), 1u);
  EXPECT_EQ(w.phase, Phase::Idle);
  EXPECT_DOUBLE_EQ(w.items[0].pose.position.x, 0.0);
  const double r = item_radius(w, w.items[0]);
  EXPECT_NEAR(w.items[0].pose.position.z, r, 1e-4);
  EXPECT_DOUBLE_EQ(w.initial_total_mass, shipped_catalog()->at("grape").mass);
}

TEST(Spawn, PeasTouchPairwise) {
  ScenarioConfig cfg;
  cfg.items = {{"pea", 3}};
  cfg.seed = 1;
  cfg.placement_jitter = 0.01;
  const WorldState w = spawn_scenario(shipped_catalog(), cfg);
  ASSERT_EQ(w.items.size(), 3u);
  for (int i = 0; i + 1 < 3; ++i) {
    const auto& a = w.items[i];
    const auto& b = w.items[i + 1];
    const double gap = std::abs(b.pose.position.x - a.pose.position.x) -
                       (item_radius(w, a) + item_radius(w, b));
    EXPECT_NEAR(gap, 0.0, 1e-6);
  }
}

TEST(Spawn, SeedsChangePlacementAndReplayExactly) {
  ScenarioConfig cfg;
  cfg.items = {{"pea", 3}};
  cfg.placement_jitter = 0.01;
  cfg.property_jitter = 0.1;
  cfg.seed = 1;
  const WorldState a = spawn_scenario(shipped_catalog(), cfg);
  const WorldState a2 = spawn_scenario(shipped_catalog(), cfg);
  cfg.seed = 2;
  const WorldState b = spawn_scenario(shipped_catalog(), cfg);
  EXPECT_NE(a.items[0].pose.position.x, b.items[0].pose.position.x);
  EXPECT_EQ(serialize_state(a), serialize_state(a2));
}

TEST(Spawn, PropertyJitterStaysInRange) {
  ScenarioConfig cfg;
  cfg.items = {{"tofu", 1}};
  cfg.property_jitter = 0.1;
  const double nominal = shipped_catalog()->at("tofu").break_force;
  for (std::uint64_t s = 0; s < 50; ++s) {
    cfg.seed = s;
    const WorldState w = spawn_scenario(shipped_catalog(), cfg);
    EXPECT_GE(w.items[0].break_force, 0.9 * nominal);
    EXPECT_LE(w.items[0].break_force, 1.1 * nominal);
  }
}

TEST(Spawn, RejectsBadRequests) {
  ScenarioConfig cfg;
  cfg.items = {{"pea", 4}};
  EXPECT_THROW(spawn_scenario(shipped_catalog(), cfg), ScoopError);
  cfg.items = {{"durian", 1}};
  try {
    spawn_scenario(shipped_catalog(), cfg);
    FAIL();
  } catch (const ScoopError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownClass);
  }
}

TEST(ScenarioConfig, RoundTripAndStrictKeys) {
  ScenarioConfig cfg;
  cfg.items = {{"pea", 3}, {"grape", 1}};
  cfg.seed = 11;
  cfg.placement_jitter = 0.01;
  cfg.toggles.pinning = false;
  const ScenarioConfig back = parse_scenario_config(serialize_scenario_config(cfg));
  EXPECT_EQ(back.items.size(), 2u);
  EXPECT_EQ(back.items[0].count, 3);
  EXPECT_EQ(back.seed, 11u);
  EXPECT_FALSE(back.toggles.pinning);
  EXPECT_THROW(parse_scenario_config(R"({"items":[],"speed":1})"), ScoopError);
}

TEST(WorldState, PhaseOrderEnforced) {
  WorldState w;
  EXPECT_THROW(w.advance_phase(Phase::Scooping), ScoopError);
  w.advance_phase(Phase::Pushing);
  w.advance_phase(Phase::Scooping);
  w.advance_phase(Phase::Transfer);
  w.advance_phase(Phase::Done);
  EXPECT_THROW(w.advance_phase(Phase::Pushing), ScoopError);
}

TEST(Tools, LipPoseRoundTrip) {
  ToolState t;
  const Vec2 lip{0.07, -0.0003};
  t.scooper = ToolState::scooper_pose_for_lip(lip, t.geometry.mount_angle, t.geometry);
  EXPECT_NEAR(t.lip_point().x, lip.x, 1e-15);
  EXPECT_NEAR(t.lip_point().z, lip.z, 1e-15);
  const auto inner = t.spoon_inner();
  EXPECT_EQ(static_cast<int>(inner.size()), t.geometry.bowl_segments + 1);
  EXPECT_NEAR(norm(inner.front() - lip), 0.0, 1e-15);
  // Chord length equals the mouth chord.
  EXPECT_NEAR(norm(inner.back() - inner.front()), t.geometry.mouth_chord, 1e-12);
  // The bowl centre sits inside the bowl region.
  const Vec2 deep = inner[inner.size() / 2];
  EXPECT_TRUE(point_in_polygon(t.bowl_region(), (deep + (inner.front() + inner.back()) * 0.5) * 0.5));
}

TEST(Tools, PusherQuadFacesPositiveX) {
  ToolState t;
  t.pusher = Pose{{0.0, 0.0}, 0.0};
  const auto q = t.pusher_quad();
  ASSERT_EQ(q.size(), 4u);
  EXPECT_TRUE(is_convex_ccw(q));
  double xmax = -1.0;
  for (Vec2 v : q) xmax = std::max(xmax, v.x);
  EXPECT_NEAR(xmax, 0.0, 1e-15);
  EXPECT_NEAR(t.pusher_face_normal().x, 1.0, 1e-15);
}
