#include "scoopsim/physics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>

#include "scoopsim/errors.hpp"

namespace scoopsim {
namespace {

enum class Side { None, Pusher, Spoon };

struct Body {
  std::size_t index = 0;  // into world.items
  bool disc = false;
  double radius = 0.0;     // disc radius, or bounding radius for polygons
  std::vector<Vec2> poly;  // world outline for polygons
  Vec2 center;
  Vec2 velocity;
  double omega = 0.0;
  double mass = 0.0;
  double inertia = 0.0;
  double mu = 0.0;
  bool fragile = false;
  double compression_stiffness = 0.0;
};

struct RawContact {
  int a = -1;  // body index
  int b = -1;  // body index for item-item contacts
  Surface surface = Surface::Plate;
  Side side = Side::None;
  Vec2 point;
  Vec2 normal;  // force direction on body a
  double depth = 0.0;
  Vec2 surface_velocity;  // kinematic surfaces only
  double surface_omega = 0.0;
  // Spring term overridden by the fragile two-sided model (< 0: use k*depth).
  double spring_override = -1.0;
  double stiffness = 0.0;
};

RawContact make_contact(int a, int b, Surface surface, Side side, Vec2 point, Vec2 normal,
                        double depth) {
  RawContact c;
  c.a = a;
  c.b = b;
  c.surface = surface;
  c.side = side;
  c.point = point;
  c.normal = normal;
  c.depth = depth;
  return c;
}

struct ToolFrame {
  std::vector<Vec2> pusher;
  int pusher_bottom = -1;  // edge resting on the plate; never a contact face
  std::vector<std::vector<Vec2>> spoon_quads;  // lip segment first
  std::vector<Vec2> spoon_vertices;            // unique shell vertices
  std::vector<Vec2> quad_center;               // bounding circle per segment
  std::vector<double> quad_reach;
  Vec2 spoon_center;
  double spoon_reach = 0.0;
  Vec2 pusher_center;
  double pusher_reach = 0.0;
};

ToolFrame build_tools(const ToolState& t) {
  ToolFrame f;
  f.pusher = t.pusher_quad();
  {
    const Vec2 up = perp(t.pusher_face_normal());
    double lowest = 2.0;
    for (std::size_t i = 0; i < f.pusher.size(); ++i) {
      const Vec2 e = f.pusher[(i + 1) % f.pusher.size()] - f.pusher[i];
      const double d = dot(normalized(Vec2{e.z, -e.x}), up);
      if (d < lowest) {
        lowest = d;
        f.pusher_bottom = static_cast<int>(i);
      }
    }
  }
  const auto inner = t.spoon_inner();
  const auto outer = t.spoon_outer();
  for (std::size_t i = 0; i + 1 < inner.size(); ++i) {
    std::vector<Vec2> q{inner[i], inner[i + 1], outer[i + 1], outer[i]};
    make_ccw(q);
    Vec2 c;
    for (Vec2 v : q) c += v;
    c = c / 4.0;
    double r = 0.0;
    for (Vec2 v : q) r = std::max(r, norm(v - c));
    f.quad_center.push_back(c);
    f.quad_reach.push_back(r);
    f.spoon_quads.push_back(std::move(q));
  }
  f.spoon_vertices = inner;
  f.spoon_vertices.insert(f.spoon_vertices.end(), outer.begin(), outer.end());
  f.spoon_center = t.scooper.position;
  f.spoon_reach = t.geometry.bowl_radius + t.geometry.lip_thickness;
  Vec2 c;
  for (Vec2 v : f.pusher) c += v;
  f.pusher_center = c / static_cast<double>(f.pusher.size());
  for (Vec2 v : f.pusher) f.pusher_reach = std::max(f.pusher_reach, norm(v - f.pusher_center));
  return f;
}

// Tool frame at the current poses, re-posed rigidly from one built at the
// start of the step (the tools only translate and rotate between substeps).
ToolFrame repose_tools(const ToolFrame& base, const ToolState& from, const ToolState& to) {
  ToolFrame f = base;
  const double dp = to.pusher.angle - from.pusher.angle;
  const double ds = to.scooper.angle - from.scooper.angle;
  auto pusher_map = [&](Vec2 v) { return to.pusher.position + rotate(v - from.pusher.position, dp); };
  auto spoon_map = [&](Vec2 v) { return to.scooper.position + rotate(v - from.scooper.position, ds); };
  for (Vec2& v : f.pusher) v = pusher_map(v);
  f.pusher_center = pusher_map(f.pusher_center);
  for (auto& q : f.spoon_quads) {
    for (Vec2& v : q) v = spoon_map(v);
  }
  for (Vec2& v : f.spoon_vertices) v = spoon_map(v);
  for (Vec2& v : f.quad_center) v = spoon_map(v);
  f.spoon_center = to.scooper.position;
  return f;
}

// Per-item shape data that stays fixed over the substeps of one step.
struct ShapeCache {
  bool disc = false;
  double radius = 0.0;
  double unit_inertia = 0.0;
  std::vector<Vec2> local;  // body-frame outline for polygons
};

std::vector<ShapeCache> shape_caches(const WorldState& w) {
  std::vector<ShapeCache> out;
  out.reserve(w.items.size());
  for (const auto& it : w.items) {
    const auto& shape = w.spec_of(it).shape;
    ShapeCache c;
    c.disc = std::holds_alternative<DiscShape>(shape);
    c.radius = shape_radius(shape, it.size_scale);
    c.unit_inertia = unit_inertia(shape, it.size_scale);
    if (!c.disc) c.local = body_polygon(shape, it.size_scale);
    out.push_back(std::move(c));
  }
  return out;
}

struct Hit {
  Vec2 point;
  Vec2 normal;
  double depth;
};

// Body against a convex polygon (tool piece or another item outline).
// Normals point from the polygon into the body.
void collide_convex(const Body& a, std::span<const Vec2> quad, std::vector<Hit>& out,
                    int skip_edge = -1) {
  if (a.disc) {
    const Vec2 c = a.center;
    if (const auto in = convex_depth(quad, c, skip_edge)) {
      out.push_back({c - in->normal * a.radius, in->normal, a.radius + in->depth});
      return;
    }
    const Vec2 q = closest_point_on_boundary(quad, c);
    const Vec2 d = c - q;
    const double dist = norm(d);
    if (dist < a.radius && dist > 0.0) out.push_back({q, d / dist, a.radius - dist});
    return;
  }
  for (Vec2 v : a.poly) {
    if (const auto in = convex_depth(quad, v, skip_edge)) {
      out.push_back({v, in->normal, in->depth});
    }
  }
  for (Vec2 q : quad) {
    if (const auto in = convex_depth(a.poly, q)) out.push_back({q, -in->normal, in->depth});
  }
}

// Polygon pair by separating axes. Vertex-wise nearest-edge normals go wrong
// when a corner slips in next to the other body's base edge, so the pair
// shares the axis of least overlap; normals point from b into a.
void collide_polygons(std::span<const Vec2> a, Vec2 ca, std::span<const Vec2> b, Vec2 cb,
                      std::vector<Hit>& out) {
  auto project = [](std::span<const Vec2> poly, Vec2 n, double& lo, double& hi) {
    lo = hi = dot(poly[0], n);
    for (Vec2 v : poly) {
      lo = std::min(lo, dot(v, n));
      hi = std::max(hi, dot(v, n));
    }
  };
  double best = std::numeric_limits<double>::infinity();
  Vec2 axis;
  for (const auto poly : {a, b}) {
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2 e = poly[(i + 1) % poly.size()] - poly[i];
      const Vec2 n = normalized(Vec2{e.z, -e.x});
      double alo, ahi, blo, bhi;
      project(a, n, alo, ahi);
      project(b, n, blo, bhi);
      const double overlap = std::min(ahi, bhi) - std::max(alo, blo);
      if (overlap <= 0.0) return;
      if (overlap < best) {
        best = overlap;
        axis = n;
      }
    }
  }
  if (dot(ca - cb, axis) < 0.0) axis = -axis;
  double alo, ahi, blo, bhi;
  project(a, axis, alo, ahi);
  project(b, axis, blo, bhi);
  const std::size_t before = out.size();
  for (Vec2 v : a) {
    if (convex_depth(b, v)) out.push_back({v, axis, std::clamp(bhi - dot(v, axis), 0.0, best)});
  }
  for (Vec2 q : b) {
    if (convex_depth(a, q)) out.push_back({q, axis, std::clamp(dot(q, axis) - alo, 0.0, best)});
  }
  if (out.size() == before) {
    // Edges cross without a vertex inside: use the deepest vertex of a.
    Vec2 deepest = a[0];
    for (Vec2 v : a) {
      if (dot(v, axis) < dot(deepest, axis)) deepest = v;
    }
    out.push_back({deepest, axis, best});
  }
}

Vec2 point_velocity(const Body& b, Vec2 p) { return b.velocity + cross(b.omega, p - b.center); }

double inv_eff_mass(const Body& b, Vec2 p, Vec2 dir) {
  const double rn = cross(p - b.center, dir);
  return 1.0 / b.mass + rn * rn / b.inertia;
}

int substep_count(const WorldState& w, const std::vector<ShapeCache>& shapes,
                  const PhysicsParams& prm, double dt) {
  double min_mass = std::numeric_limits<double>::infinity();
  for (const auto& it : w.items) {
    if (!it.inert()) min_mass = std::min(min_mass, it.current_mass);
  }
  if (!std::isfinite(min_mass)) return 1;
  // A corner contact on a box sees a quarter of the body mass; two items in
  // contact halve it again.
  double omega_sq = prm.contact_stiffness * 8.0 / min_mass;
  // Items held by several contacts (jams) stiffen further: bound each item's
  // rate by summing k / m_eff over the contacts of the previous step.
  std::vector<double> rate(w.items.size(), 0.0);
  auto index_of = [&](int id) {
    for (std::size_t i = 0; i < w.items.size(); ++i) {
      if (w.items[i].id == id) return static_cast<int>(i);
    }
    return -1;
  };
  auto inv_eff = [&](int i, Vec2 p, Vec2 n) {
    const FoodItem& it = w.items[i];
    const double rn = cross(p - it.pose.position, n);
    return 1.0 / it.current_mass + rn * rn / (it.current_mass * shapes[i].unit_inertia);
  };
  for (const auto& c : w.contacts) {
    const int a = index_of(c.item_id);
    if (a < 0 || w.items[a].inert()) continue;
    double inv = inv_eff(a, c.point, c.normal);
    if (c.surface == Surface::OtherItem) {
      const int b = index_of(c.other_id);
      if (b >= 0 && !w.items[b].inert()) {
        inv += inv_eff(b, c.point, c.normal);
        rate[b] += prm.contact_stiffness * inv;
      }
    }
    rate[a] += prm.contact_stiffness * inv;
  }
  for (double r : rate) omega_sq = std::max(omega_sq, r);
  const double omega = std::sqrt(omega_sq);
  return std::max(1, static_cast<int>(std::ceil(dt * omega / prm.max_stiffness_phase)));
}

// Advances one substep and returns the largest per-item sum of k / m_eff over
// the contacts it used, the squared rate the next substep has to resolve.
double substep(WorldState& w, double h, const PhysicsParams& prm, bool keep_contacts,
               const std::vector<ShapeCache>& shapes, const ToolFrame& tf) {
  const ToolState& tools = w.tools;

  std::vector<Body> bodies;
  bodies.reserve(w.items.size());
  for (std::size_t i = 0; i < w.items.size(); ++i) {
    const FoodItem& it = w.items[i];
    if (it.inert()) continue;
    const auto& spec = w.spec_of(it);
    const ShapeCache& sc = shapes[i];
    Body b;
    b.index = i;
    b.disc = sc.disc;
    b.radius = sc.radius;
    if (!b.disc) {
      b.poly.reserve(sc.local.size());
      for (Vec2 v : sc.local) b.poly.push_back(it.pose.to_world(v));
    }
    b.center = it.pose.position;
    b.velocity = it.velocity;
    b.omega = it.omega;
    b.mass = it.current_mass;
    b.inertia = it.current_mass * sc.unit_inertia;
    b.mu = spec.friction_mu;
    b.fragile = spec.fragile();
    b.compression_stiffness = it.compression_stiffness;
    bodies.push_back(std::move(b));
  }

  std::vector<RawContact> raw;
  std::vector<Hit> hits;
  for (int ai = 0; ai < static_cast<int>(bodies.size()); ++ai) {
    const Body& a = bodies[ai];
    // Plate.
    if (a.disc) {
      const double depth = a.radius - a.center.z;
      if (depth > 0.0) {
        raw.push_back(make_contact(ai, -1, Surface::Plate, Side::None, {a.center.x, 0.0}, {0.0, 1.0}, depth));
      }
    } else {
      for (Vec2 v : a.poly) {
        if (v.z < 0.0) raw.push_back(make_contact(ai, -1, Surface::Plate, Side::None, v, {0.0, 1.0}, -v.z));
      }
    }
    // Pusher.
    if (norm(a.center - tf.pusher_center) < a.radius + tf.pusher_reach) {
      hits.clear();
      collide_convex(a, tf.pusher, hits, tf.pusher_bottom);
      for (const Hit& hit : hits) {
        RawContact c = make_contact(ai, -1, Surface::PusherFace, Side::Pusher, hit.point, hit.normal, hit.depth);
        c.surface_velocity = tools.pusher_velocity.linear +
                             cross(tools.pusher_velocity.angular, hit.point - tools.pusher.position);
        c.surface_omega = tools.pusher_velocity.angular;
        raw.push_back(c);
      }
    }
    // Spoon shell.
    if (norm(a.center - tf.spoon_center) < a.radius + tf.spoon_reach) {
      auto spoon_contact = [&](const Hit& hit, std::size_t seg) {
        RawContact c = make_contact(ai, -1, seg == 0 ? Surface::SpoonLip : Surface::SpoonBowl,
                                    Side::Spoon, hit.point, hit.normal, hit.depth);
        c.surface_velocity = tools.scooper_velocity.linear +
                             cross(tools.scooper_velocity.angular, hit.point - tf.spoon_center);
        c.surface_omega = tools.scooper_velocity.angular;
        raw.push_back(c);
      };
      if (a.disc) {
        // Deepest segment only; adjacent segments share the same surface.
        std::optional<Hit> best;
        std::size_t best_seg = 0;
        for (std::size_t s = 0; s < tf.spoon_quads.size(); ++s) {
          if (norm(a.center - tf.quad_center[s]) >= a.radius + tf.quad_reach[s]) continue;
          hits.clear();
          collide_convex(a, tf.spoon_quads[s], hits);
          for (const Hit& hit : hits) {
            if (!best || hit.depth > best->depth) {
              best = hit;
              best_seg = s;
            }
          }
        }
        if (best) spoon_contact(*best, best_seg);
      } else {
        std::vector<std::size_t> near;
        for (std::size_t s = 0; s < tf.spoon_quads.size(); ++s) {
          if (norm(a.center - tf.quad_center[s]) < a.radius + tf.quad_reach[s]) near.push_back(s);
        }
        for (Vec2 v : a.poly) {
          std::optional<Hit> best;
          std::size_t best_seg = 0;
          for (const std::size_t s : near) {
            if (const auto in = convex_depth(tf.spoon_quads[s], v)) {
              if (!best || in->depth > best->depth) {
                best = Hit{v, in->normal, in->depth};
                best_seg = s;
              }
            }
          }
          if (best) spoon_contact(*best, best_seg);
        }
        const std::size_t n_inner = tf.spoon_quads.size() + 1;
        for (std::size_t k = 0; k < tf.spoon_vertices.size(); ++k) {
          const Vec2 q = tf.spoon_vertices[k];
          if (norm(q - a.center) > a.radius) continue;
          if (const auto in = convex_depth(a.poly, q)) {
            const std::size_t seg = k % n_inner == 0 ? 0 : 1;
            spoon_contact({q, -in->normal, in->depth}, seg);
          }
        }
      }
    }
    // Other items.
    for (int bi = ai + 1; bi < static_cast<int>(bodies.size()); ++bi) {
      const Body& b = bodies[bi];
      if (norm(a.center - b.center) > a.radius + b.radius) continue;
      hits.clear();
      if (a.disc && b.disc) {
        const Vec2 d = a.center - b.center;
        const double dist = norm(d);
        if (dist < a.radius + b.radius && dist > 0.0) {
          const Vec2 n = d / dist;
          hits.push_back({b.center + n * b.radius, n, a.radius + b.radius - dist});
        }
      } else if (!a.disc && !b.disc) {
        collide_polygons(a.poly, a.center, b.poly, b.center, hits);
      } else if (!b.disc) {
        collide_convex(a, b.poly, hits);
      } else {
        // a polygon, b disc: collide b against a, then flip.
        std::vector<Hit> flipped;
        collide_convex(b, a.poly, flipped);
        for (const Hit& hit : flipped) hits.push_back({hit.point, -hit.normal, hit.depth});
      }
      for (const Hit& hit : hits) {
        raw.push_back(make_contact(ai, bi, Surface::OtherItem, Side::None, hit.point, hit.normal, hit.depth));
      }
    }
  }

  // Fragile items squeezed between both tools conform to them: the overlap
  // becomes compression and both sides carry k_c * compression.
  std::vector<double> compression(bodies.size(), 0.0);
  for (int ai = 0; ai < static_cast<int>(bodies.size()); ++ai) {
    if (!bodies[ai].fragile) continue;
    double dp = 0.0, ds = 0.0, sum_p = 0.0, sum_s = 0.0;
    for (const auto& c : raw) {
      if (c.a != ai) continue;
      if (c.side == Side::Pusher) { dp = std::max(dp, c.depth); sum_p += c.depth; }
      if (c.side == Side::Spoon) { ds = std::max(ds, c.depth); sum_s += c.depth; }
    }
    if (dp <= 0.0 || ds <= 0.0) continue;
    const double comp = dp + ds;
    compression[ai] = comp;
    const double k = bodies[ai].compression_stiffness;
    for (auto& c : raw) {
      if (c.a != ai || c.side == Side::None) continue;
      const double share = c.depth / (c.side == Side::Pusher ? sum_p : sum_s);
      c.spring_override = k * comp * share;
      c.stiffness = k * share;
    }
  }

  // Forces.
  std::vector<Vec2> force(bodies.size());
  std::vector<double> torque(bodies.size(), 0.0);
  struct SideAccum {
    Vec2 force;
    Vec2 weighted_point;
    double weight = 0.0;
  };
  std::vector<SideAccum> pusher_side(bodies.size()), spoon_side(bodies.size());
  std::vector<double> pusher_mag(bodies.size(), 0.0), scooper_mag(bodies.size(), 0.0);
  Vec2 pusher_reaction;
  std::vector<double> rate(bodies.size(), 0.0);
  if (keep_contacts) w.contacts.clear();

  for (auto& c : raw) {
    Body& a = bodies[c.a];
    Body* b = c.b >= 0 ? &bodies[c.b] : nullptr;
    const Vec2 va = point_velocity(a, c.point);
    const Vec2 vb = b ? point_velocity(*b, c.point) : c.surface_velocity;
    const Vec2 vrel = va - vb;
    const double vn = dot(vrel, c.normal);
    double inv_n = inv_eff_mass(a, c.point, c.normal);
    if (b) inv_n += inv_eff_mass(*b, c.point, c.normal);
    const double m_eff = 1.0 / inv_n;
    const double k = c.spring_override >= 0.0 ? c.stiffness : prm.contact_stiffness;
    rate[c.a] += k * inv_n;
    if (b) rate[c.b] += k * inv_n;
    const double spring = c.spring_override >= 0.0 ? c.spring_override
                                                   : prm.contact_stiffness * c.depth;
    const double damping = 2.0 * prm.damping_ratio * std::sqrt(k * m_eff);
    const double fn = std::max(0.0, spring - damping * vn);

    const double mu = b ? std::sqrt(a.mu * b->mu) : a.mu;
    const Vec2 vt = vrel - c.normal * vn;
    const double speed = norm(vt);
    Vec2 ft;
    double ft_mag = 0.0;
    if (speed > 1e-12 && fn > 0.0) {
      const Vec2 t = vt / speed;
      double inv_t = inv_eff_mass(a, c.point, t);
      if (b) inv_t += inv_eff_mass(*b, c.point, t);
      const double gamma = 0.5 / (inv_t * h);
      ft_mag = std::min(mu * fn, gamma * speed);
      ft = t * -ft_mag;
    }
    const Vec2 f = c.normal * fn + ft;
    force[c.a] += f;
    torque[c.a] += cross(c.point - a.center, f);
    if (b) {
      force[c.b] -= f;
      torque[c.b] -= cross(c.point - b->center, f);
    }
    // Rolling resistance for discs.
    if (a.disc && fn > 0.0) {
      const double wrel = a.omega - (b ? b->omega : c.surface_omega);
      const double cap = prm.rolling_resistance * a.radius * fn;
      const double gamma = 0.5 * a.inertia / h;
      const double tr = std::min(cap, gamma * std::abs(wrel));
      torque[c.a] -= std::copysign(tr, wrel);
    }

    if (c.side == Side::Pusher) {
      auto& s = pusher_side[c.a];
      s.force += c.normal * fn;
      s.weighted_point += c.point * fn;
      s.weight += fn;
      pusher_mag[c.a] += fn;
      pusher_reaction -= f;
    } else if (c.side == Side::Spoon) {
      auto& s = spoon_side[c.a];
      s.force += c.normal * fn;
      s.weighted_point += c.point * fn;
      s.weight += fn;
      scooper_mag[c.a] += fn;
    }

    if (keep_contacts) {
      Contact out;
      out.item_id = w.items[a.index].id;
      out.surface = c.surface;
      out.other_id = b ? w.items[b->index].id : -1;
      out.point = c.point;
      out.normal = c.normal;
      out.penetration = c.spring_override >= 0.0 ? 0.0 : c.depth;
      out.normal_force = fn;
      out.tangent_force = ft_mag;
      w.contacts.push_back(out);
    }
  }

  // Integrate (semi-implicit Euler).
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    Body& b = bodies[i];
    FoodItem& it = w.items[b.index];
    it.velocity += (force[i] / b.mass + Vec2{0.0, -prm.gravity}) * h;
    it.omega += torque[i] / b.inertia * h;
    it.pose.position += it.velocity * h;
    it.pose.angle += it.omega * h;
    if (keep_contacts) {
      it.compression = compression[i];
      const auto& p = pusher_side[i];
      const auto& s = spoon_side[i];
      it.squeeze = 0.0;
      if (p.weight > 0.0 && s.weight > 0.0) {
        const Vec2 pp = p.weighted_point / p.weight;
        const Vec2 sp = s.weighted_point / s.weight;
        Vec2 axis = normalized(sp - pp);
        if (norm(axis) == 0.0) axis = {1.0, 0.0};
        const double from_pusher = std::max(0.0, dot(p.force, axis));
        const double from_spoon = std::max(0.0, -dot(s.force, axis));
        it.squeeze = std::min(from_pusher, from_spoon);
        it.squeeze_point = pp;
      }
      it.pusher_contact_force = pusher_mag[i];
      it.scooper_contact_force = scooper_mag[i];
    }
  }
  if (keep_contacts) w.pusher_force = pusher_reaction;

  // Kinematic tools.
  w.tools.pusher.position += w.tools.pusher_velocity.linear * h;
  w.tools.pusher.angle += w.tools.pusher_velocity.angular * h;
  w.tools.scooper.position += w.tools.scooper_velocity.linear * h;
  w.tools.scooper.angle += w.tools.scooper_velocity.angular * h;
  double worst = 0.0;
  for (double r : rate) worst = std::max(worst, r);
  return worst;
}

}  // namespace

WorldState step(WorldState world, double dt, const PhysicsParams& params) {
  if (!(dt > 0.0)) return world;
  const std::vector<ShapeCache> shapes = shape_caches(world);
  // Contacts that appear mid-step can stiffen the system beyond the estimate
  // from the previous step; the remainder is then split more finely.
  int pieces = substep_count(world, shapes, params, dt);
  double remaining = dt;
  const ToolState tools0 = world.tools;
  const ToolFrame frame0 = build_tools(tools0);
  for (bool first = true; pieces > 0; first = false) {
    const double h = remaining / pieces;
    const ToolFrame tf = first ? frame0 : repose_tools(frame0, tools0, world.tools);
    const double omega_sq = substep(world, h, params, pieces == 1, shapes, tf);
    remaining -= h;
    --pieces;
    if (pieces > 0) {
      const double need = std::ceil(remaining * std::sqrt(omega_sq) / params.max_stiffness_phase);
      if (std::isfinite(need)) pieces = std::max(pieces, static_cast<int>(std::min(need, 1e5)));
    }
  }
  world.time += dt;
  for (const auto& it : world.items) {
    if (it.inert()) continue;
    const double r = item_radius(world, it);
    if (!std::isfinite(it.velocity.x) || !std::isfinite(it.velocity.z) ||
        norm(it.velocity) > params.blowup_speed ||
        std::abs(it.omega) * r > params.blowup_speed) {
      throw ScoopError(ErrorKind::NumericalBlowup,
                       "item " + std::to_string(it.id) + " exceeded speed bound at t=" +
                           std::to_string(world.time));
    }
  }
  return world;
}

WorldState simulate_step(WorldState world, const PhysicsParams& params) {
  return apply_breakage_and_residue(step(std::move(world), params.dt, params), params);
}

const std::vector<Contact>& contact_set(const WorldState& world) { return world.contacts; }

double squeeze_force(const WorldState& world, int item_id) {
  const FoodItem* it = world.find_item(item_id);
  if (!it) throw ScoopError(ErrorKind::UnknownItem, std::to_string(item_id));
  return it->squeeze;
}

namespace {

void update_episode(ToolEpisode& ep, double force, double& residue, FoodItem& item,
                    double stickiness, const PhysicsParams& prm) {
  if (force > 0.0) {
    ep.active = true;
    ep.peak_force = std::max(ep.peak_force, force);
    ep.quiet_steps = 0;
    return;
  }
  if (!ep.active) return;
  if (++ep.quiet_steps < prm.separation_steps) return;
  if (ep.peak_force > prm.residue_force_threshold && stickiness > 0.0) {
    const double shed = stickiness * item.current_mass;
    item.current_mass -= shed;
    residue += shed;
  }
  ep = ToolEpisode{};
}

}  // namespace

WorldState apply_breakage_and_residue(WorldState world, const PhysicsParams& params) {
  std::vector<FoodItem> fragments;
  for (auto& it : world.items) {
    if (it.inert()) continue;
    const auto& spec = world.spec_of(it);
    if (!it.broken && it.squeeze > it.break_force) {
      it.broken = true;
      const double piece = params.fragment_fraction * it.current_mass;
      it.current_mass -= piece;
      FoodItem frag;
      frag.id = world.next_item_id++;
      frag.class_ref = it.class_ref;
      frag.fragment_of = it.id;
      frag.current_mass = piece;
      frag.size_scale = it.size_scale * std::sqrt(params.fragment_fraction);
      frag.broken = true;
      frag.break_force = it.break_force;
      frag.pose.position = {it.squeeze_point.x, 0.0};
      fragments.push_back(frag);
    }
    update_episode(it.pusher_episode, it.pusher_contact_force, world.residue_mass, it,
                   spec.stickiness, params);
    update_episode(it.scooper_episode, it.scooper_contact_force, world.residue_mass, it,
                   spec.stickiness, params);
  }
  for (auto& f : fragments) world.items.push_back(std::move(f));
  return world;
}

bool in_spoon(const WorldState& world, const FoodItem& item) {
  if (item.inert()) return false;
  return point_in_polygon(world.tools.bowl_region(), item.pose.position);
}

MassAccount mass_accounting(const WorldState& world) {
  MassAccount acc;
  acc.residue = world.residue_mass;
  const auto bowl = world.tools.bowl_region();
  for (const auto& it : world.items) {
    if (it.inert()) {
      acc.on_plate += it.current_mass;
    } else if (point_in_polygon(bowl, it.pose.position)) {
      acc.in_spoon += it.current_mass;
    } else if (item_bottom(world, it) <= 0.003) {
      acc.on_plate += it.current_mass;
    } else {
      acc.airborne += it.current_mass;
    }
  }
  return acc;
}

void write_trace_header(std::ostream& os) {
  os << "time,item_id,x,z,orientation,squeeze_n,broken\n";
}

void write_trace_rows(std::ostream& os, const WorldState& world) {
  const auto flags = os.flags();
  os << std::setprecision(9);
  for (const auto& it : world.items) {
    os << world.time << ',' << it.id << ',' << it.pose.position.x << ',' << it.pose.position.z
       << ',' << it.pose.angle << ',' << it.squeeze << ',' << (it.broken ? 1 : 0) << '\n';
  }
  os.flags(flags);
}

}  // namespace scoopsim
