#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace scoopsim {

// Planar vector in the x-z plane (x along the pushing axis, z up).
struct Vec2 {
  double x = 0.0;
  double z = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, z + o.z}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, z - o.z}; }
  constexpr Vec2 operator-() const { return {-x, -z}; }
  constexpr Vec2 operator*(double s) const { return {x * s, z * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, z / s}; }
  constexpr Vec2& operator+=(Vec2 o) { x += o.x; z += o.z; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x -= o.x; z -= o.z; return *this; }
  constexpr Vec2& operator*=(double s) { x *= s; z *= s; return *this; }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.z * b.z; }
// Scalar 2D cross product a.x*b.z - a.z*b.x (positive when b is CCW of a).
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.z - a.z * b.x; }
// omega x r for a rotation rate about the out-of-plane axis.
constexpr Vec2 cross(double w, Vec2 r) { return {-w * r.z, w * r.x}; }
constexpr Vec2 perp(Vec2 v) { return {-v.z, v.x}; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.z); }
inline Vec2 normalized(Vec2 v) {
  const double n = norm(v);
  return n > 0.0 ? v / n : Vec2{};
}
inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.z, s * v.x + c * v.z};
}
inline Vec2 from_angle(double angle) { return {std::cos(angle), std::sin(angle)}; }

struct Pose {
  Vec2 position;
  double angle = 0.0;

  Vec2 to_world(Vec2 local) const { return position + rotate(local, angle); }
  Vec2 to_local(Vec2 world) const { return rotate(world - position, -angle); }
  bool operator==(const Pose&) const = default;
};

double signed_area(std::span<const Vec2> poly);
Vec2 polygon_centroid(std::span<const Vec2> poly);
// Second moment of area about the centroid (multiply by density for inertia).
double polygon_area_moment(std::span<const Vec2> poly);
bool is_convex_ccw(std::span<const Vec2> poly);
// Reorders vertices counter-clockwise in place.
void make_ccw(std::vector<Vec2>& poly);

// Inside test for a convex CCW polygon. When the point is inside, returns the
// penetration depth (distance to the nearest edge) and that edge's outward
// normal. Edge `skip_edge` (poly[i] -> poly[i+1]) still bounds the polygon
// but is never reported as the nearest edge.
struct EdgeDepth {
  double depth = 0.0;
  Vec2 normal;
};
std::optional<EdgeDepth> convex_depth(std::span<const Vec2> poly, Vec2 p, int skip_edge = -1);
bool point_in_polygon(std::span<const Vec2> poly, Vec2 p);

Vec2 closest_point_on_segment(Vec2 a, Vec2 b, Vec2 p);
Vec2 closest_point_on_boundary(std::span<const Vec2> poly, Vec2 p);

// Vertical extent [lo, hi] of a convex polygon at abscissa x, if it covers x.
std::optional<std::pair<double, double>> vertical_span(std::span<const Vec2> poly,
                                                        double x);

}  // namespace scoopsim
