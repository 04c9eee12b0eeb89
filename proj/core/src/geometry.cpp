#include "scoopsim/geometry.hpp"

#include <algorithm>
#include <limits>

namespace scoopsim {

double signed_area(std::span<const Vec2> poly) {
  double a = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) a += cross(poly[i], poly[(i + 1) % n]);
  return 0.5 * a;
}

Vec2 polygon_centroid(std::span<const Vec2> poly) {
  const std::size_t n = poly.size();
  double a = 0.0;
  Vec2 c;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p = poly[i], q = poly[(i + 1) % n];
    const double w = cross(p, q);
    a += w;
    c += (p + q) * w;
  }
  if (std::abs(a) < 1e-18) return {};
  return c / (3.0 * a);
}

double polygon_area_moment(std::span<const Vec2> poly) {
  const Vec2 c = polygon_centroid(poly);
  const std::size_t n = poly.size();
  double num = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p = poly[i] - c, q = poly[(i + 1) % n] - c;
    const double w = cross(p, q);
    num += w * (dot(p, p) + dot(p, q) + dot(q, q));
  }
  return std::abs(num) / 12.0;
}

bool is_convex_ccw(std::span<const Vec2> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly[i], b = poly[(i + 1) % n], c = poly[(i + 2) % n];
    if (cross(b - a, c - b) <= 0.0) return false;
  }
  return signed_area(poly) > 0.0;
}

void make_ccw(std::vector<Vec2>& poly) {
  if (signed_area(poly) < 0.0) std::reverse(poly.begin(), poly.end());
}

std::optional<EdgeDepth> convex_depth(std::span<const Vec2> poly, Vec2 p, int skip_edge) {
  const std::size_t n = poly.size();
  double best = -std::numeric_limits<double>::infinity();
  Vec2 best_normal;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly[i], b = poly[(i + 1) % n];
    const Vec2 e = b - a;
    const double len = norm(e);
    if (len <= 0.0) continue;
    const Vec2 outward{e.z / len, -e.x / len};
    const double s = dot(outward, p - a);
    if (s >= 0.0) return std::nullopt;
    if (static_cast<int>(i) != skip_edge && s > best) {
      best = s;
      best_normal = outward;
    }
  }
  return EdgeDepth{-best, best_normal};
}

bool point_in_polygon(std::span<const Vec2> poly, Vec2 p) {
  // Crossing-number test, valid for non-convex outlines.
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = poly[i], b = poly[j];
    if ((a.z > p.z) != (b.z > p.z)) {
      const double xi = a.x + (p.z - a.z) * (b.x - a.x) / (b.z - a.z);
      if (p.x < xi) inside = !inside;
    }
  }
  return inside;
}

Vec2 closest_point_on_segment(Vec2 a, Vec2 b, Vec2 p) {
  const Vec2 e = b - a;
  const double l2 = dot(e, e);
  if (l2 <= 0.0) return a;
  const double t = std::clamp(dot(p - a, e) / l2, 0.0, 1.0);
  return a + e * t;
}

Vec2 closest_point_on_boundary(std::span<const Vec2> poly, Vec2 p) {
  const std::size_t n = poly.size();
  Vec2 best = poly[0];
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 q = closest_point_on_segment(poly[i], poly[(i + 1) % n], p);
    const double d2 = dot(q - p, q - p);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = q;
    }
  }
  return best;
}

std::optional<std::pair<double, double>> vertical_span(std::span<const Vec2> poly,
                                                        double x) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly[i], b = poly[(i + 1) % n];
    if ((a.x <= x && x <= b.x) || (b.x <= x && x <= a.x)) {
      double z;
      if (a.x == b.x) {
        lo = std::min({lo, a.z, b.z});
        hi = std::max({hi, a.z, b.z});
        continue;
      }
      z = a.z + (x - a.x) * (b.z - a.z) / (b.x - a.x);
      lo = std::min(lo, z);
      hi = std::max(hi, z);
    }
  }
  if (lo > hi) return std::nullopt;
  return std::make_pair(lo, hi);
}

}  // namespace scoopsim
