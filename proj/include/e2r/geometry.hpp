#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>

namespace e2r {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator-() const { return {-x, -y}; }
  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  bool operator==(const Vec2&) const = default;
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(b - a); }
inline Vec2 unit_from_angle(double theta) { return {std::cos(theta), std::sin(theta)}; }
// Counter-clockwise perpendicular.
inline Vec2 left_normal(Vec2 t) { return {-t.y, t.x}; }

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

/// Closed segment intersection test: touching endpoints and collinear overlap count.
bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d);

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);

/// Distance along a unit-direction ray to the closed segment [a, b], if hit.
std::optional<double> ray_segment_distance(Vec2 origin, Vec2 dir, Vec2 a, Vec2 b);

struct OrientedBox {
  Vec2 center;
  double heading = 0.0;
  double half_length = 0.0;
  double half_width = 0.0;

  /// Corners in counter-clockwise order starting front-left.
  std::array<Vec2, 4> corners() const;
  double bounding_radius() const { return std::hypot(half_length, half_width); }
};

/// Separating-axis tests; both are closed (touching counts as intersecting).
bool box_intersects_segment(const OrientedBox& box, Vec2 a, Vec2 b);
bool boxes_intersect(const OrientedBox& a, const OrientedBox& b);

/// Minimum distance between two boxes, zero when they touch or overlap.
double box_distance(const OrientedBox& a, const OrientedBox& b);

std::optional<double> ray_box_distance(Vec2 origin, Vec2 dir, const OrientedBox& box);

/// True when no two non-adjacent edges of the closed polyline intersect.
bool closed_polyline_is_simple(std::span<const Vec2> pts);

/// Shoelace area, positive for counter-clockwise loops.
double signed_area(std::span<const Vec2> pts);

}  // namespace e2r
