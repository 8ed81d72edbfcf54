#include "e2r/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace e2r {

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

namespace {

int orientation(Vec2 a, Vec2 b, Vec2 c) {
  const double v = cross(b - a, c - a);
  if (v > 0.0) return 1;
  if (v < 0.0) return -1;
  return 0;
}

bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

// Projection interval of a point set onto an axis.
template <std::size_t N>
std::pair<double, double> project(const std::array<Vec2, N>& pts, Vec2 axis) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : pts) {
    const double v = dot(p, axis);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

template <std::size_t N, std::size_t M>
bool separated_on(const std::array<Vec2, N>& a, const std::array<Vec2, M>& b, Vec2 axis) {
  const auto [alo, ahi] = project(a, axis);
  const auto [blo, bhi] = project(b, axis);
  return ahi < blo || bhi < alo;
}

}  // namespace

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const int o1 = orientation(a, b, c);
  const int o2 = orientation(a, b, d);
  const int o3 = orientation(c, d, a);
  const int o4 = orientation(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + ab * t);
}

std::optional<double> ray_segment_distance(Vec2 origin, Vec2 dir, Vec2 a, Vec2 b) {
  const Vec2 e = b - a;
  const double denom = cross(dir, e);
  const Vec2 w = a - origin;
  if (denom == 0.0) {
    // Parallel. Collinear case returns the nearest endpoint ahead of the origin.
    if (cross(w, dir) != 0.0) return std::nullopt;
    const double ta = dot(a - origin, dir);
    const double tb = dot(b - origin, dir);
    if (ta < 0.0 && tb < 0.0) return std::nullopt;
    if (ta < 0.0 || tb < 0.0) return 0.0;
    return std::min(ta, tb);
  }
  const double t = cross(w, e) / denom;
  const double u = cross(w, dir) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

std::array<Vec2, 4> OrientedBox::corners() const {
  const Vec2 f = unit_from_angle(heading) * half_length;
  const Vec2 l = left_normal(unit_from_angle(heading)) * half_width;
  return {center + f + l, center - f + l, center - f - l, center + f - l};
}

bool box_intersects_segment(const OrientedBox& box, Vec2 a, Vec2 b) {
  const auto c = box.corners();
  const std::array<Vec2, 2> seg{a, b};
  const Vec2 fwd = unit_from_angle(box.heading);
  const Vec2 axes[3] = {fwd, left_normal(fwd), left_normal(b - a)};
  for (const Vec2& axis : axes) {
    if (axis.x == 0.0 && axis.y == 0.0) continue;
    if (separated_on(c, seg, axis)) return false;
  }
  return true;
}

bool boxes_intersect(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const Vec2 fa = unit_from_angle(a.heading);
  const Vec2 fb = unit_from_angle(b.heading);
  const Vec2 axes[4] = {fa, left_normal(fa), fb, left_normal(fb)};
  for (const Vec2& axis : axes) {
    if (separated_on(ca, cb, axis)) return false;
  }
  return true;
}

double box_distance(const OrientedBox& a, const OrientedBox& b) {
  if (boxes_intersect(a, b)) return 0.0;
  const auto ca = a.corners();
  const auto cb = b.corners();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      best = std::min(best, point_segment_distance(ca[i], cb[j], cb[(j + 1) % 4]));
      best = std::min(best, point_segment_distance(cb[i], ca[j], ca[(j + 1) % 4]));
    }
  }
  return best;
}

std::optional<double> ray_box_distance(Vec2 origin, Vec2 dir, const OrientedBox& box) {
  const auto c = box.corners();
  std::optional<double> best;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto d = ray_segment_distance(origin, dir, c[i], c[(i + 1) % 4]);
    if (d && (!best || *d < *best)) best = d;
  }
  return best;
}

bool closed_polyline_is_simple(std::span<const Vec2> pts) {
  const std::size_t n = pts.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = pts[i];
    const Vec2 b = pts[(i + 1) % n];
    const double ax0 = std::min(a.x, b.x), ax1 = std::max(a.x, b.x);
    const double ay0 = std::min(a.y, b.y), ay1 = std::max(a.y, b.y);
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent through the closing edge
      const Vec2 c = pts[j];
      const Vec2 d = pts[(j + 1) % n];
      if (std::max(c.x, d.x) < ax0 || std::min(c.x, d.x) > ax1 || std::max(c.y, d.y) < ay0 ||
          std::min(c.y, d.y) > ay1)
        continue;
      if (segments_intersect(a, b, c, d)) return false;
    }
  }
  return true;
}

double signed_area(std::span<const Vec2> pts) {
  double s = 0.0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) s += cross(pts[i], pts[(i + 1) % n]);
  return 0.5 * s;
}

}  // namespace e2r
