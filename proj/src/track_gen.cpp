#include "e2r/track_gen.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace e2r::track {

namespace {

using std::numbers::pi;

std::vector<Waypoint> with_width(const std::vector<Vec2>& pts, double width) {
  std::vector<Waypoint> out;
  out.reserve(pts.size());
  for (const Vec2& p : pts) out.push_back({p.x, p.y, 0.5 * width, 0.5 * width});
  return out;
}

// Samples a closed parametric curve u in [0, 1) at near-uniform arc spacing.
std::vector<Vec2> resample_closed(const std::function<Vec2(double)>& curve, double spacing) {
  constexpr std::size_t dense = 20000;
  std::vector<Vec2> d(dense + 1);
  std::vector<double> arc(dense + 1, 0.0);
  for (std::size_t i = 0; i <= dense; ++i) {
    d[i] = curve(static_cast<double>(i) / dense);
    if (i > 0) arc[i] = arc[i - 1] + distance(d[i - 1], d[i]);
  }
  const double total = arc.back();
  const auto n = static_cast<std::size_t>(std::max(8.0, std::round(total / spacing)));
  std::vector<Vec2> out;
  out.reserve(n);
  std::size_t j = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double s = total * static_cast<double>(k) / static_cast<double>(n);
    while (arc[j + 1] < s) ++j;
    const double f = (s - arc[j]) / (arc[j + 1] - arc[j]);
    out.push_back(d[j] + (d[j + 1] - d[j]) * f);
  }
  return out;
}

double curve_length(const std::function<Vec2(double)>& curve) {
  constexpr std::size_t dense = 20000;
  double len = 0.0;
  Vec2 prev = curve(0.0);
  for (std::size_t i = 1; i <= dense; ++i) {
    const Vec2 p = curve(static_cast<double>(i) / dense);
    len += distance(prev, p);
    prev = p;
  }
  return len;
}

}  // namespace

std::vector<Waypoint> make_circle(double radius, std::size_t n_points, double width) {
  std::vector<Vec2> pts(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double a = 2.0 * pi * static_cast<double>(i) / static_cast<double>(n_points);
    pts[i] = {radius * std::cos(a), radius * std::sin(a)};
  }
  return with_width(pts, width);
}

std::vector<Waypoint> make_stadium(double length, double width, double radius, double spacing) {
  const double straight = 0.5 * (length - 2.0 * pi * radius);
  if (!(straight > 0.0)) throw std::invalid_argument("stadium length too short for the turn radius");
  const double total = length;
  const auto n = static_cast<std::size_t>(std::max(8.0, std::round(total / spacing)));
  std::vector<Vec2> pts(n);
  const double arc = pi * radius;
  for (std::size_t k = 0; k < n; ++k) {
    double s = total * static_cast<double>(k) / static_cast<double>(n);
    if (s < straight) {
      pts[k] = {s, -radius};
      continue;
    }
    s -= straight;
    if (s < arc) {
      const double a = -pi / 2.0 + s / radius;
      pts[k] = {straight + radius * std::cos(a), radius * std::sin(a)};
      continue;
    }
    s -= arc;
    if (s < straight) {
      pts[k] = {straight - s, radius};
      continue;
    }
    s -= straight;
    const double a = pi / 2.0 + s / radius;
    pts[k] = {radius * std::cos(a), radius * std::sin(a)};
  }
  return with_width(pts, width);
}

std::vector<Waypoint> make_oval(double length, double width, double spacing) {
  auto unit = [](double u) { return Vec2{2.0 * std::cos(2.0 * pi * u), std::sin(2.0 * pi * u)}; };
  const double scale = length / curve_length(unit);
  auto curve = [&](double u) { return unit(u) * scale; };
  return with_width(resample_closed(curve, spacing), width);
}

std::vector<Waypoint> make_serpentine(double length, double width, double spacing) {
  constexpr double amplitude = 0.12;
  constexpr double lobes = 5.0;
  auto unit = [](double u) {
    const double th = 2.0 * pi * u;
    const double r = 1.0 + amplitude * std::sin(lobes * th);
    return Vec2{r * std::cos(th), r * std::sin(th)};
  };
  const double scale = length / curve_length(unit);
  auto curve = [&](double u) { return unit(u) * scale; };
  return with_width(resample_closed(curve, spacing), width);
}

std::vector<Waypoint> make_shape(const std::string& shape, double length, double width, double spacing) {
  if (shape == "circle") {
    const double r = length / (2.0 * pi);
    const auto n = static_cast<std::size_t>(std::max(8.0, std::round(length / spacing)));
    return make_circle(r, n, width);
  }
  if (shape == "stadium") return make_stadium(length, width, length / 12.0, spacing);
  if (shape == "oval") return make_oval(length, width, spacing);
  if (shape == "serpentine") return make_serpentine(length, width, spacing);
  throw std::invalid_argument("unknown track shape \"" + shape + "\" (circle, oval, stadium, serpentine)");
}

}  // namespace e2r::track
