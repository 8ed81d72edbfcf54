#include "e2r/track.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace e2r::track {

namespace {

constexpr double kMinSpacing = 1e-6;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, delim)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

// ---------------------------------------------------------------------------
// ClosedPath

ClosedPath::ClosedPath(std::vector<Vec2> points) : points_(std::move(points)) {
  const std::size_t n = points_.size();
  arc_.resize(n + 1);
  arc_[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) arc_[i + 1] = arc_[i] + distance(points_[i], points_[(i + 1) % n]);
}

double ClosedPath::wrap(double s) const {
  const double len = length();
  s = std::fmod(s, len);
  if (s < 0.0) s += len;
  if (s >= len) s = 0.0;
  return s;
}

std::size_t ClosedPath::segment_at(double s) const {
  s = wrap(s);
  auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
  std::size_t i = static_cast<std::size_t>(std::distance(arc_.begin(), it)) - 1;
  return std::min(i, points_.size() - 1);
}

Vec2 ClosedPath::position(double s) const {
  s = wrap(s);
  const std::size_t i = segment_at(s);
  const double seg = arc_[i + 1] - arc_[i];
  const double f = seg > 0.0 ? (s - arc_[i]) / seg : 0.0;
  const Vec2 a = points_[i];
  const Vec2 b = points_[(i + 1) % points_.size()];
  return a + (b - a) * f;
}

Vec2 ClosedPath::tangent(std::size_t i) const {
  const Vec2 d = points_[(i + 1) % points_.size()] - points_[i];
  return d * (1.0 / norm(d));
}

PathProjection ClosedPath::project_segment(Vec2 p, std::size_t i) const {
  const Vec2 a = points_[i];
  const Vec2 b = points_[(i + 1) % points_.size()];
  const Vec2 ab = b - a;
  const double len = arc_[i + 1] - arc_[i];
  const double t = std::clamp(dot(p - a, ab) / (len * len), 0.0, 1.0);
  const Vec2 foot = a + ab * t;
  PathProjection pr;
  pr.segment = i;
  pr.distance = distance(p, foot);
  pr.s = arc_[i] + t * len;
  const double side = cross(ab, p - a);
  pr.lateral = side >= 0.0 ? pr.distance : -pr.distance;
  return pr;
}

PathProjection ClosedPath::project(Vec2 p) const {
  PathProjection best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const PathProjection pr = project_segment(p, i);
    if (pr.distance < best.distance) best = pr;
  }
  best.s = wrap(best.s);
  return best;
}

PathProjection ClosedPath::project_near(Vec2 p, std::size_t hint, std::size_t window) const {
  const std::size_t n = points_.size();
  if (2 * window + 1 >= n) return project(p);
  PathProjection best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k <= 2 * window; ++k) {
    const std::size_t i = (hint + n - window + k) % n;
    const PathProjection pr = project_segment(p, i);
    if (pr.distance < best.distance) best = pr;
  }
  best.s = wrap(best.s);
  return best;
}

// ---------------------------------------------------------------------------
// TrackModel

TrackModel TrackModel::from_waypoints(std::vector<Waypoint> wps) {
  using K = TrackError::Kind;
  // A repeated start point closes the loop explicitly; drop it.
  if (wps.size() > 1 && std::hypot(wps.back().x - wps.front().x, wps.back().y - wps.front().y) <= kMinSpacing)
    wps.pop_back();
  if (wps.size() < 3) throw TrackError(K::TooFewPoints, "track needs at least 3 distinct waypoints");

  const std::size_t n = wps.size();
  std::vector<Vec2> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(wps[i].w_right > 0.0) || !(wps[i].w_left > 0.0))
      throw TrackError(K::InvalidWidth, "waypoint " + std::to_string(i) + " has non-positive width");
    pts[i] = {wps[i].x, wps[i].y};
  }
  double interior = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = distance(pts[i], pts[i + 1]);
    if (d <= kMinSpacing)
      throw TrackError(K::DuplicatePoint, "waypoints " + std::to_string(i) + " and " + std::to_string(i + 1) +
                                              " coincide");
    interior += d;
  }
  const double mean_spacing = interior / static_cast<double>(n - 1);
  const double closing = distance(pts[n - 1], pts[0]);
  if (closing > 2.0 * mean_spacing)
    throw TrackError(K::OpenLoop, "track endpoints are " + std::to_string(closing) +
                                      " m apart (mean spacing " + std::to_string(mean_spacing) + " m)");

  TrackModel t;
  t.waypoints_ = std::move(wps);
  t.normals_.resize(n);
  t.left_.resize(n);
  t.right_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 d = pts[(i + 1) % n] - pts[(i + n - 1) % n];
    const Vec2 nl = left_normal(d * (1.0 / norm(d)));
    t.normals_[i] = nl;
    t.left_[i] = pts[i] + nl * t.waypoints_[i].w_left;
    t.right_[i] = pts[i] - nl * t.waypoints_[i].w_right;
  }
  if (!closed_polyline_is_simple(t.left_))
    throw TrackError(K::SelfIntersectingBoundary, "left boundary self-intersects");
  if (!closed_polyline_is_simple(t.right_))
    throw TrackError(K::SelfIntersectingBoundary, "right boundary self-intersects");
  t.counter_clockwise_ = signed_area(pts) > 0.0;
  t.centerline_ = ClosedPath(std::move(pts));
  return t;
}

TrackModel::Widths TrackModel::widths_at(double s) const {
  const std::size_t i = centerline_.segment_at(s);
  const auto& arc = centerline_.arc();
  const double f = (centerline_.wrap(s) - arc[i]) / (arc[i + 1] - arc[i]);
  const Waypoint& a = waypoints_[i];
  const Waypoint& b = waypoints_[(i + 1) % waypoints_.size()];
  return {a.w_right + f * (b.w_right - a.w_right), a.w_left + f * (b.w_left - a.w_left)};
}

double TrackModel::clearance_of(const PathProjection& pr) const {
  const Widths w = widths_at(pr.s);
  return std::min(w.left - pr.lateral, pr.lateral + w.right);
}

double TrackModel::lateral_clearance(Vec2 p) const { return clearance_of(centerline_.project(p)); }

double TrackModel::lateral_clearance(Vec2 p, std::size_t hint, std::size_t window) const {
  return clearance_of(centerline_.project_near(p, hint, window));
}

// ---------------------------------------------------------------------------
// CSV

TrackModel load_track(std::istream& in, const LoadOptions& options) {
  using K = TrackError::Kind;
  std::string line;
  int lineno = 0;
  int col_x = -1, col_y = -1, col_wr = -1, col_wl = -1;
  bool have_header = false;
  std::vector<Waypoint> wps;

  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (!have_header) {
      if (t.front() == '#') {
        if (t.find("x_m") == std::string::npos) continue;
        t = trim(std::string_view(t).substr(1));
      }
      const auto cols = split(t, options.delimiter);
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const int ci = static_cast<int>(c);
        if (cols[c] == "x_m") col_x = ci;
        else if (cols[c] == "y_m") col_y = ci;
        else if (cols[c] == "w_tr_right_m") col_wr = ci;
        else if (cols[c] == "w_tr_left_m") col_wl = ci;
      }
      if (col_x < 0 || col_y < 0 || col_wr < 0 || col_wl < 0)
        throw TrackError(K::MissingColumn,
                         "line " + std::to_string(lineno) +
                             ": header must name x_m, y_m, w_tr_right_m, w_tr_left_m",
                         lineno);
      have_header = true;
      continue;
    }
    if (t.front() == '#') continue;
    const auto cells = split(t, options.delimiter);
    const int need = std::max({col_x, col_y, col_wr, col_wl});
    if (static_cast<int>(cells.size()) <= need)
      throw TrackError(K::MalformedRow, "line " + std::to_string(lineno) + ": too few fields", lineno);
    Waypoint w;
    if (!parse_double(cells[col_x], w.x) || !parse_double(cells[col_y], w.y) ||
        !parse_double(cells[col_wr], w.w_right) || !parse_double(cells[col_wl], w.w_left))
      throw TrackError(K::MalformedRow, "line " + std::to_string(lineno) + ": non-numeric field in \"" + t + "\"",
                       lineno);
    wps.push_back(w);
  }
  if (!have_header) throw TrackError(K::MissingColumn, "missing header row", lineno);
  return TrackModel::from_waypoints(std::move(wps));
}

TrackModel load_track_file(const std::string& path, const LoadOptions& options) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open track file " + path);
  return load_track(f, options);
}

void write_track_csv(std::ostream& out, const TrackModel& track) {
  out << "# x_m,y_m,w_tr_right_m,w_tr_left_m\n" << std::setprecision(17);
  for (const auto& w : track.waypoints()) out << w.x << ',' << w.y << ',' << w.w_right << ',' << w.w_left << '\n';
}

void write_boundaries_csv(std::ostream& out, const TrackModel& track) {
  out << "left_x_m,left_y_m,right_x_m,right_y_m\n" << std::setprecision(17);
  for (std::size_t i = 0; i < track.left_boundary().size(); ++i) {
    const Vec2 l = track.left_boundary()[i];
    const Vec2 r = track.right_boundary()[i];
    out << l.x << ',' << l.y << ',' << r.x << ',' << r.y << '\n';
  }
}

// ---------------------------------------------------------------------------
// Raceline

namespace {

std::vector<Vec2> xy_of(const std::vector<RacelinePoint>& pts) {
  std::vector<Vec2> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) out[i] = {pts[i].x, pts[i].y};
  return out;
}

}  // namespace

Raceline::Raceline(std::vector<RacelinePoint> points, double offset)
    : points_(std::move(points)), path_(xy_of(points_)), offset_(offset) {}

double Raceline::interpolate(double s, double RacelinePoint::*field) const {
  const std::size_t i = path_.segment_at(s);
  const auto& arc = path_.arc();
  const double f = (path_.wrap(s) - arc[i]) / (arc[i + 1] - arc[i]);
  const double a = points_[i].*field;
  const double b = points_[(i + 1) % points_.size()].*field;
  return a + f * (b - a);
}

double Raceline::heading_at(double s) const {
  const std::size_t i = path_.segment_at(s);
  const auto& arc = path_.arc();
  const double f = (path_.wrap(s) - arc[i]) / (arc[i + 1] - arc[i]);
  const double a = points_[i].heading;
  const double b = points_[(i + 1) % points_.size()].heading;
  return wrap_angle(a + f * wrap_angle(b - a));
}

double Raceline::speed_at(double s) const { return interpolate(s, &RacelinePoint::v_ref); }

double three_point_curvature(Vec2 a, Vec2 b, Vec2 c) {
  const double ab = distance(a, b);
  const double bc = distance(b, c);
  const double ca = distance(c, a);
  if (ab < 1e-12 || bc < 1e-12 || ca < 1e-12)
    throw TrackError(TrackError::Kind::DegenerateGeometry, "coincident points in curvature estimate");
  return 2.0 * cross(b - a, c - b) / (ab * bc * ca);
}

double reference_speed(double kappa, double v_max, double a_lat_max) {
  constexpr double eps = 1e-9;
  return std::min(v_max, std::sqrt(a_lat_max / std::max(std::abs(kappa), eps)));
}

Raceline generate_raceline(const TrackModel& track, double offset, const RacelineConfig& cfg) {
  using K = TrackError::Kind;
  if (!(std::abs(offset) <= cfg.max_offset_fraction))
    throw TrackError(K::OffsetOutOfRange, "raceline offset " + std::to_string(offset) + " exceeds ±" +
                                              std::to_string(cfg.max_offset_fraction));
  const auto& wps = track.waypoints();
  const std::size_t n = wps.size();
  std::vector<Vec2> xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double side = offset >= 0.0 ? wps[i].w_right : wps[i].w_left;
    const double margin = (1.0 - std::abs(offset)) * side;
    if (margin < cfg.min_margin)
      throw TrackError(K::OffsetOutOfRange, "raceline offset " + std::to_string(offset) + " leaves " +
                                                std::to_string(margin) + " m margin at waypoint " +
                                                std::to_string(i));
    // Positive offset moves right, i.e. against the left normal.
    xy[i] = Vec2{wps[i].x, wps[i].y} - track.normal(i) * (offset * side);
  }

  std::vector<RacelinePoint> pts(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 prev = xy[(i + n - 1) % n];
    const Vec2 next = xy[(i + 1) % n];
    if (i > 0) {
      const double ds = distance(xy[i - 1], xy[i]);
      if (ds <= kMinSpacing) throw TrackError(K::DegenerateGeometry, "raceline points coincide");
      s += ds;
    }
    RacelinePoint& p = pts[i];
    p.s = s;
    p.x = xy[i].x;
    p.y = xy[i].y;
    p.heading = std::atan2(next.y - prev.y, next.x - prev.x);
    p.kappa = three_point_curvature(prev, xy[i], next);
    p.v_ref = reference_speed(p.kappa, cfg.v_max, cfg.a_lat_max);
  }
  return Raceline(std::move(pts), offset);
}

RacelineProjection project(Vec2 p, const Raceline& raceline) {
  const PathProjection pr = raceline.path().project(p);
  if (pr.distance > kMaxProjectionDistance)
    throw TrackError(TrackError::Kind::FarFromRaceline,
                     "point is " + std::to_string(pr.distance) + " m from the raceline");
  return {pr.s, pr.lateral};
}

double curvature_at(const Raceline& raceline, double s) { return raceline.interpolate(s, &RacelinePoint::kappa); }

void write_raceline_csv(std::ostream& out, const Raceline& raceline) {
  out << "s_m,x_m,y_m,psi_rad,kappa_radpm,vx_mps\n" << std::setprecision(17);
  for (const auto& p : raceline.points())
    out << p.s << ',' << p.x << ',' << p.y << ',' << p.heading << ',' << p.kappa << ',' << p.v_ref << '\n';
}

}  // namespace e2r::track
