#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "e2r/geometry.hpp"

namespace e2r::track {

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double w_right = 0.0;  // free space to the right boundary
  double w_left = 0.0;
};

class TrackError : public std::runtime_error {
 public:
  enum class Kind {
    MalformedRow,
    MissingColumn,
    TooFewPoints,
    InvalidWidth,
    DuplicatePoint,
    OpenLoop,
    SelfIntersectingBoundary,
    OffsetOutOfRange,
    DegenerateGeometry,
    FarFromRaceline,
  };

  TrackError(Kind kind, const std::string& what, int line = 0)
      : std::runtime_error(what), kind_(kind), line_(line) {}

  Kind kind() const { return kind_; }
  /// 1-based source line for parse errors, 0 otherwise.
  int line() const { return line_; }

 private:
  Kind kind_;
  int line_;
};

struct PathProjection {
  double s = 0.0;
  double lateral = 0.0;  // positive to the left of travel
  double distance = 0.0;
  std::size_t segment = 0;
};

/// Closed polyline with a cumulative arc-length table. Segment i joins
/// point i to point (i + 1) mod n.
class ClosedPath {
 public:
  ClosedPath() = default;
  explicit ClosedPath(std::vector<Vec2> points);

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec2>& points() const { return points_; }
  /// n + 1 entries; arc()[n] == length().
  const std::vector<double>& arc() const { return arc_; }
  double length() const { return arc_.back(); }

  double wrap(double s) const;
  std::size_t segment_at(double s) const;
  Vec2 position(double s) const;
  Vec2 tangent(std::size_t segment) const;

  /// Nearest point over all segments. Exact ties resolve to the smaller s.
  PathProjection project(Vec2 p) const;
  /// Nearest point over segments hint - window .. hint + window (wrapping).
  PathProjection project_near(Vec2 p, std::size_t hint, std::size_t window) const;

 private:
  PathProjection project_segment(Vec2 p, std::size_t i) const;

  std::vector<Vec2> points_;
  std::vector<double> arc_;
};

class TrackModel {
 public:
  /// Validates and builds boundaries. Throws TrackError.
  static TrackModel from_waypoints(std::vector<Waypoint> waypoints);

  const std::vector<Waypoint>& waypoints() const { return waypoints_; }
  const ClosedPath& centerline() const { return centerline_; }
  const std::vector<double>& arc_table() const { return centerline_.arc(); }
  double total_length() const { return centerline_.length(); }

  const std::vector<Vec2>& left_boundary() const { return left_; }
  const std::vector<Vec2>& right_boundary() const { return right_; }
  /// Inner/outer relative to the loop orientation.
  const std::vector<Vec2>& inner_boundary() const { return counter_clockwise_ ? left_ : right_; }
  const std::vector<Vec2>& outer_boundary() const { return counter_clockwise_ ? right_ : left_; }
  bool counter_clockwise() const { return counter_clockwise_; }

  /// Unit left normal at waypoint i (from the central-difference tangent).
  Vec2 normal(std::size_t i) const { return normals_[i]; }

  struct Widths {
    double right;
    double left;
  };
  /// Linearly interpolated free space at centerline arc position s.
  Widths widths_at(double s) const;

  /// Distance from p to the nearer lateral limit, negative when outside.
  double lateral_clearance(Vec2 p) const;
  double lateral_clearance(Vec2 p, std::size_t hint, std::size_t window) const;
  /// Same, from an existing centerline projection.
  double clearance_of(const PathProjection& pr) const;

 private:
  std::vector<Waypoint> waypoints_;
  std::vector<Vec2> normals_;
  std::vector<Vec2> left_;
  std::vector<Vec2> right_;
  ClosedPath centerline_;
  bool counter_clockwise_ = true;
};

struct LoadOptions {
  char delimiter = ',';
};

/// Parses a TUM-style track CSV (x_m, y_m, w_tr_right_m, w_tr_left_m). Lines
/// starting with '#' are comments, except that a commented first line naming
/// the columns is accepted as the header.
TrackModel load_track(std::istream& in, const LoadOptions& options = {});
TrackModel load_track_file(const std::string& path, const LoadOptions& options = {});
void write_track_csv(std::ostream& out, const TrackModel& track);
void write_boundaries_csv(std::ostream& out, const TrackModel& track);

// Named lateral offsets, as a fraction of the available half-width.
// Positive moves toward the right boundary.
inline constexpr double kLeftOffset = -0.5;
inline constexpr double kCenterOffset = 0.0;
inline constexpr double kRightOffset = 0.5;

struct RacelinePoint {
  double s = 0.0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double kappa = 0.0;
  double v_ref = 0.0;
};

struct RacelineConfig {
  double v_max = 8.0;
  double a_lat_max = 6.0;
  double max_offset_fraction = 0.7;
  /// Required distance from the line to either boundary.
  double min_margin = 0.155;
};

class Raceline {
 public:
  Raceline() = default;
  Raceline(std::vector<RacelinePoint> points, double offset);

  const std::vector<RacelinePoint>& points() const { return points_; }
  const ClosedPath& path() const { return path_; }
  double length() const { return path_.length(); }
  double offset() const { return offset_; }

  Vec2 position(double s) const { return path_.position(s); }
  double heading_at(double s) const;
  double speed_at(double s) const;

 private:
  friend double curvature_at(const Raceline&, double);
  double interpolate(double s, double RacelinePoint::*field) const;

  std::vector<RacelinePoint> points_;
  ClosedPath path_;
  double offset_ = 0.0;
};

/// Constant lateral-offset line with three-point curvature and the
/// lateral-acceleration speed cap v = min(v_max, sqrt(a_lat_max / |kappa|)).
Raceline generate_raceline(const TrackModel& track, double offset, const RacelineConfig& cfg = {});

/// Curvature of the circle through three points, positive for left turns.
double three_point_curvature(Vec2 a, Vec2 b, Vec2 c);

double reference_speed(double kappa, double v_max, double a_lat_max);

struct RacelineProjection {
  double s = 0.0;
  double d_r = 0.0;  // signed lateral deviation, positive left
};

inline constexpr double kMaxProjectionDistance = 10.0;

RacelineProjection project(Vec2 p, const Raceline& raceline);
double curvature_at(const Raceline& raceline, double s);

/// Columns s_m, x_m, y_m, psi_rad, kappa_radpm, vx_mps.
void write_raceline_csv(std::ostream& out, const Raceline& raceline);

}  // namespace e2r::track
