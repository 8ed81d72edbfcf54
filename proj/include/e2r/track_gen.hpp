#pragma once

#include <string>
#include <vector>

#include "e2r/track.hpp"

namespace e2r::track {

// Synthetic closed circuits, counter-clockwise, with constant width on both
// sides. `width` is the full track width.

std::vector<Waypoint> make_circle(double radius, std::size_t n_points, double width);

/// Two straights joined by semicircles of the given radius. Starts at the
/// beginning of the lower straight heading +x.
std::vector<Waypoint> make_stadium(double length, double width, double radius, double spacing = 0.2);

/// Ellipse with a 2:1 axis ratio scaled to the requested perimeter.
std::vector<Waypoint> make_oval(double length, double width, double spacing = 0.2);

/// Polar curve r = R (1 + a sin(m theta)): alternating left and right bends.
std::vector<Waypoint> make_serpentine(double length, double width, double spacing = 0.2);

/// Dispatch on "circle", "oval", "stadium", "serpentine".
std::vector<Waypoint> make_shape(const std::string& shape, double length, double width, double spacing = 0.2);

}  // namespace e2r::track
