#pragma once

#include <optional>
#include <string>
#include <vector>

#include "e2r/simulator.hpp"
#include "e2r/track.hpp"

namespace e2r::render {

struct RenderOptions {
  double pixels_per_meter = 12.0;
  double margin = 2.0;             // meters around the track
  double footprint_period = 0.5;   // seconds between drawn footprints
};

/// Boundaries, centerline and optional racelines.
std::string track_svg(const track::TrackModel& track, const std::vector<track::Raceline>& racelines = {},
                      const RenderOptions& opts = {});

/// Boundaries plus per-agent trajectories (agent 0 blue, agent 1 red),
/// footprints at regular instants, a marker at the final pose of a collided
/// agent, and an optional outcome label.
std::string episode_svg(const track::TrackModel& track, const std::vector<sim::TraceRow>& trace,
                        const sim::SimConfig& sim, const std::optional<std::string>& label = std::nullopt,
                        const RenderOptions& opts = {});

}  // namespace e2r::render
