#pragma once

#include <vector>

#include "e2r/rng.hpp"
#include "e2r/scenario.hpp"
#include "e2r/track.hpp"
#include "e2r/track_gen.hpp"

namespace e2r::testing {

/// The desk-scale stadium: 60 m loop, 3 m wide, 5 m bend radius.
inline track::TrackModel stadium() {
  return track::TrackModel::from_waypoints(track::make_stadium(60.0, 3.0, 5.0));
}

inline track::TrackModel circle(double radius, double width = 2.0) {
  return track::TrackModel::from_waypoints(track::make_circle(radius, 400, width));
}

/// Episode of random frames with `n_beams` ranges in [0, range_max).
inline scenario::EpisodeRecord random_episode(Rng& rng, int frames, int n_beams, double range_max = 6.0) {
  scenario::EpisodeRecord ep;
  for (int t = 0; t < frames; ++t) {
    scenario::Frame f;
    for (int i = 0; i < n_beams; ++i) f.scan.push_back(static_cast<float>(rng.uniform(0.0, range_max)));
    f.ego_v = static_cast<float>(rng.uniform(1.0, 6.0));
    f.v_cmd = static_cast<float>(rng.uniform(1.0, 6.0));
    f.delta_cmd = static_cast<float>(rng.uniform(-0.4, 0.4));
    ep.frames.push_back(std::move(f));
  }
  return ep;
}

}  // namespace e2r::testing
