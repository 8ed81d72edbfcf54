#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "e2r/scenario.hpp"

namespace e2r::store {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kEpisodeVersion = 1;

/// Binary episode file, all little-endian:
///   "E2RE" | u32 version | u64 scenario id | u64 seed | u32 outcome |
///   u32 frame count | u32 beams per frame | f64 duration | f64 ego progress |
///   f64 leader progress | frames of (beams + 3) f32: ranges, ego_v, v_cmd, delta_cmd
void write_episode(std::ostream& out, const scenario::EpisodeRecord& rec);
scenario::EpisodeRecord read_episode(std::istream& in);

void save_episode(const std::filesystem::path& path, const scenario::EpisodeRecord& rec);
scenario::EpisodeRecord load_episode(const std::filesystem::path& path);

std::string episode_file_name(std::uint64_t scenario_id);

/// Writes every episode (collisions included) plus manifest.json listing the
/// training episodes, the excluded ones, pool counts and total_samples.
/// Returns the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir,
                                    const std::vector<scenario::EpisodeRecord>& episodes);

/// Loads the collision-free episodes named by a manifest.
scenario::Dataset load_dataset(const std::filesystem::path& manifest);

}  // namespace e2r::store
