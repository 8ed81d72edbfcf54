#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "e2r/policy.hpp"

namespace e2r::policy {

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { VersionMismatch, CorruptCheckpoint, Io };
  CheckpointError(Kind k, const std::string& what) : std::runtime_error(what), kind_(k) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  PolicyConfig config;
  PolicyParams<double> params;
};

/// "E2R1" | u32 version | u32 length + JSON policy config | every tensor as
/// little-endian f64 in PolicyParams::visit order (column-major matrices).
void save_checkpoint(std::ostream& out, const PolicyParams<double>& params, const PolicyConfig& cfg);
Checkpoint load_checkpoint(std::istream& in);

void save_checkpoint_file(const std::filesystem::path& path, const PolicyParams<double>& params,
                          const PolicyConfig& cfg);
Checkpoint load_checkpoint_file(const std::filesystem::path& path);

}  // namespace e2r::policy
