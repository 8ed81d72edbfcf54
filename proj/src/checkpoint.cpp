#include "e2r/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

namespace e2r::policy {

namespace {

using K = CheckpointError::Kind;

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

template <typename U>
U get(std::istream& in) {
  unsigned char b[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(U))) throw CheckpointError(K::CorruptCheckpoint, "truncated checkpoint");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

nlohmann::ordered_json config_json(const PolicyConfig& c) {
  return {{"n_beams", c.n_beams},
          {"embed_dim", c.embed_dim},
          {"hidden_multiplier", c.hidden_multiplier},
          {"sigmoid_k", c.sigmoid_k},
          {"use_speed_input", c.use_speed_input}};
}

}  // namespace

void save_checkpoint(std::ostream& out, const PolicyParams<double>& params, const PolicyConfig& cfg) {
  params.check_shapes(cfg);
  const std::string js = config_json(cfg).dump();
  out.write("E2R1", 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(js.size()));
  out.write(js.data(), static_cast<std::streamsize>(js.size()));
  params.visit([&](const char*, const double* d, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) put_u64(out, std::bit_cast<std::uint64_t>(d[i]));
  });
  if (!out) throw CheckpointError(K::Io, "failed writing checkpoint");
}

Checkpoint load_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "E2R1", 4) != 0)
    throw CheckpointError(K::CorruptCheckpoint, "missing checkpoint magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw CheckpointError(K::VersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                                  std::to_string(kCheckpointVersion));
  const auto len = get<std::uint32_t>(in);
  if (len > (1u << 20)) throw CheckpointError(K::CorruptCheckpoint, "implausible config block length");
  std::string js(len, '\0');
  if (!in.read(js.data(), len)) throw CheckpointError(K::CorruptCheckpoint, "truncated config block");

  Checkpoint ck;
  try {
    const auto j = nlohmann::json::parse(js);
    ck.config.n_beams = j.at("n_beams").get<int>();
    ck.config.embed_dim = j.at("embed_dim").get<int>();
    ck.config.hidden_multiplier = j.at("hidden_multiplier").get<int>();
    ck.config.sigmoid_k = j.at("sigmoid_k").get<double>();
    ck.config.use_speed_input = j.at("use_speed_input").get<bool>();
    ck.config.validate();
  } catch (const std::exception& e) {
    throw CheckpointError(K::CorruptCheckpoint, std::string("bad config block: ") + e.what());
  }
  ck.params = PolicyParams<double>::zeros(ck.config);
  ck.params.visit([&](const char*, double* d, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) d[i] = std::bit_cast<double>(get<std::uint64_t>(in));
  });
  if (in.peek() != std::char_traits<char>::eof())
    throw CheckpointError(K::CorruptCheckpoint, "trailing bytes after the last tensor");
  return ck;
}

void save_checkpoint_file(const std::filesystem::path& path, const PolicyParams<double>& params,
                          const PolicyConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(K::Io, "cannot open " + path.string());
  save_checkpoint(out, params, cfg);
}

Checkpoint load_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(K::Io, "cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace e2r::policy
