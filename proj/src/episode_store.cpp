#include "e2r/episode_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace e2r::store {

namespace {

using scenario::EpisodeRecord;
using scenario::Outcome;

template <typename U>
void put_le(std::ostream& out, U v) {
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, sizeof(U));
}

template <typename U>
U get_le(std::istream& in) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) throw StoreError("truncated episode file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

void put_f32(std::ostream& out, float f) { put_le(out, std::bit_cast<std::uint32_t>(f)); }
void put_f64(std::ostream& out, double d) { put_le(out, std::bit_cast<std::uint64_t>(d)); }
float get_f32(std::istream& in) { return std::bit_cast<float>(get_le<std::uint32_t>(in)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }

constexpr char kMagic[4] = {'E', '2', 'R', 'E'};

}  // namespace

void write_episode(std::ostream& out, const EpisodeRecord& rec) {
  const std::size_t beams = rec.frames.empty() ? 0 : rec.frames.front().scan.size();
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kEpisodeVersion);
  put_le<std::uint64_t>(out, rec.scenario_id);
  put_le<std::uint64_t>(out, rec.seed);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rec.outcome));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rec.frames.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(beams));
  put_f64(out, rec.duration_actual);
  put_f64(out, rec.ego_progress);
  put_f64(out, rec.leader_progress);
  for (const auto& f : rec.frames) {
    if (f.scan.size() != beams) throw StoreError("frames disagree on beam count");
    for (float r : f.scan) put_f32(out, r);
    put_f32(out, f.ego_v);
    put_f32(out, f.v_cmd);
    put_f32(out, f.delta_cmd);
  }
  if (!out) throw StoreError("failed writing episode");
}

EpisodeRecord read_episode(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw StoreError("not an episode file");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kEpisodeVersion) throw StoreError("unsupported episode version " + std::to_string(version));
  EpisodeRecord rec;
  rec.scenario_id = get_le<std::uint64_t>(in);
  rec.seed = get_le<std::uint64_t>(in);
  const auto outcome = get_le<std::uint32_t>(in);
  if (outcome > 2) throw StoreError("bad outcome code " + std::to_string(outcome));
  rec.outcome = static_cast<Outcome>(outcome);
  const auto n_frames = get_le<std::uint32_t>(in);
  const auto beams = get_le<std::uint32_t>(in);
  rec.duration_actual = get_f64(in);
  rec.ego_progress = get_f64(in);
  rec.leader_progress = get_f64(in);
  rec.frames.resize(n_frames);
  for (auto& f : rec.frames) {
    f.scan.resize(beams);
    for (auto& r : f.scan) r = get_f32(in);
    f.ego_v = get_f32(in);
    f.v_cmd = get_f32(in);
    f.delta_cmd = get_f32(in);
  }
  return rec;
}

void save_episode(const std::filesystem::path& path, const EpisodeRecord& rec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StoreError("cannot open " + path.string());
  write_episode(out, rec);
}

EpisodeRecord load_episode(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("cannot open " + path.string());
  return read_episode(in);
}

std::string episode_file_name(std::uint64_t scenario_id) {
  std::ostringstream os;
  os << "episode_" << std::setw(5) << std::setfill('0') << scenario_id << ".bin";
  return os.str();
}

std::filesystem::path write_dataset(const std::filesystem::path& dir, const std::vector<EpisodeRecord>& episodes) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json included = nlohmann::ordered_json::array();
  nlohmann::ordered_json excluded = nlohmann::ordered_json::array();
  scenario::OutcomeCounts counts;
  std::size_t total = 0;
  for (const auto& e : episodes) {
    const std::string name = episode_file_name(e.scenario_id);
    save_episode(dir / name, e);
    counts.add(e.outcome);
    nlohmann::ordered_json entry = {{"file", name},
                                    {"scenario_id", e.scenario_id},
                                    {"outcome", scenario::outcome_name(e.outcome)},
                                    {"frames", e.frames.size()}};
    if (e.outcome == Outcome::Collision) {
      excluded.push_back(entry);
    } else {
      total += e.frames.size();
      included.push_back(entry);
    }
  }
  nlohmann::ordered_json m;
  m["format"] = "e2r-episodes";
  m["version"] = kEpisodeVersion;
  m["counts"] = {{"car_following", counts.car_following},
                 {"overtaking", counts.overtaking},
                 {"collision", counts.collision}};
  m["summary"] = counts.summary();
  m["total_samples"] = total;
  m["episodes"] = included;
  m["excluded"] = excluded;
  const auto path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw StoreError("cannot write " + path.string());
  out << m.dump(2) << '\n';
  return path;
}

scenario::Dataset load_dataset(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw StoreError("cannot open dataset manifest " + manifest.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw StoreError("malformed manifest: " + std::string(e.what()));
  }
  scenario::Dataset ds;
  try {
    ds.pool.car_following = m.at("counts").at("car_following").get<std::size_t>();
    ds.pool.overtaking = m.at("counts").at("overtaking").get<std::size_t>();
    ds.pool.collision = m.at("counts").at("collision").get<std::size_t>();
    const auto dir = manifest.parent_path();
    for (const auto& e : m.at("episodes")) {
      auto rec = load_episode(dir / e.at("file").get<std::string>());
      if (rec.outcome == Outcome::Collision) throw StoreError("manifest lists a collision episode for training");
      ds.total_samples += rec.frames.size();
      ds.episodes.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw StoreError("malformed manifest: " + std::string(e.what()));
  }
  if (ds.episodes.empty())
    throw scenario::ScenarioError(scenario::ScenarioError::Kind::EmptyDataset, "manifest lists no episodes");
  return ds;
}

}  // namespace e2r::store
