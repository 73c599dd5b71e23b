#pragma once

// Persistent trajectory store.
//
// Single-file container, little-endian throughout:
//
//   magic "SPDS" | version u32 | manifest_len u64 | manifest (UTF-8 JSON) |
//   per trajectory: observations then actions as raw f32 | checksum u64
//
// The manifest records environment parameters, tensor dims, and one entry per
// trajectory (length, reached_goal, layout_seed, source_tag); array sizes are
// derived from it. The trailer is the 64-bit FNV-1a hash of every preceding
// byte. Readers check magic and version first, then the checksum over the
// whole file, then parse — a corrupted byte surfaces as a checksum error, not
// as garbage data.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sprl/common/errors.h"
#include "sprl/envs/env.h"
#include "sprl/envs/trajectory.h"

namespace sprl::dataset {

struct DatasetMeta {
  int obs_dim = 0;
  int action_dim = 0;
  int maze_width = 0;
  int maze_height = 0;
  double door_density = 0.0;
  envs::EnvConfig env{};
};

struct Dataset {
  DatasetMeta meta;
  std::vector<envs::Trajectory> trajectories;
};

namespace detail {

constexpr char kMagic[4] = {'S', 'P', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

inline std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= std::uint64_t(static_cast<unsigned char>(data[i]));
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename T>
void append_raw(std::string& out, const T& value) {
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

inline void append_floats(std::string& out, const std::vector<float>& v) {
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
}

}  // namespace detail

inline void write_dataset(const Dataset& ds, const std::string& path) {
  for (const envs::Trajectory& t : ds.trajectories) {
    envs::validate_trajectory(t);
    if (t.obs_dim != ds.meta.obs_dim || t.action_dim != ds.meta.action_dim)
      throw UsageError("write_dataset: trajectory dims disagree with the dataset meta");
  }

  nlohmann::json manifest;
  manifest["obs_dim"] = ds.meta.obs_dim;
  manifest["action_dim"] = ds.meta.action_dim;
  manifest["maze_width"] = ds.meta.maze_width;
  manifest["maze_height"] = ds.meta.maze_height;
  manifest["door_density"] = ds.meta.door_density;
  manifest["env"] = {{"a_max", ds.meta.env.a_max},
                     {"v_max", ds.meta.env.v_max},
                     {"reward_radius", ds.meta.env.reward_radius},
                     {"t_max", ds.meta.env.t_max},
                     {"patch_k", ds.meta.env.patch_k}};
  manifest["trajectory_count"] = ds.trajectories.size();
  nlohmann::json entries = nlohmann::json::array();
  for (const envs::Trajectory& t : ds.trajectories)
    entries.push_back({{"length", t.length()},
                       {"reached_goal", t.reached_goal},
                       {"layout_seed", t.layout_seed},
                       {"source_tag", t.source_tag}});
  manifest["trajectories"] = std::move(entries);
  const std::string manifest_text = manifest.dump();

  std::string out;
  out.append(detail::kMagic, 4);
  detail::append_raw(out, detail::kVersion);
  detail::append_raw(out, std::uint64_t(manifest_text.size()));
  out.append(manifest_text);
  for (const envs::Trajectory& t : ds.trajectories) {
    detail::append_floats(out, t.observations);
    detail::append_floats(out, t.actions);
  }
  detail::append_raw(out, detail::fnv1a(out.data(), out.size()));

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("write_dataset: cannot open '" + tmp + "'");
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw IoError("write_dataset: short write to '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("write_dataset: cannot rename '" + tmp + "' to '" + path + "'");
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_dataset: cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > buf.size()) throw IoError("read_dataset: truncated file '" + path + "'");
  };
  auto read_u32 = [&]() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  };
  auto read_u64 = [&]() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, buf.data() + pos, 8);
    pos += 8;
    return v;
  };

  need(4);
  if (std::memcmp(buf.data(), detail::kMagic, 4) != 0)
    throw IoError("read_dataset: bad magic in '" + path + "'");
  pos += 4;
  const std::uint32_t version = read_u32();
  if (version != detail::kVersion)
    throw IoError("read_dataset: version mismatch (file " + std::to_string(version) +
                  ", supported " + std::to_string(detail::kVersion) + ")");

  if (buf.size() < 8) throw IoError("read_dataset: truncated file '" + path + "'");
  std::uint64_t stored_sum;
  std::memcpy(&stored_sum, buf.data() + buf.size() - 8, 8);
  if (detail::fnv1a(buf.data(), buf.size() - 8) != stored_sum)
    throw IoError("read_dataset: checksum failure in '" + path + "'");

  const std::uint64_t manifest_len = read_u64();
  need(std::size_t(manifest_len));
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(buf.substr(pos, std::size_t(manifest_len)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("read_dataset: manifest parse failure: ") + e.what());
  }
  pos += std::size_t(manifest_len);

  Dataset ds;
  try {
    ds.meta.obs_dim = manifest.at("obs_dim").get<int>();
    ds.meta.action_dim = manifest.at("action_dim").get<int>();
    ds.meta.maze_width = manifest.at("maze_width").get<int>();
    ds.meta.maze_height = manifest.at("maze_height").get<int>();
    ds.meta.door_density = manifest.at("door_density").get<double>();
    const nlohmann::json& env = manifest.at("env");
    ds.meta.env.a_max = env.at("a_max").get<double>();
    ds.meta.env.v_max = env.at("v_max").get<double>();
    ds.meta.env.reward_radius = env.at("reward_radius").get<double>();
    ds.meta.env.t_max = env.at("t_max").get<int>();
    ds.meta.env.patch_k = env.at("patch_k").get<int>();

    const std::size_t count = manifest.at("trajectory_count").get<std::size_t>();
    const nlohmann::json& entries = manifest.at("trajectories");
    if (entries.size() != count)
      throw IoError("read_dataset: manifest trajectory count disagrees with entry list");
    ds.trajectories.reserve(count);
    for (const nlohmann::json& e : entries) {
      envs::Trajectory t;
      t.obs_dim = ds.meta.obs_dim;
      t.action_dim = ds.meta.action_dim;
      const int length = e.at("length").get<int>();
      t.reached_goal = e.at("reached_goal").get<bool>();
      t.layout_seed = e.at("layout_seed").get<std::uint64_t>();
      t.source_tag = e.at("source_tag").get<std::string>();

      const std::size_t n_obs = std::size_t(length + 1) * std::size_t(t.obs_dim);
      const std::size_t n_act = std::size_t(length) * std::size_t(t.action_dim);
      need((n_obs + n_act) * sizeof(float));
      t.observations.resize(n_obs);
      std::memcpy(t.observations.data(), buf.data() + pos, n_obs * sizeof(float));
      pos += n_obs * sizeof(float);
      t.actions.resize(n_act);
      std::memcpy(t.actions.data(), buf.data() + pos, n_act * sizeof(float));
      pos += n_act * sizeof(float);
      ds.trajectories.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("read_dataset: malformed manifest: ") + e.what());
  }

  if (pos + 8 != buf.size())
    throw IoError("read_dataset: trailing bytes after payload in '" + path + "'");
  return ds;
}

}  // namespace sprl::dataset
