// Dataset store tests: lossless round-trips, fault-injected corruption, the
// segment-sampling distribution against multinomial bounds, and exact mixing
// counts.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "sprl/common/errors.h"
#include "sprl/common/rng.h"
#include "sprl/dataset/dataset.h"
#include "sprl/dataset/sampling.h"

using namespace sprl;
using namespace sprl::dataset;
using sprl::envs::Trajectory;

namespace {

// A trajectory whose values encode their own coordinates: observation row r
// holds {id*100 + r, -r}, action row t holds {id*1000 + t, t}. Makes sampled
// slices self-identifying.
Trajectory coded_trajectory(int id, int length) {
  Trajectory t;
  t.obs_dim = 2;
  t.action_dim = 2;
  for (int r = 0; r <= length; ++r) {
    t.observations.push_back(float(id * 100 + r));
    t.observations.push_back(float(-r));
  }
  for (int s = 0; s < length; ++s) {
    t.actions.push_back(float(id * 1000 + s));
    t.actions.push_back(float(s));
  }
  t.reached_goal = id % 2 == 0;
  t.layout_seed = std::uint64_t(id) * 7 + 3;
  t.source_tag = id % 3 == 0 ? "random" : "expert";
  return t;
}

Dataset coded_dataset(const std::vector<int>& lengths) {
  Dataset ds;
  ds.meta.obs_dim = 2;
  ds.meta.action_dim = 2;
  ds.meta.maze_width = 8;
  ds.meta.maze_height = 8;
  ds.meta.door_density = 0.6;
  ds.meta.env.t_max = 400;
  for (std::size_t i = 0; i < lengths.size(); ++i)
    ds.trajectories.push_back(coded_trajectory(int(i), lengths[i]));
  return ds;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(bool(f));
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  REQUIRE(bool(f));
  f.write(bytes.data(), std::streamsize(bytes.size()));
}

// Test-side FNV-1a 64, pinning the container's checksum algorithm.
std::uint64_t ref_fnv1a(const std::string& s, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= std::uint64_t(static_cast<unsigned char>(s[i]));
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

TEST_CASE("write/read round-trip is lossless and the manifest counts match") {
  const Dataset ds = coded_dataset({10, 3, 25, 10});
  const std::string path = temp_path("sprl_ds_roundtrip.bin");
  write_dataset(ds, path);
  const Dataset back = read_dataset(path);

  REQUIRE(back.trajectories.size() == ds.trajectories.size());
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    const Trajectory& a = ds.trajectories[i];
    const Trajectory& b = back.trajectories[i];
    CHECK(b.observations == a.observations);  // bitwise
    CHECK(b.actions == a.actions);
    CHECK(b.reached_goal == a.reached_goal);
    CHECK(b.layout_seed == a.layout_seed);
    CHECK(b.source_tag == a.source_tag);
    CHECK(b.obs_dim == a.obs_dim);
    CHECK(b.action_dim == a.action_dim);
  }
  CHECK(back.meta.obs_dim == 2);
  CHECK(back.meta.maze_width == 8);
  CHECK(back.meta.door_density == 0.6);
  CHECK(back.meta.env.t_max == 400);

  // Independently parse the length-prefixed manifest and compare its count.
  const std::string bytes = slurp(path);
  std::uint64_t manifest_len;
  std::memcpy(&manifest_len, bytes.data() + 8, 8);
  const nlohmann::json manifest = nlohmann::json::parse(bytes.substr(16, std::size_t(manifest_len)));
  CHECK(manifest.at("trajectory_count").get<std::size_t>() == ds.trajectories.size());
  CHECK(manifest.at("trajectories").size() == ds.trajectories.size());

  std::filesystem::remove(path);
}

TEST_CASE("corruption is detected: checksum, truncation, magic, version") {
  const Dataset ds = coded_dataset({12, 8});
  const std::string path = temp_path("sprl_ds_corrupt.bin");
  write_dataset(ds, path);
  const std::string good = slurp(path);

  SUBCASE("flipping one payload byte fails the checksum") {
    std::string bad = good;
    bad[bad.size() - 20] ^= 0x40;  // inside the float payload
    spit(path, bad);
    CHECK_THROWS_WITH_AS(read_dataset(path), doctest::Contains("checksum"), IoError);
  }

  SUBCASE("flipping one manifest byte fails the checksum, not the parser") {
    std::string bad = good;
    bad[20] ^= 0x01;  // inside the JSON text
    spit(path, bad);
    CHECK_THROWS_WITH_AS(read_dataset(path), doctest::Contains("checksum"), IoError);
  }

  SUBCASE("truncated file") {
    spit(path, good.substr(0, good.size() / 2));
    CHECK_THROWS_AS(read_dataset(path), IoError);
    spit(path, good.substr(0, 3));
    CHECK_THROWS_AS(read_dataset(path), IoError);
  }

  SUBCASE("bad magic") {
    std::string bad = good;
    bad[0] = 'X';
    spit(path, bad);
    CHECK_THROWS_WITH_AS(read_dataset(path), doctest::Contains("magic"), IoError);
  }

  SUBCASE("version mismatch with a recomputed valid checksum") {
    std::string bad = good;
    bad[4] = 9;  // version field
    const std::uint64_t sum = ref_fnv1a(bad, bad.size() - 8);
    std::memcpy(bad.data() + bad.size() - 8, &sum, 8);
    spit(path, bad);
    CHECK_THROWS_WITH_AS(read_dataset(path), doctest::Contains("version"), IoError);
  }

  SUBCASE("the happy path still reads after all that") {
    spit(path, good);
    CHECK(read_dataset(path).trajectories.size() == 2);
  }

  std::filesystem::remove(path);
}

TEST_CASE("a single length-H trajectory yields the unique segment every draw") {
  const int H = 10;
  const Dataset ds = coded_dataset({H});
  Rng rng = make_rng(1);
  for (int draw = 0; draw < 10; ++draw) {
    const SegmentBatch b = sample_segments(ds, 1, H, rng);
    REQUIRE(b.batch_size == 1);
    REQUIRE(b.horizon == H);
    // State is observation row 0; actions are the full sequence, exactly.
    CHECK(b.states[0] == 0.0f);
    CHECK(b.states[1] == 0.0f);
    const Trajectory& t = ds.trajectories[0];
    REQUIRE(b.action_seqs.size() == t.actions.size());
    CHECK(std::memcmp(b.action_seqs.data(), t.actions.data(), t.actions.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("segment starts are uniform over (trajectory, start) pairs within 3-sigma") {
  const int H = 10;
  // Valid start counts: 1, 4, 10; one too-short trajectory is skipped.
  const Dataset ds = coded_dataset({10, 13, 19, 7});
  SegmentSampler sampler(ds, H);
  CHECK(sampler.total_segments() == 15);

  Rng rng = make_rng(202);
  const int draws = 1000000;
  std::map<std::pair<int, int>, int> histogram;
  const int batch = 1000;
  for (int rep = 0; rep < draws / batch; ++rep) {
    const SegmentBatch b = sampler.sample(batch, rng);
    for (int i = 0; i < batch; ++i) {
      // Decode (trajectory, start) from the coded observation and action.
      const int obs_code = int(b.states[std::size_t(i) * 2]);
      const int traj = obs_code / 100;
      const int start = obs_code % 100;
      // Cross-check: the action row must encode the same coordinates.
      const int act_code = int(b.action_seqs[std::size_t(i) * 2 * H]);
      REQUIRE(act_code / 1000 == traj);
      REQUIRE(act_code % 1000 == start);
      // And the whole action slice must match the source trajectory.
      const Trajectory& t = ds.trajectories[std::size_t(traj)];
      REQUIRE(std::memcmp(&b.action_seqs[std::size_t(i) * 2 * H], t.action(start),
                          std::size_t(2 * H) * sizeof(float)) == 0);
      ++histogram[{traj, start}];
    }
  }

  REQUIRE(histogram.size() == 15);  // trajectory 3 (length 7) never sampled
  const double p = 1.0 / 15.0;
  const double mean = draws * p;
  const double sigma = std::sqrt(draws * p * (1 - p));
  for (const auto& [key, count] : histogram) {
    CAPTURE(key.first);
    CAPTURE(key.second);
    CHECK(std::abs(count - mean) <= 3.0 * sigma);
  }

  CHECK_THROWS_AS(SegmentSampler(coded_dataset({5, 3}), H), UsageError);
}

TEST_CASE("mix_datasets keeps exact counts and tags") {
  Dataset expert;
  expert.meta.obs_dim = 2;
  expert.meta.action_dim = 2;
  Dataset other = expert;
  for (int i = 0; i < 1000; ++i) {
    Trajectory t = coded_trajectory(i, 12);
    t.source_tag = "expert";
    expert.trajectories.push_back(t);
  }
  for (int i = 0; i < 600; ++i) {
    Trajectory t = coded_trajectory(i + 5000, 12);
    t.source_tag = "random";
    other.trajectories.push_back(t);
  }

  Rng rng = make_rng(9);

  SUBCASE("fraction 0 is the identity") {
    const Dataset mixed = mix_datasets(expert, other, 0.0, rng);
    REQUIRE(mixed.trajectories.size() == 1000);
    for (std::size_t i = 0; i < 1000; ++i)
      CHECK(mixed.trajectories[i].observations == expert.trajectories[i].observations);
  }

  SUBCASE("fraction 0.5 gives exactly 500 + 500") {
    const Dataset mixed = mix_datasets(expert, other, 0.5, rng);
    REQUIRE(mixed.trajectories.size() == 1000);
    int n_expert = 0, n_random = 0;
    for (const Trajectory& t : mixed.trajectories) {
      if (t.source_tag == "expert") ++n_expert;
      if (t.source_tag == "random") ++n_random;
    }
    CHECK(n_expert == 500);
    CHECK(n_random == 500);
  }

  SUBCASE("fraction 0.75 floors the minority count") {
    const Dataset mixed = mix_datasets(expert, other, 0.599, rng);
    REQUIRE(mixed.trajectories.size() == 1000);
    int n_random = 0;
    for (const Trajectory& t : mixed.trajectories)
      if (t.source_tag == "random") ++n_random;
    CHECK(n_random == 599);
  }

  SUBCASE("insufficient minority trajectories") {
    CHECK_THROWS_AS(mix_datasets(expert, other, 0.75, rng), UsageError);  // needs 750 > 600
  }

  SUBCASE("dimension disagreement") {
    Dataset narrow = other;
    narrow.meta.obs_dim = 3;
    CHECK_THROWS_AS(mix_datasets(expert, narrow, 0.5, rng), UsageError);
  }
}
