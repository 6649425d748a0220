// Copyright 2026 The LAWM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LAWM_DATA_HPP_
#define LAWM_DATA_HPP_

// Trajectory containers, the `.lawm` binary format, label splitting, window
// sampling and return statistics.
//
// `.lawm` layout (little-endian):
//   "LAWM" | u32 version=1 | u32 T | u32 obs_dim | u32 act_dim |
//   u8 flags (bit0 = has_actions) | 3 zero bytes |
//   f32 obs[T*obs_dim] | f32 actions[T*act_dim] (iff bit0) | f32 rewards[T]

#include "lawm/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lawm::data {

using FloatMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FloatRow = Eigen::Matrix<float, 1, Eigen::Dynamic>;

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderBytes = 24;

struct Trajectory {
  FloatMatrix obs;                     // T x obs_dim
  std::optional<FloatMatrix> actions;  // T x act_dim, all-or-nothing
  Eigen::VectorXf rewards;             // T
  Eigen::Index action_dim = 0;         // recorded even when actions are absent
  // Observation that follows the last step. Only sampled action-free windows
  // carry it; it is never serialized.
  std::optional<FloatRow> next_obs;

  bool has_actions() const { return actions.has_value(); }
  Eigen::Index length() const { return obs.rows(); }
  Eigen::Index obs_dim() const { return obs.cols(); }

  // Throws ContractError when shapes disagree.
  void validate() const;
  double total_reward() const;
};

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path);
Trajectory read_trajectory(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_trajectory(const Trajectory& traj);
Trajectory decode_trajectory(std::span<const std::uint8_t> bytes);

struct CorpusMeta {
  std::string env;
  std::string kind;
  std::uint64_t seed = 0;
  std::string generator;
  // Processing history, e.g. {"generated", "split", "idm"}.
  std::vector<std::string> provenance;
  Eigen::Index obs_dim = 0;
  Eigen::Index act_dim = 0;
  std::vector<double> action_bound;
  int episode_length = 0;
  double max_step_reward = 1.0;
  std::int64_t clipped_actions = 0;
  double labeled_fraction = 1.0;
  std::uint64_t split_seed = 0;
};

struct Corpus {
  CorpusMeta meta;
  std::vector<Trajectory> trajectories;

  std::size_t size() const { return trajectories.size(); }
  std::size_t labeled_count() const;
};

std::filesystem::path corpus_dir(const std::filesystem::path& root, const std::string& env, const std::string& kind);
// Writes traj_%06d.lawm files and meta.json into `dir` (created if needed).
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus read_corpus(const std::filesystem::path& dir);
std::string meta_to_json(const CorpusMeta& meta);
CorpusMeta meta_from_json(const std::string& text);

// Keeps actions on floor(fraction * N) trajectories chosen by a seeded
// shuffle and strips them from the rest.
Corpus split_action_labels(const Corpus& corpus, double labeled_fraction, std::uint64_t seed);

// Draws windows uniformly over (trajectory, start offset) pairs.
class WindowSampler {
 public:
  WindowSampler(const Corpus& corpus, int window, std::uint64_t seed);

  std::vector<Trajectory> sample(int batch);
  Engine& engine() { return engine_; }

 private:
  const Corpus* corpus_;
  int window_;
  std::vector<std::uint64_t> cumulative_;  // offsets per trajectory, prefix sums
  Engine engine_;
};

std::vector<Trajectory> sample_windows(const Corpus& corpus, int batch, int window, std::uint64_t seed);
Trajectory extract_window(const Trajectory& source, Eigen::Index start, Eigen::Index window);

struct CorpusStats {
  double mean = 0, std = 0, min = 0, p25 = 0, median = 0, p75 = 0, max = 0;
};

inline constexpr const char* kStatsColumns[] = {"Mean", "Std Dev", "Min", "P25", "Median", "P75", "Max"};

std::vector<double> trajectory_returns(const Corpus& corpus);
CorpusStats compute_stats(std::span<const double> returns);
CorpusStats compute_stats(const Corpus& corpus);
// Linear interpolation between closest ranks; `sorted` must be ascending.
double percentile(std::span<const double> sorted, double q);

struct HistogramBin {
  double left = 0, right = 0;
  std::size_t count = 0;
};

std::vector<HistogramBin> compute_histogram(std::span<const double> returns, int bins);
// CSV with header bin_left,bin_right,count.
void emit_histogram(const Corpus& corpus, int bins, const std::filesystem::path& path);

}  // namespace lawm::data

#endif  // LAWM_DATA_HPP_
