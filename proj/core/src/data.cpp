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

#include "lawm/data.hpp"

#include "lawm/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace lawm::data {
namespace {

static_assert(std::endian::native == std::endian::little, ".lawm I/O assumes a little-endian host");

constexpr char kMagic[4] = {'L', 'A', 'W', 'M'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

void put_floats(std::vector<std::uint8_t>& out, const float* data, std::size_t n) {
  const std::size_t at = out.size();
  out.resize(at + n * sizeof(float));
  std::memcpy(out.data() + at, data, n * sizeof(float));
}

void get_floats(std::span<const std::uint8_t> b, std::size_t& at, float* data, std::size_t n, const char* section) {
  const std::size_t bytes = n * sizeof(float);
  if (at + bytes > b.size()) {
    throw FormatError(std::string("truncated .lawm file: missing ") + section + " section (need " +
                          std::to_string(bytes) + " bytes, have " + std::to_string(b.size() - at) + ")",
                      at);
  }
  std::memcpy(data, b.data() + at, bytes);
  at += bytes;
}

}  // namespace

void Trajectory::validate() const {
  const Eigen::Index t = obs.rows();
  if (t < 1) throw ContractError("trajectory has no timesteps");
  if (rewards.size() != t) throw ContractError("trajectory rewards length differs from observations");
  if (actions) {
    if (actions->rows() != t) throw ContractError("trajectory actions length differs from observations");
    if (actions->cols() != action_dim) throw ContractError("trajectory action_dim disagrees with actions");
  }
  if (next_obs && next_obs->size() != obs.cols()) throw ContractError("trajectory next_obs has wrong width");
}

double Trajectory::total_reward() const {
  double total = 0.0;
  for (Eigen::Index i = 0; i < rewards.size(); ++i) total += rewards(i);
  return total;
}

std::vector<std::uint8_t> encode_trajectory(const Trajectory& traj) {
  traj.validate();
  std::vector<std::uint8_t> out;
  const auto t = static_cast<std::size_t>(traj.length());
  const auto od = static_cast<std::size_t>(traj.obs_dim());
  const auto ad = static_cast<std::size_t>(traj.action_dim);
  out.reserve(kHeaderBytes + 4 * t * (od + (traj.has_actions() ? ad : 0) + 1));
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(t));
  put_u32(out, static_cast<std::uint32_t>(od));
  put_u32(out, static_cast<std::uint32_t>(ad));
  out.push_back(traj.has_actions() ? 1 : 0);
  out.insert(out.end(), 3, 0);
  put_floats(out, traj.obs.data(), t * od);
  if (traj.has_actions()) put_floats(out, traj.actions->data(), t * ad);
  put_floats(out, traj.rewards.data(), t);
  return out;
}

Trajectory decode_trajectory(std::span<const std::uint8_t> b) {
  if (b.size() < kHeaderBytes) throw FormatError("truncated .lawm file: missing header section", b.size());
  if (std::memcmp(b.data(), kMagic, 4) != 0) throw FormatError("bad .lawm magic", 0);
  const std::uint32_t version = get_u32(b, 4);
  if (version != kFormatVersion) throw FormatError("unsupported .lawm version " + std::to_string(version), 4);
  const std::uint32_t t = get_u32(b, 8);
  const std::uint32_t od = get_u32(b, 12);
  const std::uint32_t ad = get_u32(b, 16);
  const std::uint8_t flags = b[20];
  if ((flags & ~1u) != 0) throw FormatError("unknown .lawm flag bits", 20);
  if (b[21] != 0 || b[22] != 0 || b[23] != 0) throw FormatError("nonzero .lawm padding", 21);
  if (t == 0 || od == 0) throw FormatError(".lawm file declares an empty trajectory", 8);

  Trajectory traj;
  traj.action_dim = ad;
  traj.obs.resize(t, od);
  traj.rewards.resize(t);
  std::size_t at = kHeaderBytes;
  get_floats(b, at, traj.obs.data(), static_cast<std::size_t>(t) * od, "observations");
  if (flags & 1u) {
    if (ad == 0) throw FormatError(".lawm file claims actions with act_dim 0", 16);
    FloatMatrix actions(t, ad);
    get_floats(b, at, actions.data(), static_cast<std::size_t>(t) * ad, "actions");
    traj.actions = std::move(actions);
  }
  get_floats(b, at, traj.rewards.data(), t, "rewards");
  if (at != b.size()) throw FormatError("trailing bytes after .lawm rewards section", at);
  return traj;
}

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_trajectory(traj);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_trajectory(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

std::size_t Corpus::labeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(trajectories.begin(), trajectories.end(), [](const Trajectory& t) { return t.has_actions(); }));
}

std::filesystem::path corpus_dir(const std::filesystem::path& root, const std::string& env, const std::string& kind) {
  return root / env / kind;
}

std::string meta_to_json(const CorpusMeta& m) {
  nlohmann::ordered_json j;
  j["env"] = m.env;
  j["kind"] = m.kind;
  j["seed"] = m.seed;
  j["generator"] = m.generator;
  j["provenance"] = m.provenance;
  j["env_spec"] = {{"obs_dim", m.obs_dim},
                   {"act_dim", m.act_dim},
                   {"action_bound", m.action_bound},
                   {"episode_length", m.episode_length},
                   {"max_step_reward", m.max_step_reward}};
  j["clipped_actions"] = m.clipped_actions;
  j["labeled_fraction"] = m.labeled_fraction;
  j["split_seed"] = m.split_seed;
  return j.dump(2);
}

CorpusMeta meta_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    CorpusMeta m;
    m.env = j.at("env").get<std::string>();
    m.kind = j.at("kind").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.generator = j.value("generator", std::string("unknown"));
    m.provenance = j.value("provenance", std::vector<std::string>{});
    const auto& spec = j.at("env_spec");
    m.obs_dim = spec.at("obs_dim").get<Eigen::Index>();
    m.act_dim = spec.at("act_dim").get<Eigen::Index>();
    m.action_bound = spec.at("action_bound").get<std::vector<double>>();
    m.episode_length = spec.at("episode_length").get<int>();
    m.max_step_reward = spec.at("max_step_reward").get<double>();
    m.clipped_actions = j.value("clipped_actions", std::int64_t{0});
    m.labeled_fraction = j.value("labeled_fraction", 1.0);
    m.split_seed = j.value("split_seed", std::uint64_t{0});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed meta.json: ") + e.what());
  }
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create corpus directory '" + dir.string() + "': " + ec.message());
  char name[32];
  for (std::size_t i = 0; i < corpus.trajectories.size(); ++i) {
    std::snprintf(name, sizeof(name), "traj_%06zu.lawm", i);
    write_trajectory(corpus.trajectories[i], dir / name);
  }
  std::ofstream meta(dir / "meta.json", std::ios::trunc);
  if (!meta) throw DataError("cannot write '" + (dir / "meta.json").string() + "'");
  meta << meta_to_json(corpus.meta) << '\n';
}

Corpus read_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("corpus directory '" + dir.string() + "' does not exist");
  Corpus corpus;
  {
    std::ifstream meta(dir / "meta.json");
    if (!meta) throw DataError("corpus '" + dir.string() + "' has no meta.json");
    std::stringstream ss;
    ss << meta.rdbuf();
    corpus.meta = meta_from_json(ss.str());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".lawm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("corpus '" + dir.string() + "' contains no .lawm files");
  corpus.trajectories.reserve(files.size());
  for (const auto& f : files) corpus.trajectories.push_back(read_trajectory(f));
  return corpus;
}

Corpus split_action_labels(const Corpus& corpus, double labeled_fraction, std::uint64_t seed) {
  if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0)) {
    throw ConfigError("labeled_fraction must lie in (0, 1]");
  }
  const std::size_t n = corpus.size();
  if (corpus.labeled_count() != n) throw ContractError("split_action_labels requires a fully labeled corpus");
  const auto keep = static_cast<std::size_t>(std::floor(labeled_fraction * static_cast<double>(n) + 1e-9));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Engine engine(substream_seed(seed, "split"));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = uniform_index(engine, i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<bool> labeled(n, false);
  for (std::size_t i = 0; i < keep; ++i) labeled[order[i]] = true;

  Corpus out;
  out.meta = corpus.meta;
  out.meta.labeled_fraction = labeled_fraction;
  out.meta.split_seed = seed;
  if (keep != n) out.meta.provenance.push_back("split");
  out.trajectories = corpus.trajectories;
  for (std::size_t i = 0; i < n; ++i) {
    if (!labeled[i]) out.trajectories[i].actions.reset();
  }
  return out;
}

Trajectory extract_window(const Trajectory& source, Eigen::Index start, Eigen::Index window) {
  if (start < 0 || window < 1 || start + window > source.length()) throw ContractError("extract_window: out of range");
  Trajectory w;
  w.obs = source.obs.middleRows(start, window);
  w.rewards = source.rewards.segment(start, window);
  w.action_dim = source.action_dim;
  if (source.actions) {
    w.actions = FloatMatrix(source.actions->middleRows(start, window));
  } else if (start + window < source.length()) {
    w.next_obs = FloatRow(source.obs.row(start + window));
  }
  return w;
}

WindowSampler::WindowSampler(const Corpus& corpus, int window, std::uint64_t seed)
    : corpus_(&corpus), window_(window), engine_(seed) {
  if (corpus.trajectories.empty()) throw DataError("cannot sample windows from an empty corpus");
  if (window < 1) throw ContractError("window must be >= 1");
  std::uint64_t total = 0;
  cumulative_.reserve(corpus.size());
  for (const Trajectory& t : corpus.trajectories) {
    if (t.length() < window) {
      throw ContractError("window " + std::to_string(window) + " exceeds trajectory length " +
                          std::to_string(t.length()));
    }
    total += static_cast<std::uint64_t>(t.length() - window + 1);
    cumulative_.push_back(total);
  }
}

std::vector<Trajectory> WindowSampler::sample(int batch) {
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    const std::uint64_t k = uniform_index(engine_, cumulative_.back());
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), k);
    const auto idx = static_cast<std::size_t>(it - cumulative_.begin());
    const std::uint64_t before = idx == 0 ? 0 : cumulative_[idx - 1];
    out.push_back(extract_window(corpus_->trajectories[idx], static_cast<Eigen::Index>(k - before), window_));
  }
  return out;
}

std::vector<Trajectory> sample_windows(const Corpus& corpus, int batch, int window, std::uint64_t seed) {
  WindowSampler sampler(corpus, window, seed);
  return sampler.sample(batch);
}

std::vector<double> trajectory_returns(const Corpus& corpus) {
  std::vector<double> returns;
  returns.reserve(corpus.size());
  for (const Trajectory& t : corpus.trajectories) returns.push_back(t.total_reward());
  return returns;
}

double percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DataError("percentile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

CorpusStats compute_stats(std::span<const double> returns) {
  if (returns.empty()) throw DataError("cannot compute statistics of an empty corpus");
  std::vector<double> sorted(returns.begin(), returns.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  double var = 0.0;
  for (double r : sorted) var += (r - mean) * (r - mean);
  CorpusStats s;
  s.mean = mean;
  s.std = std::sqrt(var / n);
  s.min = sorted.front();
  s.p25 = percentile(sorted, 0.25);
  s.median = percentile(sorted, 0.5);
  s.p75 = percentile(sorted, 0.75);
  s.max = sorted.back();
  return s;
}

CorpusStats compute_stats(const Corpus& corpus) {
  const std::vector<double> returns = trajectory_returns(corpus);
  return compute_stats(returns);
}

std::vector<HistogramBin> compute_histogram(std::span<const double> returns, int bins) {
  if (bins < 1) throw ContractError("histogram needs at least one bin");
  if (returns.empty()) throw DataError("cannot build a histogram of an empty corpus");
  const auto [lo_it, hi_it] = std::minmax_element(returns.begin(), returns.end());
  const double lo = *lo_it, hi = *hi_it;
  const double width = (hi - lo) / bins;
  std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
  for (int i = 0; i < bins; ++i) {
    out[i].left = lo + width * i;
    out[i].right = i + 1 == bins ? hi : lo + width * (i + 1);
  }
  for (double r : returns) {
    int idx = width > 0.0 ? static_cast<int>((r - lo) / width) : 0;
    idx = std::clamp(idx, 0, bins - 1);
    ++out[static_cast<std::size_t>(idx)].count;
  }
  return out;
}

void emit_histogram(const Corpus& corpus, int bins, const std::filesystem::path& path) {
  const std::vector<double> returns = trajectory_returns(corpus);
  const std::vector<HistogramBin> hist = compute_histogram(returns, bins);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write histogram '" + path.string() + "'");
  out << "bin_left,bin_right,count\n" << std::setprecision(10);
  for (const HistogramBin& b : hist) out << b.left << ',' << b.right << ',' << b.count << '\n';
  if (!out) throw DataError("failed writing histogram '" + path.string() + "'");
}

}  // namespace lawm::data
