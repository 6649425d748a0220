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

#include "lawm/rng.hpp"

#include "lawm/error.hpp"

#include <sstream>

namespace lawm {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
  // FNV-1a over the name, mixed with the seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(seed ^ splitmix64(h));
}

Eigen::MatrixXd NoiseSource::standard_normal(Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd out(rows, cols);
  if (deterministic_) {
    out.setZero();
    return out;
  }
  // Fill row-major so the draw order matches the logical (batch, dim) layout.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = normal_(engine_);
  }
  return out;
}

Eigen::MatrixXd NoiseSource::uniform(Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      out(r, c) = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }
  }
  return out;
}

std::string NoiseSource::serialize() const {
  std::ostringstream os;
  os << engine_ << ' ' << normal_ << ' ' << (deterministic_ ? 1 : 0);
  return os.str();
}

void NoiseSource::deserialize(const std::string& state) {
  std::istringstream is(state);
  int det = 0;
  is >> engine_ >> normal_ >> det;
  if (!is) throw FormatError("corrupt noise-source state", 0);
  deterministic_ = det != 0;
}

std::string serialize_engine(const Engine& engine) {
  std::ostringstream os;
  os << engine;
  return os.str();
}

void deserialize_engine(Engine& engine, const std::string& state) {
  std::istringstream is(state);
  is >> engine;
  if (!is) throw FormatError("corrupt engine state", 0);
}

std::uint64_t uniform_index(Engine& engine, std::uint64_t bound) {
  if (bound == 0) throw ContractError("uniform_index: bound must be positive");
  const std::uint64_t limit = Engine::max() - (Engine::max() % bound);
  std::uint64_t x = engine();
  while (x >= limit) x = engine();
  return x % bound;
}

}  // namespace lawm
