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

#ifndef LAWM_RNG_HPP_
#define LAWM_RNG_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace lawm {

// Derives an independent 64-bit seed for a named substream. Every random
// quantity in an experiment is drawn from a substream of the config seed.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view name);

using Engine = std::mt19937_64;

// Source of standard-normal noise for reparameterized sampling. In
// deterministic mode every draw is zero, so samples collapse to means.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed, bool deterministic = false)
      : engine_(seed), deterministic_(deterministic) {}

  Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols);
  Eigen::MatrixXd uniform(Eigen::Index rows, Eigen::Index cols);

  bool deterministic() const { return deterministic_; }
  void set_deterministic(bool d) { deterministic_ = d; }

  Engine& engine() { return engine_; }

  std::string serialize() const;
  void deserialize(const std::string& state);

 private:
  Engine engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  bool deterministic_;
};

std::string serialize_engine(const Engine& engine);
void deserialize_engine(Engine& engine, const std::string& state);

// Unbiased integer in [0, bound) using rejection sampling; independent of
// the standard library's distribution implementations.
std::uint64_t uniform_index(Engine& engine, std::uint64_t bound);

}  // namespace lawm

#endif  // LAWM_RNG_HPP_
