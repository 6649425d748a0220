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

#ifndef LAWM_TESTS_SUPPORT_HPP_
#define LAWM_TESTS_SUPPORT_HPP_

#include "lawm/agent.hpp"
#include "lawm/autodiff.hpp"
#include "lawm/config.hpp"
#include "lawm/data.hpp"
#include "lawm/world_model.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace lawm::testing {

// Every width at most 8.
ModelConfig tiny_model_config(PriorMode prior = PriorMode::kLawm);
AgentConfig tiny_agent_config();

// Random trajectory with standard-normal observations and bounded actions.
data::Trajectory random_trajectory(Engine& engine, Eigen::Index length, Eigen::Index obs_dim, Eigen::Index act_dim,
                                   bool labeled);

std::vector<data::Trajectory> random_batch(std::uint64_t seed, int batch, Eigen::Index length, Eigen::Index obs_dim,
                                           Eigen::Index act_dim, bool labeled);

// Result of comparing analytic gradients with central differences.
struct GradCheck {
  double worst_relative_error = 0.0;
  std::string worst_tensor;
  int tensors_checked = 0;
};

using LossFn = std::function<ad::Var(ad::Tape&)>;

// Checks d(loss)/d(param) for every tensor in `params`. The relative error
// of a tensor is |g - g_fd| / max(|g|, |g_fd|, floor) over the flattened
// entries; entries beyond `max_entries` per tensor are sampled.
GradCheck check_gradients(const nn::ParamList& params, const LossFn& loss, double step = 1e-6,
                          int max_entries = 64, double floor = 1e-7);

// Adds N(0, scale^2) noise to every entry. Zero-initialized biases put the
// first layer norm of a filtering pass at zero variance, where central
// differences need tiny steps; gradient checks jitter away from that point.
void jitter_parameters(const nn::ParamList& params, std::uint64_t seed, double scale = 0.1);

// Sets all weights to zero and the standard-deviation biases so that every
// learned Gaussian head outputs N(0, 1).
void make_degenerate(const wm::WorldModel& model);

bool bitwise_equal(const nn::ParamList& a, const std::vector<ad::Matrix>& snapshot);
std::vector<ad::Matrix> snapshot(const nn::ParamList& params);

// Fresh, empty directory under the system temp path.
std::filesystem::path temp_dir(const std::string& name);

}  // namespace lawm::testing

#endif  // LAWM_TESTS_SUPPORT_HPP_
