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

#include "support/support.hpp"

#include "lawm/nn.hpp"
#include "lawm/prob.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <cstring>

#include <unistd.h>

namespace lawm::testing {

ModelConfig tiny_model_config(PriorMode prior) {
  ModelConfig c;
  c.stoch_size = 3;
  c.deter_size = 4;
  c.embed_size = 4;
  c.latent_action_size = 2;
  c.hidden_units = 6;
  c.mlp_units = 5;
  c.mlp_layers = 1;
  c.prior_units = 5;
  c.prior_layers = 1;
  c.idm_units = 5;
  c.idm_layers = 2;
  c.prior = prior;
  c.batch_size = 3;
  c.window = 3;
  return c;
}

AgentConfig tiny_agent_config() {
  AgentConfig c;
  c.policy_units = 6;
  c.policy_layers = 1;
  c.value_units = 6;
  c.value_layers = 1;
  c.horizon = 3;
  return c;
}

data::Trajectory random_trajectory(Engine& engine, Eigen::Index length, Eigen::Index obs_dim, Eigen::Index act_dim,
                                   bool labeled) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::uniform_real_distribution<float> unit(-0.9f, 0.9f);
  data::Trajectory t;
  t.obs.resize(length, obs_dim);
  for (Eigen::Index i = 0; i < t.obs.size(); ++i) t.obs.data()[i] = normal(engine);
  t.rewards.resize(length);
  for (Eigen::Index i = 0; i < length; ++i) t.rewards(i) = unit(engine);
  t.action_dim = act_dim;
  data::FloatMatrix actions(length, act_dim);
  for (Eigen::Index i = 0; i < actions.size(); ++i) actions.data()[i] = unit(engine);
  if (labeled) t.actions = actions;
  return t;
}

std::vector<data::Trajectory> random_batch(std::uint64_t seed, int batch, Eigen::Index length, Eigen::Index obs_dim,
                                           Eigen::Index act_dim, bool labeled) {
  Engine engine(seed);
  std::vector<data::Trajectory> out;
  for (int b = 0; b < batch; ++b) out.push_back(random_trajectory(engine, length, obs_dim, act_dim, labeled));
  return out;
}

void jitter_parameters(const nn::ParamList& params, std::uint64_t seed, double scale) {
  NoiseSource noise(seed);
  for (ad::Parameter* p : nn::mutable_params(params)) {
    p->value += scale * noise.standard_normal(p->value.rows(), p->value.cols());
  }
}

GradCheck check_gradients(const nn::ParamList& params, const LossFn& loss, double step, int max_entries,
                          double floor) {
  const auto mutable_list = nn::mutable_params(params);
  nn::zero_grads(mutable_list);
  {
    ad::Tape tape;
    tape.backward(loss(tape));
  }
  GradCheck result;
  Engine picker(1234);
  for (ad::Parameter* p : mutable_list) {
    const ad::Index n = p->value.size();
    std::vector<ad::Index> entries(n);
    for (ad::Index i = 0; i < n; ++i) entries[i] = i;
    if (n > max_entries) {
      std::shuffle(entries.begin(), entries.end(), picker);
      entries.resize(max_entries);
    }
    double diff = 0.0, norm_a = 0.0, norm_n = 0.0;
    for (ad::Index idx : entries) {
      double& w = p->value.data()[idx];
      const double saved = w;
      w = saved + step;
      double up;
      {
        ad::Tape t(false);
        up = loss(t).scalar();
      }
      w = saved - step;
      double down;
      {
        ad::Tape t(false);
        down = loss(t).scalar();
      }
      w = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p->grad.data()[idx];
      diff += (analytic - numeric) * (analytic - numeric);
      norm_a += analytic * analytic;
      norm_n += numeric * numeric;
    }
    const double denom = std::max({std::sqrt(norm_a), std::sqrt(norm_n), floor});
    const double rel = std::sqrt(diff) / denom;
    ++result.tensors_checked;
    if (rel >= result.worst_relative_error) {
      result.worst_relative_error = rel;
      result.worst_tensor = p->name;
    }
  }
  nn::zero_grads(mutable_list);
  return result;
}

void make_degenerate(const wm::WorldModel& model) {
  const double raw = prob::raw_from_std(1.0, model.config().min_std);
  for (ad::Parameter* p : nn::mutable_params(model.parameters())) {
    const std::string& name = p->name;
    const bool gain = name.size() >= 5 && name.compare(name.size() - 5, 5, ".gain") == 0;
    if (gain) continue;
    p->value.setZero();
    const bool gaussian_head =
        name == "wm.prior.out.bias" || name == "wm.posterior.out.bias" || name == "wm.action_prior.out.bias" ||
        name == "wm.action_posterior_labeled.out.bias" || name == "wm.action_posterior_unlabeled.out.bias" ||
        name == "wm.action_decoder.out.bias";
    if (gaussian_head) {
      const ad::Index half = p->value.cols() / 2;
      p->value.rightCols(half).setConstant(raw);
    }
  }
}

std::vector<ad::Matrix> snapshot(const nn::ParamList& params) {
  std::vector<ad::Matrix> out;
  for (const auto* p : params) out.push_back(p->value);
  return out;
}

bool bitwise_equal(const nn::ParamList& a, const std::vector<ad::Matrix>& snap) {
  if (a.size() != snap.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i]->value;
    const auto& y = snap[i];
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) != 0) return false;
  }
  return true;
}

std::filesystem::path temp_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("lawm_test_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace lawm::testing
