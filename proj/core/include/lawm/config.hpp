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

#ifndef LAWM_CONFIG_HPP_
#define LAWM_CONFIG_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace lawm {

enum class PriorMode { kLawm, kClap };

std::string to_string(PriorMode mode);
PriorMode parse_prior_mode(std::string_view name);

struct ModelConfig {
  int stoch_size = 64;
  int deter_size = 512;
  int embed_size = 512;
  int latent_action_size = 12;
  int hidden_units = 640;  // recurrent trunk and state heads
  int mlp_units = 512;     // encoders and decoders
  int mlp_layers = 2;
  int prior_units = 512;  // state-conditioned latent action prior (C-LAP)
  int prior_layers = 2;
  int idm_units = 512;  // action-free latent action posterior
  int idm_layers = 3;
  PriorMode prior = PriorMode::kLawm;
  double min_std = 0.01;
  double learning_rate = 3e-4;
  int batch_size = 64;
  int window = 50;
  // Unset means "by dataset kind": 1.0 for medium-replay and explore, else 0.
  std::optional<double> free_nats;
  bool free_nats_action_kl = true;
  double grad_clip = 100.0;
  bool imagine_mean_action = true;
};

struct AgentConfig {
  int policy_units = 256;
  int policy_layers = 3;
  int value_units = 256;
  int value_layers = 3;
  double learning_rate = 8e-5;
  double entropy_weight = 0.01;
  int horizon = 5;
  double discount = 0.99;
  double lambda = 0.95;
  double latent_bound = 3.0;
  double grad_clip = 100.0;
};

struct DataConfig {
  std::string corpus;
  double labeled_fraction = 0.05;
  std::uint64_t split_seed = 0;
  // Ablation: discard every trajectory that lost its labels in the split.
  bool labeled_only = false;
};

struct GenConfig {
  std::string env = "point_mass";
  std::string kind = "medium";
  int n_trajectories = 2000;
  std::uint64_t seed = 0;
};

struct IdmConfig {
  int units = 1024;
  int layers = 3;
  double dropout = 0.1;
  double learning_rate = 1e-4;
  int batch_size = 1024;
  int window = 5;
  int steps = 100000;
  std::uint64_t seed = 0;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int total_steps = 10000;
  int eval_interval = 1000;
  int eval_episodes = 10;
  int model_warmup = 1000;
  int pretrain_model_steps = 0;
  int keep_checkpoints = 3;
  // Report label; empty derives it from the prior mode and label fraction.
  std::string method;
};

struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;

  int schema_version = kSchemaVersion;
  ModelConfig model;
  AgentConfig agent;
  DataConfig data;
  GenConfig gen;
  IdmConfig idm;
  RunConfig run;

  // Throws ConfigError describing the first invalid field.
  void validate() const;

  // Strict JSON round trip: unknown keys and wrong types are rejected.
  std::string to_json() const;
  static ExperimentConfig from_json(std::string_view text);

  // Applies a dotted `key=value` override. The key must already exist; the
  // value is parsed as JSON when possible and as a bare string otherwise.
  void apply_override(std::string_view assignment);
};

double resolve_free_nats(const ModelConfig& model, std::string_view dataset_kind);
std::string method_label(const ExperimentConfig& config);

}  // namespace lawm

#endif  // LAWM_CONFIG_HPP_
