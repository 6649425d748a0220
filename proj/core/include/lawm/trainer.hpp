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

#ifndef LAWM_TRAINER_HPP_
#define LAWM_TRAINER_HPP_

// Joint world-model and agent training over sampled windows, with
// checkpointing that captures every random stream so a resumed run
// continues bitwise identically.

#include "lawm/agent.hpp"
#include "lawm/config.hpp"
#include "lawm/data.hpp"
#include "lawm/objectives.hpp"
#include "lawm/world_model.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace lawm::trainer {

struct StepMetrics {
  int step = 0;  // steps completed after this one
  objectives::LossBreakdown loss;
  double model_grad_norm = 0.0;
  bool agent_updated = false;
  agent::AgentMetrics agent;
};

// Deterministic JSON line (every field but "wall_time" is reproducible).
std::string metrics_json(const StepMetrics& m, double wall_time);

class Trainer {
 public:
  // `corpus` is the split corpus the run trains on.
  Trainer(const ExperimentConfig& config, data::Corpus corpus);

  StepMetrics train_step();
  agent::EvalResult evaluate(int episodes) const;

  int step() const { return step_; }
  const ExperimentConfig& config() const { return config_; }
  const wm::WorldModel& model() const { return *model_; }
  const agent::Agent& agent() const { return *agent_; }
  const data::Corpus& corpus() const { return *corpus_; }
  double free_nats() const { return free_nats_; }
  bool agent_active() const;

  std::optional<double> best_eval() const { return best_eval_; }
  void set_best_eval(double v) { best_eval_ = v; }
  void set_last_checkpoint(std::filesystem::path p) { last_checkpoint_ = std::move(p); }

  void save_checkpoint(const std::filesystem::path& path);
  void load_checkpoint(const std::filesystem::path& path);

 private:
  ExperimentConfig config_;
  std::unique_ptr<data::Corpus> corpus_;
  std::unique_ptr<wm::WorldModel> model_;
  std::unique_ptr<agent::Agent> agent_;
  nn::Adam model_opt_;
  std::unique_ptr<data::WindowSampler> sampler_;
  NoiseSource model_noise_;
  NoiseSource agent_noise_;
  double free_nats_ = 0.0;
  int step_ = 0;
  std::optional<double> best_eval_;
  std::filesystem::path last_checkpoint_;
};

// Applies the label split and the labeled-only ablation from `config.data`.
// A corpus that was already split is used as is.
data::Corpus prepare_corpus(const ExperimentConfig& config);

// World model and agent restored from a training checkpoint.
struct LoadedPolicy {
  ExperimentConfig config;
  std::string env;
  std::unique_ptr<wm::WorldModel> model;
  std::unique_ptr<agent::Agent> agent;
};
LoadedPolicy load_policy(const std::filesystem::path& checkpoint);

struct RunReport {
  std::string env;
  std::string dataset;
  std::string method;
  double labeled_fraction = 0.0;
  std::uint64_t seed = 0;
  double mean = 0.0;
  double std = 0.0;
  int steps = 0;
};

inline constexpr const char* kResultsHeader = "env,dataset,method,labeled_fraction,seed,mean,std";
std::string results_row(const RunReport& report);
void append_results(const std::filesystem::path& csv, const RunReport& report);

struct RunOptions {
  bool resume = false;
  // Stop after this many steps even if total_steps is larger (simulated
  // interruption). Negative means no limit.
  int stop_after = -1;
  bool quiet = true;
};

// Full loop inside `run_dir`: config.json, metrics.jsonl, checkpoints/ and
// results.csv. Validates the config before any compute.
RunReport run_experiment(const ExperimentConfig& config, const std::filesystem::path& run_dir,
                         const RunOptions& options = {});

std::filesystem::path latest_checkpoint(const std::filesystem::path& run_dir);

}  // namespace lawm::trainer

#endif  // LAWM_TRAINER_HPP_
