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

#include "lawm/trainer.hpp"

#include "lawm/envs.hpp"
#include "lawm/error.hpp"
#include "support/support.hpp"

#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

using namespace lawm;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config(const fs::path& corpus) {
  ExperimentConfig c;
  c.model = lawm::testing::tiny_model_config();
  c.agent = lawm::testing::tiny_agent_config();
  c.data.corpus = corpus.string();
  c.data.labeled_fraction = 0.5;
  c.run.seed = 11;
  c.run.total_steps = 6;
  c.run.eval_interval = 3;
  c.run.eval_episodes = 1;
  c.run.model_warmup = 2;
  c.run.keep_checkpoints = 2;
  return c;
}

const fs::path& corpus_dir() {
  static const fs::path dir = [] {
    const auto d = lawm::testing::temp_dir("trainer_corpus");
    data::write_corpus(envs::generate_corpus("point_mass", envs::PolicyKind::kMedium, 6, 2), d);
    return d;
  }();
  return dir;
}

std::vector<std::string> metric_lines(trainer::Trainer& t, int steps) {
  std::vector<std::string> out;
  for (int i = 0; i < steps; ++i) out.push_back(trainer::metrics_json(t.train_step(), 0.0));
  return out;
}

// Drops the wall-clock field from each JSON line.
std::vector<std::string> read_log(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    j.erase("wall_time");
    out.push_back(j.dump());
  }
  return out;
}

}  // namespace

TEST_CASE("prepare_corpus applies the split and the labeled-only ablation") {
  auto cfg = tiny_config(corpus_dir());
  const auto split = trainer::prepare_corpus(cfg);
  CHECK(split.size() == 6);
  CHECK(split.labeled_count() == 3);
  cfg.data.labeled_only = true;
  const auto only = trainer::prepare_corpus(cfg);
  CHECK(only.size() == 3);
  CHECK(only.labeled_count() == 3);
  cfg.data.labeled_only = false;
  cfg.data.labeled_fraction = 1.0;
  CHECK(trainer::prepare_corpus(cfg).labeled_count() == 6);
}

TEST_CASE("steps advance by one and the agent waits for the warmup") {
  const auto cfg = tiny_config(corpus_dir());
  trainer::Trainer t(cfg, trainer::prepare_corpus(cfg));
  CHECK(t.step() == 0);
  CHECK_FALSE(t.agent_active());
  for (int i = 1; i <= 4; ++i) {
    const auto actor_before = t.agent().policy_parameters();
    const auto m = t.train_step();
    CHECK(m.step == i);
    CHECK(t.step() == i);
    CHECK(m.agent_updated == (i > 2));
    CHECK(m.loss.finite());
  }
  auto& agent = const_cast<agent::Agent&>(t.agent());
  CHECK(agent.actor_optimizer().steps() == 2);
  CHECK(agent.critic_optimizer().steps() == 2);
}

TEST_CASE("fully labeled training never takes the action-free path") {
  auto cfg = tiny_config(corpus_dir());
  cfg.data.labeled_fraction = 1.0;
  trainer::Trainer t(cfg, trainer::prepare_corpus(cfg));
  const_cast<wm::WorldModel&>(t.model()).reset_counters();
  for (int i = 0; i < 3; ++i) CHECK(t.train_step().loss.mask_fraction == 1.0);
  CHECK(t.model().counters().action_free.load() == 0);
  CHECK(t.model().counters().labeled.load() > 0);
}

TEST_CASE("identical configs train identically and checkpoints resume bitwise") {
  const auto cfg = tiny_config(corpus_dir());
  trainer::Trainer a(cfg, trainer::prepare_corpus(cfg));
  trainer::Trainer b(cfg, trainer::prepare_corpus(cfg));
  const auto la = metric_lines(a, 5);
  CHECK(la == metric_lines(b, 5));

  const auto dir = lawm::testing::temp_dir("trainer_resume");
  trainer::Trainer c(cfg, trainer::prepare_corpus(cfg));
  auto lc = metric_lines(c, 3);
  c.save_checkpoint(dir / "ckpt.lawm");
  trainer::Trainer d(cfg, trainer::prepare_corpus(cfg));
  d.load_checkpoint(dir / "ckpt.lawm");
  CHECK(d.step() == 3);
  const auto tail = metric_lines(d, 2);
  lc.insert(lc.end(), tail.begin(), tail.end());
  CHECK(lc == la);
  CHECK(lawm::testing::bitwise_equal(d.model().parameters(), lawm::testing::snapshot(a.model().parameters())));
  CHECK(lawm::testing::bitwise_equal(d.agent().parameters(), lawm::testing::snapshot(a.agent().parameters())));

  auto other = cfg;
  other.model.latent_action_size = 3;
  trainer::Trainer e(other, trainer::prepare_corpus(other));
  CHECK_THROWS_AS(e.load_checkpoint(dir / "ckpt.lawm"), ConfigError);
}

TEST_CASE("non-finite losses stop training with the last checkpoint named") {
  const auto cfg = tiny_config(corpus_dir());
  trainer::Trainer t(cfg, trainer::prepare_corpus(cfg));
  t.set_last_checkpoint("somewhere/ckpt.lawm");
  for (auto* p : nn::mutable_params(t.model().parameters())) {
    if (p->name.find("obs_decoder") != std::string::npos) p->value.setConstant(std::nan(""));
  }
  try {
    t.train_step();
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("somewhere/ckpt.lawm") != std::string::npos);
  }
}

TEST_CASE("run directories hold config, metrics, checkpoints and results") {
  const auto cfg = tiny_config(corpus_dir());
  const auto dir = lawm::testing::temp_dir("trainer_run");
  const auto report = trainer::run_experiment(cfg, dir / "one");
  CHECK(report.steps == 6);
  CHECK(fs::exists(dir / "one" / "config.json"));
  CHECK(fs::exists(dir / "one" / "checkpoints" / "best.lawm"));
  CHECK(trainer::latest_checkpoint(dir / "one").filename() == "ckpt_00000006.lawm");
  int kept = 0;
  for (const auto& e : fs::directory_iterator(dir / "one" / "checkpoints")) {
    kept += e.path().filename().string().rfind("ckpt_", 0) == 0 ? 1 : 0;
  }
  CHECK(kept == 2);
  const auto log = read_log(dir / "one" / "metrics.jsonl");
  CHECK(log.size() == 6 + 2);
  CHECK(log[3].find("eval_mean") != std::string::npos);

  std::ifstream csv(dir / "one" / "results.csv");
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  CHECK(header == trainer::kResultsHeader);
  CHECK(row == trainer::results_row(report));
  CHECK(row.rfind("point_mass,medium,LAWM,0.5,11,", 0) == 0);

  // Same config and seed: identical results and logs.
  const auto again = trainer::run_experiment(cfg, dir / "two");
  CHECK(trainer::results_row(again) == row);
  CHECK(read_log(dir / "two" / "metrics.jsonl") == log);

  // Interrupted and resumed: the log matches the uninterrupted run.
  trainer::RunOptions stop;
  stop.stop_after = 4;
  trainer::run_experiment(cfg, dir / "three", stop);
  trainer::RunOptions resume;
  resume.resume = true;
  const auto resumed = trainer::run_experiment(cfg, dir / "three", resume);
  CHECK(trainer::results_row(resumed) == row);
  CHECK(read_log(dir / "three" / "metrics.jsonl") == log);

  // The policy reloads from a checkpoint and evaluates like the trainer.
  const auto policy = trainer::load_policy(dir / "one" / "checkpoints" / "ckpt_00000006.lawm");
  CHECK(policy.env == "point_mass");
  const auto ev = agent::evaluate_policy(*policy.model, *policy.agent, policy.env, 1,
                                         substream_seed(cfg.run.seed, "eval"));
  CHECK(trainer::results_row({"point_mass", "medium", "LAWM", 0.5, 11, ev.mean, ev.std, 6}) == row);
}

TEST_CASE("results rows") {
  trainer::RunReport r{"pendulum", "expert", "C-LAP (Oracle)", 1.0, 3, 12.345678, 0.5, 10};
  CHECK(trainer::results_row(r) == "pendulum,expert,C-LAP (Oracle),1,3,12.3457,0.5000");
  r.labeled_fraction = 0.05;
  CHECK(trainer::results_row(r).find(",0.05,") != std::string::npos);
}

TEST_CASE("a short run improves on the untrained policy") {
  auto cfg = tiny_config(corpus_dir());
  cfg.model.stoch_size = 4;
  cfg.model.deter_size = 16;
  cfg.model.embed_size = 16;
  cfg.model.hidden_units = 32;
  cfg.model.mlp_units = 32;
  cfg.model.batch_size = 8;
  cfg.model.window = 8;
  cfg.model.learning_rate = 1e-3;
  cfg.data.labeled_fraction = 1.0;
  cfg.run.model_warmup = 1000;
  trainer::Trainer t(cfg, trainer::prepare_corpus(cfg));
  const double before = t.evaluate(5).mean;
  for (int i = 0; i < 2000; ++i) t.train_step();
  const double after = t.evaluate(5).mean;
  CHECK(after > before);
}
