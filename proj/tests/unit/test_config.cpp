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

#include "lawm/config.hpp"

#include "lawm/error.hpp"

#include <doctest.h>

#include <json.hpp>

using lawm::ExperimentConfig;

TEST_CASE("defaults follow the published hyperparameter tables") {
  const ExperimentConfig c;
  CHECK(c.model.stoch_size == 64);
  CHECK(c.model.deter_size == 512);
  CHECK(c.model.embed_size == 512);
  CHECK(c.model.latent_action_size == 12);
  CHECK(c.model.hidden_units == 640);
  CHECK(c.model.mlp_units == 512);
  CHECK(c.model.mlp_layers == 2);
  CHECK(c.model.prior_units == 512);
  CHECK(c.model.prior_layers == 2);
  CHECK(c.model.idm_units == 512);
  CHECK(c.model.idm_layers == 3);
  CHECK(c.model.prior == lawm::PriorMode::kLawm);
  CHECK(c.model.learning_rate == 3e-4);
  CHECK(c.model.batch_size == 64);
  CHECK(c.model.window == 50);
  CHECK(c.agent.policy_units == 256);
  CHECK(c.agent.policy_layers == 3);
  CHECK(c.agent.value_units == 256);
  CHECK(c.agent.value_layers == 3);
  CHECK(c.agent.learning_rate == 8e-5);
  CHECK(c.agent.entropy_weight == 0.01);
  CHECK(c.agent.horizon == 5);
  CHECK(c.agent.discount == 0.99);
  CHECK(c.agent.lambda == 0.95);
  CHECK(c.agent.latent_bound == 3.0);
  CHECK(c.data.labeled_fraction == 0.05);
  CHECK(c.idm.units == 1024);
  CHECK(c.idm.layers == 3);
  CHECK(c.idm.dropout == 0.1);
  CHECK(c.idm.batch_size == 1024);
  CHECK(c.idm.window == 5);
  CHECK(c.idm.steps == 100000);
  CHECK(c.idm.learning_rate == 1e-4);
  CHECK(c.run.model_warmup == 1000);
  CHECK(c.run.keep_checkpoints == 3);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("free nats resolve by dataset kind") {
  lawm::ModelConfig m;
  CHECK(lawm::resolve_free_nats(m, "medium-replay") == 1.0);
  CHECK(lawm::resolve_free_nats(m, "explore") == 1.0);
  CHECK(lawm::resolve_free_nats(m, "medium") == 0.0);
  CHECK(lawm::resolve_free_nats(m, "expert") == 0.0);
  m.free_nats = 0.5;
  CHECK(lawm::resolve_free_nats(m, "medium") == 0.5);
}

TEST_CASE("JSON round trip is exact") {
  ExperimentConfig c;
  c.model.prior = lawm::PriorMode::kClap;
  c.model.free_nats = 0.25;
  c.data.corpus = "some/dir";
  c.run.seed = 123456789012345ULL;
  const auto back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.model.prior == lawm::PriorMode::kClap);
  CHECK(back.model.free_nats.value() == 0.25);
  CHECK(back.run.seed == 123456789012345ULL);
}

TEST_CASE("partial JSON merges onto defaults") {
  const auto c = ExperimentConfig::from_json(R"({"model": {"latent_action_size": 4}})");
  CHECK(c.model.latent_action_size == 4);
  CHECK(c.model.deter_size == 512);
  CHECK_FALSE(c.model.free_nats.has_value());
}

TEST_CASE("unknown keys, wrong types and bad versions are rejected") {
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"model": {"latent_actions": 4}})"), lawm::ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"extra": 1})"), lawm::ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"model": {"window": "fifty"}})"), lawm::ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"schema_version": 2})"), lawm::ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json("{not json"), lawm::ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"model": {"prior": "other"}})"), lawm::ConfigError);
}

TEST_CASE("overrides address existing keys only") {
  ExperimentConfig c;
  c.apply_override("model.latent_action_size=7");
  c.apply_override("model.prior=clap");
  c.apply_override("data.corpus=data/point_mass/medium");
  c.apply_override("data.labeled_only=true");
  c.apply_override("model.free_nats=1.5");
  CHECK(c.model.latent_action_size == 7);
  CHECK(c.model.prior == lawm::PriorMode::kClap);
  CHECK(c.data.corpus == "data/point_mass/medium");
  CHECK(c.data.labeled_only);
  CHECK(c.model.free_nats.value() == 1.5);
  c.apply_override("model.free_nats=null");
  CHECK_FALSE(c.model.free_nats.has_value());
  CHECK_THROWS_AS(c.apply_override("model.nope=1"), lawm::ConfigError);
  CHECK_THROWS_AS(c.apply_override("model"), lawm::ConfigError);
  CHECK_THROWS_AS(c.apply_override("model.window=abc"), lawm::ConfigError);
}

TEST_CASE("validation catches out-of-range values") {
  auto invalid = [](auto mutate) {
    ExperimentConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), lawm::ConfigError);
  };
  invalid([](ExperimentConfig& c) { c.model.latent_action_size = 0; });
  invalid([](ExperimentConfig& c) { c.model.window = 1; });
  invalid([](ExperimentConfig& c) { c.model.min_std = 0.0; });
  invalid([](ExperimentConfig& c) { c.model.free_nats = -1.0; });
  invalid([](ExperimentConfig& c) { c.agent.discount = 1.5; });
  invalid([](ExperimentConfig& c) { c.agent.lambda = -0.1; });
  invalid([](ExperimentConfig& c) { c.agent.horizon = 0; });
  invalid([](ExperimentConfig& c) { c.data.labeled_fraction = 0.0; });
  invalid([](ExperimentConfig& c) { c.data.labeled_fraction = 1.2; });
  invalid([](ExperimentConfig& c) { c.idm.window = 4; });
  invalid([](ExperimentConfig& c) { c.idm.dropout = 1.0; });
  invalid([](ExperimentConfig& c) { c.run.eval_interval = 0; });
}

TEST_CASE("method labels") {
  ExperimentConfig c;
  CHECK(lawm::method_label(c) == "LAWM");
  c.model.prior = lawm::PriorMode::kClap;
  CHECK(lawm::method_label(c) == "C-LAP");
  c.data.labeled_fraction = 1.0;
  CHECK(lawm::method_label(c) == "C-LAP (Oracle)");
  c.model.prior = lawm::PriorMode::kLawm;
  c.data.labeled_fraction = 0.05;
  c.data.labeled_only = true;
  CHECK(lawm::method_label(c) == "LAWM (labeled-only)");
  c.run.method = "custom";
  CHECK(lawm::method_label(c) == "custom");
}
