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

#include <json.hpp>

#include <cmath>

namespace lawm {
namespace {

using Json = nlohmann::ordered_json;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void read(const Json& j, const std::string& path, int& out) {
  if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
  out = j.get<int>();
}

void read(const Json& j, const std::string& path, std::uint64_t& out) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    throw ConfigError(path + ": expected a non-negative integer");
  }
  out = j.get<std::uint64_t>();
}

void read(const Json& j, const std::string& path, double& out) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  out = j.get<double>();
}

void read(const Json& j, const std::string& path, bool& out) {
  if (!j.is_boolean()) throw ConfigError(path + ": expected true or false");
  out = j.get<bool>();
}

void read(const Json& j, const std::string& path, std::string& out) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  out = j.get<std::string>();
}

void read(const Json& j, const std::string& path, std::optional<double>& out) {
  if (j.is_null()) {
    out.reset();
    return;
  }
  if (!j.is_number()) throw ConfigError(path + ": expected a number or null");
  out = j.get<double>();
}

void read(const Json& j, const std::string& path, PriorMode& out) {
  if (!j.is_string()) throw ConfigError(path + ": expected \"lawm\" or \"clap\"");
  try {
    out = parse_prior_mode(j.get<std::string>());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Overlays `user` on `base`, rejecting keys that `base` does not define.
void merge_strict(Json& base, const Json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key_path = join(path, it.key());
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key_path + "'");
    Json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_strict(slot, it.value(), key_path);
    } else {
      if (it.value().is_object()) throw ConfigError(key_path + ": unexpected object");
      slot = it.value();
    }
  }
}

#define LAWM_FIELD(block, field) j[#block][#field] = c.block.field
#define LAWM_READ(block, field) read(j.at(#block).at(#field), #block "." #field, c.block.field)

Json to_json_value(const ExperimentConfig& c) {
  Json j;
  j["schema_version"] = c.schema_version;
  LAWM_FIELD(model, stoch_size);
  LAWM_FIELD(model, deter_size);
  LAWM_FIELD(model, embed_size);
  LAWM_FIELD(model, latent_action_size);
  LAWM_FIELD(model, hidden_units);
  LAWM_FIELD(model, mlp_units);
  LAWM_FIELD(model, mlp_layers);
  LAWM_FIELD(model, prior_units);
  LAWM_FIELD(model, prior_layers);
  LAWM_FIELD(model, idm_units);
  LAWM_FIELD(model, idm_layers);
  j["model"]["prior"] = to_string(c.model.prior);
  LAWM_FIELD(model, min_std);
  LAWM_FIELD(model, learning_rate);
  LAWM_FIELD(model, batch_size);
  LAWM_FIELD(model, window);
  j["model"]["free_nats"] = c.model.free_nats ? Json(*c.model.free_nats) : Json(nullptr);
  LAWM_FIELD(model, free_nats_action_kl);
  LAWM_FIELD(model, grad_clip);
  LAWM_FIELD(model, imagine_mean_action);

  LAWM_FIELD(agent, policy_units);
  LAWM_FIELD(agent, policy_layers);
  LAWM_FIELD(agent, value_units);
  LAWM_FIELD(agent, value_layers);
  LAWM_FIELD(agent, learning_rate);
  LAWM_FIELD(agent, entropy_weight);
  LAWM_FIELD(agent, horizon);
  LAWM_FIELD(agent, discount);
  LAWM_FIELD(agent, lambda);
  LAWM_FIELD(agent, latent_bound);
  LAWM_FIELD(agent, grad_clip);

  LAWM_FIELD(data, corpus);
  LAWM_FIELD(data, labeled_fraction);
  LAWM_FIELD(data, split_seed);
  LAWM_FIELD(data, labeled_only);

  LAWM_FIELD(gen, env);
  LAWM_FIELD(gen, kind);
  LAWM_FIELD(gen, n_trajectories);
  LAWM_FIELD(gen, seed);

  LAWM_FIELD(idm, units);
  LAWM_FIELD(idm, layers);
  LAWM_FIELD(idm, dropout);
  LAWM_FIELD(idm, learning_rate);
  LAWM_FIELD(idm, batch_size);
  LAWM_FIELD(idm, window);
  LAWM_FIELD(idm, steps);
  LAWM_FIELD(idm, seed);

  LAWM_FIELD(run, seed);
  LAWM_FIELD(run, total_steps);
  LAWM_FIELD(run, eval_interval);
  LAWM_FIELD(run, eval_episodes);
  LAWM_FIELD(run, model_warmup);
  LAWM_FIELD(run, pretrain_model_steps);
  LAWM_FIELD(run, keep_checkpoints);
  LAWM_FIELD(run, method);
  return j;
}

ExperimentConfig from_json_value(const Json& j) {
  ExperimentConfig c;
  read(j.at("schema_version"), "schema_version", c.schema_version);
  LAWM_READ(model, stoch_size);
  LAWM_READ(model, deter_size);
  LAWM_READ(model, embed_size);
  LAWM_READ(model, latent_action_size);
  LAWM_READ(model, hidden_units);
  LAWM_READ(model, mlp_units);
  LAWM_READ(model, mlp_layers);
  LAWM_READ(model, prior_units);
  LAWM_READ(model, prior_layers);
  LAWM_READ(model, idm_units);
  LAWM_READ(model, idm_layers);
  LAWM_READ(model, prior);
  LAWM_READ(model, min_std);
  LAWM_READ(model, learning_rate);
  LAWM_READ(model, batch_size);
  LAWM_READ(model, window);
  LAWM_READ(model, free_nats);
  LAWM_READ(model, free_nats_action_kl);
  LAWM_READ(model, grad_clip);
  LAWM_READ(model, imagine_mean_action);

  LAWM_READ(agent, policy_units);
  LAWM_READ(agent, policy_layers);
  LAWM_READ(agent, value_units);
  LAWM_READ(agent, value_layers);
  LAWM_READ(agent, learning_rate);
  LAWM_READ(agent, entropy_weight);
  LAWM_READ(agent, horizon);
  LAWM_READ(agent, discount);
  LAWM_READ(agent, lambda);
  LAWM_READ(agent, latent_bound);
  LAWM_READ(agent, grad_clip);

  LAWM_READ(data, corpus);
  LAWM_READ(data, labeled_fraction);
  LAWM_READ(data, split_seed);
  LAWM_READ(data, labeled_only);

  LAWM_READ(gen, env);
  LAWM_READ(gen, kind);
  LAWM_READ(gen, n_trajectories);
  LAWM_READ(gen, seed);

  LAWM_READ(idm, units);
  LAWM_READ(idm, layers);
  LAWM_READ(idm, dropout);
  LAWM_READ(idm, learning_rate);
  LAWM_READ(idm, batch_size);
  LAWM_READ(idm, window);
  LAWM_READ(idm, steps);
  LAWM_READ(idm, seed);

  LAWM_READ(run, seed);
  LAWM_READ(run, total_steps);
  LAWM_READ(run, eval_interval);
  LAWM_READ(run, eval_episodes);
  LAWM_READ(run, model_warmup);
  LAWM_READ(run, pretrain_model_steps);
  LAWM_READ(run, keep_checkpoints);
  LAWM_READ(run, method);
  return c;
}

#undef LAWM_FIELD
#undef LAWM_READ

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

std::string to_string(PriorMode mode) { return mode == PriorMode::kLawm ? "lawm" : "clap"; }

PriorMode parse_prior_mode(std::string_view name) {
  if (name == "lawm") return PriorMode::kLawm;
  if (name == "clap") return PriorMode::kClap;
  throw ConfigError("unknown prior mode '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  require(schema_version == kSchemaVersion, "schema_version must be " + std::to_string(kSchemaVersion));
  const ModelConfig& m = model;
  require(m.stoch_size >= 1 && m.deter_size >= 1 && m.embed_size >= 1, "model: latent sizes must be >= 1");
  require(m.latent_action_size >= 1, "model.latent_action_size must be >= 1");
  require(m.hidden_units >= 1 && m.mlp_units >= 1 && m.prior_units >= 1 && m.idm_units >= 1,
          "model: hidden widths must be >= 1");
  require(m.mlp_layers >= 1 && m.prior_layers >= 1 && m.idm_layers >= 1, "model: layer counts must be >= 1");
  require(m.min_std > 0.0, "model.min_std must be > 0");
  require(m.learning_rate > 0.0, "model.learning_rate must be > 0");
  require(m.batch_size >= 1, "model.batch_size must be >= 1");
  require(m.window >= 2, "model.window must be >= 2");
  require(!m.free_nats || (*m.free_nats >= 0.0 && std::isfinite(*m.free_nats)), "model.free_nats must be >= 0");
  require(m.grad_clip >= 0.0, "model.grad_clip must be >= 0");

  const AgentConfig& a = agent;
  require(a.policy_units >= 1 && a.policy_layers >= 1, "agent: policy shape must be >= 1");
  require(a.value_units >= 1 && a.value_layers >= 1, "agent: value shape must be >= 1");
  require(a.learning_rate > 0.0, "agent.learning_rate must be > 0");
  require(a.entropy_weight >= 0.0, "agent.entropy_weight must be >= 0");
  require(a.horizon >= 1, "agent.horizon must be >= 1");
  require(a.discount >= 0.0 && a.discount <= 1.0, "agent.discount must lie in [0, 1]");
  require(a.lambda >= 0.0 && a.lambda <= 1.0, "agent.lambda must lie in [0, 1]");
  require(a.latent_bound > 0.0, "agent.latent_bound must be > 0");
  require(a.grad_clip >= 0.0, "agent.grad_clip must be >= 0");

  require(data.labeled_fraction > 0.0 && data.labeled_fraction <= 1.0, "data.labeled_fraction must lie in (0, 1]");

  require(gen.n_trajectories >= 1, "gen.n_trajectories must be >= 1");

  require(idm.units >= 1 && idm.layers >= 1, "idm: shape must be >= 1");
  require(idm.dropout >= 0.0 && idm.dropout < 1.0, "idm.dropout must lie in [0, 1)");
  require(idm.learning_rate > 0.0, "idm.learning_rate must be > 0");
  require(idm.batch_size >= 1 && idm.steps >= 0, "idm: batch_size >= 1 and steps >= 0 required");
  require(idm.window >= 3 && idm.window % 2 == 1, "idm.window must be odd and >= 3");

  require(run.total_steps >= 0, "run.total_steps must be >= 0");
  require(run.eval_interval >= 1, "run.eval_interval must be >= 1");
  require(run.eval_episodes >= 1, "run.eval_episodes must be >= 1");
  require(run.model_warmup >= 0 && run.pretrain_model_steps >= 0, "run: warmup counts must be >= 0");
  require(run.keep_checkpoints >= 1, "run.keep_checkpoints must be >= 1");
}

std::string ExperimentConfig::to_json() const { return to_json_value(*this).dump(2); }

ExperimentConfig ExperimentConfig::from_json(std::string_view text) {
  Json user;
  try {
    user = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Json merged = to_json_value(ExperimentConfig{});
  merge_strict(merged, user, "");
  ExperimentConfig c = from_json_value(merged);
  c.validate();
  return c;
}

void ExperimentConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  Json user = Json::object();
  Json* slot = &user;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
    if (dot == std::string::npos) {
      (*slot)[part] = value;
      break;
    }
    slot = &(*slot)[part];
    start = dot + 1;
  }
  Json merged = to_json_value(*this);
  merge_strict(merged, user, "");
  ExperimentConfig c = from_json_value(merged);
  c.validate();
  *this = c;
}

double resolve_free_nats(const ModelConfig& model, std::string_view dataset_kind) {
  if (model.free_nats) return *model.free_nats;
  return (dataset_kind == "medium-replay" || dataset_kind == "explore") ? 1.0 : 0.0;
}

std::string method_label(const ExperimentConfig& config) {
  if (!config.run.method.empty()) return config.run.method;
  std::string label = config.model.prior == PriorMode::kLawm ? "LAWM" : "C-LAP";
  if (config.data.labeled_fraction >= 1.0) label += " (Oracle)";
  if (config.data.labeled_only) label += " (labeled-only)";
  return label;
}

}  // namespace lawm
