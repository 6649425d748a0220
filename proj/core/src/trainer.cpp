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

#include "lawm/archive.hpp"
#include "lawm/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace lawm::trainer {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using ad::Matrix;

Eigen::VectorXd bound_of(const data::CorpusMeta& meta) {
  if (meta.action_bound.size() != static_cast<std::size_t>(meta.act_dim)) {
    throw DataError("corpus meta.json: action_bound does not match act_dim");
  }
  return Eigen::Map<const Eigen::VectorXd>(meta.action_bound.data(), meta.act_dim);
}

std::vector<Matrix> rows_of(const std::vector<wm::FilterResult>& filters, bool deter) {
  std::vector<Matrix> out;
  for (const auto& f : filters) {
    out.push_back(deter ? f.posterior_stack.deter.value() : f.posterior_stack.stoch.value());
  }
  return out;
}

Matrix stack(const std::vector<Matrix>& parts) {
  ad::Index rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Matrix out(rows, parts.front().cols());
  ad::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p;
    r += p.rows();
  }
  return out;
}

Json parse_meta(const Archive& archive, const fs::path& path) {
  try {
    return Json::parse(archive.meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad checkpoint metadata: " + e.what(), 0);
  }
}

std::string checkpoint_name(int step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_%08d.lawm", step);
  return buf;
}

std::vector<fs::path> list_checkpoints(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("ckpt_", 0) == 0 && e.path().extension() == ".lawm") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void prune_checkpoints(const fs::path& dir, int keep) {
  auto all = list_checkpoints(dir);
  while (static_cast<int>(all.size()) > keep) {
    fs::remove(all.front());
    all.erase(all.begin());
  }
}

// Keeps only log lines whose step does not exceed `step`.
void truncate_log(const fs::path& path, int step) {
  if (!fs::exists(path)) return;
  std::ifstream in(path);
  std::vector<std::string> kept;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("step")) continue;
    if (j["step"].get<int>() <= step) kept.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : kept) out << l << '\n';
}

std::string format_double(double v, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

std::string metrics_json(const StepMetrics& m, double wall_time) {
  Json j;
  j["step"] = m.step;
  j["obs_recon"] = m.loss.obs_recon;
  j["action_recon"] = m.loss.action_recon;
  j["state_kl"] = m.loss.state_kl;
  j["action_kl"] = m.loss.action_kl;
  j["reward_nll"] = m.loss.reward_nll;
  j["total"] = m.loss.total;
  j["mask_fraction"] = m.loss.mask_fraction;
  j["model_grad_norm"] = m.model_grad_norm;
  j["agent_updated"] = m.agent_updated;
  j["actor_loss"] = m.agent.actor_loss;
  j["critic_loss"] = m.agent.critic_loss;
  j["imagined_return"] = m.agent.mean_return;
  j["entropy"] = m.agent.entropy;
  j["wall_time"] = wall_time;
  return j.dump();
}

Trainer::Trainer(const ExperimentConfig& config, data::Corpus corpus)
    : config_(config),
      corpus_(std::make_unique<data::Corpus>(std::move(corpus))),
      model_noise_(substream_seed(config.run.seed, "noise.model")),
      agent_noise_(substream_seed(config.run.seed, "noise.agent")) {
  config_.validate();
  if (corpus_->size() == 0) throw DataError("training corpus is empty");
  const auto& meta = corpus_->meta;
  model_ = std::make_unique<wm::WorldModel>(config_.model, meta.obs_dim, meta.act_dim, bound_of(meta),
                                            substream_seed(config_.run.seed, "model"));
  agent_ = std::make_unique<agent::Agent>(config_.agent, config_.model, substream_seed(config_.run.seed, "agent"));
  nn::Adam::Options opt;
  opt.learning_rate = config_.model.learning_rate;
  opt.clip_norm = config_.model.grad_clip;
  model_opt_ = nn::Adam(opt);
  sampler_ = std::make_unique<data::WindowSampler>(*corpus_, config_.model.window,
                                                   substream_seed(config_.run.seed, "data"));
  free_nats_ = resolve_free_nats(config_.model, meta.kind);
}

bool Trainer::agent_active() const {
  return step_ >= config_.run.model_warmup && step_ >= config_.run.pretrain_model_steps;
}

StepMetrics Trainer::train_step() {
  StepMetrics metrics;
  const auto batch = sampler_->sample(config_.model.batch_size);
  const auto options = objectives::loss_options(config_.model, free_nats_, true);
  const auto params = nn::mutable_params(model_->parameters());

  ad::Tape tape;
  auto loss = objectives::model_objective(tape, *model_, batch, options, model_noise_);
  if (!loss.breakdown.finite()) {
    throw NumericError("non-finite world-model loss at step " + std::to_string(step_ + 1) +
                       "; last good checkpoint: " +
                       (last_checkpoint_.empty() ? std::string("none") : last_checkpoint_.string()));
  }
  nn::zero_grads(params);
  tape.backward(loss.total);
  metrics.model_grad_norm = model_opt_.step(params);
  metrics.loss = loss.breakdown;

  if (agent_active()) {
    agent::StartStates start{stack(rows_of(loss.filters, true)), stack(rows_of(loss.filters, false))};
    metrics.agent = agent_->update(*model_, start, agent_noise_);
    metrics.agent_updated = true;
  }
  metrics.step = ++step_;
  return metrics;
}

agent::EvalResult Trainer::evaluate(int episodes) const {
  return agent::evaluate_policy(*model_, *agent_, corpus_->meta.env, episodes,
                                substream_seed(config_.run.seed, "eval"));
}

void Trainer::save_checkpoint(const fs::path& path) {
  Archive archive;
  Json meta;
  meta["kind"] = "train";
  meta["config"] = Json::parse(config_.to_json());
  meta["env"] = corpus_->meta.env;
  meta["dataset"] = corpus_->meta.kind;
  meta["obs_dim"] = corpus_->meta.obs_dim;
  meta["act_dim"] = corpus_->meta.act_dim;
  meta["action_bound"] = corpus_->meta.action_bound;
  meta["step"] = step_;
  meta["best_eval"] = best_eval_ ? Json(*best_eval_) : Json(nullptr);
  meta["rng"] = {{"sampler", serialize_engine(sampler_->engine())},
                 {"model_noise", model_noise_.serialize()},
                 {"agent_noise", agent_noise_.serialize()}};
  archive.meta = meta.dump();
  nn::save_parameters(archive, model_->parameters());
  nn::save_parameters(archive, agent_->parameters());
  nn::save_optimizer(archive, "opt.model", model_opt_);
  nn::save_optimizer(archive, "opt.actor", agent_->actor_optimizer());
  nn::save_optimizer(archive, "opt.critic", agent_->critic_optimizer());
  write_archive(path, archive);
  last_checkpoint_ = path;
}

void Trainer::load_checkpoint(const fs::path& path) {
  const Archive archive = read_archive(path);
  const Json meta = parse_meta(archive, path);
  if (meta.value("kind", "") != "train") throw FormatError(path.string() + ": not a training checkpoint", 0);
  const ExperimentConfig saved = ExperimentConfig::from_json(meta["config"].dump());
  if (saved.to_json() != config_.to_json()) {
    throw ConfigError(path.string() + ": checkpoint was written with a different config");
  }
  nn::load_parameters(archive, model_->parameters());
  nn::load_parameters(archive, agent_->parameters());
  nn::load_optimizer(archive, "opt.model", model_opt_, model_->parameters().size());
  nn::load_optimizer(archive, "opt.actor", agent_->actor_optimizer(), agent_->policy_parameters().size());
  nn::load_optimizer(archive, "opt.critic", agent_->critic_optimizer(), agent_->value_parameters().size());
  deserialize_engine(sampler_->engine(), meta["rng"]["sampler"].get<std::string>());
  model_noise_.deserialize(meta["rng"]["model_noise"].get<std::string>());
  agent_noise_.deserialize(meta["rng"]["agent_noise"].get<std::string>());
  step_ = meta["step"].get<int>();
  best_eval_.reset();
  if (!meta["best_eval"].is_null()) best_eval_ = meta["best_eval"].get<double>();
  last_checkpoint_ = path;
}

data::Corpus prepare_corpus(const ExperimentConfig& config) {
  if (config.data.corpus.empty()) throw ConfigError("data.corpus must name a corpus directory");
  data::Corpus corpus = data::read_corpus(config.data.corpus);
  const auto& history = corpus.meta.provenance;
  // Corpora that were already split (and possibly pseudo-labeled) keep their labels.
  const bool already_split = std::find(history.begin(), history.end(), "split") != history.end() ||
                             corpus.labeled_count() < corpus.size();
  if (!already_split) {
    corpus = data::split_action_labels(corpus, config.data.labeled_fraction, config.data.split_seed);
  }
  if (config.data.labeled_only) {
    std::vector<data::Trajectory> kept;
    for (auto& t : corpus.trajectories) {
      if (t.has_actions()) kept.push_back(std::move(t));
    }
    corpus.trajectories = std::move(kept);
    corpus.meta.provenance.push_back("labeled-only");
  }
  return corpus;
}

LoadedPolicy load_policy(const fs::path& checkpoint) {
  const Archive archive = read_archive(checkpoint);
  const Json meta = parse_meta(archive, checkpoint);
  if (meta.value("kind", "") != "train") throw FormatError(checkpoint.string() + ": not a training checkpoint", 0);
  LoadedPolicy out;
  out.config = ExperimentConfig::from_json(meta["config"].dump());
  out.env = meta["env"].get<std::string>();
  const auto bound = meta["action_bound"].get<std::vector<double>>();
  const auto seed = out.config.run.seed;
  out.model = std::make_unique<wm::WorldModel>(out.config.model, meta["obs_dim"].get<ad::Index>(),
                                               meta["act_dim"].get<ad::Index>(),
                                               Eigen::Map<const Eigen::VectorXd>(bound.data(), bound.size()),
                                               substream_seed(seed, "model"));
  out.agent = std::make_unique<agent::Agent>(out.config.agent, out.config.model, substream_seed(seed, "agent"));
  nn::load_parameters(archive, out.model->parameters());
  nn::load_parameters(archive, out.agent->parameters());
  return out;
}

std::string results_row(const RunReport& r) {
  std::ostringstream os;
  os << r.env << ',' << r.dataset << ',' << r.method << ',' << format_double(r.labeled_fraction, "%g") << ','
     << r.seed << ',' << format_double(r.mean, "%.4f") << ',' << format_double(r.std, "%.4f");
  return os.str();
}

void append_results(const fs::path& csv, const RunReport& report) {
  const bool fresh = !fs::exists(csv) || fs::file_size(csv) == 0;
  std::ofstream out(csv, std::ios::app);
  if (!out) throw Error("cannot open " + csv.string() + " for writing");
  if (fresh) out << kResultsHeader << '\n';
  out << results_row(report) << '\n';
}

fs::path latest_checkpoint(const fs::path& run_dir) {
  const auto all = list_checkpoints(run_dir / "checkpoints");
  return all.empty() ? fs::path{} : all.back();
}

RunReport run_experiment(const ExperimentConfig& config, const fs::path& run_dir, const RunOptions& options) {
  config.validate();
  const fs::path ckpt_dir = run_dir / "checkpoints";
  fs::create_directories(ckpt_dir);
  {
    std::ofstream cfg(run_dir / "config.json", std::ios::trunc);
    cfg << config.to_json() << '\n';
  }
  Trainer trainer(config, prepare_corpus(config));
  const fs::path log_path = run_dir / "metrics.jsonl";
  if (options.resume) {
    const fs::path latest = latest_checkpoint(run_dir);
    if (!latest.empty()) trainer.load_checkpoint(latest);
    truncate_log(log_path, trainer.step());
  } else {
    std::ofstream(log_path, std::ios::trunc);
  }

  RunReport report;
  report.env = trainer.corpus().meta.env;
  report.dataset = trainer.corpus().meta.kind;
  report.method = method_label(config);
  report.labeled_fraction = config.data.labeled_fraction;
  report.seed = config.run.seed;
  report.mean = std::nan("");
  report.std = std::nan("");

  std::ofstream log(log_path, std::ios::app);
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  const int total = config.run.total_steps;
  while (trainer.step() < total) {
    if (options.stop_after >= 0 && trainer.step() >= options.stop_after) {
      trainer.save_checkpoint(ckpt_dir / checkpoint_name(trainer.step()));
      report.steps = trainer.step();
      return report;
    }
    const StepMetrics m = trainer.train_step();
    log << metrics_json(m, elapsed()) << '\n';
    if (m.step % config.run.eval_interval == 0 || m.step == total) {
      const auto ev = trainer.evaluate(config.run.eval_episodes);
      Json line;
      line["step"] = m.step;
      line["eval_mean"] = ev.mean;
      line["eval_std"] = ev.std;
      line["wall_time"] = elapsed();
      log << line.dump() << '\n';
      log.flush();
      report.mean = ev.mean;
      report.std = ev.std;
      if (!options.quiet) {
        std::cerr << "step " << m.step << " eval " << format_double(ev.mean, "%.2f") << " +- "
                  << format_double(ev.std, "%.2f") << '\n';
      }
      if (!trainer.best_eval() || ev.mean > *trainer.best_eval()) {
        trainer.set_best_eval(ev.mean);
        trainer.save_checkpoint(ckpt_dir / "best.lawm");
      }
      trainer.save_checkpoint(ckpt_dir / checkpoint_name(m.step));
      prune_checkpoints(ckpt_dir, config.run.keep_checkpoints);
    }
  }
  report.steps = trainer.step();
  if (std::isnan(report.mean)) {
    const auto ev = trainer.evaluate(config.run.eval_episodes);
    report.mean = ev.mean;
    report.std = ev.std;
  }
  append_results(run_dir / "results.csv", report);
  return report;
}

}  // namespace lawm::trainer
