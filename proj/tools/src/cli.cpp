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

#include "lawm/cli.hpp"

#include "lawm/agent.hpp"
#include "lawm/config.hpp"
#include "lawm/data.hpp"
#include "lawm/envs.hpp"
#include "lawm/error.hpp"
#include "lawm/idm.hpp"
#include "lawm/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

namespace lawm::cli {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// Shared --config / --set / --run-dir handling.
struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string run_dir;

  void attach(CLI::App* app, bool with_config = true) {
    if (with_config) {
      app->add_option("--config", config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
      app->add_option("--set", overrides, "Override a config key, e.g. model.latent_action_size=12")
          ->take_all()
          ->allow_extra_args(false);
    }
    app->add_option("--run-dir", run_dir, "Output directory (default: $LAWM_RUN_ROOT/<timestamp>-<hash>)");
  }

  std::string bytes() const { return config_path.empty() ? std::string{} : read_file(config_path); }

  ExperimentConfig load() const {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : ExperimentConfig::from_json(bytes());
    for (const auto& o : overrides) cfg.apply_override(o);
    return cfg;
  }

  fs::path resolve_run_dir() const {
    fs::path dir = run_dir.empty() ? make_run_dir(config_hash(bytes(), overrides)) : fs::path(run_dir);
    fs::create_directories(dir);
    return dir;
  }
};

data::CorpusMeta require_meta(const data::Corpus& corpus) {
  if (corpus.size() == 0) throw DataError("corpus is empty");
  return corpus.meta;
}

Eigen::VectorXd bound_of(const data::CorpusMeta& meta) {
  return Eigen::Map<const Eigen::VectorXd>(meta.action_bound.data(), static_cast<Eigen::Index>(meta.action_bound.size()));
}

struct GenData {
  ConfigArgs cfg;
  std::string env, kind, out;
  std::optional<int> n;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    cfg.attach(app);
    app->add_option("--env", env, "Environment: point_mass | pendulum");
    app->add_option("--kind", kind, "Dataset kind: expert | medium | medium-replay | explore");
    app->add_option("--n", n, "Number of trajectories")->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "Generator seed");
    app->add_option("--out", out, "Dataset root (default: <run-dir>/data)");
  }

  int run(std::ostream& os) const {
    ExperimentConfig c = cfg.load();
    if (!env.empty()) c.gen.env = env;
    if (!kind.empty()) c.gen.kind = kind;
    if (n) c.gen.n_trajectories = *n;
    if (seed) c.gen.seed = *seed;
    c.validate();
    const fs::path root = out.empty() ? cfg.resolve_run_dir() / "data" : fs::path(out);
    const fs::path dir = envs::generate_dataset(c.gen.env, envs::parse_policy_kind(c.gen.kind), c.gen.n_trajectories,
                                                c.gen.seed, root);
    os << "wrote " << c.gen.n_trajectories << " trajectories to " << dir.string() << '\n';
    return kExitOk;
  }
};

struct Split {
  std::string corpus, out;
  double fraction = 0.05;
  std::uint64_t seed = 0;

  void attach(CLI::App* app) {
    app->add_option("--corpus", corpus, "Fully labeled corpus directory")->required();
    app->add_option("--fraction", fraction, "Fraction of trajectories that keep their actions")
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--seed", seed, "Split seed");
    app->add_option("--out", out, "Write the split corpus to this new directory");
  }

  int run(std::ostream& os) const {
    const data::Corpus split = data::split_action_labels(data::read_corpus(corpus), fraction, seed);
    const std::size_t labeled = split.labeled_count();
    os << "labeled: " << labeled << '\n' << "unlabeled: " << split.size() - labeled << '\n';
    if (!out.empty()) data::write_corpus(split, out);
    return kExitOk;
  }
};

struct Stats {
  std::string corpus;

  void attach(CLI::App* app) { app->add_option("--corpus", corpus, "Corpus directory")->required(); }

  int run(std::ostream& os) const {
    const data::Corpus c = data::read_corpus(corpus);
    require_meta(c);
    const data::CorpusStats s = data::compute_stats(c);
    const double values[] = {s.mean, s.std, s.min, s.p25, s.median, s.p75, s.max};
    std::string header, row;
    for (int i = 0; i < 7; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%12s", data::kStatsColumns[i]);
      header += buf;
      std::snprintf(buf, sizeof(buf), "%12.4f", values[i]);
      row += buf;
    }
    os << header << '\n' << row << '\n';
    return kExitOk;
  }
};

struct Hist {
  ConfigArgs cfg;
  std::string corpus, out;
  int bins = 20;

  void attach(CLI::App* app) {
    cfg.attach(app, false);
    app->add_option("--corpus", corpus, "Corpus directory")->required();
    app->add_option("--bins", bins, "Number of uniform bins")->check(CLI::PositiveNumber);
    app->add_option("--out", out, "CSV path (default: <run-dir>/histogram.csv)");
  }

  int run(std::ostream& os) const {
    const data::Corpus c = data::read_corpus(corpus);
    require_meta(c);
    const fs::path path = out.empty() ? cfg.resolve_run_dir() / "histogram.csv" : fs::path(out);
    data::emit_histogram(c, bins, path);
    os << "wrote " << path.string() << '\n';
    return kExitOk;
  }
};

struct TrainIdm {
  ConfigArgs cfg;
  std::string corpus, out;

  void attach(CLI::App* app) {
    cfg.attach(app);
    app->add_option("--corpus", corpus, "Corpus directory (overrides data.corpus)");
    app->add_option("--out", out, "IDM checkpoint path (default: <run-dir>/idm.lawm)");
  }

  int run(std::ostream& os) const {
    ExperimentConfig c = cfg.load();
    if (!corpus.empty()) c.data.corpus = corpus;
    c.validate();
    const data::Corpus split = trainer::prepare_corpus(c);
    const auto meta = require_meta(split);
    idm::Idm model(c.idm, meta.obs_dim, meta.act_dim, bound_of(meta), c.idm.seed);
    const auto result = idm::train_idm(model, split, c.idm);
    const fs::path dir = cfg.resolve_run_dir();
    const fs::path path = out.empty() ? dir / "idm.lawm" : fs::path(out);
    idm::save_idm(model, path);
    std::ofstream curve(dir / "idm_loss.csv");
    curve << "step,mse\n";
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i) curve << i + 1 << ',' << result.loss_curve[i] << '\n';
    os << "final training mse: " << fmt(result.final_mse, "%.6g") << '\n' << "wrote " << path.string() << '\n';
    return kExitOk;
  }
};

struct Label {
  ConfigArgs cfg;
  std::string idm_path, corpus, out;
  std::optional<double> fraction;
  std::uint64_t split_seed = 0;

  void attach(CLI::App* app) {
    cfg.attach(app, false);
    app->add_option("--idm", idm_path, "IDM checkpoint")->required()->check(CLI::ExistingFile);
    app->add_option("--corpus", corpus, "Corpus with action-free trajectories")->required();
    app->add_option("--fraction", fraction, "Split a fully labeled corpus first, keeping this fraction")
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--split-seed", split_seed, "Seed for --fraction");
    app->add_option("--out", out, "New corpus directory (default: <run-dir>/labeled)");
  }

  int run(std::ostream& os) const {
    const idm::Idm model = idm::load_idm(idm_path);
    data::Corpus source = data::read_corpus(corpus);
    if (fraction) source = data::split_action_labels(source, *fraction, split_seed);
    const fs::path dest = out.empty() ? cfg.resolve_run_dir() / "labeled" : fs::path(out);
    std::error_code ec;
    if (fs::exists(dest) && fs::equivalent(dest, corpus, ec)) {
      throw ContractError("--out must differ from --corpus; pseudo-labels are never written in place");
    }
    const data::Corpus labeled = idm::pseudo_label_corpus(model, source);
    data::write_corpus(labeled, dest);
    os << "labeled " << source.size() - source.labeled_count() << " trajectories; wrote " << dest.string() << '\n';
    return kExitOk;
  }
};

struct Train {
  ConfigArgs cfg;
  bool resume = false;
  bool verbose = false;
  int stop_after = -1;

  void attach(CLI::App* app) {
    cfg.attach(app);
    app->add_flag("--resume", resume, "Continue from the latest checkpoint in --run-dir");
    app->add_option("--stop-after", stop_after, "Checkpoint and stop after this many steps");
    app->add_flag("-v,--verbose", verbose, "Print evaluation results while training");
  }

  int run(std::ostream& os) const {
    const ExperimentConfig c = cfg.load();
    c.validate();
    if (resume && cfg.run_dir.empty()) throw ConfigError("--resume requires --run-dir");
    const fs::path dir = cfg.resolve_run_dir();
    trainer::RunOptions options;
    options.resume = resume;
    options.stop_after = stop_after;
    options.quiet = !verbose;
    const auto report = trainer::run_experiment(c, dir, options);
    os << "run directory: " << dir.string() << '\n';
    if (report.steps < c.run.total_steps) {
      os << "stopped at step " << report.steps << '\n';
    } else {
      os << trainer::kResultsHeader << '\n' << trainer::results_row(report) << '\n';
    }
    return kExitOk;
  }
};

struct Eval {
  ConfigArgs cfg;
  std::string checkpoint, env, scripted;
  bool random = false;
  int episodes = 10;
  std::uint64_t seed = 0;

  void attach(CLI::App* app) {
    cfg.attach(app, false);
    app->add_option("--checkpoint", checkpoint, "Training checkpoint to evaluate")->check(CLI::ExistingFile);
    app->add_option("--env", env, "Environment for --scripted / --random");
    app->add_option("--scripted", scripted, "Evaluate a scripted controller of this kind instead");
    app->add_flag("--random", random, "Evaluate a uniform random controller instead");
    app->add_option("--episodes", episodes, "Number of episodes")->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "Evaluation seed");
  }

  int run(std::ostream& os) const {
    agent::EvalResult result;
    std::string label;
    if (!checkpoint.empty()) {
      const auto loaded = trainer::load_policy(checkpoint);
      result = agent::evaluate_policy(*loaded.model, *loaded.agent, loaded.env, episodes, seed);
      label = method_label(loaded.config) + " on " + loaded.env;
    } else {
      if (env.empty()) throw ConfigError("eval needs --checkpoint, or --env with --scripted or --random");
      if (random) {
        agent::RandomController controller(envs::env_spec(env), substream_seed(seed, "random"));
        result = agent::evaluate(env, controller, episodes, seed);
        label = "random on " + env;
      } else if (!scripted.empty()) {
        agent::ScriptedController controller(env, envs::parse_policy_kind(scripted), seed);
        result = agent::evaluate(env, controller, episodes, seed);
        label = scripted + " controller on " + env;
      } else {
        throw ConfigError("eval needs --checkpoint, or --env with --scripted or --random");
      }
    }
    nlohmann::ordered_json j;
    j["label"] = label;
    j["episodes"] = episodes;
    j["seed"] = seed;
    j["mean"] = result.mean;
    j["std"] = result.std;
    j["normalized_returns"] = result.normalized_returns;
    std::ofstream(cfg.resolve_run_dir() / "eval.json") << j.dump(2) << '\n';
    os << label << ": " << fmt(result.mean, "%.2f") << " +- " << fmt(result.std, "%.2f") << " (" << episodes
       << " episodes)\n";
    return kExitOk;
  }
};

struct Report {
  ConfigArgs cfg;
  std::string runs, out;

  void attach(CLI::App* app) {
    cfg.attach(app, false);
    app->add_option("--runs", runs, "Directory searched for results.csv files (default: $LAWM_RUN_ROOT)");
    app->add_option("--out", out, "Aggregated CSV path (default: <run-dir>/report.csv)");
  }

  int run(std::ostream& os) const {
    const char* root_env = std::getenv("LAWM_RUN_ROOT");
    const fs::path root = !runs.empty() ? fs::path(runs) : fs::path(root_env ? root_env : "runs");
    if (!fs::is_directory(root)) throw ConfigError("no run directory at " + root.string());
    struct Group {
      std::vector<double> means;
    };
    std::map<std::string, Group> groups;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (entry.path().filename() != "results.csv") continue;
      std::ifstream in(entry.path());
      std::string line;
      std::getline(in, line);
      if (line != trainer::kResultsHeader) throw DataError(entry.path().string() + ": unexpected header");
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cols.push_back(cell);
        if (cols.size() != 7) throw DataError(entry.path().string() + ": malformed row: " + line);
        groups[cols[0] + ',' + cols[1] + ',' + cols[2] + ',' + cols[3]].means.push_back(std::stod(cols[5]));
      }
    }
    std::ostringstream table;
    table << "env,dataset,method,labeled_fraction,seeds,mean,std\n";
    for (const auto& [key, g] : groups) {
      double mean = 0.0;
      for (double m : g.means) mean += m;
      mean /= static_cast<double>(g.means.size());
      double var = 0.0;
      for (double m : g.means) var += (m - mean) * (m - mean);
      const double sd = std::sqrt(var / static_cast<double>(g.means.size()));
      table << key << ',' << g.means.size() << ',' << fmt(mean) << ',' << fmt(sd) << '\n';
    }
    const fs::path path = out.empty() ? cfg.resolve_run_dir() / "report.csv" : fs::path(out);
    std::ofstream(path) << table.str();
    os << table.str();
    return kExitOk;
  }
};

}  // namespace

std::vector<std::string> subcommands() {
  return {"gen-data", "split", "stats", "hist", "train-idm", "label", "train", "eval", "report"};
}

std::uint64_t config_hash(std::string_view config_bytes, const std::vector<std::string>& overrides) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  feed(config_bytes);
  for (const auto& o : overrides) {
    feed(std::string_view("\0", 1));
    feed(o);
  }
  return h;
}

fs::path make_run_dir(std::uint64_t hash) {
  const char* root_env = std::getenv("LAWM_RUN_ROOT");
  const fs::path root = root_env && *root_env ? fs::path(root_env) : fs::path("runs");
  const auto now = std::chrono::system_clock::now();
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  const auto micros =
      std::chrono::duration_cast<std::chrono::microseconds>(now.time_since_epoch()).count() % 1000000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%S", &tm);
  char name[80];
  std::snprintf(name, sizeof(name), "%s.%06lld-%016llx", stamp, static_cast<long long>(micros),
                static_cast<unsigned long long>(hash));
  return root / name;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent action world models: datasets, training and evaluation", "lawm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("lawm ") + LAWM_CLI_VERSION + " (" + LAWM_GIT_DESCRIBE + ")");

  GenData gen;
  Split split;
  Stats stats;
  Hist hist;
  TrainIdm train_idm;
  Label label;
  Train train;
  Eval eval;
  Report report;
  gen.attach(app.add_subcommand("gen-data", "Generate a scripted-policy dataset"));
  split.attach(app.add_subcommand("split", "Strip actions from all but a fraction of trajectories"));
  stats.attach(app.add_subcommand("stats", "Print return statistics of a corpus"));
  hist.attach(app.add_subcommand("hist", "Write a return histogram as CSV"));
  train_idm.attach(app.add_subcommand("train-idm", "Train the inverse dynamics baseline"));
  label.attach(app.add_subcommand("label", "Pseudo-label action-free trajectories with a trained IDM"));
  train.attach(app.add_subcommand("train", "Train a world model and agent"));
  eval.attach(app.add_subcommand("eval", "Evaluate a checkpoint or a reference controller"));
  report.attach(app.add_subcommand("report", "Aggregate results.csv files across runs"));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "gen-data") return gen.run(out);
    if (name == "split") return split.run(out);
    if (name == "stats") return stats.run(out);
    if (name == "hist") return hist.run(out);
    if (name == "train-idm") return train_idm.run(out);
    if (name == "label") return label.run(out);
    if (name == "train") return train.run(out);
    if (name == "eval") return eval.run(out);
    if (name == "report") return report.run(out);
    err << "unknown subcommand " << name << '\n';
    return kExitInput;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitInput;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kExitInput;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ContractError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

int dispatch(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, out, err);
}

}  // namespace lawm::cli
