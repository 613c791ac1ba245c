// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "dutrack/config.hpp"
#include "dutrack/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dutrack;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> topk;
  std::optional<double> tau_s;
  std::optional<double> tau_d_strides;
  std::optional<double> tau_c;
  std::optional<std::string> captioner;
};

void add_tracker_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--topk", o.topk, "Dynamic template patches per frame");
  cmd->add_option("--tau-s", o.tau_s, "Scale-ratio threshold");
  cmd->add_option("--tau-d-strides", o.tau_d_strides, "Displacement threshold in strides");
  cmd->add_option("--tau-c", o.tau_c, "Colour-shift threshold");
  cmd->add_option("--captioner", o.captioner, "External caption command");
}

RunConfig load_config(const std::string& path, const Overrides& o) {
  RunConfig c;
  if (!path.empty()) c = RunConfig::load(path);
  if (o.seed) c.seed = *o.seed;
  c.train.seed = c.seed;
  if (o.topk) c.tracker.topk = *o.topk;
  if (o.tau_s) c.tracker.policy.tau_s = *o.tau_s;
  if (o.tau_d_strides) c.tracker.policy.tau_d_strides = *o.tau_d_strides;
  if (o.tau_c) c.tracker.policy.tau_c = *o.tau_c;
  if (o.captioner) c.captioner = *o.captioner;
  c.validate();
  return c;
}

// Command-line path wins over the config value; the result must be set.
fs::path pick_path(const std::string& flag_value, const fs::path& config_value, const char* what) {
  fs::path p = flag_value.empty() ? config_value : fs::path(flag_value);
  if (p.empty()) throw ConfigError(std::string("no ") + what + " path given");
  return p;
}

void require_dir(const fs::path& p, const char* what) {
  if (!fs::is_directory(p)) throw IoError(std::string(what) + " directory not found: " + p.string());
}

fs::path vocab_path(const fs::path& checkpoint) { return fs::path(checkpoint.string() + ".vocab"); }

std::shared_ptr<const Captioner> make_captioner(const RunConfig& c) {
  if (c.captioner.empty()) return std::make_shared<RuleCaptioner>();
  return std::make_shared<ExternalCaptioner>(c.captioner,
                                             std::chrono::milliseconds(c.captioner_timeout_ms));
}

struct LoadedModel {
  std::shared_ptr<const Model> model;
  Vocabulary vocab;
};

LoadedModel load_model(const fs::path& checkpoint, const RunConfig& c) {
  if (!fs::exists(checkpoint)) throw IoError("checkpoint not found: " + checkpoint.string());
  const fs::path vp = vocab_path(checkpoint);
  if (!fs::exists(vp)) throw IoError("vocabulary not found: " + vp.string());
  auto model = std::make_shared<Model>(load_checkpoint(checkpoint));
  if (c.tracker.topk > model->config.max_dynamic) {
    throw ConfigError("topk " + std::to_string(c.tracker.topk) + " exceeds the checkpoint's max_dynamic " +
                      std::to_string(model->config.max_dynamic));
  }
  return {std::move(model), Vocabulary::load(vp)};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
}

int cmd_synth(const std::string& suite_path, const std::string& out_dir, const Overrides& o) {
  SuiteFile suite = SuiteFile::load(suite_path);
  if (o.seed) suite.seed = *o.seed;
  const auto specs = suite.specs();
  fs::create_directories(out_dir);
  for (const auto& spec : specs) {
    write_sequence(generate_sequence(spec), fs::path(out_dir) / spec.name);
  }
  spdlog::info("wrote {} sequences to {}", specs.size(), out_dir);
  return 0;
}

int cmd_train(const RunConfig& c, const fs::path& data_dir, const fs::path& out, const std::string& init,
              const std::string& stage, const std::string& loss_csv) {
  require_dir(data_dir, "training data");
  if (stage != "1" && stage != "2" && stage != "both") throw ConfigError("--stage must be 1, 2 or both");
  if (stage == "2" && init.empty()) throw ConfigError("--stage 2 needs --init with a stage-1 checkpoint");
  std::vector<Sequence> data;
  for (const auto& dir : list_sequences(data_dir)) data.push_back(read_sequence(dir));
  if (data.empty()) throw IoError("no sequences under " + data_dir.string());

  Vocabulary vocab;
  Model model;
  if (!init.empty()) {
    const LoadedModel lm = load_model(init, c);
    model = *lm.model;
    vocab = lm.vocab;
  } else {
    vocab = build_vocabulary(data);
    ModelConfig mc = c.model;
    mc.vocab_size = vocab.size();
    model = Model::initialized(mc, c.seed);
  }
  spdlog::info("training on {} sequences, {} parameters", data.size(), model.parameter_count());

  TrainState state;
  auto log_epoch = [](Stage s, const EpochStats& e) {
    spdlog::info("stage {} epoch {} loss {:.6f}", s == Stage::VisionOnly ? 1 : 2, e.epoch, e.loss);
  };
  if (stage != "2") {
    train_stage(data, c.train, Stage::VisionOnly, c.train.stage1_epochs, model, vocab, state, log_epoch);
  }
  if (stage != "1") {
    train_stage(data, c.train, Stage::VisionLanguage, c.train.stage2_epochs, model, vocab, state,
                log_epoch);
  }
  if (state.rejected_steps > 0) spdlog::warn("{} optimizer steps rejected", state.rejected_steps);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(model, out);
  vocab.save(vocab_path(out));
  write_loss_csv(state.curve, loss_csv.empty() ? fs::path(out.string() + ".loss.csv") : fs::path(loss_csv));
  spdlog::info("saved {}", out.string());
  return 0;
}

int cmd_track(const RunConfig& c, const fs::path& checkpoint, const fs::path& data_dir,
              const fs::path& out_dir, std::size_t jobs, bool diagnostics) {
  require_dir(data_dir, "data");
  const LoadedModel lm = load_model(checkpoint, c);
  const auto sequences = list_sequences(data_dir);
  fs::create_directories(out_dir);
  const auto captioner = make_captioner(c);
  parallel_for(sequences.size(), jobs, [&](std::size_t i) {
    const Sequence seq = read_sequence(sequences[i]);
    const TrackRun run = run_sequence(seq, lm.model, lm.vocab, c.tracker, captioner, diagnostics);
    write_results(run.boxes, out_dir / (seq.name + ".txt"));
    if (diagnostics) {
      write_text(out_dir / (seq.name + ".updates.txt"), format_update_lines(run.frames));
      write_text(out_dir / (seq.name + ".captures.txt"), format_capture_sidecar(run.frames));
    }
    spdlog::debug("tracked {}", seq.name);
  });
  spdlog::info("tracked {} sequences into {}", sequences.size(), out_dir.string());
  return 0;
}

int cmd_eval(const fs::path& data_dir, const fs::path& results, const std::string& out, bool inclusive) {
  require_dir(data_dir, "data");
  const std::string csv = metrics_csv(evaluate_results(data_dir, results, inclusive));
  write_text(out.empty() ? results / "metrics.csv" : fs::path(out), csv);
  std::cout << csv;
  return 0;
}

int cmd_ablate(const RunConfig& c, const fs::path& checkpoint, const fs::path& data_dir, std::size_t jobs,
               const std::string& group, const std::string& out) {
  require_dir(data_dir, "data");
  if (group != "all" && group != "topk" && group != "policy") {
    throw ConfigError("--rows must be all, topk or policy");
  }
  const LoadedModel lm = load_model(checkpoint, c);
  std::vector<AblationRow> rows;
  for (auto& r : ablation_rows(c.tracker)) {
    if (group == "all" || r.group == group) rows.push_back(r);
  }
  run_ablation(rows, list_sequences(data_dir), lm.model, lm.vocab, jobs, make_captioner(c));
  const std::string table = format_ablation_table(rows);
  std::cout << table;
  if (!out.empty()) write_text(out, table);
  return 0;
}

void setup_logging() {
  auto logger = spdlog::stderr_logger_mt("dutrack");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* level = std::getenv("DUTRACK_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Vision-language tracker with dynamic template and language updates"};
  app.require_subcommand(1);

  Overrides o;
  std::string config_path, data, out, checkpoint, results, suite, init, stage = "both", loss_csv,
      rows = "all";
  std::size_t jobs = 1;
  bool diagnostics = false;
  bool inclusive = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic suite");
  synth->add_option("--suite", suite, "Suite file")->required();
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--seed", o.seed, "Override the suite seed");

  auto* train = app.add_subcommand("train", "Train a checkpoint");
  train->add_option("--config", config_path, "Run config");
  train->add_option("--data", data, "Training sequences");
  train->add_option("--out", out, "Checkpoint to write");
  train->add_option("--init", init, "Start from this checkpoint");
  train->add_option("--stage", stage, "1, 2 or both");
  train->add_option("--loss-csv", loss_csv, "Loss curve path (default <out>.loss.csv)");
  train->add_option("--seed", o.seed, "Seed");

  auto* track = app.add_subcommand("track", "Track every sequence of a dataset");
  track->add_option("--config", config_path, "Run config");
  track->add_option("--checkpoint", checkpoint, "Checkpoint");
  track->add_option("--data", data, "Sequences");
  track->add_option("--out", out, "Result directory");
  track->add_option("--jobs", jobs, "Parallel sequences");
  track->add_flag("--diagnostics", diagnostics, "Write update and capture sidecars");
  track->add_option("--seed", o.seed, "Seed");
  add_tracker_flags(track, o);

  auto* eval = app.add_subcommand("eval", "Score result files");
  eval->add_option("--data", data, "Sequences")->required();
  eval->add_option("--results", results, "Result directory")->required();
  eval->add_option("--out", out, "CSV path (default <results>/metrics.csv)");
  eval->add_flag("--inclusive", inclusive, "Count iou >= t as success");

  auto* ablate = app.add_subcommand("ablate", "Top-k and update-policy sweeps");
  ablate->add_option("--config", config_path, "Run config");
  ablate->add_option("--checkpoint", checkpoint, "Checkpoint");
  ablate->add_option("--data", data, "Sequences");
  ablate->add_option("--jobs", jobs, "Parallel sequences");
  ablate->add_option("--rows", rows, "all, topk or policy");
  ablate->add_option("--out", out, "Also write the table here");
  ablate->add_option("--seed", o.seed, "Seed");
  add_tracker_flags(ablate, o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(suite, out, o);
    if (eval->parsed()) return cmd_eval(data, results, out, inclusive);
    const RunConfig c = load_config(config_path, o);
    if (train->parsed()) {
      return cmd_train(c, pick_path(data, c.train_data, "training data"),
                       pick_path(out, c.checkpoint, "output checkpoint"), init, stage, loss_csv);
    }
    if (track->parsed()) {
      return cmd_track(c, pick_path(checkpoint, c.checkpoint, "checkpoint"), pick_path(data, c.data, "data"),
                       pick_path(out, c.results, "result"), jobs, diagnostics);
    }
    if (ablate->parsed()) {
      return cmd_ablate(c, pick_path(checkpoint, c.checkpoint, "checkpoint"), pick_path(data, c.data, "data"),
                        jobs, rows, out);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
