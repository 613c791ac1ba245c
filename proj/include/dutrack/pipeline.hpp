// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dutrack/eval.hpp"
#include "dutrack/synth.hpp"
#include "dutrack/tracker.hpp"

namespace dutrack {

struct TrackRun {
  std::string sequence;
  std::vector<Box> boxes;  // frame 0 is the initial annotation
  std::vector<FrameDiagnostics> frames;
};

/// Initializes on frame 0 with its annotation, description and category, then
/// tracks every later frame. Captured pixels and tokens are dropped from the
/// diagnostics unless `keep_diagnostics`.
TrackRun run_sequence(const Sequence& seq, std::shared_ptr<const Model> model, const Vocabulary& vocab,
                      const TrackerConfig& config, std::shared_ptr<const Captioner> captioner = nullptr,
                      bool keep_diagnostics = false);

/// Runs `work(i)` for i in [0, n) on up to `jobs` threads. Results must be
/// written by index, so the outcome does not depend on `jobs`.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& work);

/// `x,y,w,h` per frame.
void write_results(const std::vector<Box>& boxes, const std::filesystem::path& path);
/// `frame_idx,dS,dD,dC,updated,description` per tracked frame.
std::string format_update_lines(const std::vector<FrameDiagnostics>& frames);
/// Captured patches of every tracked frame, `frame_idx,idx,x,y,w,h,score`.
std::string format_capture_sidecar(const std::vector<FrameDiagnostics>& frames);

struct AblationRow {
  std::string group;  // "topk" or "policy"
  std::string label;
  TrackerConfig tracker;
  Metrics metrics;
  std::size_t updates = 0;  // language updates summed over sequences
};

/// Top-k rows k = 0..3 without language, then the policy rows
/// (0, 16), (0.5, 2), (0.8, 1), (1, 0) × stride at k = 3 with language and the
/// colour gate disabled.
std::vector<AblationRow> ablation_rows(const TrackerConfig& base);

/// Tracks every sequence under each row's configuration and fills in the metrics.
void run_ablation(std::vector<AblationRow>& rows, const std::vector<std::filesystem::path>& sequences,
                  std::shared_ptr<const Model> model, const Vocabulary& vocab, std::size_t jobs,
                  std::shared_ptr<const Captioner> captioner = nullptr);

/// Fixed-width comparison table.
std::string format_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace dutrack
