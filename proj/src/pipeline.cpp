// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "dutrack/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "dutrack/dtcm.hpp"

namespace dutrack {

TrackRun run_sequence(const Sequence& seq, std::shared_ptr<const Model> model, const Vocabulary& vocab,
                      const TrackerConfig& config, std::shared_ptr<const Captioner> captioner,
                      bool keep_diagnostics) {
  if (seq.frames.empty() || seq.gt.empty()) throw std::invalid_argument("run_sequence: empty sequence");
  Tracker tracker(std::move(model), vocab, config, std::move(captioner));
  tracker.init(seq.frames[0], seq.gt[0], seq.description, seq.category);
  TrackRun run;
  run.sequence = seq.name;
  run.boxes.push_back(seq.gt[0]);
  for (std::size_t i = 1; i < seq.frames.size(); ++i) {
    FrameDiagnostics diag;
    run.boxes.push_back(tracker.track(seq.frames[i], &diag));
    if (!keep_diagnostics) {
      diag.captured.pixels.clear();
      diag.captured.tokens = Matrix();
    }
    run.frames.push_back(std::move(diag));
  }
  return run;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& work) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          work(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

void write_results(const std::vector<Box>& boxes, const std::filesystem::path& path) {
  write_boxes(boxes, path);
}

std::string format_update_lines(const std::vector<FrameDiagnostics>& frames) {
  std::string out;
  char buf[128];
  for (const auto& f : frames) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%d,", f.frame_index, f.deltas.dS, f.deltas.dD,
                  f.deltas.dC, f.updated ? 1 : 0);
    out += buf;
    out += f.description;
    out += '\n';
  }
  return out;
}

std::string format_capture_sidecar(const std::vector<FrameDiagnostics>& frames) {
  std::string out;
  for (const auto& f : frames) out += format_capture_lines(f.frame_index, f.captured);
  return out;
}

std::vector<AblationRow> ablation_rows(const TrackerConfig& base) {
  std::vector<AblationRow> rows;
  for (std::size_t k = 0; k <= 3; ++k) {
    AblationRow r;
    r.group = "topk";
    r.label = "k=" + std::to_string(k);
    r.tracker = base;
    r.tracker.topk = k;
    r.tracker.use_language = false;
    rows.push_back(r);
  }
  const std::pair<double, double> policies[] = {{0.0, 16.0}, {0.5, 2.0}, {0.8, 1.0}, {1.0, 0.0}};
  for (const auto& [s, d] : policies) {
    AblationRow r;
    r.group = "policy";
    char label[64];
    std::snprintf(label, sizeof label, "dS=%.1f,dD=%gxstride", s, d);
    r.label = label;
    r.tracker = base;
    r.tracker.topk = 3;
    r.tracker.use_language = true;
    r.tracker.policy.tau_s = s;
    r.tracker.policy.tau_d_strides = d;
    r.tracker.policy.tau_c = std::numeric_limits<double>::infinity();
    rows.push_back(r);
  }
  return rows;
}

void run_ablation(std::vector<AblationRow>& rows, const std::vector<std::filesystem::path>& sequences,
                  std::shared_ptr<const Model> model, const Vocabulary& vocab, std::size_t jobs,
                  std::shared_ptr<const Captioner> captioner) {
  for (auto& row : rows) {
    std::vector<SequenceMetrics> metrics(sequences.size());
    std::vector<std::size_t> updates(sequences.size(), 0);
    parallel_for(sequences.size(), jobs, [&](std::size_t i) {
      const Sequence seq = read_sequence(sequences[i]);
      const TrackRun run = run_sequence(seq, model, vocab, row.tracker, captioner);
      metrics[i] = {seq.name, evaluate(run.boxes, seq.gt)};
      for (const auto& f : run.frames) updates[i] += f.updated;
    });
    row.metrics = aggregate(metrics);
    row.updates = 0;
    for (std::size_t u : updates) row.updates += u;
  }
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-7s %-22s %8s %8s %8s %8s\n", "group", "setting", "AUC", "P_Norm", "P",
                "updates");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-7s %-22s %8.2f %8.2f %8.2f %8zu\n", r.group.c_str(), r.label.c_str(),
                  100.0 * r.metrics.auc, 100.0 * r.metrics.norm_precision, 100.0 * r.metrics.precision,
                  r.updates);
    out += buf;
  }
  return out;
}

}  // namespace dutrack
