// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "dutrack/dlum.hpp"

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <filesystem>
#include <optional>

extern char** environ;

namespace dutrack {

double scale_ratio(const Box& stamp, const Box& current) {
  if (!stamp.valid() || !current.valid()) {
    throw std::invalid_argument("scale_ratio: boxes need positive extents");
  }
  return (stamp.w * stamp.h) / (current.w * current.h);
}

double center_displacement(const Box& stamp, const Box& current, bool corners) {
  const double dx = corners ? stamp.x - current.x : stamp.cx() - current.cx();
  const double dy = corners ? stamp.y - current.y : stamp.cy() - current.cy();
  return std::sqrt(dx * dx + dy * dy);
}

namespace {

struct PixelRange {
  int x0, y0, x1, y1;  // half-open
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  long count() const { return static_cast<long>(x1 - x0) * (y1 - y0); }
};

PixelRange pixel_range(const Image& frame, const Box& box) {
  PixelRange r{static_cast<int>(std::ceil(box.x)), static_cast<int>(std::ceil(box.y)),
               static_cast<int>(std::ceil(box.x + box.w)), static_cast<int>(std::ceil(box.y + box.h))};
  r.x0 = std::max(r.x0, 0);
  r.y0 = std::max(r.y0, 0);
  r.x1 = std::min(r.x1, frame.width());
  r.y1 = std::min(r.y1, frame.height());
  return r;
}

}  // namespace

Rgb mean_rgb(const Image& frame, const Box& box) {
  PixelRange r = pixel_range(frame, box);
  if (r.empty()) {
    // Sub-pixel boxes that still overlap the raster fall back to the pixel under the center.
    const int px = static_cast<int>(std::floor(box.cx()));
    const int py = static_cast<int>(std::floor(box.cy()));
    if (px < 0 || py < 0 || px >= frame.width() || py >= frame.height()) {
      throw std::invalid_argument("mean_rgb: box " + to_string(box) + " lies outside the frame");
    }
    r = {px, py, px + 1, py + 1};
  }
  std::array<double, 3> sum{0.0, 0.0, 0.0};
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x)
      for (int c = 0; c < 3; ++c) sum[c] += frame.at(x, y, c);
  const double n = static_cast<double>(r.count());
  return {sum[0] / n, sum[1] / n, sum[2] / n};
}

double color_shift(const Rgb& a, const Rgb& b) {
  const double dr = a[0] - b[0];
  const double dg = a[1] - b[1];
  const double db = a[2] - b[2];
  return std::sqrt(dr * dr + dg * dg + db * db);
}

bool should_update(const UpdateDeltas& d, const UpdatePolicy& p) {
  bool scale_trigger = d.dS < p.tau_s;
  if (p.symmetric_scale && p.tau_s > 0.0) scale_trigger = scale_trigger || d.dS > 1.0 / p.tau_s;
  return scale_trigger || d.dD > p.tau_d() || d.dC > p.tau_c;
}

UpdateDeltas compute_deltas(const ObjectStamp& stamp, const Image& frame, const Box& current,
                            bool corner_displacement) {
  return {scale_ratio(stamp.box, current), center_displacement(stamp.box, current, corner_displacement),
          color_shift(stamp.mean_rgb, mean_rgb(frame, current))};
}

namespace {

struct ColorAnchor {
  const char* name;
  Rgb rgb;
};

constexpr std::array<ColorAnchor, 8> kAnchors{{
    {"black", {0, 0, 0}},
    {"white", {255, 255, 255}},
    {"red", {255, 0, 0}},
    {"green", {0, 255, 0}},
    {"blue", {0, 0, 255}},
    {"yellow", {255, 255, 0}},
    {"cyan", {0, 255, 255}},
    {"magenta", {255, 0, 255}},
}};

constexpr std::array<const char*, 9> kPositions{
    "top-left", "top", "top-right", "left", "center", "right", "bottom-left", "bottom", "bottom-right"};

constexpr std::array<const char*, 3> kSizes{"small", "medium", "large"};

}  // namespace

std::string nearest_color_name(const Rgb& rgb) {
  const ColorAnchor* best = &kAnchors[0];
  double best_d = color_shift(rgb, best->rgb);
  for (const auto& a : kAnchors) {
    const double d = color_shift(rgb, a.rgb);
    if (d < best_d) {
      best_d = d;
      best = &a;
    }
  }
  return best->name;
}

std::string generate_description(const Image& frame, const Box& box, const std::string& category) {
  const Rgb color = mean_rgb(frame, box);

  const double x0 = std::clamp(box.x, 0.0, static_cast<double>(frame.width()));
  const double y0 = std::clamp(box.y, 0.0, static_cast<double>(frame.height()));
  const double x1 = std::clamp(box.x + box.w, 0.0, static_cast<double>(frame.width()));
  const double y1 = std::clamp(box.y + box.h, 0.0, static_cast<double>(frame.height()));
  const double area_frac =
      ((x1 - x0) * (y1 - y0)) / (static_cast<double>(frame.width()) * frame.height());
  const char* size = area_frac < 0.02 ? kSizes[0] : (area_frac < 0.10 ? kSizes[1] : kSizes[2]);

  auto cell = [](double center, int extent) {
    return std::clamp(static_cast<int>(std::floor(3.0 * center / extent)), 0, 2);
  };
  const int col = cell(box.cx(), frame.width());
  const int row = cell(box.cy(), frame.height());

  return nearest_color_name(color) + " " + category + " " + size + " at the " +
         kPositions[static_cast<std::size_t>(row * 3 + col)] + " of the frame";
}

std::vector<std::string> description_vocabulary(const std::vector<std::string>& categories) {
  std::vector<std::string> words;
  for (const auto& a : kAnchors) words.emplace_back(a.name);
  for (const auto& c : categories) words.push_back(c);
  for (const char* s : kSizes) words.emplace_back(s);
  for (const char* p : kPositions) words.emplace_back(p);
  for (const char* w : {"at", "the", "of", "frame"}) words.emplace_back(w);
  return words;
}

ExternalCaptioner::ExternalCaptioner(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {}

namespace {

std::atomic<unsigned long> g_caption_counter{0};

// Returns the first stdout line of the child, or nullopt on failure/timeout.
std::optional<std::string> run_captioner(const std::string& command,
                                         const std::vector<std::string>& args,
                                         std::chrono::milliseconds timeout) {
  int fds[2];
  if (pipe(fds) != 0) return std::nullopt;

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, fds[0]);
  posix_spawn_file_actions_addclose(&actions, fds[1]);

  std::vector<char*> argv;
  argv.push_back(const_cast<char*>(command.c_str()));
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, command.c_str(), &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  close(fds[1]);
  if (rc != 0) {
    close(fds[0]);
    return std::nullopt;
  }

  std::string out;
  bool timed_out = false;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::array<char, 512> buf{};
  while (true) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      timed_out = true;
      break;
    }
    pollfd pfd{fds[0], POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) {
      timed_out = ready == 0;
      break;
    }
    const ssize_t n = read(fds[0], buf.data(), buf.size());
    if (n <= 0) break;
    out.append(buf.data(), static_cast<std::size_t>(n));
  }
  close(fds[0]);
  if (timed_out) kill(pid, SIGKILL);
  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (timed_out || !WIFEXITED(status) || WEXITSTATUS(status) != 0) return std::nullopt;

  const auto nl = out.find('\n');
  if (nl != std::string::npos) out.resize(nl);
  if (!out.empty() && out.back() == '\r') out.pop_back();
  if (out.empty()) return std::nullopt;
  return out;
}

}  // namespace

std::string ExternalCaptioner::describe(const Image& frame, const Box& box,
                                        const std::string& category) const {
  namespace fs = std::filesystem;
  const fs::path image_path =
      fs::temp_directory_path() / ("dutrack_caption_" + std::to_string(getpid()) + "_" +
                                   std::to_string(g_caption_counter.fetch_add(1)) + ".ppm");
  std::optional<std::string> line;
  try {
    write_ppm(frame, image_path);
    line = run_captioner(command_, {image_path.string(), to_string(box), category}, timeout_);
  } catch (const std::exception&) {
    line.reset();
  }
  std::error_code ec;
  fs::remove(image_path, ec);
  return line ? *line : fallback_.describe(frame, box, category);
}

ObjectStamp commit_update(const ObjectStamp& state, const Image& frame, const Box& box,
                          const std::string& category, std::size_t frame_index,
                          const Captioner& captioner) {
  ObjectStamp next = state;
  next.box = box;
  next.mean_rgb = mean_rgb(frame, box);
  next.frame_index = frame_index;
  next.description = captioner.describe(frame, box, category);
  next.category = category;
  return next;
}

ObjectStamp initial_stamp(const Image& frame0, const Box& gt_box, std::string description,
                          std::string category) {
  if (!gt_box.valid()) throw std::invalid_argument("initial_stamp: invalid box " + to_string(gt_box));
  return {gt_box, mean_rgb(frame0, gt_box), 0, std::move(description), std::move(category)};
}

}  // namespace dutrack
