// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "dutrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "dutrack/dlum.hpp"

namespace dutrack {

std::array<double, 2> Trajectory::at(double t) const {
  const double angle = 2.0 * std::numbers::pi * t / period + phase;
  return {cx0 + vx * t + ax * std::sin(angle), cy0 + vy * t + ay * std::cos(angle)};
}

Rgb ObjectSpec::color_at(std::size_t t) const {
  const double f = std::min(1.0, drift_rate * static_cast<double>(t));
  return {color_start[0] + (color_end[0] - color_start[0]) * f,
          color_start[1] + (color_end[1] - color_start[1]) * f,
          color_start[2] + (color_end[2] - color_start[2]) * f};
}

std::array<double, 2> ObjectSpec::extents_at(std::size_t t, std::size_t length) const {
  const double f = length > 1 ? static_cast<double>(t) / static_cast<double>(length - 1) : 0.0;
  return {w_start + (w_end - w_start) * f, h_start + (h_end - h_start) * f};
}

std::string category_for(Shape shape) { return shape == Shape::Rectangle ? "box" : "ball"; }

namespace {

struct Footprint {
  int x0, y0, x1, y1;  // half-open pixel rectangle of the unclipped shape
};

Footprint footprint(double cx, double cy, double w, double h) {
  return {static_cast<int>(std::lround(cx - w / 2.0)), static_cast<int>(std::lround(cy - h / 2.0)),
          static_cast<int>(std::lround(cx + w / 2.0)), static_cast<int>(std::lround(cy + h / 2.0))};
}

bool covers(Shape shape, int px, int py, double cx, double cy, double w, double h) {
  if (shape == Shape::Rectangle) return true;
  const double dx = (px + 0.5 - cx) / (w / 2.0);
  const double dy = (py + 0.5 - cy) / (h / 2.0);
  return dx * dx + dy * dy <= 1.0;
}

std::array<std::uint8_t, 3> to_pixel(const Rgb& c) {
  std::array<std::uint8_t, 3> p{};
  for (int i = 0; i < 3; ++i) p[i] = static_cast<std::uint8_t>(std::clamp(std::lround(c[i]), 0L, 255L));
  return p;
}

struct DrawResult {
  long inside = 0;
  long total = 0;
  int bx0 = 0, by0 = 0, bx1 = 0, by1 = 0;  // tight bbox of drawn pixels
};

DrawResult draw(Image& img, const ObjectSpec& obj, std::size_t t, std::size_t length) {
  const auto [cx, cy] = obj.path.at(static_cast<double>(t));
  const auto [w, h] = obj.extents_at(t, length);
  const Footprint fp = footprint(cx, cy, w, h);
  const auto px = to_pixel(obj.color_at(t));
  DrawResult r;
  r.bx0 = img.width();
  r.by0 = img.height();
  for (int y = fp.y0; y < fp.y1; ++y) {
    for (int x = fp.x0; x < fp.x1; ++x) {
      if (!covers(obj.shape, x, y, cx, cy, w, h)) continue;
      ++r.total;
      if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) continue;
      ++r.inside;
      img.set(x, y, px);
      r.bx0 = std::min(r.bx0, x);
      r.by0 = std::min(r.by0, y);
      r.bx1 = std::max(r.bx1, x + 1);
      r.by1 = std::max(r.by1, y + 1);
    }
  }
  return r;
}

}  // namespace

Sequence generate_sequence(const SynthSpec& spec) {
  if (spec.width < 16 || spec.height < 16 || spec.length == 0) {
    throw std::invalid_argument("synth: frame must be at least 16x16 with one frame");
  }
  for (std::size_t t = 0; t < spec.length; ++t) {
    const auto [w, h] = spec.target.extents_at(t, spec.length);
    if (w < 8.0 || h < 8.0) {
      throw std::invalid_argument("synth " + spec.name + ": target extent below 8 px at frame " +
                                  std::to_string(t));
    }
  }

  Sequence seq;
  seq.name = spec.name;
  seq.category = spec.category.empty() ? category_for(spec.target.shape) : spec.category;
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> noise(-spec.noise, spec.noise);

  for (std::size_t t = 0; t < spec.length; ++t) {
    Image img(spec.width, spec.height, spec.background);
    for (const auto& d : spec.distractors) draw(img, d, t, spec.length);
    const DrawResult tr = draw(img, spec.target, t, spec.length);
    if (tr.total == 0 || 2 * tr.inside < tr.total) {
      throw std::invalid_argument("synth " + spec.name + ": target less than 50% inside frame " +
                                  std::to_string(t));
    }
    if (spec.noise > 0) {
      for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(std::clamp(b + noise(rng), 0, 255));
    }
    seq.gt.push_back({static_cast<double>(tr.bx0), static_cast<double>(tr.by0),
                      static_cast<double>(tr.bx1 - tr.bx0), static_cast<double>(tr.by1 - tr.by0)});
    seq.frames.push_back(std::move(img));
  }
  seq.description = generate_description(seq.frames[0], seq.gt[0], seq.category);
  return seq;
}

namespace fs = std::filesystem;

std::vector<Box> read_boxes(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Box> boxes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), '\t', ',');
    std::istringstream ls(line);
    std::array<double, 4> v{};
    std::string field;
    std::size_t n = 0;
    try {
      while (std::getline(ls, field, ',')) {
        if (n >= 4) throw std::invalid_argument("extra field");
        std::size_t used = 0;
        v[n] = std::stod(field, &used);
        if (field.find_first_not_of(" \t", used) != std::string::npos) {
          throw std::invalid_argument("trailing characters");
        }
        ++n;
      }
    } catch (const std::exception&) {
      n = 0;
    }
    if (n != 4) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected x,y,w,h");
    }
    boxes.push_back({v[0], v[1], v[2], v[3]});
  }
  return boxes;
}

void write_boxes(const std::vector<Box>& boxes, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  char buf[128];
  for (const auto& b : boxes) {
    std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%.4f\n", b.x, b.y, b.w, b.h);
    out << buf;
  }
}

namespace {

std::string read_single_line(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

fs::path frame_path(const fs::path& dir, std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof name, "%08zu.ppm", index + 1);
  return dir / "img" / name;
}

}  // namespace

void write_sequence(const Sequence& seq, const fs::path& dir) {
  fs::create_directories(dir / "img");
  for (std::size_t i = 0; i < seq.frames.size(); ++i) write_ppm(seq.frames[i], frame_path(dir, i));
  write_boxes(seq.gt, dir / "groundtruth.txt");
  std::ofstream(dir / "nlp.txt") << seq.description << '\n';
  std::ofstream(dir / "category.txt") << seq.category << '\n';
}

Sequence read_sequence(const fs::path& dir) {
  const fs::path gt_path = dir / "groundtruth.txt";
  if (!fs::exists(gt_path)) throw IoError("missing ground truth file " + gt_path.string());
  Sequence seq;
  seq.name = dir.filename().string();
  seq.gt = read_boxes(gt_path);
  if (seq.gt.empty()) throw IoError(gt_path.string() + ": no boxes");
  seq.description = fs::exists(dir / "nlp.txt") ? read_single_line(dir / "nlp.txt") : std::string();
  seq.category = fs::exists(dir / "category.txt") ? read_single_line(dir / "category.txt") : "object";
  for (std::size_t i = 0; i < seq.gt.size(); ++i) {
    const fs::path p = frame_path(dir, i);
    if (!fs::exists(p)) throw IoError("missing frame " + p.string());
    seq.frames.push_back(read_ppm(p));
  }
  return seq;
}

std::vector<fs::path> list_sequences(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
  std::vector<fs::path> out;
  if (fs::exists(root / "groundtruth.txt")) out.push_back(root);
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "groundtruth.txt")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

const std::vector<std::string>& suite_families() {
  static const std::vector<std::string> families{"static", "drift-color", "scale-ramp",
                                                 "fast-motion", "distractor"};
  return families;
}

namespace {

const std::array<Rgb, 7> kPalette{{
    {220, 40, 40},    // red
    {40, 200, 60},    // green
    {40, 60, 220},    // blue
    {230, 220, 50},   // yellow
    {50, 210, 220},   // cyan
    {210, 50, 210},   // magenta
    {235, 235, 235},  // white
}};

class SuiteRng {
 public:
  explicit SuiteRng(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  bool coin() { return index(2) == 1; }

 private:
  std::mt19937_64 rng_;
};

std::size_t other_color(SuiteRng& r, std::size_t not_this) {
  std::size_t c = r.index(kPalette.size() - 1);
  return c >= not_this ? c + 1 : c;
}

Trajectory orbit(double cx, double cy, double ax, double ay, double period, double phase) {
  Trajectory t;
  t.cx0 = cx;
  t.cy0 = cy;
  t.ax = ax;
  t.ay = ay;
  t.period = period;
  t.phase = phase;
  return t;
}

// Distractor on an orbit that starts opposite the target and meets it around
// `meet_fraction` of the sequence.
ObjectSpec crossing_distractor(SuiteRng& r, const ObjectSpec& target, const SuiteSpec& s,
                               double unit, double meet_fraction) {
  ObjectSpec d = target;
  d.drift_rate = 0.0;
  d.color_end = d.color_start;
  const double scale = r.uniform(0.85, 1.15);
  d.w_start = d.w_end = target.w_start * scale;
  d.h_start = d.h_end = target.h_start * scale;
  const double omega = 2.0 * std::numbers::pi / target.path.period;
  const double delta = std::numbers::pi / (meet_fraction * static_cast<double>(s.length));
  const double omega_d = omega + (r.coin() ? delta : -delta);
  d.path = orbit(target.path.cx0, target.path.cy0, r.uniform(40, 70) * unit, r.uniform(40, 70) * unit,
                 2.0 * std::numbers::pi / omega_d, target.path.phase + std::numbers::pi);
  return d;
}

}  // namespace

std::vector<SynthSpec> make_suite(const SuiteSpec& s) {
  const auto& fams = suite_families();
  if (std::find(fams.begin(), fams.end(), s.family) == fams.end()) {
    throw std::invalid_argument("unknown suite family '" + s.family + "'");
  }
  std::vector<SynthSpec> out;
  const double unit = std::min(s.width, s.height) / 256.0;
  const double mx = s.width / 2.0;
  const double my = s.height / 2.0;
  for (std::size_t i = 0; i < s.count; ++i) {
    SuiteRng r(s.seed * 1000003ULL + i);
    SynthSpec spec;
    char name[64];
    std::snprintf(name, sizeof name, "%s-%03zu", s.family.c_str(), i);
    spec.name = name;
    spec.width = s.width;
    spec.height = s.height;
    spec.length = s.length;
    spec.noise = s.noise;
    spec.seed = s.seed * 7919ULL + i;

    ObjectSpec& tg = spec.target;
    tg.shape = r.coin() ? Shape::Ellipse : Shape::Rectangle;
    const std::size_t ci = r.index(kPalette.size());
    tg.color_start = tg.color_end = kPalette[ci];
    const double size = r.uniform(24, 40) * unit;
    tg.w_start = tg.w_end = size * r.uniform(0.85, 1.15);
    tg.h_start = tg.h_end = size * r.uniform(0.85, 1.15);
    const double phase = r.uniform(0, 2.0 * std::numbers::pi);
    const double len = static_cast<double>(s.length);

    if (s.family == "static") {
      tg.path.cx0 = r.uniform(64 * unit, s.width - 64 * unit);
      tg.path.cy0 = r.uniform(64 * unit, s.height - 64 * unit);
    } else if (s.family == "drift-color") {
      tg.color_end = kPalette[other_color(r, ci)];
      tg.drift_rate = 1.0 / (0.6 * len);
      tg.path = orbit(mx, my, r.uniform(40, 70) * unit, r.uniform(40, 70) * unit, r.uniform(90, 140),
                      phase);
      spec.distractors.push_back(crossing_distractor(r, tg, s, unit, r.uniform(0.5, 0.7)));
    } else if (s.family == "scale-ramp") {
      const double factor = r.coin() ? r.uniform(1.8, 2.2) : r.uniform(0.5, 0.6);
      const double start = (factor > 1.0 ? r.uniform(22, 28) : r.uniform(44, 54)) * unit;
      tg.w_start = start;
      tg.h_start = start * r.uniform(0.85, 1.15);
      tg.w_end = tg.w_start * factor;
      tg.h_end = tg.h_start * factor;
      tg.color_end = kPalette[other_color(r, ci)];
      tg.drift_rate = 1.0 / len;
      tg.path = orbit(mx, my, r.uniform(30, 50) * unit, r.uniform(30, 50) * unit, r.uniform(120, 180),
                      phase);
      spec.distractors.push_back(crossing_distractor(r, tg, s, unit, r.uniform(0.5, 0.7)));
    } else if (s.family == "fast-motion") {
      tg.path = orbit(mx, my, r.uniform(50, 80) * unit, r.uniform(50, 80) * unit, r.uniform(30, 50),
                      phase);
    } else {  // distractor
      tg.path = orbit(mx, my, r.uniform(30, 60) * unit, r.uniform(30, 60) * unit, r.uniform(90, 140),
                      phase);
      for (int k = 0; k < 2; ++k) {
        spec.distractors.push_back(crossing_distractor(r, tg, s, unit, r.uniform(0.3, 0.8)));
      }
    }
    out.push_back(std::move(spec));
  }
  return out;
}

}  // namespace dutrack
