// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "dutrack/tracker.hpp"

#include <algorithm>
#include <cmath>

namespace dutrack {

CropResult crop_search_region(const Image& frame, const Box& prev, double factor, int out_size) {
  if (!prev.valid()) throw std::invalid_argument("crop_search_region: degenerate box " + to_string(prev));
  if (!(factor > 1.0)) throw std::invalid_argument("crop_search_region: factor must exceed 1");
  if (out_size <= 0 || out_size % 16 != 0) {
    throw std::invalid_argument("crop_search_region: output size must be a multiple of 16");
  }
  const double side = factor * std::sqrt(prev.w * prev.h);
  CropResult res;
  res.mapping.scale = side / out_size;
  res.mapping.x0 = prev.cx() - side / 2.0;
  res.mapping.y0 = prev.cy() - side / 2.0;

  const Rgb mean = frame.mean_color();
  std::array<double, 3> pad{};
  for (int c = 0; c < 3; ++c) pad[c] = mean[c];
  const int fw = frame.width();
  const int fh = frame.height();
  auto sample = [&](int x, int y, int c) -> double {
    if (x < 0 || y < 0 || x >= fw || y >= fh) return pad[c];
    return frame.at(x, y, c);
  };

  res.crop = Image(out_size, out_size);
  for (int v = 0; v < out_size; ++v) {
    const double fy = res.mapping.y0 + (v + 0.5) * res.mapping.scale - 0.5;
    const int y0 = static_cast<int>(std::floor(fy));
    const double ty = fy - y0;
    for (int u = 0; u < out_size; ++u) {
      const double fx = res.mapping.x0 + (u + 0.5) * res.mapping.scale - 0.5;
      const int x0 = static_cast<int>(std::floor(fx));
      const double tx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - tx) * sample(x0, y0, c) + tx * sample(x0 + 1, y0, c);
        const double bottom = (1.0 - tx) * sample(x0, y0 + 1, c) + tx * sample(x0 + 1, y0 + 1, c);
        const double val = (1.0 - ty) * top + ty * bottom;
        res.crop.at(u, v, c) = static_cast<std::uint8_t>(std::clamp(std::lround(val), 0L, 255L));
      }
    }
  }
  return res;
}

Tracker::Tracker(std::shared_ptr<const Model> model, Vocabulary vocab, TrackerConfig config,
                 std::shared_ptr<const Captioner> captioner)
    : model_(std::move(model)),
      vocab_(std::move(vocab)),
      config_(config),
      captioner_(captioner ? std::move(captioner) : std::make_shared<RuleCaptioner>()) {
  if (!model_) throw std::invalid_argument("tracker: null model");
  if (vocab_.size() != model_->config.vocab_size) {
    throw std::invalid_argument("tracker: vocabulary of " + std::to_string(vocab_.size()) +
                                " words does not match model vocabulary " +
                                std::to_string(model_->config.vocab_size));
  }
  if (config_.topk > model_->config.max_dynamic) {
    throw std::invalid_argument("tracker: topk " + std::to_string(config_.topk) +
                                " exceeds the model's dynamic template capacity " +
                                std::to_string(model_->config.max_dynamic));
  }
}

void Tracker::set_language(const std::string& description) {
  state_.lang_ids = tokenize_text(config_.use_language ? description : std::string(), vocab_,
                                  model_->config.lang_tokens);
  state_.lang_tokens = embed_text(state_.lang_ids, model_->word_table, model_->lang_pos);
}

void Tracker::init(const Image& frame0, const Box& gt_box, std::string description,
                   std::string category) {
  if (!gt_box.valid() || gt_box.x >= frame0.width() || gt_box.y >= frame0.height() ||
      gt_box.x + gt_box.w <= 0 || gt_box.y + gt_box.h <= 0) {
    throw std::invalid_argument("tracker init: invalid box " + to_string(gt_box));
  }
  const ModelConfig& mc = model_->config;
  state_ = TrackerState{};
  state_.category = category;
  if (description.empty()) description = captioner_->describe(frame0, gt_box, category);
  state_.stamp = initial_stamp(frame0, gt_box, description, category);
  set_language(description);

  const CropResult tmpl =
      crop_search_region(frame0, gt_box, config_.template_factor, mc.template_size);
  state_.initial_template = embed_image(tmpl.crop, model_->embed, model_->embed.template_pos, 0);
  state_.dynamic.tokens = Matrix(0, mc.dim);
  state_.previous = gt_box;
  state_.frame_index = 0;
  initialized_ = true;
}

namespace {

Matrix stack_rows(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) std::copy(a.row(r).begin(), a.row(r).end(), out.row(r).begin());
  for (std::size_t r = 0; r < b.rows(); ++r)
    std::copy(b.row(r).begin(), b.row(r).end(), out.row(a.rows() + r).begin());
  return out;
}

// Keeps at least a sliver of the box on the frame and the extents positive.
Box constrain_to_frame(Box b, const Image& frame) {
  const double fw = frame.width();
  const double fh = frame.height();
  b.w = std::clamp(b.w, 1.0, fw);
  b.h = std::clamp(b.h, 1.0, fh);
  b.x = std::clamp(b.x, 1.0 - b.w, fw - 1.0);
  b.y = std::clamp(b.y, 1.0 - b.h, fh - 1.0);
  return b;
}

}  // namespace

Box Tracker::track(const Image& frame, FrameDiagnostics* diagnostics) {
  if (!initialized_) throw std::logic_error("tracker: track() before init()");
  if (frame.width() < 16 || frame.height() < 16) {
    throw std::invalid_argument("tracker: frame smaller than 16x16");
  }
  const ModelConfig& mc = model_->config;
  const std::size_t frame_index = ++state_.frame_index;

  const CropResult search =
      crop_search_region(frame, state_.previous, config_.search_factor, mc.search_size);
  const Matrix search_tokens = embed_image(search.crop, model_->embed, model_->embed.search_pos, 0);
  const Matrix tmpl_tokens = stack_rows(state_.initial_template, state_.dynamic.tokens);
  const auto [tokens, layout] = concat_layout(state_.lang_tokens, tmpl_tokens, search_tokens);
  const EncodeOutput enc = encode(tokens, layout, model_->blocks);

  const HeadOutputs head = head_forward(enc.search, model_->head);
  const Box box = constrain_to_frame(search.mapping.to_frame(decode_box(head, config_.window_weight)), frame);

  const UpdateDeltas deltas =
      compute_deltas(state_.stamp, frame, box, config_.corner_displacement);
  const bool update = config_.use_language && should_update(deltas, config_.policy);

  DynamicTemplate captured;
  if (!config_.gate_dtcm || update) {
    captured = capture_dynamic_template(search.crop, cls_to_search_attention(enc.final_attention),
                                        config_.topk, model_->embed, mc.template_tokens(),
                                        frame_index);
    state_.dynamic = captured;
  }

  if (update) {
    state_.stamp = commit_update(state_.stamp, frame, box, state_.category, frame_index, *captioner_);
    set_language(state_.stamp.description);
  }
  state_.previous = box;

  if (diagnostics) {
    diagnostics->frame_index = frame_index;
    diagnostics->layout = layout;
    diagnostics->box = box;
    diagnostics->deltas = deltas;
    diagnostics->updated = update;
    diagnostics->description = state_.stamp.description;
    diagnostics->captured = std::move(captured);
  }
  return box;
}

}  // namespace dutrack
