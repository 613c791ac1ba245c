// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "dutrack/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "dutrack/dlum.hpp"
#include "dutrack/tracker.hpp"

namespace dutrack {

void adamw_step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
                AdamMoments& moments, const AdamWConfig& config, std::size_t step) {
  if (params.size() != grads.size()) throw ShapeError("adamw_step: parameter and gradient counts differ");
  if (step == 0) throw std::invalid_argument("adamw_step: step index starts at 1");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i]->rows() || params[i]->cols() != grads[i]->cols()) {
      throw ShapeError("adamw_step: gradient " + std::to_string(i) + " has shape " +
                       shape_string(*grads[i]) + ", parameter " + shape_string(*params[i]));
    }
    if (!grads[i]->all_finite()) {
      throw NumericError("adamw_step: non-finite gradient for parameter " + std::to_string(i));
    }
  }
  if (moments.m.size() != params.size()) {
    moments.m.clear();
    moments.v.clear();
    for (const Matrix* p : params) {
      moments.m.emplace_back(p->rows(), p->cols());
      moments.v.emplace_back(p->rows(), p->cols());
    }
  }
  const double t = static_cast<double>(step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  const double decay = 1.0 - config.lr * config.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i]->data();
    auto m = moments.m[i].data();
    auto v = moments.v[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] *= decay;
      p[j] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

namespace {

constexpr double kProbFloor = 1e-15;

double sign(double v) { return (v > 0.0) - (v < 0.0); }

std::size_t cell_of(double v, std::size_t grid) {
  const auto c = static_cast<std::size_t>(std::floor(v / 16.0));
  return std::min(c, grid - 1);
}

}  // namespace

std::vector<std::size_t> target_cells(const Box& gt, std::size_t grid) {
  std::vector<std::size_t> cells;
  const std::size_t center = cell_of(gt.cy(), grid) * grid + cell_of(gt.cx(), grid);
  for (std::size_t r = 0; r < grid; ++r) {
    for (std::size_t c = 0; c < grid; ++c) {
      const double px = 16.0 * c + 8.0;
      const double py = 16.0 * r + 8.0;
      const std::size_t idx = r * grid + c;
      const bool inside = px >= gt.x && px < gt.x + gt.w && py >= gt.y && py < gt.y + gt.h;
      if (inside || idx == center) cells.push_back(idx);
    }
  }
  return cells;
}

TrackingLoss tracking_loss(const HeadOutputs& h, const Box& gt, const LossWeights& weights) {
  const double crop = h.crop_size();
  if (!gt.valid() || !(gt.cx() >= 0.0 && gt.cx() < crop && gt.cy() >= 0.0 && gt.cy() < crop)) {
    throw std::invalid_argument("tracking_loss: target " + to_string(gt) + " outside the " +
                                std::to_string(h.crop_size()) + " px crop");
  }
  const std::size_t n = h.grid * h.grid;
  const std::size_t col = cell_of(gt.cx(), h.grid);
  const std::size_t row = cell_of(gt.cy(), h.grid);
  const std::size_t cell = row * h.grid + col;

  TrackingLoss out;
  out.target_cell = cell;
  out.grad.dscore = Matrix(n, 1);
  out.grad.doffset = Matrix(n, 2);
  out.grad.dsize = Matrix(n, 2);

  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(h.score[i], kProbFloor, 1.0 - kProbFloor);
    const double y = i == cell ? 1.0 : 0.0;
    out.bce -= (y * std::log(p) + (1.0 - y) * std::log(1.0 - p)) * inv_n;
    out.grad.dscore[i] = -weights.center * inv_n * (y / p - (1.0 - y) / (1.0 - p));
  }

  const double targets[4] = {(gt.cx() - 16.0 * col) / 16.0, (gt.cy() - 16.0 * row) / 16.0,
                             gt.w / crop, gt.h / crop};
  const double preds[4] = {h.offset(cell, 0), h.offset(cell, 1), h.size(cell, 0), h.size(cell, 1)};
  for (int k = 0; k < 4; ++k) {
    const double diff = preds[k] - targets[k];
    out.l1 += std::abs(diff);
    const double g = weights.box * sign(diff);
    if (k < 2) {
      out.grad.doffset(cell, k) = g;
    } else {
      out.grad.dsize(cell, k - 2) = g;
    }
  }
  out.total = weights.center * out.bce + weights.box * out.l1;
  return out;
}

namespace {

Matrix add_positions(Matrix tokens, const Matrix& positions, std::size_t first) {
  for (std::size_t r = 0; r < tokens.rows(); ++r) {
    auto dst = tokens.row(r);
    auto pos = positions.row(first + r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += pos[c];
  }
  return tokens;
}

void accumulate_rows(Matrix& table, std::size_t first, const Matrix& d, std::size_t d_first,
                     std::size_t count) {
  for (std::size_t r = 0; r < count; ++r) {
    auto dst = table.row(first + r);
    auto src = d.row(d_first + r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
  }
}

}  // namespace

SampleLoss sample_loss(const Model& model, const TrainSample& s, const LossWeights& weights,
                       Model* grad) {
  const ModelConfig& mc = model.config;
  const std::size_t n_dyn = s.dynamic.size();
  if (n_dyn > mc.max_dynamic) {
    throw std::invalid_argument("sample_loss: " + std::to_string(n_dyn) +
                                " dynamic patches exceed capacity " + std::to_string(mc.max_dynamic));
  }
  const std::size_t n_init = mc.template_tokens();

  const Matrix lang = embed_text(s.lang_ids, model.word_table, model.lang_pos);
  PatchEmbedCache tmpl_cache;
  Matrix tmpl = add_positions(patch_tokens(s.template_crop, model.embed, &tmpl_cache),
                              model.embed.template_pos, 0);
  if (tmpl.rows() != n_init) throw ShapeError("sample_loss: template crop does not match the model");
  std::vector<PatchEmbedCache> dyn_cache(n_dyn);
  Matrix all_tmpl(n_init + n_dyn, mc.dim);
  accumulate_rows(all_tmpl, 0, tmpl, 0, n_init);
  for (std::size_t i = 0; i < n_dyn; ++i) {
    const Matrix t = add_positions(patch_tokens(s.dynamic[i], model.embed, &dyn_cache[i]),
                                   model.embed.template_pos, n_init + i);
    if (t.rows() != 1) throw ShapeError("sample_loss: dynamic patch must be 16x16");
    accumulate_rows(all_tmpl, n_init + i, t, 0, 1);
  }
  PatchEmbedCache search_cache;
  const Matrix search = add_positions(patch_tokens(s.search_crop, model.embed, &search_cache),
                                      model.embed.search_pos, 0);

  const auto [tokens, layout] = concat_layout(lang, all_tmpl, search);
  EncodeTrace trace;
  const EncodeOutput enc = encode(tokens, layout, model.blocks, grad ? &trace : nullptr);
  const HeadOutputs head = head_forward(enc.search, model.head);
  const TrackingLoss tl = tracking_loss(head, s.target, weights);

  SampleLoss out;
  out.bce = tl.bce;
  out.l1 = tl.l1;
  out.total = tl.total;

  // Auxiliary loss: -log of the head-mean [CLS] attention mass on the target cells.
  const auto cells = target_cells(s.target, head.grid);
  const auto& probs = enc.final_attention.probs;
  const double inv_h = 1.0 / static_cast<double>(probs.size());
  double mass = 0.0;
  if (weights.attention > 0.0) {
    for (const auto& p : probs) {
      for (std::size_t j : cells) mass += p(0, layout.search_begin() + j) * inv_h;
    }
    out.attention = -std::log(std::max(mass, kProbFloor));
    out.total += weights.attention * out.attention;
  }

  if (!grad) return out;

  Matrix dsearch_feat = head_backward(enc.search, model.head, head, tl.grad, grad->head);
  Matrix dout(layout.total(), mc.dim);
  accumulate_rows(dout, layout.search_begin(), dsearch_feat, 0, layout.n_search);

  std::vector<Matrix> dattn;
  if (weights.attention > 0.0) {
    const double g = -weights.attention * inv_h / std::max(mass, kProbFloor);
    for (std::size_t h = 0; h < probs.size(); ++h) {
      dattn.emplace_back(layout.total(), layout.total());
      for (std::size_t j : cells) dattn.back()(0, layout.search_begin() + j) = g;
    }
  }
  const Matrix dtokens =
      encode_backward(model.blocks, trace, dout, dattn.empty() ? nullptr : &dattn, grad->blocks);

  for (std::size_t i = 0; i < layout.n_lang; ++i) {
    accumulate_rows(grad->word_table, static_cast<std::size_t>(s.lang_ids[i]), dtokens, i, 1);
  }
  accumulate_rows(grad->lang_pos, 0, dtokens, 0, layout.n_lang);

  const std::size_t tb = layout.tmpl_begin();
  accumulate_rows(grad->embed.template_pos, 0, dtokens, tb, layout.n_tmpl);
  patch_tokens_backward(model.embed, tmpl_cache, slice_rows(dtokens, tb, n_init), grad->embed);
  for (std::size_t i = 0; i < n_dyn; ++i) {
    patch_tokens_backward(model.embed, dyn_cache[i], slice_rows(dtokens, tb + n_init + i, 1),
                          grad->embed);
  }

  const std::size_t sb = layout.search_begin();
  accumulate_rows(grad->embed.search_pos, 0, dtokens, sb, layout.n_search);
  patch_tokens_backward(model.embed, search_cache, slice_rows(dtokens, sb, layout.n_search),
                        grad->embed);
  return out;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("train config: " + msg); };
  if (!(optimizer.lr >= 0.0)) fail("lr must be non-negative");
  if (!(optimizer.weight_decay >= 0.0)) fail("weight_decay must be non-negative");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) fail("beta1 must be in [0, 1)");
  if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) fail("beta2 must be in [0, 1)");
  if (!(optimizer.eps > 0.0)) fail("adam_eps must be positive");
  if (batch_size == 0) fail("batch_size must be at least 1");
  if (samples_per_epoch == 0) fail("samples_per_epoch must be at least 1");
  if (!(template_factor > 1.0) || !(search_factor > 1.0)) fail("crop factors must exceed 1");
  if (!(empty_language_prob >= 0.0 && empty_language_prob <= 1.0)) {
    fail("empty_language_prob must be in [0, 1]");
  }
  if (!(first_template_prob >= 0.0 && first_template_prob <= 1.0)) {
    fail("first_template_prob must be in [0, 1]");
  }
  if (!(decoy_prob >= 0.0 && decoy_prob <= 1.0)) fail("decoy_prob must be in [0, 1]");
  if (!(decoy_min_shift >= 0.0)) fail("decoy_min_shift must be non-negative");
  if (loss.center < 0.0 || loss.box < 0.0 || loss.attention < 0.0) fail("loss weights must be >= 0");
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Box jitter(const Box& b, const TrainConfig& c, std::mt19937_64& rng) {
  const double s = std::sqrt(b.w * b.h);
  const double cx = b.cx() + uniform(rng, -c.center_jitter, c.center_jitter) * s;
  const double cy = b.cy() + uniform(rng, -c.center_jitter, c.center_jitter) * s;
  const double scale = std::exp(uniform(rng, -c.scale_jitter, c.scale_jitter));
  return Box::from_center(cx, cy, b.w * scale, b.h * scale);
}

double overlap_area(const Box& a, const Box& b) {
  const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  return iw > 0.0 && ih > 0.0 ? iw * ih : 0.0;
}

// Fills a rectangle or ellipse of `size` with `color` plus pixel noise, at a
// random spot of the crop clear of `keep_out`. Gives up after a few tries.
void paste_decoy(Image& crop, const Box& keep_out, const Rgb& color, std::mt19937_64& rng) {
  const double w = keep_out.w, h = keep_out.h;
  if (w >= crop.width() || h >= crop.height()) return;
  const bool ellipse = pick(rng, 0, 1) == 1;
  std::uniform_int_distribution<int> noise(-6, 6);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const Box b{uniform(rng, 0.0, crop.width() - w), uniform(rng, 0.0, crop.height() - h), w, h};
    if (overlap_area(b, keep_out) > 0.0) continue;
    for (int y = static_cast<int>(std::ceil(b.y)); y < b.y + b.h; ++y) {
      for (int x = static_cast<int>(std::ceil(b.x)); x < b.x + b.w; ++x) {
        if (ellipse) {
          const double dx = (x + 0.5 - b.cx()) / (w / 2.0), dy = (y + 0.5 - b.cy()) / (h / 2.0);
          if (dx * dx + dy * dy > 1.0) continue;
        }
        std::array<std::uint8_t, 3> px{};
        for (int c = 0; c < 3; ++c) {
          px[c] = static_cast<std::uint8_t>(std::clamp(std::lround(color[c]) + noise(rng), 0L, 255L));
        }
        crop.set(x, y, px);
      }
    }
    return;
  }
}

}  // namespace

TrainSample draw_sample(const std::vector<Sequence>& data, const TrainConfig& c, Stage stage,
                        const Model& model, const Vocabulary& vocab, std::mt19937_64& rng) {
  const ModelConfig& mc = model.config;
  const Sequence& seq = data[pick(rng, 0, data.size() - 1)];
  if (seq.size() < 2) throw std::invalid_argument("training sequence " + seq.name + " has one frame");
  const std::size_t j = pick(rng, 1, seq.size() - 1);
  std::size_t i = 0;
  const bool first = stage == Stage::VisionLanguage && uniform(rng, 0.0, 1.0) < c.first_template_prob;
  if (!first) {
    const std::size_t lo = j > c.max_gap ? j - c.max_gap : 0;
    const std::size_t hi = std::min(seq.size() - 1, j + c.max_gap);
    i = pick(rng, lo, hi);
  }

  TrainSample s;
  s.template_crop = crop_search_region(seq.frames[i], seq.gt[i], c.template_factor, mc.template_size).crop;
  const CropResult search = crop_search_region(seq.frames[j], jitter(seq.gt[j], c, rng),
                                               c.search_factor, mc.search_size);
  s.search_crop = search.crop;
  s.target = search.mapping.to_crop(seq.gt[j]);

  std::string text;
  if (stage == Stage::VisionLanguage) {
    const std::size_t k = pick(rng, 0, std::min(c.max_topk, mc.max_dynamic));
    const CropResult prev = crop_search_region(seq.frames[j - 1], jitter(seq.gt[j - 1], c, rng),
                                               c.search_factor, mc.search_size);
    const Box prev_target = prev.mapping.to_crop(seq.gt[j - 1]);
    const std::size_t cells = mc.search_tokens();
    std::vector<double> coverage(cells);
    for (std::size_t idx = 0; idx < cells; ++idx) {
      coverage[idx] = overlap_area(index_to_patch_box(idx, mc.search_size), prev_target);
    }
    for (std::size_t idx : topk_indices(coverage, k)) {
      const Box b = index_to_patch_box(idx, mc.search_size);
      s.dynamic.push_back(prev.crop.crop(static_cast<int>(b.x), static_cast<int>(b.y), 16, 16));
    }
    if (uniform(rng, 0.0, 1.0) >= c.empty_language_prob) {
      text = generate_description(seq.frames[j - 1], seq.gt[j - 1], seq.category);
    }
    if (c.decoy_prob > 0.0 && uniform(rng, 0.0, 1.0) < c.decoy_prob) {
      const Rgb then = mean_rgb(seq.frames[i], seq.gt[i]);
      if (color_shift(then, mean_rgb(seq.frames[j], seq.gt[j])) >= c.decoy_min_shift) {
        paste_decoy(s.search_crop, s.target, then, rng);
      }
    }
  }
  s.lang_ids = tokenize_text(text, vocab, mc.lang_tokens);
  return s;
}

void train_stage(const std::vector<Sequence>& data, const TrainConfig& config, Stage stage,
                 std::size_t epochs, Model& model, const Vocabulary& vocab, TrainState& state,
                 const EpochCallback& on_epoch) {
  if (data.empty()) throw std::invalid_argument("train_stage: empty dataset");
  config.validate();
  if (vocab.size() != model.config.vocab_size) {
    throw std::invalid_argument("train_stage: vocabulary size does not match the model");
  }
  // Each stage restarts its sample stream from the seed so stages are reproducible on their own.
  std::mt19937_64 rng(config.seed * 2 + (stage == Stage::VisionLanguage ? 1 : 0) +
                      state.curve.size() * 1000003ULL);

  std::vector<Matrix*> params;
  for (auto& p : model.parameters()) params.push_back(p.value);
  Model grad = Model::zeros(model.config);
  std::vector<const Matrix*> grads;
  for (auto& p : grad.parameters()) grads.push_back(p.value);

  for (std::size_t e = 0; e < epochs; ++e) {
    double epoch_loss = 0.0;
    std::size_t done = 0;
    while (done < config.samples_per_epoch) {
      const std::size_t batch = std::min(config.batch_size, config.samples_per_epoch - done);
      for (auto& p : grad.parameters()) p.value->fill(0.0);
      for (std::size_t b = 0; b < batch; ++b) {
        const TrainSample s = draw_sample(data, config, stage, model, vocab, rng);
        epoch_loss += sample_loss(model, s, config.loss, &grad).total;
      }
      const double inv = 1.0 / static_cast<double>(batch);
      for (auto& p : grad.parameters()) scale_inplace(*p.value, inv);
      try {
        adamw_step(params, grads, state.moments, config.optimizer, state.step + 1);
        ++state.step;
      } catch (const NumericError&) {
        ++state.rejected_steps;
      }
      done += batch;
    }
    EpochStats stats{state.curve.size() + 1, epoch_loss / static_cast<double>(done)};
    state.curve.push_back(stats);
    if (on_epoch) on_epoch(stage, stats);
  }
}

Vocabulary build_vocabulary(const std::vector<Sequence>& data) {
  std::vector<std::string> categories;
  std::set<std::string> seen;
  for (const auto& s : data) {
    if (seen.insert(s.category).second) categories.push_back(s.category);
  }
  Vocabulary vocab;
  for (const auto& w : description_vocabulary(categories)) {
    for (const auto& piece : split_words(w)) {
      if (!vocab.contains(piece)) vocab.add(piece);
    }
  }
  for (const auto& s : data) {
    for (const auto& w : split_words(s.description)) {
      if (!vocab.contains(w)) vocab.add(w);
    }
  }
  return vocab;
}

void write_loss_csv(const std::vector<EpochStats>& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,loss\n";
  char buf[64];
  for (const auto& e : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", e.epoch, e.loss);
    out << buf;
  }
}

}  // namespace dutrack
