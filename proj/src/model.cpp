// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "dutrack/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <random>

#include "dutrack/image.hpp"

namespace dutrack {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (dim == 0 || dim % 4 != 0) fail("model_dim must be a positive multiple of 4");
  if (heads == 0 || dim % heads != 0) fail("model_dim must be divisible by num_heads");
  if (blocks == 0) fail("num_blocks must be at least 1");
  if (lang_tokens < 2) fail("lang_tokens must be at least 2");
  if (template_size <= 0 || template_size % 16 != 0) fail("template_size must be a multiple of 16");
  if (search_size <= 0 || search_size % 16 != 0) fail("search_size must be a multiple of 16");
  if (vocab_size < 3) fail("vocabulary must hold the three reserved tokens");
}

Model Model::zeros(const ModelConfig& config) {
  config.validate();
  Model m;
  m.config = config;
  m.word_table = Matrix(config.vocab_size, config.dim);
  m.lang_pos = Matrix(config.lang_tokens, config.dim);
  m.embed = PatchEmbedParams(config.dim, config.template_tokens() + config.max_dynamic,
                             config.search_tokens());
  for (std::size_t b = 0; b < config.blocks; ++b) {
    EncoderBlockParams block(config.dim, config.heads);
    block.ln1.gain.fill(0.0);
    block.ln2.gain.fill(0.0);
    block.lambda1.fill(0.0);
    block.lambda2.fill(0.0);
    m.blocks.push_back(std::move(block));
  }
  m.head = HeadParams(config.dim);
  return m;
}

Model Model::initialized(const ModelConfig& config, std::uint64_t seed) {
  Model m = zeros(config);
  std::mt19937_64 rng(seed);
  auto gaussian = [&](Matrix& mat, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : mat.data()) v = dist(rng);
  };
  auto linear = [&](Linear& l) {
    gaussian(l.weight, 1.0 / std::sqrt(static_cast<double>(l.in_features())));
  };

  gaussian(m.word_table, 1.0);
  gaussian(m.lang_pos, 0.1);
  linear(m.embed.stage1);
  linear(m.embed.stage2);
  linear(m.embed.stage3);
  gaussian(m.embed.template_pos, 0.1);
  gaussian(m.embed.search_pos, 0.1);
  for (auto& b : m.blocks) {
    linear(b.attn.query);
    linear(b.attn.key);
    linear(b.attn.value);
    linear(b.attn.output);
    linear(b.fc1);
    linear(b.fc2);
    b.ln1.gain.fill(1.0);
    b.ln2.gain.fill(1.0);
    b.lambda1.fill(1.0);
    b.lambda2.fill(1.0);
  }
  gaussian(m.head.score.weight, 0.01);
  gaussian(m.head.offset.weight, 0.01);
  gaussian(m.head.size.weight, 0.01);
  // Start the score map near the one-hot prior of a single positive cell.
  m.head.score.bias[0] = -std::log(static_cast<double>(config.search_tokens()) - 1.0);
  return m;
}

std::vector<NamedParam> Model::parameters() {
  std::vector<NamedParam> out;
  auto add_linear = [&](const std::string& prefix, Linear& l) {
    out.push_back({prefix + ".weight", &l.weight});
    out.push_back({prefix + ".bias", &l.bias});
  };
  out.push_back({"text.word_table", &word_table});
  out.push_back({"text.positions", &lang_pos});
  add_linear("embed.stage1", embed.stage1);
  add_linear("embed.stage2", embed.stage2);
  add_linear("embed.stage3", embed.stage3);
  out.push_back({"embed.template_positions", &embed.template_pos});
  out.push_back({"embed.search_positions", &embed.search_pos});
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string p = "blocks." + std::to_string(b);
    add_linear(p + ".attn.query", blocks[b].attn.query);
    out.push_back({p + ".attn.key.weight", &blocks[b].attn.key.weight});
    add_linear(p + ".attn.value", blocks[b].attn.value);
    add_linear(p + ".attn.output", blocks[b].attn.output);
    add_linear(p + ".mlp.fc1", blocks[b].fc1);
    add_linear(p + ".mlp.fc2", blocks[b].fc2);
    out.push_back({p + ".ln1.gain", &blocks[b].ln1.gain});
    out.push_back({p + ".ln1.bias", &blocks[b].ln1.bias});
    out.push_back({p + ".ln2.gain", &blocks[b].ln2.gain});
    out.push_back({p + ".ln2.bias", &blocks[b].ln2.bias});
    out.push_back({p + ".lambda1", &blocks[b].lambda1});
    out.push_back({p + ".lambda2", &blocks[b].lambda2});
  }
  add_linear("head.score", head.score);
  add_linear("head.offset", head.offset);
  add_linear("head.size", head.size);
  return out;
}

std::size_t Model::parameter_count() {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.value->size();
  return n;
}

namespace {

constexpr char kMagic[8] = {'D', 'U', 'T', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_array(std::ostream& out, const std::string& name, std::size_t rows, std::size_t cols,
               std::span<const double> data) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u32(out, 2);
  put_u32(out, static_cast<std::uint32_t>(rows));
  put_u32(out, static_cast<std::uint32_t>(cols));
  for (double v : data) {
    const float f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), sizeof f);
  }
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  const std::filesystem::path& path;

  void need(std::size_t n) {
    if (buf.size() - pos < n) {
      throw IoError(path.string() + ": truncated checkpoint at byte offset " + std::to_string(pos));
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  float f32() {
    need(4);
    float v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
};

struct StoredArray {
  std::vector<std::uint32_t> dims;
  std::vector<double> data;
};

}  // namespace

void save_checkpoint(Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const ModelConfig& c = model.config;
  const std::vector<double> config{static_cast<double>(c.dim),
                                   static_cast<double>(c.heads),
                                   static_cast<double>(c.blocks),
                                   static_cast<double>(c.lang_tokens),
                                   static_cast<double>(c.template_size),
                                   static_cast<double>(c.search_size),
                                   static_cast<double>(c.max_dynamic),
                                   static_cast<double>(c.vocab_size)};
  auto params = model.parameters();
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(params.size() + 1));
  put_array(out, "config", 1, config.size(), config);
  for (const auto& p : params) {
    put_array(out, p.name, p.value->rows(), p.value->cols(), p.value->data());
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader rd{buf, 0, path};
  if (rd.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw IoError(path.string() + ": not a checkpoint (bad magic)");
  }
  const std::uint32_t version = rd.u32();
  if (version != kVersion) {
    throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = rd.u32();
  std::map<std::string, StoredArray> arrays;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = rd.bytes(rd.u32());
    StoredArray arr;
    const std::uint32_t rank = rd.u32();
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      arr.dims.push_back(rd.u32());
      n *= arr.dims.back();
    }
    rd.need(n * 4);
    arr.data.resize(n);
    for (std::size_t k = 0; k < n; ++k) arr.data[k] = rd.f32();
    arrays.emplace(name, std::move(arr));
  }

  auto cfg_it = arrays.find("config");
  if (cfg_it == arrays.end() || cfg_it->second.data.size() != 8) {
    throw IoError(path.string() + ": missing config array");
  }
  const auto& cv = cfg_it->second.data;
  ModelConfig config;
  config.dim = static_cast<std::size_t>(cv[0]);
  config.heads = static_cast<std::size_t>(cv[1]);
  config.blocks = static_cast<std::size_t>(cv[2]);
  config.lang_tokens = static_cast<std::size_t>(cv[3]);
  config.template_size = static_cast<int>(cv[4]);
  config.search_size = static_cast<int>(cv[5]);
  config.max_dynamic = static_cast<std::size_t>(cv[6]);
  config.vocab_size = static_cast<std::size_t>(cv[7]);

  Model model = Model::zeros(config);
  for (auto& p : model.parameters()) {
    auto it = arrays.find(p.name);
    if (it == arrays.end()) throw IoError(path.string() + ": missing array " + p.name);
    const auto& dims = it->second.dims;
    if (dims.size() != 2 || dims[0] != p.value->rows() || dims[1] != p.value->cols()) {
      throw IoError(path.string() + ": array " + p.name + " has wrong shape, expected " +
                    shape_string(*p.value));
    }
    std::copy(it->second.data.begin(), it->second.data.end(), p.value->data().begin());
  }
  return model;
}

}  // namespace dutrack
