// Copyright 2026 The DUTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "dutrack/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace dutrack {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string where(const std::string& source, const ConfigEntry& e) {
  return source + ":" + std::to_string(e.line) + ": key '" + e.key + "'";
}

double to_double(const std::string& source, const ConfigEntry& e) {
  if (e.value == "inf" || e.value == "+inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(e.value, &used);
    if (used == e.value.size() && !std::isnan(v)) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(where(source, e) + ": expected a number, got '" + e.value + "'");
}

std::uint64_t to_uint(const std::string& source, const ConfigEntry& e) {
  try {
    std::size_t used = 0;
    if (!e.value.empty() && e.value[0] != '-') {
      const unsigned long long v = std::stoull(e.value, &used);
      if (used == e.value.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError(where(source, e) + ": expected a non-negative integer, got '" + e.value + "'");
}

bool to_bool(const std::string& source, const ConfigEntry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  throw ConfigError(where(source, e) + ": expected true or false, got '" + e.value + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const ConfigEntry&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto size_key = [&](const char* name, auto member) {
      t[name] = [member](RunConfig& c, const std::string& src, const ConfigEntry& e) {
        member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(to_uint(src, e));
      };
    };
    auto real_key = [&](const char* name, auto member) {
      t[name] = [member](RunConfig& c, const std::string& src, const ConfigEntry& e) {
        member(c) = to_double(src, e);
      };
    };
    auto bool_key = [&](const char* name, auto member) {
      t[name] = [member](RunConfig& c, const std::string& src, const ConfigEntry& e) {
        member(c) = to_bool(src, e);
      };
    };
    auto path_key = [&](const char* name, auto member) {
      t[name] = [member](RunConfig& c, const std::string&, const ConfigEntry& e) {
        member(c) = std::filesystem::path(e.value);
      };
    };

    size_key("model_dim", [](RunConfig& c) -> std::size_t& { return c.model.dim; });
    size_key("num_heads", [](RunConfig& c) -> std::size_t& { return c.model.heads; });
    size_key("num_blocks", [](RunConfig& c) -> std::size_t& { return c.model.blocks; });
    size_key("lang_tokens", [](RunConfig& c) -> std::size_t& { return c.model.lang_tokens; });
    size_key("template_size", [](RunConfig& c) -> int& { return c.model.template_size; });
    size_key("search_size", [](RunConfig& c) -> int& { return c.model.search_size; });
    size_key("max_dynamic", [](RunConfig& c) -> std::size_t& { return c.model.max_dynamic; });

    size_key("topk", [](RunConfig& c) -> std::size_t& { return c.tracker.topk; });
    real_key("template_factor", [](RunConfig& c) -> double& { return c.tracker.template_factor; });
    real_key("search_factor", [](RunConfig& c) -> double& { return c.tracker.search_factor; });
    real_key("window_weight", [](RunConfig& c) -> double& { return c.tracker.window_weight; });
    real_key("tau_s", [](RunConfig& c) -> double& { return c.tracker.policy.tau_s; });
    real_key("tau_d_strides", [](RunConfig& c) -> double& { return c.tracker.policy.tau_d_strides; });
    real_key("tau_c", [](RunConfig& c) -> double& { return c.tracker.policy.tau_c; });
    bool_key("symmetric_scale", [](RunConfig& c) -> bool& { return c.tracker.policy.symmetric_scale; });
    bool_key("corner_displacement",
             [](RunConfig& c) -> bool& { return c.tracker.corner_displacement; });
    bool_key("gate_dtcm", [](RunConfig& c) -> bool& { return c.tracker.gate_dtcm; });
    bool_key("use_language", [](RunConfig& c) -> bool& { return c.tracker.use_language; });

    real_key("lr", [](RunConfig& c) -> double& { return c.train.optimizer.lr; });
    real_key("weight_decay", [](RunConfig& c) -> double& { return c.train.optimizer.weight_decay; });
    real_key("beta1", [](RunConfig& c) -> double& { return c.train.optimizer.beta1; });
    real_key("beta2", [](RunConfig& c) -> double& { return c.train.optimizer.beta2; });
    real_key("adam_eps", [](RunConfig& c) -> double& { return c.train.optimizer.eps; });
    real_key("center_weight", [](RunConfig& c) -> double& { return c.train.loss.center; });
    real_key("box_weight", [](RunConfig& c) -> double& { return c.train.loss.box; });
    real_key("attention_weight", [](RunConfig& c) -> double& { return c.train.loss.attention; });
    size_key("stage1_epochs", [](RunConfig& c) -> std::size_t& { return c.train.stage1_epochs; });
    size_key("stage2_epochs", [](RunConfig& c) -> std::size_t& { return c.train.stage2_epochs; });
    size_key("samples_per_epoch",
             [](RunConfig& c) -> std::size_t& { return c.train.samples_per_epoch; });
    size_key("batch_size", [](RunConfig& c) -> std::size_t& { return c.train.batch_size; });
    size_key("max_gap", [](RunConfig& c) -> std::size_t& { return c.train.max_gap; });
    real_key("center_jitter", [](RunConfig& c) -> double& { return c.train.center_jitter; });
    real_key("scale_jitter", [](RunConfig& c) -> double& { return c.train.scale_jitter; });
    size_key("train_max_topk", [](RunConfig& c) -> std::size_t& { return c.train.max_topk; });
    real_key("empty_language_prob",
             [](RunConfig& c) -> double& { return c.train.empty_language_prob; });
    real_key("first_template_prob",
             [](RunConfig& c) -> double& { return c.train.first_template_prob; });
    real_key("decoy_prob", [](RunConfig& c) -> double& { return c.train.decoy_prob; });
    real_key("decoy_min_shift", [](RunConfig& c) -> double& { return c.train.decoy_min_shift; });

    size_key("seed", [](RunConfig& c) -> std::uint64_t& { return c.seed; });
    t["captioner"] = [](RunConfig& c, const std::string&, const ConfigEntry& e) { c.captioner = e.value; };
    t["captioner_timeout_ms"] = [](RunConfig& c, const std::string& src, const ConfigEntry& e) {
      c.captioner_timeout_ms = static_cast<int>(to_uint(src, e));
    };
    path_key("train_data", [](RunConfig& c) -> std::filesystem::path& { return c.train_data; });
    path_key("checkpoint", [](RunConfig& c) -> std::filesystem::path& { return c.checkpoint; });
    path_key("data", [](RunConfig& c) -> std::filesystem::path& { return c.data; });
    path_key("results", [](RunConfig& c) -> std::filesystem::path& { return c.results; });
    return t;
  }();
  return table;
}

}  // namespace

std::vector<ConfigEntry> parse_key_values(const std::string& text, const std::string& source) {
  std::vector<ConfigEntry> out;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    ConfigEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno};
    if (e.key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    if (!seen.insert(e.key).second) throw ConfigError(where(source, e) + ": duplicate key");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ConfigEntry> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> v;
    for (const auto& [name, _] : setters()) v.push_back(name);
    return v;
  }();
  return k;
}

void RunConfig::apply(const std::vector<ConfigEntry>& entries, const std::string& source) {
  for (const auto& e : entries) {
    auto it = setters().find(e.key);
    if (it == setters().end()) throw ConfigError(where(source, e) + ": unknown key");
    it->second(*this, source, e);
  }
}

void RunConfig::validate() const {
  ModelConfig m = model;
  if (m.vocab_size == 0) m.vocab_size = 3;
  try {
    m.validate();
    train.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  if (tracker.topk > model.max_dynamic) {
    throw ConfigError("topk " + std::to_string(tracker.topk) + " exceeds max_dynamic " +
                      std::to_string(model.max_dynamic));
  }
  if (!(tracker.window_weight >= 0.0 && tracker.window_weight < 1.0)) {
    throw ConfigError("window_weight must be in [0, 1)");
  }
  if (!(tracker.template_factor > 1.0 && tracker.search_factor > 1.0)) {
    throw ConfigError("template_factor and search_factor must exceed 1");
  }
  const auto& p = tracker.policy;
  if (!(p.tau_s >= 0.0 && p.tau_d_strides >= 0.0 && p.tau_c >= 0.0)) {
    throw ConfigError("policy thresholds tau_s, tau_d_strides, tau_c must be non-negative");
  }
  if (captioner_timeout_ms <= 0) throw ConfigError("captioner_timeout_ms must be positive");
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  RunConfig c;
  c.apply(read_key_values(path), path.string());
  return c;
}

SuiteFile SuiteFile::parse(const std::vector<ConfigEntry>& entries, const std::string& source) {
  SuiteFile s;
  for (const auto& e : entries) {
    if (e.key == "families" || e.key == "family") {
      s.families.clear();
      std::stringstream ss(e.value);
      std::string f;
      while (std::getline(ss, f, ',')) {
        f = trim(f);
        const auto& known = suite_families();
        if (std::find(known.begin(), known.end(), f) == known.end()) {
          throw ConfigError(where(source, e) + ": unknown family '" + f + "'");
        }
        s.families.push_back(f);
      }
    } else if (e.key == "count") {
      s.count = to_uint(source, e);
    } else if (e.key == "seed") {
      s.seed = to_uint(source, e);
    } else if (e.key == "length") {
      s.length = to_uint(source, e);
    } else if (e.key == "width") {
      s.width = static_cast<int>(to_uint(source, e));
    } else if (e.key == "height") {
      s.height = static_cast<int>(to_uint(source, e));
    } else if (e.key == "noise") {
      s.noise = static_cast<int>(to_uint(source, e));
    } else {
      throw ConfigError(where(source, e) + ": unknown key");
    }
  }
  if (s.families.empty()) throw ConfigError(source + ": no families given");
  if (s.count == 0 || s.length < 2) throw ConfigError(source + ": count must be >= 1 and length >= 2");
  return s;
}

SuiteFile SuiteFile::load(const std::filesystem::path& path) {
  return parse(read_key_values(path), path.string());
}

std::vector<SynthSpec> SuiteFile::specs() const {
  std::vector<SynthSpec> out;
  for (std::size_t f = 0; f < families.size(); ++f) {
    SuiteSpec spec;
    spec.family = families[f];
    spec.count = count;
    spec.seed = seed + 101 * f;
    spec.length = length;
    spec.width = width;
    spec.height = height;
    spec.noise = noise;
    for (auto& s : make_suite(spec)) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace dutrack
