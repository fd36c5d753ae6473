/*
 * Copyright 2026 The aio-stereo Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "aio/config.hpp"

#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "json.hpp"

#include "aio/errors.hpp"
#include "aio/hash.hpp"

namespace aio {

using nlohmann::json;

namespace {

// Reads optional keys from one JSON object, rejecting anything unread.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + " has the wrong type (" + std::string(it->type_name()) + ")");
    }
  }

  void get_path(const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key '" + where(k.c_str()) + "'");
  }

  std::string where(const char* key = nullptr) const {
    if (!key) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_model(const json& j, ModelConfig& m) {
  Section s(j, "model");
  s.get("context_channels", m.context_channels);
  s.get("feature_hidden", m.feature_hidden);
  s.get("feature_channels", m.feature_channels);
  s.get("hidden_channels", m.hidden_channels);
  s.get("max_disparity", m.max_disparity);
  s.get("corr_levels", m.corr_levels);
  s.get("corr_radius", m.corr_radius);
  s.get("train_iters", m.train_iters);
  s.get("eval_iters", m.eval_iters);
  s.get("top_k", m.top_k);
  s.get("align_hidden", m.align_hidden);
  s.get("teacher_channels", m.teacher_channels);
  std::vector<std::string> names;
  for (auto t : m.teachers) names.push_back(teacher_name(t));
  s.get("teachers", names);
  m.teachers.clear();
  for (const auto& n : names) {
    try {
      m.teachers.push_back(parse_teacher(n));
    } catch (const ContractError& e) {
      throw ConfigError(std::string("model.teachers: ") + e.what());
    }
  }
  s.finish();
}

json model_to_json(const ModelConfig& m) {
  std::vector<std::string> names;
  for (auto t : m.teachers) names.push_back(teacher_name(t));
  return {{"context_channels", m.context_channels},
          {"feature_hidden", m.feature_hidden},
          {"feature_channels", m.feature_channels},
          {"hidden_channels", m.hidden_channels},
          {"max_disparity", m.max_disparity},
          {"corr_levels", m.corr_levels},
          {"corr_radius", m.corr_radius},
          {"train_iters", m.train_iters},
          {"eval_iters", m.eval_iters},
          {"top_k", m.top_k},
          {"align_hidden", m.align_hidden},
          {"teacher_channels", m.teacher_channels},
          {"teachers", names}};
}

}  // namespace

void RunConfig::validate() const {
  data.validate();
  model.validate();
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (teacher_noise < 0.0) throw ConfigError("teacher_noise must be >= 0");
  if (model.max_disparity > data.width / 4)
    throw ConfigError("model.max_disparity " + std::to_string(model.max_disparity) + " exceeds width/4 = " +
                      std::to_string(data.width / 4));
  const auto& t = train;
  if (t.steps < 0) throw ConfigError("train.steps must be >= 0");
  if (t.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(t.peak_lr > 0.0)) throw ConfigError("train.peak_lr must be positive");
  if (!(t.warm_frac > 0.0 && t.warm_frac < 1.0)) throw ConfigError("train.warm_frac must be in (0,1)");
  if (t.weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
  if (!(t.align_lr_mult > 1.0)) throw ConfigError("train.align_lr_mult must be > 1");
  if (!(t.align_half_life_frac > 0.0)) throw ConfigError("train.align_half_life_frac must be positive");
  if (!(t.gamma_p > 0.0 && t.gamma_p < 1.0)) throw ConfigError("train.gamma_p must be in (0,1)");
  if (!(t.gamma_kd >= 0.0 && t.gamma_kd < 1.0)) throw ConfigError("train.gamma_kd must be in [0,1)");
  if (t.val_every < 0 || t.checkpoint_every < 0) throw ConfigError("train cadences must be >= 0");
  if (t.val_probe < 1) throw ConfigError("train.val_probe must be >= 1");
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  Section root(j, "");
  root.get("seed", cfg.seed);
  root.get_path("output_dir", cfg.output_dir);
  root.get("teacher_noise", cfg.teacher_noise);
  root.get_path("teacher_dir", cfg.teacher_dir);
  std::optional<std::uint64_t> data_seed;
  if (const json* d = root.child("data")) {
    Section s(*d, "data");
    if (d->contains("seed")) {
      data_seed.emplace();
      s.get("seed", *data_seed);
    }
    s.get_path("dir", cfg.data.dir);
    s.get("height", cfg.data.height);
    s.get("width", cfg.data.width);
    s.get("d_max", cfg.data.d_max);
    s.get("density", cfg.data.density);
    s.get("depth_cue", cfg.data.depth_cue);
    s.get("num_train", cfg.data.num_train);
    s.get("num_val", cfg.data.num_val);
    s.get("max_layers", cfg.data.max_layers);
    s.finish();
  }
  if (const json* m = root.child("model")) read_model(*m, cfg.model);
  if (const json* t = root.child("train")) {
    Section s(*t, "train");
    auto& c = cfg.train;
    s.get("steps", c.steps);
    s.get("batch_size", c.batch_size);
    s.get("peak_lr", c.peak_lr);
    s.get("warm_frac", c.warm_frac);
    s.get("weight_decay", c.weight_decay);
    s.get("align_lr_mult", c.align_lr_mult);
    s.get("align_half_life_frac", c.align_half_life_frac);
    s.get("gamma_p", c.gamma_p);
    s.get("gamma_kd", c.gamma_kd);
    s.get("val_every", c.val_every);
    s.get("val_probe", c.val_probe);
    s.get("checkpoint_every", c.checkpoint_every);
    std::string ab = ablation_name(c.ablation);
    s.get("ablation", ab);
    c.ablation = parse_ablation(ab);
    s.finish();
  }
  if (const json* e = root.child("eval")) {
    Section s(*e, "eval");
    s.get("render", cfg.eval.render);
    s.get("pooled_a90", cfg.eval.pooled_a90);
    s.finish();
  }
  root.finish();
  cfg.data.seed = data_seed.value_or(cfg.seed);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string model_config_json(const ModelConfig& m) { return model_to_json(m).dump(); }

ModelConfig parse_model_config(const std::string& text) {
  ModelConfig m;
  try {
    read_model(json::parse(text), m);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model section is not valid JSON: ") + e.what());
  }
  m.validate();
  return m;
}

std::string run_config_json(const RunConfig& cfg) {
  const json j = {
      {"seed", cfg.seed},
      {"output_dir", cfg.output_dir.generic_string()},
      {"teacher_noise", cfg.teacher_noise},
      {"teacher_dir", cfg.teacher_dir.generic_string()},
      {"data",
       {{"dir", cfg.data.dir.generic_string()},
        {"seed", cfg.data.seed},
        {"height", cfg.data.height},
        {"width", cfg.data.width},
        {"d_max", cfg.data.d_max},
        {"density", cfg.data.density},
        {"depth_cue", cfg.data.depth_cue},
        {"num_train", cfg.data.num_train},
        {"num_val", cfg.data.num_val},
        {"max_layers", cfg.data.max_layers}}},
      {"model", model_to_json(cfg.model)},
      {"train",
       {{"steps", cfg.train.steps},
        {"batch_size", cfg.train.batch_size},
        {"peak_lr", cfg.train.peak_lr},
        {"warm_frac", cfg.train.warm_frac},
        {"weight_decay", cfg.train.weight_decay},
        {"align_lr_mult", cfg.train.align_lr_mult},
        {"align_half_life_frac", cfg.train.align_half_life_frac},
        {"gamma_p", cfg.train.gamma_p},
        {"gamma_kd", cfg.train.gamma_kd},
        {"val_every", cfg.train.val_every},
        {"val_probe", cfg.train.val_probe},
        {"checkpoint_every", cfg.train.checkpoint_every},
        {"ablation", ablation_name(cfg.train.ablation)}}},
      {"eval", {{"render", cfg.eval.render}, {"pooled_a90", cfg.eval.pooled_a90}}},
  };
  return j.dump(2);
}

std::uint64_t model_config_hash(const ModelConfig& m) { return fnv1a64(model_config_json(m)); }

}  // namespace aio
