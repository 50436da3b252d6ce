#pragma once

#include <array>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "spheregan/common.hpp"
#include "spheregan/losses.hpp"
#include "spheregan/model.hpp"

namespace sgan {

// Full training configuration. Serialized as a flat JSON object with dotted
// keys; command-line overrides use the same keys ("--override train.epochs=5").
struct TrainConfig {
  int height = 64;  // width is always 2*height
  std::array<int, 4> gen_channels{16, 32, 64, 128};
  std::array<int, 4> disc_channels{16, 32, 64, 64};
  ConvMode conv_mode = ConvMode::kSpherical;

  int epochs = 20;
  int batch_size = 4;
  int k = 5;  // saliency hint lag, frames
  double lr_gen = 1e-4;
  double lr_disc = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 1234;
  int checkpoint_interval = 100;  // steps; 0 = final checkpoint only
  std::string resume;             // checkpoint directory, empty = fresh start

  LossConfig loss;

  std::string data_dir;
  std::string out_dir;
  int threads = 0;  // 0 = all cores

  int width() const { return 2 * height; }

  void validate() const {
    if (height % 8 != 0 || height < 8)
      throw ConfigError("train config: model.height must be a positive multiple of 8");
    if (epochs < 1) throw ConfigError("train config: train.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train config: train.batch_size must be >= 1");
    if (k < 1) throw ConfigError("train config: train.k must be >= 1");
    if (!(lr_gen > 0.0) || !(lr_disc > 0.0))
      throw ConfigError("train config: learning rates must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
      throw ConfigError("train config: adam betas must be in (0, 1)");
    if (checkpoint_interval < 0)
      throw ConfigError("train config: train.checkpoint_interval must be >= 0");
    if (data_dir.empty()) throw ConfigError("train config: data.dir is required");
    if (out_dir.empty()) throw ConfigError("train config: out.dir is required");
  }

  GeneratorConfig generator_config() const {
    GeneratorConfig g;
    g.height = height;
    g.width = width();
    g.channels = gen_channels;
    g.conv_mode = conv_mode;
    return g;
  }
  DiscriminatorConfig discriminator_config() const {
    DiscriminatorConfig d;
    d.height = height;
    d.width = width();
    d.channels = disc_channels;
    return d;
  }

  nlohmann::ordered_json to_flat_json() const {
    nlohmann::ordered_json j;
    j["data.dir"] = data_dir;
    j["out.dir"] = out_dir;
    j["model.height"] = height;
    j["model.gen_channels"] = gen_channels;
    j["model.disc_channels"] = disc_channels;
    j["model.conv_mode"] = conv_mode_name(conv_mode);
    j["train.epochs"] = epochs;
    j["train.batch_size"] = batch_size;
    j["train.k"] = k;
    j["train.lr_gen"] = lr_gen;
    j["train.lr_disc"] = lr_disc;
    j["train.beta1"] = beta1;
    j["train.beta2"] = beta2;
    j["train.adam_eps"] = adam_eps;
    j["train.seed"] = seed;
    j["train.checkpoint_interval"] = checkpoint_interval;
    j["train.resume"] = resume;
    j["loss.terms"] = loss.terms();
    j["loss.epsilon"] = loss.epsilon;
    j["runtime.threads"] = threads;
    return j;
  }

  static TrainConfig from_flat_json(const nlohmann::json& j) {
    TrainConfig c;
    std::set<std::string> known = {
        "data.dir",      "out.dir",       "model.height",   "model.gen_channels",
        "model.disc_channels", "model.conv_mode", "train.epochs", "train.batch_size",
        "train.k",       "train.lr_gen",  "train.lr_disc",  "train.beta1",
        "train.beta2",   "train.adam_eps", "train.seed",    "train.checkpoint_interval",
        "train.resume",  "loss.terms",    "loss.epsilon",   "runtime.threads"};
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!known.count(it.key())) throw ConfigError("unknown config key '" + it.key() + "'");
    try {
      if (j.contains("data.dir")) c.data_dir = j.at("data.dir").get<std::string>();
      if (j.contains("out.dir")) c.out_dir = j.at("out.dir").get<std::string>();
      if (j.contains("model.height")) c.height = j.at("model.height").get<int>();
      if (j.contains("model.gen_channels"))
        c.gen_channels = j.at("model.gen_channels").get<std::array<int, 4>>();
      if (j.contains("model.disc_channels"))
        c.disc_channels = j.at("model.disc_channels").get<std::array<int, 4>>();
      if (j.contains("model.conv_mode"))
        c.conv_mode = conv_mode_from_name(j.at("model.conv_mode").get<std::string>());
      if (j.contains("train.epochs")) c.epochs = j.at("train.epochs").get<int>();
      if (j.contains("train.batch_size")) c.batch_size = j.at("train.batch_size").get<int>();
      if (j.contains("train.k")) c.k = j.at("train.k").get<int>();
      if (j.contains("train.lr_gen")) c.lr_gen = j.at("train.lr_gen").get<double>();
      if (j.contains("train.lr_disc")) c.lr_disc = j.at("train.lr_disc").get<double>();
      if (j.contains("train.beta1")) c.beta1 = j.at("train.beta1").get<double>();
      if (j.contains("train.beta2")) c.beta2 = j.at("train.beta2").get<double>();
      if (j.contains("train.adam_eps")) c.adam_eps = j.at("train.adam_eps").get<double>();
      if (j.contains("train.seed")) c.seed = j.at("train.seed").get<uint64_t>();
      if (j.contains("train.checkpoint_interval"))
        c.checkpoint_interval = j.at("train.checkpoint_interval").get<int>();
      if (j.contains("train.resume")) c.resume = j.at("train.resume").get<std::string>();
      if (j.contains("loss.terms")) {
        auto terms = j.at("loss.terms").get<std::vector<std::string>>();
        c.loss = LossConfig::from_terms(std::set<std::string>(terms.begin(), terms.end()));
      }
      if (j.contains("loss.epsilon")) c.loss.epsilon = j.at("loss.epsilon").get<double>();
      if (j.contains("runtime.threads")) c.threads = j.at("runtime.threads").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid config value: ") + e.what());
    }
    return c;
  }
};

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

// "key=value" overrides; the value is parsed as JSON when possible, otherwise
// taken as a string.
inline void apply_overrides(nlohmann::json& j, const std::vector<std::string>& overrides) {
  for (const auto& kv : overrides) {
    auto pos = kv.find('=');
    if (pos == std::string::npos || pos == 0)
      throw ConfigError("override must look like key=value, got '" + kv + "'");
    std::string key = kv.substr(0, pos);
    std::string value = kv.substr(pos + 1);
    nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;
    j[key] = parsed;
  }
}

inline TrainConfig load_train_config(const std::string& path,
                                     const std::vector<std::string>& overrides) {
  nlohmann::json j = load_json_file(path);
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  apply_overrides(j, overrides);
  TrainConfig c = TrainConfig::from_flat_json(j);
  c.validate();
  return c;
}

}  // namespace sgan
