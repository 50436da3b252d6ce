#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "spheregan/geometry.hpp"
#include "spheregan/ops.hpp"
#include "spheregan/rng.hpp"

namespace sgan {

enum class ConvMode { kSpherical, kPlanar };

inline std::string conv_mode_name(ConvMode m) {
  return m == ConvMode::kSpherical ? "spherical" : "planar";
}
inline ConvMode conv_mode_from_name(const std::string& s) {
  if (s == "spherical") return ConvMode::kSpherical;
  if (s == "planar") return ConvMode::kPlanar;
  throw ConfigError("unknown conv mode '" + s + "' (expected spherical|planar)");
}

// He initialization: normal(0, sqrt(2/fan_in)).
template <typename T>
inline Tensor<T> he_init(const std::vector<int64_t>& shape, int64_t fan_in, Rng& rng) {
  Tensor<T> t(shape);
  double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(std * rng.normal());
  return t;
}

// Ordered, name-addressed parameter set. Order is fixed at construction and
// shared by the Adam state and the checkpoint layout.
template <typename T>
struct ParamStore {
  std::vector<std::string> names;
  std::vector<std::unique_ptr<Var<T>>> vars;
  std::unordered_map<std::string, size_t> index;

  Var<T>* add(const std::string& name, Tensor<T> init) {
    if (index.count(name)) throw ConfigError("duplicate parameter name " + name);
    index[name] = vars.size();
    names.push_back(name);
    vars.push_back(std::make_unique<Var<T>>(std::move(init)));
    return vars.back().get();
  }
  Var<T>* get(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw ConfigError("unknown parameter " + name);
    return vars[it->second].get();
  }
  void zero_grads() {
    for (auto& v : vars) v->zero_grad();
  }
  int64_t total_size() const {
    int64_t n = 0;
    for (const auto& v : vars) n += v->value.size();
    return n;
  }
  size_t count() const { return vars.size(); }
};

// Non-trainable state (batch-norm running statistics).
template <typename T>
struct BufferStore {
  std::vector<std::string> names;
  std::vector<Tensor<T>> tensors;
  std::unordered_map<std::string, size_t> index;

  Tensor<T>* add(const std::string& name, Tensor<T> init) {
    if (index.count(name)) throw ConfigError("duplicate buffer name " + name);
    index[name] = tensors.size();
    names.push_back(name);
    tensors.push_back(std::move(init));
    return &tensors.back();
  }
  Tensor<T>* get(const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw ConfigError("unknown buffer " + name);
    return &tensors[it->second];
  }
};

struct LayerInfo {
  std::string name;
  std::string kind;
  int64_t out_c = 0, out_h = 0, out_w = 0;
  int64_t param_count = 0;
};

struct GeneratorConfig {
  int height = 64;
  int width = 128;
  std::array<int, 4> channels{16, 32, 64, 128};
  ConvMode conv_mode = ConvMode::kSpherical;
  static constexpr int kInChannels = 4;  // RGB frame + previous saliency map

  void validate() const {
    if (width != 2 * height) throw ConfigError("generator: width must equal 2*height");
    if (height % 8 != 0 || height < 8)
      throw ConfigError("generator: height must be a positive multiple of 8");
    // three pools halve the height three times and every level needs a
    // buildable sampling grid (height >= 4)
    if (conv_mode == ConvMode::kSpherical && height < 32)
      throw ConfigError("generator: spherical mode needs height >= 32 (bottleneck grid)");
    for (int c : channels)
      if (c < 1) throw ConfigError("generator: channel widths must be positive");
  }
};

struct DiscriminatorConfig {
  int height = 64;
  int width = 128;
  std::array<int, 4> channels{16, 32, 64, 64};
  double dropout_p = 0.5;

  void validate() const {
    if (width != 2 * height) throw ConfigError("discriminator: width must equal 2*height");
    if (height % 8 != 0 || height < 8)
      throw ConfigError("discriminator: height must be a positive multiple of 8");
    for (int c : channels)
      if (c < 1) throw ConfigError("discriminator: channel widths must be positive");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0))
      throw ConfigError("discriminator: dropout probability must be in [0, 1)");
  }
};

// U-Net generator: 4 encoder conv stages with 2x2 pooling between them,
// 3 decoder conv stages fed by 2x upsampling and skip concatenations, sigmoid
// on the last conv. conv_mode selects spherical sampling or the planar
// ablation for every conv/pool.
template <typename T>
class Generator {
 public:
  explicit Generator(GeneratorConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.conv_mode == ConvMode::kSpherical) {
      int h = cfg_.height, w = cfg_.width;
      for (int level = 0; level < 4; ++level) {
        conv_grids_.push_back(build_conv_grid(h, w));
        if (level < 3) pool_grids_.push_back(build_pool_grid(h, w));
        h /= 2;
        w /= 2;
      }
    }
    auto conv_block_params = [&](const std::string& name, int cin, int cout, bool bn) {
      params.add(name + ".conv.weight", Tensor<T>({cout, cin, 9}));
      params.add(name + ".conv.bias", Tensor<T>({cout}));
      if (bn) {
        params.add(name + ".bn.gamma", Tensor<T>({cout}, T(1)));
        params.add(name + ".bn.beta", Tensor<T>({cout}));
        buffers.add(name + ".bn.running_mean", Tensor<T>({cout}));
        buffers.add(name + ".bn.running_var", Tensor<T>({cout}, T(1)));
      }
    };
    const auto& c = cfg_.channels;
    conv_block_params("enc1", GeneratorConfig::kInChannels, c[0], true);
    conv_block_params("enc2", c[0], c[1], true);
    conv_block_params("enc3", c[1], c[2], true);
    conv_block_params("enc4", c[2], c[3], true);
    conv_block_params("dec1", c[3] + c[2], c[2], true);
    conv_block_params("dec2", c[2] + c[1], c[1], true);
    conv_block_params("dec3", c[1] + c[0], 1, false);
  }

  void init_params(Rng& rng) {
    for (size_t i = 0; i < params.count(); ++i) {
      const std::string& name = params.names[i];
      Var<T>* v = params.vars[i].get();
      if (name.find(".conv.weight") != std::string::npos) {
        int64_t fan_in = v->value.extent(1) * v->value.extent(2);
        v->value = he_init<T>(v->value.shape(), fan_in, rng);
      } else if (name.find(".bn.gamma") != std::string::npos) {
        v->value.fill(T(1));
      } else {
        v->value.fill(T(0));  // biases and bn shifts
      }
    }
  }

  // input: N x 4 x H x W in [0,1]; returns N x 1 x H x W in (0,1).
  Var<T>* forward(Tape<T>& tape, Var<T>* input, Mode mode) {
    const auto& s = input->value.shape();
    if (input->value.rank() != 4 || s[1] != GeneratorConfig::kInChannels ||
        s[2] != cfg_.height || s[3] != cfg_.width)
      throw DataError("generator: input must be N x 4 x " + std::to_string(cfg_.height) + " x " +
                      std::to_string(cfg_.width));
    Var<T>* e1 = conv_bn_relu(tape, input, "enc1", 0, mode);
    Var<T>* p1 = pool(tape, e1, 0);
    Var<T>* e2 = conv_bn_relu(tape, p1, "enc2", 1, mode);
    Var<T>* p2 = pool(tape, e2, 1);
    Var<T>* e3 = conv_bn_relu(tape, p2, "enc3", 2, mode);
    Var<T>* p3 = pool(tape, e3, 2);
    Var<T>* e4 = conv_bn_relu(tape, p3, "enc4", 3, mode);
    Var<T>* u1 = ops::upsample_bilinear_x2(tape, e4);
    Var<T>* d1 = conv_bn_relu(tape, ops::concat_channels(tape, u1, e3), "dec1", 2, mode);
    Var<T>* u2 = ops::upsample_bilinear_x2(tape, d1);
    Var<T>* d2 = conv_bn_relu(tape, ops::concat_channels(tape, u2, e2), "dec2", 1, mode);
    Var<T>* u3 = ops::upsample_bilinear_x2(tape, d2);
    Var<T>* cat = ops::concat_channels(tape, u3, e1);
    Var<T>* d3 = conv(tape, cat, "dec3", 0);
    return ops::sigmoid(tape, d3);
  }

  // Single-frame eval-mode prediction; returns a 1 x H x W map.
  Tensor<T> predict(const Tensor<T>& frame, const Tensor<T>& sal_prev) {
    if (frame.rank() != 3 || frame.extent(0) != 3)
      throw DataError("generator: frame must be 3 x H x W");
    Tensor<T> sal = sal_prev;
    if (sal.rank() == 2) sal = sal.reshaped({1, sal.extent(0), sal.extent(1)});
    if (sal.rank() != 3 || sal.extent(0) != 1)
      throw DataError("generator: previous saliency must be 1 x H x W");
    Tensor<T> in({1, 4, cfg_.height, cfg_.width});
    if (frame.extent(1) != cfg_.height || frame.extent(2) != cfg_.width ||
        sal.extent(1) != cfg_.height || sal.extent(2) != cfg_.width)
      throw DataError("generator: input dims do not match model config");
    std::copy(frame.data(), frame.data() + frame.size(), in.data());
    std::copy(sal.data(), sal.data() + sal.size(), in.data() + frame.size());
    Tape<T> tape;
    Var<T>* out = forward(tape, tape.make(std::move(in)), Mode::kEval);
    return out->value.reshaped({1, cfg_.height, cfg_.width});
  }

  std::vector<LayerInfo> describe() const {
    std::vector<LayerInfo> rows;
    const auto& c = cfg_.channels;
    int h = cfg_.height, w = cfg_.width;
    auto block = [&](const std::string& name, int cin, int cout, int oh, int ow, bool bn) {
      LayerInfo li;
      li.name = name;
      li.kind = std::string(cfg_.conv_mode == ConvMode::kSpherical ? "sphere_conv3x3" : "conv3x3") +
                (bn ? "+bn+relu" : "+sigmoid");
      li.out_c = cout;
      li.out_h = oh;
      li.out_w = ow;
      li.param_count = static_cast<int64_t>(cout) * cin * 9 + cout + (bn ? 2 * cout : 0);
      rows.push_back(li);
    };
    block("enc1", GeneratorConfig::kInChannels, c[0], h, w, true);
    block("enc2", c[0], c[1], h / 2, w / 2, true);
    block("enc3", c[1], c[2], h / 4, w / 4, true);
    block("enc4", c[2], c[3], h / 8, w / 8, true);
    block("dec1", c[3] + c[2], c[2], h / 4, w / 4, true);
    block("dec2", c[2] + c[1], c[1], h / 2, w / 2, true);
    block("dec3", c[1] + c[0], 1, h, w, false);
    return rows;
  }

  const GeneratorConfig& config() const { return cfg_; }
  const SamplingGrid& conv_grid(int level) const { return conv_grids_.at(static_cast<size_t>(level)); }

  ParamStore<T> params;
  BufferStore<T> buffers;

 private:
  Var<T>* conv(Tape<T>& tape, Var<T>* x, const std::string& name, int level) {
    Var<T>* w = params.get(name + ".conv.weight");
    Var<T>* b = params.get(name + ".conv.bias");
    if (cfg_.conv_mode == ConvMode::kSpherical)
      return ops::sphere_conv2d(tape, x, w, b, conv_grids_[static_cast<size_t>(level)]);
    return ops::conv2d(tape, x, w, b, 1);
  }
  Var<T>* conv_bn_relu(Tape<T>& tape, Var<T>* x, const std::string& name, int level, Mode mode) {
    Var<T>* y = conv(tape, x, name, level);
    y = ops::batchnorm(tape, y, params.get(name + ".bn.gamma"), params.get(name + ".bn.beta"),
                       buffers.get(name + ".bn.running_mean"),
                       buffers.get(name + ".bn.running_var"), mode);
    return ops::relu(tape, y);
  }
  Var<T>* pool(Tape<T>& tape, Var<T>* x, int level) {
    if (cfg_.conv_mode == ConvMode::kSpherical)
      return ops::sphere_maxpool(tape, x, pool_grids_[static_cast<size_t>(level)]);
    return ops::maxpool2x2(tape, x);
  }

  GeneratorConfig cfg_;
  std::vector<SamplingGrid> conv_grids_;
  std::vector<SamplingGrid> pool_grids_;
};

// Discriminator: 4 standard 3x3 convs (first three stride 2 with
// BN+ReLU+dropout, last stride 1 with BN only), then a fully connected layer
// and a sigmoid. Sees the saliency map alone.
template <typename T>
class Discriminator {
 public:
  explicit Discriminator(DiscriminatorConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    const auto& c = cfg_.channels;
    auto conv_params = [&](const std::string& name, int cin, int cout) {
      params.add(name + ".conv.weight", Tensor<T>({cout, cin, 9}));
      params.add(name + ".conv.bias", Tensor<T>({cout}));
      params.add(name + ".bn.gamma", Tensor<T>({cout}, T(1)));
      params.add(name + ".bn.beta", Tensor<T>({cout}));
      buffers.add(name + ".bn.running_mean", Tensor<T>({cout}));
      buffers.add(name + ".bn.running_var", Tensor<T>({cout}, T(1)));
    };
    conv_params("conv1", 1, c[0]);
    conv_params("conv2", c[0], c[1]);
    conv_params("conv3", c[1], c[2]);
    conv_params("conv4", c[2], c[3]);
    params.add("fc.weight", Tensor<T>({feature_size(), 1}));
    params.add("fc.bias", Tensor<T>({1}));
  }

  int64_t feature_size() const {
    return static_cast<int64_t>(cfg_.channels[3]) * (cfg_.height / 8) * (cfg_.width / 8);
  }

  void init_params(Rng& rng) {
    for (size_t i = 0; i < params.count(); ++i) {
      const std::string& name = params.names[i];
      Var<T>* v = params.vars[i].get();
      if (name.find(".conv.weight") != std::string::npos) {
        v->value = he_init<T>(v->value.shape(), v->value.extent(1) * v->value.extent(2), rng);
      } else if (name == "fc.weight") {
        v->value = he_init<T>(v->value.shape(), v->value.extent(0), rng);
      } else if (name.find(".bn.gamma") != std::string::npos) {
        v->value.fill(T(1));
      } else {
        v->value.fill(T(0));
      }
    }
  }

  // input: N x 1 x H x W; returns N x 1 scores in (0,1).
  Var<T>* forward(Tape<T>& tape, Var<T>* input, Mode mode, Rng& rng) {
    const auto& s = input->value.shape();
    if (input->value.rank() != 4 || s[1] != 1 || s[2] != cfg_.height || s[3] != cfg_.width)
      throw DataError("discriminator: input must be N x 1 x H x W");
    Var<T>* x = block(tape, input, "conv1", 2, true, mode, rng);
    x = block(tape, x, "conv2", 2, true, mode, rng);
    x = block(tape, x, "conv3", 2, true, mode, rng);
    x = block(tape, x, "conv4", 1, false, mode, rng);
    x = ops::flatten(tape, x);
    x = ops::linear(tape, x, params.get("fc.weight"), params.get("fc.bias"));
    return ops::sigmoid(tape, x);
  }

  std::vector<LayerInfo> describe() const {
    std::vector<LayerInfo> rows;
    const auto& c = cfg_.channels;
    int h = cfg_.height, w = cfg_.width;
    auto conv_row = [&](const std::string& name, int cin, int cout, int oh, int ow,
                        const std::string& kind) {
      LayerInfo li;
      li.name = name;
      li.kind = kind;
      li.out_c = cout;
      li.out_h = oh;
      li.out_w = ow;
      li.param_count = static_cast<int64_t>(cout) * cin * 9 + cout + 2 * cout;
      rows.push_back(li);
    };
    conv_row("conv1", 1, c[0], h / 2, w / 2, "conv3x3 s2+bn+relu+dropout");
    conv_row("conv2", c[0], c[1], h / 4, w / 4, "conv3x3 s2+bn+relu+dropout");
    conv_row("conv3", c[1], c[2], h / 8, w / 8, "conv3x3 s2+bn+relu+dropout");
    conv_row("conv4", c[2], c[3], h / 8, w / 8, "conv3x3 s1+bn");
    LayerInfo fc;
    fc.name = "fc";
    fc.kind = "linear+sigmoid";
    fc.out_c = 1;
    fc.out_h = 1;
    fc.out_w = 1;
    fc.param_count = feature_size() + 1;
    rows.push_back(fc);
    return rows;
  }

  const DiscriminatorConfig& config() const { return cfg_; }

  ParamStore<T> params;
  BufferStore<T> buffers;

 private:
  Var<T>* block(Tape<T>& tape, Var<T>* x, const std::string& name, int stride, bool relu_dropout,
                Mode mode, Rng& rng) {
    Var<T>* y = ops::conv2d(tape, x, params.get(name + ".conv.weight"),
                            params.get(name + ".conv.bias"), stride);
    y = ops::batchnorm(tape, y, params.get(name + ".bn.gamma"), params.get(name + ".bn.beta"),
                       buffers.get(name + ".bn.running_mean"),
                       buffers.get(name + ".bn.running_var"), mode);
    if (relu_dropout) {
      y = ops::relu(tape, y);
      y = ops::dropout(tape, y, cfg_.dropout_p, rng, mode);
    }
    return y;
  }

  DiscriminatorConfig cfg_;
};

inline int64_t total_params(const std::vector<LayerInfo>& rows) {
  int64_t n = 0;
  for (const auto& r : rows) n += r.param_count;
  return n;
}

}  // namespace sgan
