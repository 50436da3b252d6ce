#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "spheregan/model.hpp"
#include "spheregan/rng.hpp"

namespace sgan {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian float32");

// Adam state for one parameter store; tensor order mirrors the store.
template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  int64_t t = 0;

  void init_like(const ParamStore<T>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params.vars) {
      m.push_back(Tensor<T>::zeros(p->value.shape()));
      v.push_back(Tensor<T>::zeros(p->value.shape()));
    }
    t = 0;
  }
};

// Bias-corrected Adam update over every tensor in the store.
template <typename T>
inline void adam_step(ParamStore<T>& params, AdamState<T>& state, double lr, double beta1,
                      double beta2, double eps) {
  if (state.m.size() != params.count()) throw NumericError("adam state/store size mismatch");
  state.t += 1;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.count(); ++i) {
    Var<T>* p = params.vars[i].get();
    if (p->grad.size() != p->value.size()) p->ensure_grad();
    Tensor<T>& m = state.m[i];
    Tensor<T>& v = state.v[i];
    for (int64_t j = 0; j < p->value.size(); ++j) {
      double g = static_cast<double>(p->grad[j]);
      double mj = beta1 * static_cast<double>(m[j]) + (1.0 - beta1) * g;
      double vj = beta2 * static_cast<double>(v[j]) + (1.0 - beta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      double update = lr * (mj / bc1) / (std::sqrt(vj / bc2) + eps);
      p->value[j] = static_cast<T>(static_cast<double>(p->value[j]) - update);
    }
  }
}

// Checkpoint directory: manifest.json describing every tensor (name, shape,
// offset into the blob) plus training position, RNG state and the config
// snapshot, and params.bin holding all tensors as one little-endian float32
// blob in manifest order.
inline constexpr int kCheckpointVersion = 1;

namespace detail {

struct BlobWriter {
  std::vector<float> data;
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();

  template <typename T>
  void add(const std::string& name, const Tensor<T>& t) {
    nlohmann::ordered_json e;
    e["name"] = name;
    e["shape"] = t.shape();
    e["offset"] = data.size();
    e["count"] = t.size();
    entries.push_back(std::move(e));
    size_t base = data.size();
    data.resize(base + static_cast<size_t>(t.size()));
    for (int64_t i = 0; i < t.size(); ++i) data[base + static_cast<size_t>(i)] = static_cast<float>(t[i]);
  }
};

}  // namespace detail

template <typename T>
inline void save_checkpoint(const std::string& dir, const Generator<T>& gen,
                            const Discriminator<T>& disc, const AdamState<T>& gen_opt,
                            const AdamState<T>& disc_opt, int64_t step, int64_t epoch,
                            int64_t epoch_pos, const Rng& rng,
                            const nlohmann::ordered_json& config_snapshot) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  detail::BlobWriter blob;
  auto add_store = [&](const std::string& prefix, const ParamStore<T>& store) {
    for (size_t i = 0; i < store.count(); ++i)
      blob.add(prefix + store.names[i], store.vars[i]->value);
  };
  auto add_buffers = [&](const std::string& prefix, const BufferStore<T>& store) {
    for (size_t i = 0; i < store.tensors.size(); ++i)
      blob.add(prefix + store.names[i], store.tensors[i]);
  };
  auto add_opt = [&](const std::string& prefix, const ParamStore<T>& store,
                     const AdamState<T>& opt) {
    for (size_t i = 0; i < store.count(); ++i) blob.add(prefix + "m." + store.names[i], opt.m[i]);
    for (size_t i = 0; i < store.count(); ++i) blob.add(prefix + "v." + store.names[i], opt.v[i]);
  };
  add_store("gen.param.", gen.params);
  add_buffers("gen.buffer.", gen.buffers);
  add_store("disc.param.", disc.params);
  add_buffers("disc.buffer.", disc.buffers);
  add_opt("opt.gen.", gen.params, gen_opt);
  add_opt("opt.disc.", disc.params, disc_opt);

  nlohmann::ordered_json manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["step"] = step;
  manifest["epoch"] = epoch;
  manifest["epoch_pos"] = epoch_pos;
  manifest["rng"] = rng.serialize();
  manifest["adam"] = {{"gen_t", gen_opt.t}, {"disc_t", disc_opt.t}};
  manifest["config"] = config_snapshot;
  manifest["blob"] = "params.bin";
  manifest["tensors"] = blob.entries;

  std::ofstream bin(fs::path(dir) / "params.bin", std::ios::binary);
  if (!bin) throw IoError("cannot write checkpoint blob in " + dir);
  bin.write(reinterpret_cast<const char*>(blob.data.data()),
            static_cast<std::streamsize>(blob.data.size() * sizeof(float)));
  if (!bin) throw IoError("short write to checkpoint blob in " + dir);
  bin.close();

  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw IoError("cannot write checkpoint manifest in " + dir);
  mf << manifest.dump(2) << '\n';
}

struct LoadedCheckpoint {
  nlohmann::json manifest;
  std::unordered_map<std::string, Tensor<float>> tensors;

  const Tensor<float>& get(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("checkpoint is missing tensor " + name);
    return it->second;
  }
};

inline LoadedCheckpoint load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  fs::path mpath = fs::path(dir) / "manifest.json";
  std::ifstream mf(mpath);
  if (!mf) throw IoError("cannot open checkpoint manifest " + mpath.string());
  LoadedCheckpoint ck;
  try {
    mf >> ck.manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid checkpoint manifest: " + std::string(e.what()));
  }
  if (ck.manifest.value("format_version", -1) != kCheckpointVersion)
    throw DataError("unsupported checkpoint format version");

  fs::path bpath = fs::path(dir) / ck.manifest.value("blob", "params.bin");
  std::ifstream bin(bpath, std::ios::binary);
  if (!bin) throw IoError("cannot open checkpoint blob " + bpath.string());
  bin.seekg(0, std::ios::end);
  auto bytes = static_cast<size_t>(bin.tellg());
  bin.seekg(0);
  std::vector<float> blob(bytes / sizeof(float));
  bin.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(bytes));
  if (!bin) throw DataError("truncated checkpoint blob " + bpath.string());

  for (const auto& e : ck.manifest.at("tensors")) {
    std::string name = e.at("name").get<std::string>();
    std::vector<int64_t> shape = e.at("shape").get<std::vector<int64_t>>();
    size_t offset = e.at("offset").get<size_t>();
    int64_t count = e.at("count").get<int64_t>();
    if (offset + static_cast<size_t>(count) > blob.size())
      throw DataError("checkpoint tensor " + name + " exceeds blob");
    Tensor<float> t(shape);
    if (t.size() != count) throw DataError("checkpoint tensor " + name + " shape/count mismatch");
    std::memcpy(t.data(), blob.data() + offset, static_cast<size_t>(count) * sizeof(float));
    ck.tensors.emplace(std::move(name), std::move(t));
  }
  return ck;
}

template <typename T>
inline void apply_tensor(const Tensor<float>& src, Tensor<T>& dst, const std::string& name) {
  if (src.shape() != dst.shape())
    throw DataError("checkpoint tensor " + name + " shape mismatch: " +
                    shape_to_string(src.shape()) + " vs " + shape_to_string(dst.shape()));
  for (int64_t i = 0; i < src.size(); ++i) dst[i] = static_cast<T>(src[i]);
}

template <typename T>
inline void restore_models(const LoadedCheckpoint& ck, Generator<T>& gen, Discriminator<T>& disc) {
  for (size_t i = 0; i < gen.params.count(); ++i)
    apply_tensor(ck.get("gen.param." + gen.params.names[i]), gen.params.vars[i]->value,
                 gen.params.names[i]);
  for (size_t i = 0; i < gen.buffers.tensors.size(); ++i)
    apply_tensor(ck.get("gen.buffer." + gen.buffers.names[i]), gen.buffers.tensors[i],
                 gen.buffers.names[i]);
  for (size_t i = 0; i < disc.params.count(); ++i)
    apply_tensor(ck.get("disc.param." + disc.params.names[i]), disc.params.vars[i]->value,
                 disc.params.names[i]);
  for (size_t i = 0; i < disc.buffers.tensors.size(); ++i)
    apply_tensor(ck.get("disc.buffer." + disc.buffers.names[i]), disc.buffers.tensors[i],
                 disc.buffers.names[i]);
}

template <typename T>
inline void restore_adam(const LoadedCheckpoint& ck, const std::string& prefix,
                         const ParamStore<T>& store, AdamState<T>& opt, int64_t t) {
  opt.init_like(store);
  opt.t = t;
  for (size_t i = 0; i < store.count(); ++i) {
    apply_tensor(ck.get(prefix + "m." + store.names[i]), opt.m[i], store.names[i]);
    apply_tensor(ck.get(prefix + "v." + store.names[i]), opt.v[i], store.names[i]);
  }
}

}  // namespace sgan
