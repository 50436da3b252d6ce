#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spheregan/checkpoint.hpp"
#include "spheregan/config.hpp"
#include "spheregan/data.hpp"
#include "spheregan/losses.hpp"
#include "spheregan/model.hpp"

namespace sgan {

struct StepLog {
  int64_t step = 0;
  int64_t epoch = 0;
  LossBreakdown gen;
  double d_loss = 0.0;
  double d_real = 0.0;
  double d_fake = 0.0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["step"] = step;
    j["epoch"] = epoch;
    j["loss_cc"] = gen.cc_loss;
    j["loss_kl"] = gen.kl_loss;
    j["loss_smse"] = gen.smse_loss;
    j["loss_g_bce"] = gen.g_bce_loss;
    j["loss_g_total"] = gen.total;
    j["loss_d"] = d_loss;
    j["d_real"] = d_real;
    j["d_fake"] = d_fake;
    return j;
  }
};

struct TrainResult {
  int64_t steps = 0;
  StepLog first;
  StepLog last;
  std::string final_checkpoint;
  std::string log_path;
};

namespace detail {

inline void check_loss_finite(const LossBreakdown& b, double d_loss, int64_t step) {
  auto bad = [](double v) { return !std::isfinite(v); };
  const char* term = nullptr;
  if (bad(b.cc_loss)) term = "cc_loss";
  else if (bad(b.kl_loss)) term = "kl_loss";
  else if (bad(b.smse_loss)) term = "smse_loss";
  else if (bad(b.g_bce_loss)) term = "g_bce_loss";
  else if (bad(b.total)) term = "generator total";
  else if (bad(d_loss)) term = "discriminator_loss";
  if (term)
    throw NumericError("nan/inf loss in term " + std::string(term) + " at step " +
                       std::to_string(step));
}

template <typename T>
inline bool grads_all_zero(const ParamStore<T>& store) {
  for (const auto& v : store.vars) {
    if (v->grad.size() != v->value.size()) continue;  // never touched
    for (int64_t i = 0; i < v->grad.size(); ++i)
      if (v->grad[i] != T(0)) return false;
  }
  return true;
}

}  // namespace detail

// Pair identity inside a multi-video dataset.
struct PairRef {
  int video = 0;
  int t = 0;
};

inline std::vector<PairRef> collect_pairs(const std::vector<VideoSequence>& dataset, int k) {
  std::vector<PairRef> out;
  for (size_t v = 0; v < dataset.size(); ++v)
    for (int t = k; t < static_cast<int>(dataset[v].length()); ++t)
      out.push_back({static_cast<int>(v), t});
  return out;
}

// Alternating GAN optimization. Per batch: (a) generator forward, combined
// generator loss, Adam step on the generator; (b) discriminator on ground
// truth and on the detached generated maps with smoothed/noisy labels, Adam
// step on the discriminator. One discriminator step per generator step.
//
// RNG draw order per step (one master stream, checkpointed): discriminator
// dropout during (a); dropout of the real pass, dropout of the fake pass,
// real labels, fake labels during (b). The per-epoch pair shuffle uses a
// dedicated stream seeded by mix(seed, epoch), so resume only needs the
// epoch position.
inline TrainResult train(const TrainConfig& cfg, const std::vector<VideoSequence>& dataset) {
  namespace fs = std::filesystem;
  cfg.validate();
  if (cfg.threads != 0) set_thread_count(cfg.threads);

  const int h = cfg.height, w = cfg.width();
  for (const auto& seq : dataset)
    if (seq.height != h || seq.width != w)
      throw DataError("sequence " + seq.id + " resolution does not match model config");

  std::vector<PairRef> pairs = collect_pairs(dataset, cfg.k);
  if (pairs.empty())
    throw DataError("dataset yields no training pairs (sequences shorter than k=" +
                    std::to_string(cfg.k) + "?)");

  Generator<float> gen(cfg.generator_config());
  Discriminator<float> disc(cfg.discriminator_config());
  Rng rng(cfg.seed);
  gen.init_params(rng);
  disc.init_params(rng);
  AdamState<float> gen_opt, disc_opt;
  gen_opt.init_like(gen.params);
  disc_opt.init_like(disc.params);

  int64_t step = 0, epoch0 = 0, pos0 = 0;
  if (!cfg.resume.empty()) {
    LoadedCheckpoint ck = load_checkpoint(cfg.resume);
    restore_models(ck, gen, disc);
    restore_adam(ck, "opt.gen.", gen.params, gen_opt, ck.manifest.at("adam").at("gen_t").get<int64_t>());
    restore_adam(ck, "opt.disc.", disc.params, disc_opt,
                 ck.manifest.at("adam").at("disc_t").get<int64_t>());
    step = ck.manifest.at("step").get<int64_t>();
    epoch0 = ck.manifest.at("epoch").get<int64_t>();
    pos0 = ck.manifest.at("epoch_pos").get<int64_t>();
    rng = Rng::deserialize(ck.manifest.at("rng").get<std::string>());
  }

  Tensor<float> weight_map = spherical_weights<float>(h, w);
  nlohmann::ordered_json config_snapshot = cfg.to_flat_json();

  fs::create_directories(cfg.out_dir);
  fs::create_directories(fs::path(cfg.out_dir) / "checkpoints");
  std::ofstream log(fs::path(cfg.out_dir) / "train_log.jsonl",
                    step > 0 ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot open training log in " + cfg.out_dir);

  TrainResult result;
  result.log_path = (fs::path(cfg.out_dir) / "train_log.jsonl").string();
  bool first_logged = step > 0;

  auto save_ck = [&](const std::string& name, int64_t epoch, int64_t pos) {
    std::string dir = (fs::path(cfg.out_dir) / "checkpoints" / name).string();
    save_checkpoint(dir, gen, disc, gen_opt, disc_opt, step, epoch, pos, rng, config_snapshot);
    return dir;
  };

  for (int64_t epoch = epoch0; epoch < cfg.epochs; ++epoch) {
    std::vector<PairRef> order = pairs;
    Rng shuffle_rng(mix_seed(cfg.seed, static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    int64_t pos = (epoch == epoch0) ? pos0 : 0;
    while (pos < static_cast<int64_t>(order.size())) {
      int64_t bsz = std::min<int64_t>(cfg.batch_size, static_cast<int64_t>(order.size()) - pos);
      // assemble batch
      Tensor<float> input({bsz, 4, h, w});
      Tensor<float> target({bsz, 1, h, w});
      for (int64_t b = 0; b < bsz; ++b) {
        const PairRef& pr = order[static_cast<size_t>(pos + b)];
        const VideoSequence& seq = dataset[static_cast<size_t>(pr.video)];
        const Tensor<float>& fr = seq.frames[static_cast<size_t>(pr.t)];
        const Tensor<float>& sp = seq.saliency[static_cast<size_t>(pr.t - cfg.k)];
        const Tensor<float>& st = seq.saliency[static_cast<size_t>(pr.t)];
        std::copy(fr.data(), fr.data() + fr.size(), input.data() + (b * 4) * h * w);
        std::copy(sp.data(), sp.data() + sp.size(), input.data() + (b * 4 + 3) * h * w);
        std::copy(st.data(), st.data() + st.size(), target.data() + b * h * w);
      }

      StepLog slog;
      slog.step = step + 1;
      slog.epoch = epoch;

      // (a) generator phase
      Tensor<float> fake_detached;
      {
        gen.params.zero_grads();
        disc.params.zero_grads();
        Tape<float> tape;
        Var<float>* x = tape.make(input);
        Var<float>* pred = gen.forward(tape, x, Mode::kTrain);
        fake_detached = pred->value;
        Var<float>* d_fake = disc.forward(tape, pred, Mode::kTrain, rng);
        auto loss = losses::generator_loss(tape, target, pred, d_fake, weight_map, cfg.loss);
        slog.gen = loss.breakdown;
        detail::check_loss_finite(slog.gen, 0.0, slog.step);
        tape.backward(loss.total);
        adam_step(gen.params, gen_opt, cfg.lr_gen, cfg.beta1, cfg.beta2, cfg.adam_eps);
      }

      // (b) discriminator phase; generated maps are detached
      {
        gen.params.zero_grads();
        disc.params.zero_grads();
        Tape<float> tape;
        Var<float>* real_in = tape.make(target);
        Var<float>* d_real = disc.forward(tape, real_in, Mode::kTrain, rng);
        Var<float>* fake_in = tape.make(fake_detached);
        Var<float>* d_fake = disc.forward(tape, fake_in, Mode::kTrain, rng);
        Var<float>* d_loss = losses::discriminator_loss(tape, d_real, d_fake, rng, cfg.loss.epsilon);
        slog.d_loss = static_cast<double>(d_loss->value[0]);
        double sr = 0.0, sf = 0.0;
        for (int64_t i = 0; i < bsz; ++i) {
          sr += d_real->value[i];
          sf += d_fake->value[i];
        }
        slog.d_real = sr / static_cast<double>(bsz);
        slog.d_fake = sf / static_cast<double>(bsz);
        detail::check_loss_finite(slog.gen, slog.d_loss, slog.step);
        tape.backward(d_loss);
        if (debug_checks() && !detail::grads_all_zero(gen.params))
          throw NumericError("generator gradients are nonzero during the discriminator phase");
        adam_step(disc.params, disc_opt, cfg.lr_disc, cfg.beta1, cfg.beta2, cfg.adam_eps);
      }

      ++step;
      pos += bsz;
      log << slog.to_json().dump() << '\n';
      if (!first_logged) {
        result.first = slog;
        first_logged = true;
      }
      result.last = slog;

      if (cfg.checkpoint_interval > 0 && step % cfg.checkpoint_interval == 0) {
        char name[32];
        std::snprintf(name, sizeof name, "step_%06lld", static_cast<long long>(step));
        // position saved is *after* this batch within the current epoch
        int64_t save_epoch = epoch, save_pos = pos;
        if (pos >= static_cast<int64_t>(order.size())) {
          save_epoch = epoch + 1;
          save_pos = 0;
        }
        save_ck(name, save_epoch, save_pos);
      }
    }
  }
  log.flush();
  result.steps = step;
  result.final_checkpoint = save_ck("final", cfg.epochs, 0);
  return result;
}

}  // namespace sgan
