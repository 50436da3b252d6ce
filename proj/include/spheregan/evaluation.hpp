#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spheregan/data.hpp"
#include "spheregan/metrics.hpp"
#include "spheregan/model.hpp"

namespace sgan {

// frame (3 x H x W) + saliency hint (H x W) -> predicted map (H x W).
using Predictor = std::function<Tensor<float>(const Tensor<float>&, const Tensor<float>&)>;

// Called for every evaluated frame: (video id, frame index, predicted map).
using MapSink = std::function<void(const std::string&, int, const Tensor<float>&)>;

template <typename T>
inline Predictor make_generator_predictor(Generator<T>& gen) {
  return [&gen](const Tensor<float>& frame, const Tensor<float>& hint) {
    Tensor<T> out;
    if constexpr (std::is_same_v<T, float>) {
      out = gen.predict(frame, hint);
    } else {
      out = gen.predict(frame.template cast<T>(), hint.template cast<T>());
    }
    return out.reshaped({out.extent(1), out.extent(2)}).template cast<float>();
  };
}

// Table-1 protocol: every frame t >= k is predicted from (frame_t, gt
// saliency at t-k) and scored against the frame-t ground truth.
inline MetricsReport evaluate(const std::vector<VideoSequence>& dataset, const Predictor& predict,
                              int k = 5, const MapSink& sink = nullptr) {
  if (k < 1) throw ConfigError("evaluate: k must be >= 1");
  std::vector<Tensor<float>> preds, gts;
  std::vector<FixationSet> fixes;
  int64_t gt_feeds = 0;
  for (const auto& seq : dataset) {
    for (int t = k; t < static_cast<int>(seq.length()); ++t) {
      const Tensor<float>& hint = seq.saliency[static_cast<size_t>(t - k)];
      ++gt_feeds;
      Tensor<float> pred = predict(seq.frames[static_cast<size_t>(t)], hint);
      if (sink) sink(seq.id, t, pred);
      preds.push_back(std::move(pred));
      gts.push_back(seq.saliency[static_cast<size_t>(t)]);
      fixes.push_back(seq.fixations[static_cast<size_t>(t)]);
    }
  }
  if (preds.empty())
    throw DataError("evaluate: no evaluable frames (all sequences shorter than k+1)");
  MetricsReport report = evaluate_frames(preds, gts, fixes);
  report.gt_feeds = gt_feeds;
  return report;
}

// Table-3 autoregressive protocol. Frames before t = 5 are skipped (no valid
// t-5 hint). The schedule cycles with period N, anchored on a ground-truth-fed
// frame: the first evaluated frame of each cycle takes gt saliency at t-5,
// the next N-1 frames take the model's own previous prediction (t-1).
// N = 1 degenerates to evaluate(..., k = 5).
inline MetricsReport evaluate_feedback(const std::vector<VideoSequence>& dataset,
                                       const Predictor& predict, int n_interval,
                                       const MapSink& sink = nullptr) {
  if (n_interval < 1) throw ConfigError("evaluate_feedback: N must be >= 1");
  constexpr int kLag = 5;
  std::vector<Tensor<float>> preds, gts;
  std::vector<FixationSet> fixes;
  int64_t gt_feeds = 0;
  for (const auto& seq : dataset) {
    Tensor<float> rolling;
    for (int t = kLag; t < static_cast<int>(seq.length()); ++t) {
      int e = t - kLag;  // evaluation index within the sequence
      const Tensor<float>* hint = nullptr;
      if (e % n_interval == 0) {
        hint = &seq.saliency[static_cast<size_t>(t - kLag)];
        ++gt_feeds;
      } else {
        hint = &rolling;  // prediction made at t-1
      }
      Tensor<float> pred = predict(seq.frames[static_cast<size_t>(t)], *hint);
      if (sink) sink(seq.id, t, pred);
      rolling = pred;
      preds.push_back(std::move(pred));
      gts.push_back(seq.saliency[static_cast<size_t>(t)]);
      fixes.push_back(seq.fixations[static_cast<size_t>(t)]);
    }
  }
  if (preds.empty())
    throw DataError("evaluate_feedback: no evaluable frames (all sequences shorter than 6)");
  MetricsReport report = evaluate_frames(preds, gts, fixes);
  report.gt_feeds = gt_feeds;
  return report;
}

}  // namespace sgan
