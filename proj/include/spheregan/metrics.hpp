#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "spheregan/tensor.hpp"

namespace sgan {

struct Fixation {
  int row = 0;
  int col = 0;
};
using FixationSet = std::vector<Fixation>;

namespace metrics {

inline constexpr double kEps = 1e-7;

namespace detail {
template <typename T>
inline void check_map(const Tensor<T>& m, const char* what) {
  if (m.rank() != 2 || m.size() < 2) throw DataError(std::string(what) + ": expected H x W map");
}
template <typename T>
inline void check_fixations(const Tensor<T>& m, const FixationSet& fix, const char* what) {
  if (fix.empty()) throw DataError(std::string(what) + ": empty fixation set");
  for (const auto& f : fix)
    if (f.row < 0 || f.row >= m.extent(0) || f.col < 0 || f.col >= m.extent(1))
      throw DataError(std::string(what) + ": fixation out of bounds");
}
}  // namespace detail

// Pearson correlation over pixels.
template <typename T>
inline double metric_cc(const Tensor<T>& pred, const Tensor<T>& gt) {
  detail::check_map(pred, "metric_cc");
  if (!same_shape(pred, gt)) throw DataError("metric_cc: shape mismatch");
  const int64_t n = pred.size();
  double mp = 0.0, mg = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    mp += pred[i];
    mg += gt[i];
  }
  mp /= static_cast<double>(n);
  mg /= static_cast<double>(n);
  double spg = 0.0, spp = 0.0, sgg = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double dp = pred[i] - mp, dg = gt[i] - mg;
    spg += dp * dg;
    spp += dp * dp;
    sgg += dg * dg;
  }
  if (!(spp > 0.0) || !(sgg > 0.0)) throw NumericError("metric_cc: constant map");
  return spg / std::sqrt(spp * sgg);
}

// KL(gt || pred): both maps normalized to distributions, epsilon added to
// every prediction pixel before normalization, zero-mass gt pixels skipped.
// Shared by the KL loss and the KL metric.
template <typename T>
inline double kl_divergence(const Tensor<T>& gt, const Tensor<T>& pred, double eps = kEps) {
  if (!same_shape(pred, gt)) throw DataError("kl_divergence: shape mismatch");
  const int64_t n = pred.size();
  double sg = 0.0, sp = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    if (gt[i] < T(0) || pred[i] < T(0)) throw DataError("kl_divergence: negative map values");
    sg += gt[i];
    sp += static_cast<double>(pred[i]) + eps;
  }
  if (!(sg > 0.0)) throw DataError("kl_divergence: ground-truth map has no mass");
  double kl = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    if (gt[i] <= T(0)) continue;
    double p = gt[i] / sg;
    double q = (static_cast<double>(pred[i]) + eps) / sp;
    kl += p * std::log(p / q);
  }
  return kl;
}

template <typename T>
inline double metric_kl(const Tensor<T>& pred, const Tensor<T>& gt) {
  detail::check_map(pred, "metric_kl");
  return kl_divergence(gt, pred, kEps);
}

// Normalized scanpath saliency: mean of the z-scored map (population std)
// at the fixation pixels. Duplicate fixations count once each.
template <typename T>
inline double metric_nss(const Tensor<T>& pred, const FixationSet& fix) {
  detail::check_map(pred, "metric_nss");
  detail::check_fixations(pred, fix, "metric_nss");
  const int64_t n = pred.size();
  double mean = 0.0;
  for (int64_t i = 0; i < n; ++i) mean += pred[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double d = pred[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  if (!(var > 0.0)) throw NumericError("metric_nss: constant map");
  double std = std::sqrt(var);
  double acc = 0.0;
  for (const auto& f : fix) acc += (static_cast<double>(pred(f.row, f.col)) - mean) / std;
  return acc / static_cast<double>(fix.size());
}

// AUC-Judd. Thresholds are the distinct predicted values at the fixated
// pixels swept high to low; ties count as positives. TPR runs over fixated
// pixels, FPR over the remaining pixels; the curve closes with (0,0) and
// (1,1) and is integrated with the trapezoid rule. Fixations landing on the
// same pixel are deduplicated (the FPR ratio is defined over pixels).
template <typename T>
inline double metric_auc_judd(const Tensor<T>& pred, const FixationSet& fix) {
  detail::check_map(pred, "metric_auc_judd");
  detail::check_fixations(pred, fix, "metric_auc_judd");
  const int64_t npix = pred.size();
  std::unordered_set<int64_t> fixpix;
  for (const auto& f : fix) fixpix.insert(static_cast<int64_t>(f.row) * pred.extent(1) + f.col);
  const int64_t nfix = static_cast<int64_t>(fixpix.size());
  if (nfix >= npix) throw DataError("metric_auc_judd: every pixel is fixated");

  std::vector<double> fixvals;
  fixvals.reserve(static_cast<size_t>(nfix));
  for (int64_t idx : fixpix) fixvals.push_back(static_cast<double>(pred[idx]));
  std::sort(fixvals.begin(), fixvals.end());

  std::vector<double> allvals(static_cast<size_t>(npix));
  for (int64_t i = 0; i < npix; ++i) allvals[static_cast<size_t>(i)] = pred[i];
  std::sort(allvals.begin(), allvals.end());

  std::vector<double> thresholds(fixvals);
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  // high to low
  std::reverse(thresholds.begin(), thresholds.end());

  auto count_ge = [](const std::vector<double>& sorted, double tau) {
    return static_cast<int64_t>(sorted.end() -
                                std::lower_bound(sorted.begin(), sorted.end(), tau));
  };

  double auc = 0.0;
  double prev_tpr = 0.0, prev_fpr = 0.0;
  for (double tau : thresholds) {
    int64_t f_ge = count_ge(fixvals, tau);
    int64_t a_ge = count_ge(allvals, tau);
    double tpr = static_cast<double>(f_ge) / static_cast<double>(nfix);
    double fpr = static_cast<double>(a_ge - f_ge) / static_cast<double>(npix - nfix);
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_tpr = tpr;
    prev_fpr = fpr;
  }
  auc += (1.0 - prev_fpr) * (1.0 + prev_tpr) / 2.0;
  return auc;
}

}  // namespace metrics

// Per-frame metric values plus aggregate means. A frame whose metric is
// degenerate (constant prediction, no fixations, ...) is excluded from that
// metric's mean and counted.
struct MetricsReport {
  struct FrameRow {
    double cc = 0.0, nss = 0.0, kl = 0.0, auc_judd = 0.0;
    bool cc_ok = false, nss_ok = false, kl_ok = false, auc_ok = false;
  };
  std::vector<FrameRow> frames;
  double mean_cc = 0.0, mean_nss = 0.0, mean_kl = 0.0, mean_auc = 0.0;
  int64_t degenerate_cc = 0, degenerate_nss = 0, degenerate_kl = 0, degenerate_auc = 0;
  int64_t gt_feeds = 0;  // ground-truth maps consumed by the predictor
  std::string aggregation = "per-frame mean";

  void finalize() {
    double sc = 0, sn = 0, sk = 0, sa = 0;
    int64_t nc = 0, nn = 0, nk = 0, na = 0;
    degenerate_cc = degenerate_nss = degenerate_kl = degenerate_auc = 0;
    for (const auto& f : frames) {
      if (f.cc_ok) {
        sc += f.cc;
        ++nc;
      } else {
        ++degenerate_cc;
      }
      if (f.nss_ok) {
        sn += f.nss;
        ++nn;
      } else {
        ++degenerate_nss;
      }
      if (f.kl_ok) {
        sk += f.kl;
        ++nk;
      } else {
        ++degenerate_kl;
      }
      if (f.auc_ok) {
        sa += f.auc_judd;
        ++na;
      } else {
        ++degenerate_auc;
      }
    }
    mean_cc = nc ? sc / nc : 0.0;
    mean_nss = nn ? sn / nn : 0.0;
    mean_kl = nk ? sk / nk : 0.0;
    mean_auc = na ? sa / na : 0.0;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["frames"] = frames.size();
    j["aggregation"] = aggregation;
    j["gt_feeds"] = gt_feeds;
    j["mean"] = {{"cc", mean_cc}, {"nss", mean_nss}, {"kl", mean_kl}, {"auc_judd", mean_auc}};
    j["degenerate"] = {{"cc", degenerate_cc},
                       {"nss", degenerate_nss},
                       {"kl", degenerate_kl},
                       {"auc_judd", degenerate_auc}};
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& f : frames) {
      nlohmann::ordered_json r;
      r["cc"] = f.cc_ok ? nlohmann::ordered_json(f.cc) : nlohmann::ordered_json(nullptr);
      r["nss"] = f.nss_ok ? nlohmann::ordered_json(f.nss) : nlohmann::ordered_json(nullptr);
      r["kl"] = f.kl_ok ? nlohmann::ordered_json(f.kl) : nlohmann::ordered_json(nullptr);
      r["auc_judd"] = f.auc_ok ? nlohmann::ordered_json(f.auc_judd) : nlohmann::ordered_json(nullptr);
      rows.push_back(std::move(r));
    }
    j["per_frame"] = std::move(rows);
    return j;
  }

  // Aligned text table, columns in CC, NSS, KL, AUC_JUDD order.
  std::string to_table(const std::string& row_label = "mean") const {
    std::ostringstream os;
    os << std::left << std::setw(18) << "" << std::right << std::setw(10) << "CC"
       << std::setw(10) << "NSS" << std::setw(10) << "KL" << std::setw(12) << "AUC_JUDD" << '\n';
    os << std::left << std::setw(18) << row_label << std::right << std::fixed
       << std::setprecision(4) << std::setw(10) << mean_cc << std::setw(10) << mean_nss
       << std::setw(10) << mean_kl << std::setw(12) << mean_auc << '\n';
    return os.str();
  }
};

// Computes all four metrics per frame; degenerate frames are recorded, not
// fatal (early-training predictions can be flat).
template <typename T>
inline MetricsReport evaluate_frames(const std::vector<Tensor<T>>& preds,
                                     const std::vector<Tensor<T>>& gts,
                                     const std::vector<FixationSet>& fixations) {
  if (preds.size() != gts.size() || preds.size() != fixations.size())
    throw DataError("evaluate_frames: input list lengths differ");
  MetricsReport report;
  report.frames.resize(preds.size());
  for (size_t i = 0; i < preds.size(); ++i) {
    auto& row = report.frames[i];
    try {
      row.cc = metrics::metric_cc(preds[i], gts[i]);
      row.cc_ok = true;
    } catch (const std::runtime_error&) {
    }
    try {
      row.kl = metrics::metric_kl(preds[i], gts[i]);
      row.kl_ok = true;
    } catch (const std::runtime_error&) {
    }
    try {
      row.nss = metrics::metric_nss(preds[i], fixations[i]);
      row.nss_ok = true;
    } catch (const std::runtime_error&) {
    }
    try {
      row.auc_judd = metrics::metric_auc_judd(preds[i], fixations[i]);
      row.auc_ok = true;
    } catch (const std::runtime_error&) {
    }
  }
  report.finalize();
  return report;
}

}  // namespace sgan
