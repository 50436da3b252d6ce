#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "spheregan/autodiff.hpp"
#include "spheregan/ops.hpp"
#include "spheregan/rng.hpp"
#include "spheregan/tensor.hpp"

namespace sgan {

// Which generator loss terms are enabled. The adversarial BCE term is always
// on; the other three can be toggled for ablations.
struct LossConfig {
  bool cc = true;
  bool kl = true;
  bool smse = true;
  double epsilon = 1e-7;  // log/normalization guard

  static LossConfig from_terms(const std::set<std::string>& terms) {
    LossConfig c;
    c.cc = c.kl = c.smse = false;
    bool has_gbce = false;
    for (const auto& t : terms) {
      if (t == "cc")
        c.cc = true;
      else if (t == "kl")
        c.kl = true;
      else if (t == "smse")
        c.smse = true;
      else if (t == "g_bce")
        has_gbce = true;
      else
        throw ConfigError("unknown loss term '" + t + "'");
    }
    if (!has_gbce) throw ConfigError("loss term g_bce cannot be disabled");
    return c;
  }

  std::vector<std::string> terms() const {
    std::vector<std::string> out;
    if (cc) out.push_back("cc");
    if (kl) out.push_back("kl");
    if (smse) out.push_back("smse");
    out.push_back("g_bce");
    return out;
  }
};

struct LossBreakdown {
  double cc_loss = 0.0;
  double kl_loss = 0.0;
  double smse_loss = 0.0;
  double g_bce_loss = 0.0;
  double total = 0.0;
};

namespace losses {

namespace detail {
template <typename T>
inline void check_pair(const Tensor<T>& target, const Var<T>* pred, const char* what) {
  if (!same_shape(target, pred->value))
    throw DataError(std::string(what) + ": target/prediction shape mismatch");
  if (pred->value.rank() < 1 || pred->value.extent(0) < 1)
    throw DataError(std::string(what) + ": empty batch");
}
}  // namespace detail

// L_CC = 1 - Pearson correlation, averaged over the batch. Errors out when
// either map has zero variance.
template <typename T>
inline Var<T>* cc_loss(Tape<T>& tape, const Tensor<T>& target, Var<T>* pred) {
  detail::check_pair(target, pred, "cc_loss");
  const int64_t n = pred->value.extent(0);
  const int64_t p = pred->value.size() / n;
  auto stats = std::make_shared<std::vector<std::array<double, 5>>>(static_cast<size_t>(n));
  double loss = 0.0;
  for (int64_t bi = 0; bi < n; ++bi) {
    const T* x = target.data() + bi * p;
    const T* y = pred->value.data() + bi * p;
    double mx = 0.0, my = 0.0;
    T xmin = x[0], xmax = x[0], ymin = y[0], ymax = y[0];
    for (int64_t i = 0; i < p; ++i) {
      mx += x[i];
      my += y[i];
      xmin = std::min(xmin, x[i]);
      xmax = std::max(xmax, x[i]);
      ymin = std::min(ymin, y[i]);
      ymax = std::max(ymax, y[i]);
    }
    if (xmin == xmax || ymin == ymax)
      throw NumericError("cc_loss: degenerate input (zero variance map)");
    mx /= static_cast<double>(p);
    my /= static_cast<double>(p);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (int64_t i = 0; i < p; ++i) {
      double dx = x[i] - mx, dy = y[i] - my;
      sxy += dx * dy;
      sxx += dx * dx;
      syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0))
      throw NumericError("cc_loss: degenerate input (zero variance map)");
    double cc = sxy / std::sqrt(sxx * syy);
    (*stats)[static_cast<size_t>(bi)] = {mx, my, sxy, sxx, syy};
    loss += 1.0 - cc;
  }
  loss /= static_cast<double>(n);
  Var<T>* o = tape.make(Tensor<T>({1}, static_cast<T>(loss)));
  Tensor<T> tgt = target;  // gradients need the centered target later
  tape.record([pred, o, stats, tgt, n, p] {
    auto& gy = pred->ensure_grad();
    double go = static_cast<double>(o->grad[0]);
    for (int64_t bi = 0; bi < n; ++bi) {
      const auto& s = (*stats)[static_cast<size_t>(bi)];
      double mx = s[0], my = s[1], sxy = s[2], sxx = s[3], syy = s[4];
      double denom = std::sqrt(sxx * syy);
      const T* x = tgt.data() + bi * p;
      const T* y = pred->value.data() + bi * p;
      T* g = gy.data() + bi * p;
      double scale = -go / static_cast<double>(n);
      for (int64_t i = 0; i < p; ++i) {
        double dcc = ((x[i] - mx) - (sxy / syy) * (y[i] - my)) / denom;
        g[i] += static_cast<T>(scale * dcc);
      }
    }
  });
  return o;
}

// KL(target || prediction) after normalizing both maps to distributions.
// epsilon is added to every prediction pixel before normalization; zero-mass
// target pixels contribute nothing.
template <typename T>
inline Var<T>* kl_loss(Tape<T>& tape, const Tensor<T>& target, Var<T>* pred, double eps) {
  detail::check_pair(target, pred, "kl_loss");
  const int64_t n = pred->value.extent(0);
  const int64_t p = pred->value.size() / n;
  auto sums = std::make_shared<std::vector<std::array<double, 2>>>(static_cast<size_t>(n));
  double loss = 0.0;
  for (int64_t bi = 0; bi < n; ++bi) {
    const T* x = target.data() + bi * p;
    const T* y = pred->value.data() + bi * p;
    double sx = 0.0, sy = 0.0;
    for (int64_t i = 0; i < p; ++i) {
      if (x[i] < T(0) || y[i] < T(0)) throw DataError("kl_loss: negative map values");
      sx += x[i];
      sy += static_cast<double>(y[i]) + eps;
    }
    if (!(sx > 0.0)) throw DataError("kl_loss: target map has no mass");
    (*sums)[static_cast<size_t>(bi)] = {sx, sy};
    for (int64_t i = 0; i < p; ++i) {
      if (x[i] <= T(0)) continue;
      double pi = x[i] / sx;
      double qi = (static_cast<double>(y[i]) + eps) / sy;
      loss += pi * std::log(pi / qi);
    }
  }
  loss /= static_cast<double>(n);
  Var<T>* o = tape.make(Tensor<T>({1}, static_cast<T>(loss)));
  Tensor<T> tgt = target;
  tape.record([pred, o, sums, tgt, eps, n, p] {
    auto& gy = pred->ensure_grad();
    double go = static_cast<double>(o->grad[0]);
    for (int64_t bi = 0; bi < n; ++bi) {
      double sx = (*sums)[static_cast<size_t>(bi)][0];
      double sy = (*sums)[static_cast<size_t>(bi)][1];
      const T* x = tgt.data() + bi * p;
      const T* y = pred->value.data() + bi * p;
      T* g = gy.data() + bi * p;
      double scale = go / static_cast<double>(n);
      for (int64_t i = 0; i < p; ++i) {
        double pi = x[i] / sx;
        double d = 1.0 / sy - pi / (static_cast<double>(y[i]) + eps);
        g[i] += static_cast<T>(scale * d);
      }
    }
  });
  return o;
}

// Spherically weighted MSE: mean over pixels of w * (x - y)^2, batch-averaged.
// The weight map has mean 1, so a uniform error field gives plain MSE.
template <typename T>
inline Var<T>* smse_loss(Tape<T>& tape, const Tensor<T>& target, Var<T>* pred,
                         const Tensor<T>& weights) {
  detail::check_pair(target, pred, "smse_loss");
  const int64_t n = pred->value.extent(0);
  const int64_t p = pred->value.size() / n;
  if (weights.size() != p) throw DataError("smse_loss: weight map size mismatch");
  double loss = 0.0;
  for (int64_t bi = 0; bi < n; ++bi) {
    const T* x = target.data() + bi * p;
    const T* y = pred->value.data() + bi * p;
    for (int64_t i = 0; i < p; ++i) {
      double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
      loss += static_cast<double>(weights[i]) * d * d;
    }
  }
  loss /= static_cast<double>(n * p);
  Var<T>* o = tape.make(Tensor<T>({1}, static_cast<T>(loss)));
  Tensor<T> tgt = target;
  Tensor<T> wm = weights;
  tape.record([pred, o, tgt, wm, n, p] {
    auto& gy = pred->ensure_grad();
    double go = static_cast<double>(o->grad[0]);
    double scale = go / static_cast<double>(n * p);
    for (int64_t bi = 0; bi < n; ++bi) {
      const T* x = tgt.data() + bi * p;
      const T* y = pred->value.data() + bi * p;
      T* g = gy.data() + bi * p;
      for (int64_t i = 0; i < p; ++i)
        g[i] += static_cast<T>(scale * (-2.0) * static_cast<double>(wm[i]) *
                               (static_cast<double>(x[i]) - static_cast<double>(y[i])));
    }
  });
  return o;
}

// Adversarial term for the generator: BCE against all-ones labels, i.e.
// mean over the batch of -log(D(G(z)) + eps).
template <typename T>
inline Var<T>* g_bce_loss(Tape<T>& tape, Var<T>* d_out, double eps) {
  const int64_t n = d_out->value.size();
  if (n < 1) throw DataError("g_bce_loss: empty batch");
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double d = static_cast<double>(d_out->value[i]);
    if (!(d > 0.0 && d < 1.0)) throw NumericError("g_bce_loss: discriminator output outside (0,1)");
    loss += -std::log(d + eps);
  }
  loss /= static_cast<double>(n);
  Var<T>* o = tape.make(Tensor<T>({1}, static_cast<T>(loss)));
  tape.record([d_out, o, eps, n] {
    auto& g = d_out->ensure_grad();
    double go = static_cast<double>(o->grad[0]);
    for (int64_t i = 0; i < n; ++i)
      g[i] += static_cast<T>(-go / ((static_cast<double>(d_out->value[i]) + eps) *
                                    static_cast<double>(n)));
  });
  return o;
}

inline double bce_scalar(double y, double p, double eps) {
  return -(y * std::log(p + eps) + (1.0 - y) * std::log(1.0 - p + eps));
}

// Discriminator loss with explicit labels (labels are constants for the
// gradient). The 1/2 factor halves the discriminator's effective rate.
template <typename T>
inline Var<T>* discriminator_loss_with_labels(Tape<T>& tape, Var<T>* d_real, Var<T>* d_fake,
                                              const std::vector<double>& y_real,
                                              const std::vector<double>& y_fake, double eps) {
  const int64_t n = d_real->value.size();
  if (d_fake->value.size() != n || static_cast<int64_t>(y_real.size()) != n ||
      static_cast<int64_t>(y_fake.size()) != n)
    throw DataError("discriminator_loss: batch size mismatch");
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double dr = static_cast<double>(d_real->value[i]);
    double df = static_cast<double>(d_fake->value[i]);
    if (!(dr > 0.0 && dr < 1.0) || !(df > 0.0 && df < 1.0))
      throw NumericError("discriminator_loss: output outside (0,1)");
    loss += 0.5 * (bce_scalar(y_real[static_cast<size_t>(i)], dr, eps) +
                   bce_scalar(y_fake[static_cast<size_t>(i)], df, eps));
  }
  loss /= static_cast<double>(n);
  Var<T>* o = tape.make(Tensor<T>({1}, static_cast<T>(loss)));
  auto yr = std::make_shared<std::vector<double>>(y_real);
  auto yf = std::make_shared<std::vector<double>>(y_fake);
  tape.record([d_real, d_fake, o, yr, yf, eps, n] {
    auto& gr = d_real->ensure_grad();
    auto& gf = d_fake->ensure_grad();
    double go = static_cast<double>(o->grad[0]);
    double scale = 0.5 * go / static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i) {
      double dr = static_cast<double>(d_real->value[i]);
      double df = static_cast<double>(d_fake->value[i]);
      gr[i] += static_cast<T>(scale * (-(*yr)[static_cast<size_t>(i)] / (dr + eps) +
                                       (1.0 - (*yr)[static_cast<size_t>(i)]) / (1.0 - dr + eps)));
      gf[i] += static_cast<T>(scale * (-(*yf)[static_cast<size_t>(i)] / (df + eps) +
                                       (1.0 - (*yf)[static_cast<size_t>(i)]) / (1.0 - df + eps)));
    }
  });
  return o;
}

// Smoothed/noisy labels: y_real in [0.9, 1.0], y_fake in [0, 0.1], one draw
// per sample (all real labels first, then all fake).
template <typename T>
inline Var<T>* discriminator_loss(Tape<T>& tape, Var<T>* d_real, Var<T>* d_fake, Rng& rng,
                                  double eps) {
  const int64_t n = d_real->value.size();
  std::vector<double> y_real(static_cast<size_t>(n)), y_fake(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) y_real[static_cast<size_t>(i)] = 0.9 + 0.1 * rng.uniform();
  for (int64_t i = 0; i < n; ++i) y_fake[static_cast<size_t>(i)] = 0.1 * rng.uniform();
  for (int64_t i = 0; i < n; ++i) {
    if (y_real[static_cast<size_t>(i)] < 0.9 || y_real[static_cast<size_t>(i)] > 1.0 ||
        y_fake[static_cast<size_t>(i)] < 0.0 || y_fake[static_cast<size_t>(i)] > 0.1)
      throw NumericError("discriminator_loss: label outside its smoothing range");
  }
  return discriminator_loss_with_labels(tape, d_real, d_fake, y_real, y_fake, eps);
}

struct GeneratorLoss {
  template <typename T>
  struct Result {
    Var<T>* total = nullptr;
    LossBreakdown breakdown;
  };
};

// Sum of the enabled terms with unit coefficients; the breakdown is returned
// for logging and the ablation harness.
template <typename T>
inline typename GeneratorLoss::Result<T> generator_loss(Tape<T>& tape, const Tensor<T>& target,
                                                        Var<T>* pred, Var<T>* d_fake,
                                                        const Tensor<T>& weight_map,
                                                        const LossConfig& cfg) {
  typename GeneratorLoss::Result<T> res;
  std::vector<Var<T>*> terms;
  if (cfg.cc) {
    Var<T>* t = cc_loss(tape, target, pred);
    res.breakdown.cc_loss = static_cast<double>(t->value[0]);
    terms.push_back(t);
  }
  if (cfg.kl) {
    Var<T>* t = kl_loss(tape, target, pred, cfg.epsilon);
    res.breakdown.kl_loss = static_cast<double>(t->value[0]);
    terms.push_back(t);
  }
  if (cfg.smse) {
    Var<T>* t = smse_loss(tape, target, pred, weight_map);
    res.breakdown.smse_loss = static_cast<double>(t->value[0]);
    terms.push_back(t);
  }
  Var<T>* adv = g_bce_loss(tape, d_fake, cfg.epsilon);
  res.breakdown.g_bce_loss = static_cast<double>(adv->value[0]);
  terms.push_back(adv);
  res.total = ops::add_scalars(tape, terms);
  res.breakdown.total = static_cast<double>(res.total->value[0]);
  return res;
}

}  // namespace losses
}  // namespace sgan
