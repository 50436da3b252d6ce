#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "spheregan/autodiff.hpp"
#include "spheregan/geometry.hpp"
#include "spheregan/rng.hpp"
#include "spheregan/tensor.hpp"

namespace sgan {

enum class Mode { kTrain, kEval };

namespace ops {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
inline T fp_gather(const T* plane, const BilinearFootprint& f) {
  return static_cast<T>(f.w[0]) * plane[f.idx[0]] + static_cast<T>(f.w[1]) * plane[f.idx[1]] +
         static_cast<T>(f.w[2]) * plane[f.idx[2]] + static_cast<T>(f.w[3]) * plane[f.idx[3]];
}

template <typename T>
inline void fp_scatter(T* plane, const BilinearFootprint& f, T g) {
  plane[f.idx[0]] += static_cast<T>(f.w[0]) * g;
  plane[f.idx[1]] += static_cast<T>(f.w[1]) * g;
  plane[f.idx[2]] += static_cast<T>(f.w[2]) * g;
  plane[f.idx[3]] += static_cast<T>(f.w[3]) * g;
}

// Samples every channel of a C x H x W tensor at one fractional (row, col)
// with periodic columns and pole-reflected rows.
template <typename T>
inline std::vector<T> bilinear_sample(const Tensor<T>& input, double row, double col) {
  if (input.rank() != 3) throw DataError("bilinear_sample: expected C x H x W input");
  int h = static_cast<int>(input.extent(1));
  int w = static_cast<int>(input.extent(2));
  BilinearFootprint f = compute_footprint(row, col, h, w);
  std::vector<T> out(static_cast<size_t>(input.extent(0)));
  for (int64_t c = 0; c < input.extent(0); ++c)
    out[static_cast<size_t>(c)] = fp_gather(input.data() + c * h * w, f);
  return out;
}

// Scatters per-channel output gradients back onto the 4 source pixels.
template <typename T>
inline void bilinear_sample_grad(Tensor<T>& input_grad, double row, double col,
                                 const std::vector<T>& out_grad) {
  int h = static_cast<int>(input_grad.extent(1));
  int w = static_cast<int>(input_grad.extent(2));
  BilinearFootprint f = compute_footprint(row, col, h, w);
  for (int64_t c = 0; c < input_grad.extent(0); ++c)
    fp_scatter(input_grad.data() + c * h * w, f, out_grad[static_cast<size_t>(c)]);
}

// ---------------------------------------------------------------------------
// Structure ops

template <typename T>
inline Var<T>* concat_channels(Tape<T>& tape, Var<T>* a, Var<T>* b) {
  const auto& sa = a->value.shape();
  const auto& sb = b->value.shape();
  if (a->value.rank() != 4 || b->value.rank() != 4 || sa[0] != sb[0] || sa[2] != sb[2] ||
      sa[3] != sb[3])
    throw DataError("concat_channels: shape mismatch");
  int64_t n = sa[0], ca = sa[1], cb = sb[1], hw = sa[2] * sa[3];
  Tensor<T> out({n, ca + cb, sa[2], sa[3]});
  for (int64_t i = 0; i < n; ++i) {
    std::copy(a->value.data() + i * ca * hw, a->value.data() + (i + 1) * ca * hw,
              out.data() + i * (ca + cb) * hw);
    std::copy(b->value.data() + i * cb * hw, b->value.data() + (i + 1) * cb * hw,
              out.data() + i * (ca + cb) * hw + ca * hw);
  }
  Var<T>* o = tape.make(std::move(out));
  tape.record([a, b, o, n, ca, cb, hw] {
    auto& ga = a->ensure_grad();
    auto& gb = b->ensure_grad();
    for (int64_t i = 0; i < n; ++i) {
      const T* src = o->grad.data() + i * (ca + cb) * hw;
      T* da = ga.data() + i * ca * hw;
      T* db = gb.data() + i * cb * hw;
      for (int64_t j = 0; j < ca * hw; ++j) da[j] += src[j];
      for (int64_t j = 0; j < cb * hw; ++j) db[j] += src[ca * hw + j];
    }
  });
  return o;
}

template <typename T>
inline Var<T>* flatten(Tape<T>& tape, Var<T>* x) {
  int64_t n = x->value.extent(0);
  int64_t rest = x->value.size() / std::max<int64_t>(n, 1);
  Var<T>* o = tape.make(x->value.reshaped({n, rest}));
  tape.record([x, o] {
    auto& gx = x->ensure_grad();
    for (int64_t i = 0; i < gx.size(); ++i) gx[i] += o->grad[i];
  });
  return o;
}

template <typename T>
inline Var<T>* add_scalars(Tape<T>& tape, const std::vector<Var<T>*>& xs) {
  T s = T(0);
  for (Var<T>* v : xs) s += v->value[0];
  Var<T>* o = tape.make(Tensor<T>({1}, s));
  tape.record([xs, o] {
    for (Var<T>* v : xs) v->ensure_grad()[0] += o->grad[0];
  });
  return o;
}

// ---------------------------------------------------------------------------
// Convolutions

// Spherical convolution over a precomputed sampling grid.
//   input   N x Cin x H x W
//   weights Cout x Cin x taps   (tap order = grid tap order, row-major 3x3)
//   bias    Cout
// out[n,co,p] = bias[co] + sum_{ci,t} weights[co,ci,t] * sample(input[n,ci], grid[p,t])
template <typename T>
inline Var<T>* sphere_conv2d(Tape<T>& tape, Var<T>* input, Var<T>* weights, Var<T>* bias,
                             const SamplingGrid& grid) {
  const auto& xs = input->value.shape();
  const auto& ws = weights->value.shape();
  if (input->value.rank() != 4 || weights->value.rank() != 3 || bias->value.rank() != 1)
    throw DataError("sphere_conv2d: bad ranks");
  if (xs[2] != grid.in_height || xs[3] != grid.in_width)
    throw DataError("sphere_conv2d: input dims do not match grid");
  if (ws[1] != xs[1] || ws[2] != grid.taps_per_pixel || bias->value.extent(0) != ws[0])
    throw DataError("sphere_conv2d: weight/bias shape mismatch");

  const int64_t n = xs[0], cin = xs[1], cout = ws[0];
  const int64_t hw = static_cast<int64_t>(grid.in_height) * grid.in_width;
  const int64_t opix = grid.out_pixels();
  const int taps = grid.taps_per_pixel;
  const int64_t k = cin * taps;

  Tensor<T> out({n, cout, grid.out_height, grid.out_width});
  // Patch matrices kept for the weight-gradient GEMM in backward.
  auto patches = std::make_shared<std::vector<Tensor<T>>>();
  patches->reserve(static_cast<size_t>(n));

  ConstMatMap<T> wmat(weights->value.data(), cout, k);
  for (int64_t bi = 0; bi < n; ++bi) {
    Tensor<T> patch({opix, k});
    T* pd = patch.data();
    const T* x0 = input->value.data() + bi * cin * hw;
    parallel_for(opix, [&](int64_t p0, int64_t p1) {
      for (int64_t p = p0; p < p1; ++p) {
        const BilinearFootprint* fp = grid.footprints_at(p);
        T* row = pd + p * k;
        for (int64_t ci = 0; ci < cin; ++ci) {
          const T* plane = x0 + ci * hw;
          for (int t = 0; t < taps; ++t) row[ci * taps + t] = fp_gather(plane, fp[t]);
        }
      }
    });
    ConstMatMap<T> pm(patch.data(), opix, k);
    MatMap<T> om(out.data() + bi * cout * opix, cout, opix);
    om.noalias() = wmat * pm.transpose();
    for (int64_t co = 0; co < cout; ++co) om.row(co).array() += bias->value[co];
    patches->push_back(std::move(patch));
  }
  check_finite(out, "sphere_conv2d");
  Var<T>* o = tape.make(std::move(out));
  const SamplingGrid* g = &grid;
  tape.record([input, weights, bias, o, patches, g, n, cin, cout, hw, opix, taps, k] {
    auto& gx = input->ensure_grad();
    auto& gw = weights->ensure_grad();
    auto& gb = bias->ensure_grad();
    ConstMatMap<T> wmat(weights->value.data(), cout, k);
    MatMap<T> gwm(gw.data(), cout, k);
    for (int64_t bi = 0; bi < n; ++bi) {
      ConstMatMap<T> dom(o->grad.data() + bi * cout * opix, cout, opix);
      ConstMatMap<T> pm((*patches)[static_cast<size_t>(bi)].data(), opix, k);
      gwm.noalias() += dom * pm;
      for (int64_t co = 0; co < cout; ++co) gb[co] += dom.row(co).sum();
      RowMat<T> dpatch = dom.transpose() * wmat;  // opix x k
      T* dx0 = gx.data() + bi * cin * hw;
      parallel_for(cin, [&](int64_t c0, int64_t c1) {
        for (int64_t ci = c0; ci < c1; ++ci) {
          T* plane = dx0 + ci * hw;
          for (int64_t p = 0; p < opix; ++p) {
            const BilinearFootprint* fp = g->footprints_at(p);
            for (int t = 0; t < taps; ++t) fp_scatter(plane, fp[t], dpatch(p, ci * taps + t));
          }
        }
      });
    }
  });
  return o;
}

// Standard 3x3 cross-correlation, zero padding 1, stride 1 or 2.
//   weights Cout x Cin x 9 laid out row-major over the 3x3 kernel, matching
//   the spherical tap order so the two conv flavors share weight storage.
template <typename T>
inline Var<T>* conv2d(Tape<T>& tape, Var<T>* input, Var<T>* weights, Var<T>* bias, int stride) {
  const auto& xs = input->value.shape();
  const auto& ws = weights->value.shape();
  if (input->value.rank() != 4 || weights->value.rank() != 3)
    throw DataError("conv2d: bad ranks");
  if (ws[1] != xs[1] || ws[2] != 9 || bias->value.extent(0) != ws[0])
    throw DataError("conv2d: weight/bias shape mismatch");
  if (stride != 1 && stride != 2) throw DataError("conv2d: stride must be 1 or 2");

  const int64_t n = xs[0], cin = xs[1], h = xs[2], w = xs[3], cout = ws[0];
  const int64_t oh = (h + 2 - 3) / stride + 1;
  const int64_t ow = (w + 2 - 3) / stride + 1;
  const int64_t hw = h * w, opix = oh * ow, k = cin * 9;

  Tensor<T> out({n, cout, oh, ow});
  auto patches = std::make_shared<std::vector<Tensor<T>>>();
  patches->reserve(static_cast<size_t>(n));

  ConstMatMap<T> wmat(weights->value.data(), cout, k);
  for (int64_t bi = 0; bi < n; ++bi) {
    Tensor<T> patch({opix, k});
    T* pd = patch.data();
    const T* x0 = input->value.data() + bi * cin * hw;
    parallel_for(opix, [&](int64_t p0, int64_t p1) {
      for (int64_t p = p0; p < p1; ++p) {
        int64_t oi = p / ow, oj = p % ow;
        T* row = pd + p * k;
        for (int64_t ci = 0; ci < cin; ++ci) {
          const T* plane = x0 + ci * hw;
          for (int kr = 0; kr < 3; ++kr) {
            int64_t ir = oi * stride - 1 + kr;
            for (int kc = 0; kc < 3; ++kc) {
              int64_t ic = oj * stride - 1 + kc;
              T v = (ir >= 0 && ir < h && ic >= 0 && ic < w) ? plane[ir * w + ic] : T(0);
              row[ci * 9 + kr * 3 + kc] = v;
            }
          }
        }
      }
    });
    ConstMatMap<T> pm(patch.data(), opix, k);
    MatMap<T> om(out.data() + bi * cout * opix, cout, opix);
    om.noalias() = wmat * pm.transpose();
    for (int64_t co = 0; co < cout; ++co) om.row(co).array() += bias->value[co];
    patches->push_back(std::move(patch));
  }
  check_finite(out, "conv2d");
  Var<T>* o = tape.make(std::move(out));
  tape.record([input, weights, bias, o, patches, n, cin, cout, h, w, oh, ow, stride] {
    const int64_t hw = h * w, opix = oh * ow, k = cin * 9;
    auto& gx = input->ensure_grad();
    auto& gw = weights->ensure_grad();
    auto& gb = bias->ensure_grad();
    ConstMatMap<T> wmat(weights->value.data(), cout, k);
    MatMap<T> gwm(gw.data(), cout, k);
    for (int64_t bi = 0; bi < n; ++bi) {
      ConstMatMap<T> dom(o->grad.data() + bi * cout * opix, cout, opix);
      ConstMatMap<T> pm((*patches)[static_cast<size_t>(bi)].data(), opix, k);
      gwm.noalias() += dom * pm;
      for (int64_t co = 0; co < cout; ++co) gb[co] += dom.row(co).sum();
      RowMat<T> dpatch = dom.transpose() * wmat;
      T* dx0 = gx.data() + bi * cin * hw;
      parallel_for(cin, [&](int64_t c0, int64_t c1) {
        for (int64_t ci = c0; ci < c1; ++ci) {
          T* plane = dx0 + ci * hw;
          for (int64_t p = 0; p < opix; ++p) {
            int64_t oi = p / ow, oj = p % ow;
            for (int kr = 0; kr < 3; ++kr) {
              int64_t ir = oi * stride - 1 + kr;
              if (ir < 0 || ir >= h) continue;
              for (int kc = 0; kc < 3; ++kc) {
                int64_t ic = oj * stride - 1 + kc;
                if (ic < 0 || ic >= w) continue;
                plane[ir * w + ic] += dpatch(p, ci * 9 + kr * 3 + kc);
              }
            }
          }
        }
      });
    }
  });
  return o;
}

// ---------------------------------------------------------------------------
// Pooling

// Max over the 4 bilinear-sampled taps of a 2x2 spherical pooling grid.
// Gradient flows into the argmax tap's bilinear footprint; ties resolve to
// the lowest tap index.
template <typename T>
inline Var<T>* sphere_maxpool(Tape<T>& tape, Var<T>* input, const SamplingGrid& grid) {
  const auto& xs = input->value.shape();
  if (input->value.rank() != 4) throw DataError("sphere_maxpool: bad rank");
  if (xs[2] != grid.in_height || xs[3] != grid.in_width)
    throw DataError("sphere_maxpool: input dims do not match grid");
  const int64_t n = xs[0], c = xs[1];
  const int64_t hw = static_cast<int64_t>(grid.in_height) * grid.in_width;
  const int64_t opix = grid.out_pixels();
  const int taps = grid.taps_per_pixel;

  Tensor<T> out({n, c, grid.out_height, grid.out_width});
  auto argmax = std::make_shared<std::vector<uint8_t>>(static_cast<size_t>(n * c * opix));
  parallel_for(n * c, [&](int64_t b0, int64_t b1) {
    for (int64_t b = b0; b < b1; ++b) {
      const T* plane = input->value.data() + b * hw;
      T* od = out.data() + b * opix;
      uint8_t* am = argmax->data() + b * opix;
      for (int64_t p = 0; p < opix; ++p) {
        const BilinearFootprint* fp = grid.footprints_at(p);
        T best = fp_gather(plane, fp[0]);
        int bt = 0;
        for (int t = 1; t < taps; ++t) {
          T v = fp_gather(plane, fp[t]);
          if (v > best) {
            best = v;
            bt = t;
          }
        }
        od[p] = best;
        am[p] = static_cast<uint8_t>(bt);
      }
    }
  });
  check_finite(out, "sphere_maxpool");
  Var<T>* o = tape.make(std::move(out));
  const SamplingGrid* g = &grid;
  tape.record([input, o, argmax, g, n, c, hw, opix] {
    auto& gx = input->ensure_grad();
    parallel_for(n * c, [&](int64_t b0, int64_t b1) {
      for (int64_t b = b0; b < b1; ++b) {
        T* plane = gx.data() + b * hw;
        const T* od = o->grad.data() + b * opix;
        const uint8_t* am = argmax->data() + b * opix;
        for (int64_t p = 0; p < opix; ++p)
          fp_scatter(plane, g->footprints_at(p)[am[p]], od[p]);
      }
    });
  });
  return o;
}

// Planar 2x2 max-pool, stride 2 (used by the planar-conv ablation). Tie rule
// matches the spherical pool: first tap in row-major block order wins.
template <typename T>
inline Var<T>* maxpool2x2(Tape<T>& tape, Var<T>* input) {
  const auto& xs = input->value.shape();
  if (input->value.rank() != 4) throw DataError("maxpool2x2: bad rank");
  if (xs[2] % 2 != 0 || xs[3] % 2 != 0) throw DataError("maxpool2x2: odd spatial dims");
  const int64_t n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  const int64_t oh = h / 2, ow = w / 2, hw = h * w, opix = oh * ow;
  Tensor<T> out({n, c, oh, ow});
  auto argmax = std::make_shared<std::vector<uint8_t>>(static_cast<size_t>(n * c * opix));
  parallel_for(n * c, [&](int64_t b0, int64_t b1) {
    for (int64_t b = b0; b < b1; ++b) {
      const T* plane = input->value.data() + b * hw;
      T* od = out.data() + b * opix;
      uint8_t* am = argmax->data() + b * opix;
      for (int64_t oi = 0; oi < oh; ++oi) {
        for (int64_t oj = 0; oj < ow; ++oj) {
          int64_t base = (2 * oi) * w + 2 * oj;
          int64_t idx[4] = {base, base + 1, base + w, base + w + 1};
          T best = plane[idx[0]];
          int bt = 0;
          for (int t = 1; t < 4; ++t)
            if (plane[idx[t]] > best) {
              best = plane[idx[t]];
              bt = t;
            }
          od[oi * ow + oj] = best;
          am[oi * ow + oj] = static_cast<uint8_t>(bt);
        }
      }
    }
  });
  Var<T>* o = tape.make(std::move(out));
  tape.record([input, o, argmax, n, c, h, w, oh, ow] {
    const int64_t hw = h * w, opix = oh * ow;
    auto& gx = input->ensure_grad();
    parallel_for(n * c, [&](int64_t b0, int64_t b1) {
      for (int64_t b = b0; b < b1; ++b) {
        T* plane = gx.data() + b * hw;
        const T* od = o->grad.data() + b * opix;
        const uint8_t* am = argmax->data() + b * opix;
        for (int64_t oi = 0; oi < oh; ++oi)
          for (int64_t oj = 0; oj < ow; ++oj) {
            int64_t base = (2 * oi) * w + 2 * oj;
            int64_t idx[4] = {base, base + 1, base + w, base + w + 1};
            plane[idx[am[oi * ow + oj]]] += od[oi * ow + oj];
          }
      }
    });
  });
  return o;
}

// ---------------------------------------------------------------------------
// Upsampling

// 2x bilinear upsampling, align-corners = false. Columns interpolate with
// periodic wrap (keeps the ERP seam continuous), rows clamp at the poles.
template <typename T>
inline Var<T>* upsample_bilinear_x2(Tape<T>& tape, Var<T>* input) {
  const auto& xs = input->value.shape();
  if (input->value.rank() != 4) throw DataError("upsample_bilinear_x2: bad rank");
  const int64_t n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  const int64_t oh = 2 * h, ow = 2 * w;

  struct Axis {
    std::vector<int32_t> i0, i1;
    std::vector<T> a;  // weight on i1
  };
  auto rows = std::make_shared<Axis>();
  auto cols = std::make_shared<Axis>();
  rows->i0.resize(static_cast<size_t>(oh));
  rows->i1.resize(static_cast<size_t>(oh));
  rows->a.resize(static_cast<size_t>(oh));
  for (int64_t i = 0; i < oh; ++i) {
    double f = (static_cast<double>(i) + 0.5) / 2.0 - 0.5;
    double f0 = std::floor(f);
    int64_t r0 = static_cast<int64_t>(f0);
    rows->a[static_cast<size_t>(i)] = static_cast<T>(f - f0);
    rows->i0[static_cast<size_t>(i)] = static_cast<int32_t>(std::clamp<int64_t>(r0, 0, h - 1));
    rows->i1[static_cast<size_t>(i)] = static_cast<int32_t>(std::clamp<int64_t>(r0 + 1, 0, h - 1));
  }
  cols->i0.resize(static_cast<size_t>(ow));
  cols->i1.resize(static_cast<size_t>(ow));
  cols->a.resize(static_cast<size_t>(ow));
  for (int64_t j = 0; j < ow; ++j) {
    double f = (static_cast<double>(j) + 0.5) / 2.0 - 0.5;
    double f0 = std::floor(f);
    int64_t c0 = static_cast<int64_t>(f0);
    cols->a[static_cast<size_t>(j)] = static_cast<T>(f - f0);
    cols->i0[static_cast<size_t>(j)] = static_cast<int32_t>(((c0 % w) + w) % w);
    cols->i1[static_cast<size_t>(j)] = static_cast<int32_t>((((c0 + 1) % w) + w) % w);
  }

  Tensor<T> out({n, c, oh, ow});
  parallel_for(n * c, [&](int64_t b0, int64_t b1) {
    for (int64_t b = b0; b < b1; ++b) {
      const T* plane = input->value.data() + b * h * w;
      T* od = out.data() + b * oh * ow;
      for (int64_t i = 0; i < oh; ++i) {
        const T* pr0 = plane + rows->i0[static_cast<size_t>(i)] * w;
        const T* pr1 = plane + rows->i1[static_cast<size_t>(i)] * w;
        T ar = rows->a[static_cast<size_t>(i)];
        for (int64_t j = 0; j < ow; ++j) {
          T ac = cols->a[static_cast<size_t>(j)];
          int32_t c0 = cols->i0[static_cast<size_t>(j)], c1 = cols->i1[static_cast<size_t>(j)];
          T top = (T(1) - ac) * pr0[c0] + ac * pr0[c1];
          T bot = (T(1) - ac) * pr1[c0] + ac * pr1[c1];
          od[i * ow + j] = (T(1) - ar) * top + ar * bot;
        }
      }
    }
  });
  Var<T>* o = tape.make(std::move(out));
  tape.record([input, o, rows, cols, n, c, h, w, oh, ow] {
    auto& gx = input->ensure_grad();
    parallel_for(n * c, [&](int64_t b0, int64_t b1) {
      for (int64_t b = b0; b < b1; ++b) {
        T* plane = gx.data() + b * h * w;
        const T* od = o->grad.data() + b * oh * ow;
        for (int64_t i = 0; i < oh; ++i) {
          T* pr0 = plane + rows->i0[static_cast<size_t>(i)] * w;
          T* pr1 = plane + rows->i1[static_cast<size_t>(i)] * w;
          T ar = rows->a[static_cast<size_t>(i)];
          for (int64_t j = 0; j < ow; ++j) {
            T g = od[i * ow + j];
            T ac = cols->a[static_cast<size_t>(j)];
            int32_t c0 = cols->i0[static_cast<size_t>(j)], c1 = cols->i1[static_cast<size_t>(j)];
            pr0[c0] += (T(1) - ar) * (T(1) - ac) * g;
            pr0[c1] += (T(1) - ar) * ac * g;
            pr1[c0] += ar * (T(1) - ac) * g;
            pr1[c1] += ar * ac * g;
          }
        }
      }
    });
  });
  return o;
}

// ---------------------------------------------------------------------------
// Normalization

// Batch normalization over N x C x H x W, per-channel statistics across
// N*H*W. Train mode normalizes by batch statistics (population variance,
// eps = 1e-5) and updates the running stats with momentum 0.1; eval mode
// normalizes by the running stats.
template <typename T>
inline Var<T>* batchnorm(Tape<T>& tape, Var<T>* input, Var<T>* gamma, Var<T>* beta,
                         Tensor<T>* running_mean, Tensor<T>* running_var, Mode mode,
                         double momentum = 0.1, double eps = 1e-5) {
  const auto& xs = input->value.shape();
  if (input->value.rank() != 4) throw DataError("batchnorm: bad rank");
  const int64_t n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  if (gamma->value.size() != c || beta->value.size() != c || running_mean->size() != c ||
      running_var->size() != c)
    throw DataError("batchnorm: parameter size mismatch");
  const int64_t m = n * h * w;
  const int64_t hw = h * w;

  Tensor<T> out(xs);
  if (mode == Mode::kTrain) {
    if (m < 2) throw DataError("batchnorm: need at least 2 samples per channel in train mode");
    auto xhat = std::make_shared<Tensor<T>>(xs);
    auto invstd = std::make_shared<std::vector<T>>(static_cast<size_t>(c));
    parallel_for(c, [&](int64_t c0, int64_t c1) {
      for (int64_t ci = c0; ci < c1; ++ci) {
        double sum = 0.0, sq = 0.0;
        for (int64_t bi = 0; bi < n; ++bi) {
          const T* plane = input->value.data() + (bi * c + ci) * hw;
          for (int64_t p = 0; p < hw; ++p) {
            sum += static_cast<double>(plane[p]);
            sq += static_cast<double>(plane[p]) * static_cast<double>(plane[p]);
          }
        }
        double mean = sum / static_cast<double>(m);
        double var = sq / static_cast<double>(m) - mean * mean;
        if (var < 0.0) var = 0.0;
        double istd = 1.0 / std::sqrt(var + eps);
        (*invstd)[static_cast<size_t>(ci)] = static_cast<T>(istd);
        T g = gamma->value[ci], b = beta->value[ci];
        for (int64_t bi = 0; bi < n; ++bi) {
          const T* plane = input->value.data() + (bi * c + ci) * hw;
          T* xh = xhat->data() + (bi * c + ci) * hw;
          T* od = out.data() + (bi * c + ci) * hw;
          for (int64_t p = 0; p < hw; ++p) {
            T v = static_cast<T>((static_cast<double>(plane[p]) - mean) * istd);
            xh[p] = v;
            od[p] = g * v + b;
          }
        }
        (*running_mean)[ci] =
            static_cast<T>((1.0 - momentum) * static_cast<double>((*running_mean)[ci]) +
                           momentum * mean);
        (*running_var)[ci] =
            static_cast<T>((1.0 - momentum) * static_cast<double>((*running_var)[ci]) +
                           momentum * var);
      }
    });
    check_finite(out, "batchnorm");
    Var<T>* o = tape.make(std::move(out));
    tape.record([input, gamma, beta, o, xhat, invstd, n, c, hw, m] {
      auto& gx = input->ensure_grad();
      auto& gg = gamma->ensure_grad();
      auto& gb = beta->ensure_grad();
      parallel_for(c, [&](int64_t c0, int64_t c1) {
        for (int64_t ci = c0; ci < c1; ++ci) {
          double s1 = 0.0, s2 = 0.0;
          for (int64_t bi = 0; bi < n; ++bi) {
            const T* dy = o->grad.data() + (bi * c + ci) * hw;
            const T* xh = xhat->data() + (bi * c + ci) * hw;
            for (int64_t p = 0; p < hw; ++p) {
              s1 += static_cast<double>(dy[p]);
              s2 += static_cast<double>(dy[p]) * static_cast<double>(xh[p]);
            }
          }
          gb[ci] += static_cast<T>(s1);
          gg[ci] += static_cast<T>(s2);
          double gi = static_cast<double>(gamma->value[ci]) *
                      static_cast<double>((*invstd)[static_cast<size_t>(ci)]);
          double mean_dy = s1 / static_cast<double>(m);
          double mean_dyxh = s2 / static_cast<double>(m);
          for (int64_t bi = 0; bi < n; ++bi) {
            const T* dy = o->grad.data() + (bi * c + ci) * hw;
            const T* xh = xhat->data() + (bi * c + ci) * hw;
            T* dx = gx.data() + (bi * c + ci) * hw;
            for (int64_t p = 0; p < hw; ++p)
              dx[p] += static_cast<T>(gi * (static_cast<double>(dy[p]) - mean_dy -
                                            static_cast<double>(xh[p]) * mean_dyxh));
          }
        }
      });
    });
    return o;
  }

  // eval mode: running statistics, no updates
  auto invstd = std::make_shared<std::vector<T>>(static_cast<size_t>(c));
  for (int64_t ci = 0; ci < c; ++ci) {
    double istd = 1.0 / std::sqrt(static_cast<double>((*running_var)[ci]) + eps);
    (*invstd)[static_cast<size_t>(ci)] = static_cast<T>(istd);
    T g = gamma->value[ci], b = beta->value[ci], mu = (*running_mean)[ci];
    for (int64_t bi = 0; bi < n; ++bi) {
      const T* plane = input->value.data() + (bi * c + ci) * hw;
      T* od = out.data() + (bi * c + ci) * hw;
      for (int64_t p = 0; p < hw; ++p)
        od[p] = g * static_cast<T>((plane[p] - mu) * (*invstd)[static_cast<size_t>(ci)]) + b;
    }
  }
  check_finite(out, "batchnorm");
  Var<T>* o = tape.make(std::move(out));
  Tensor<T>* rm = running_mean;
  tape.record([input, gamma, beta, o, invstd, rm, n, c, hw] {
    auto& gx = input->ensure_grad();
    auto& gg = gamma->ensure_grad();
    auto& gb = beta->ensure_grad();
    for (int64_t ci = 0; ci < c; ++ci) {
      T gi = gamma->value[ci] * (*invstd)[static_cast<size_t>(ci)];
      for (int64_t bi = 0; bi < n; ++bi) {
        const T* dy = o->grad.data() + (bi * c + ci) * hw;
        const T* x = input->value.data() + (bi * c + ci) * hw;
        T* dx = gx.data() + (bi * c + ci) * hw;
        for (int64_t p = 0; p < hw; ++p) {
          dx[p] += dy[p] * gi;
          gb[ci] += dy[p];
          gg[ci] += dy[p] * static_cast<T>((x[p] - (*rm)[ci]) *
                                           (*invstd)[static_cast<size_t>(ci)]);
        }
      }
    }
  });
  return o;
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
inline Var<T>* relu(Tape<T>& tape, Var<T>* input) {
  Tensor<T> out(input->value.shape());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = input->value[i] > T(0) ? input->value[i] : T(0);
  Var<T>* o = tape.make(std::move(out));
  tape.record([input, o] {
    auto& gx = input->ensure_grad();
    for (int64_t i = 0; i < gx.size(); ++i)
      if (input->value[i] > T(0)) gx[i] += o->grad[i];
  });
  return o;
}

template <typename T>
inline T sigmoid_scalar(T x) {
  if (x >= T(0)) {
    T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
inline Var<T>* sigmoid(Tape<T>& tape, Var<T>* input) {
  Tensor<T> out(input->value.shape());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(input->value[i]);
  Var<T>* o = tape.make(std::move(out));
  tape.record([input, o] {
    auto& gx = input->ensure_grad();
    for (int64_t i = 0; i < gx.size(); ++i) gx[i] += o->grad[i] * o->value[i] * (T(1) - o->value[i]);
  });
  return o;
}

// Inverted dropout: train mode zeroes with probability p and scales survivors
// by 1/(1-p); eval mode is the identity (returns the input var unchanged).
// Mask elements are drawn from rng in row-major order.
template <typename T>
inline Var<T>* dropout(Tape<T>& tape, Var<T>* input, double p, Rng& rng, Mode mode) {
  if (mode == Mode::kEval || p <= 0.0) return input;
  if (!(p < 1.0)) throw DataError("dropout: p must be < 1");
  T scale = static_cast<T>(1.0 / (1.0 - p));
  auto mask = std::make_shared<std::vector<T>>(static_cast<size_t>(input->value.size()));
  Tensor<T> out(input->value.shape());
  for (int64_t i = 0; i < out.size(); ++i) {
    T m = rng.uniform() < p ? T(0) : scale;
    (*mask)[static_cast<size_t>(i)] = m;
    out[i] = input->value[i] * m;
  }
  Var<T>* o = tape.make(std::move(out));
  tape.record([input, o, mask] {
    auto& gx = input->ensure_grad();
    for (int64_t i = 0; i < gx.size(); ++i) gx[i] += o->grad[i] * (*mask)[static_cast<size_t>(i)];
  });
  return o;
}

// Affine map: (N x F) * (F x M) + bias(M).
template <typename T>
inline Var<T>* linear(Tape<T>& tape, Var<T>* input, Var<T>* weights, Var<T>* bias) {
  const auto& xs = input->value.shape();
  const auto& ws = weights->value.shape();
  if (input->value.rank() != 2 || weights->value.rank() != 2 || xs[1] != ws[0] ||
      bias->value.size() != ws[1])
    throw DataError("linear: shape mismatch");
  const int64_t n = xs[0], f = xs[1], m = ws[1];
  Tensor<T> out({n, m});
  ConstMatMap<T> xm(input->value.data(), n, f);
  ConstMatMap<T> wm(weights->value.data(), f, m);
  MatMap<T> om(out.data(), n, m);
  om.noalias() = xm * wm;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < m; ++j) out(i, j) += bias->value[j];
  check_finite(out, "linear");
  Var<T>* o = tape.make(std::move(out));
  tape.record([input, weights, bias, o, n, f, m] {
    auto& gx = input->ensure_grad();
    auto& gw = weights->ensure_grad();
    auto& gb = bias->ensure_grad();
    ConstMatMap<T> dom(o->grad.data(), n, m);
    ConstMatMap<T> xm(input->value.data(), n, f);
    ConstMatMap<T> wm(weights->value.data(), f, m);
    MatMap<T> gxm(gx.data(), n, f);
    MatMap<T> gwm(gw.data(), f, m);
    gxm.noalias() += dom * wm.transpose();
    gwm.noalias() += xm.transpose() * dom;
    for (int64_t j = 0; j < m; ++j) gb[j] += dom.col(j).sum();
  });
  return o;
}

}  // namespace ops
}  // namespace sgan
