#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "spheregan/common.hpp"
#include "spheregan/tensor.hpp"

namespace sgan {

// Equirectangular conventions
// ---------------------------
// A frame is H x W with W = 2H. Pixel (row, col) covers a cell whose CENTER is
//   lat = pi/2 - pi*(row + 0.5)/H        (row 0 is the north edge)
//   lon = 2*pi*(col + 0.5)/W - pi        (col 0 is the lon = -pi edge)
// Latitude is in (-pi/2, pi/2), longitude wrapped into [-pi, pi). Columns are
// periodic; rows never clamp, crossing a pole reflects to the antipodal
// meridian.

struct SphereCoord {
  double lat = 0.0;  // radians, (-pi/2, pi/2)
  double lon = 0.0;  // radians, [-pi, pi)
};

inline double wrap_lon(double lon) {
  return lon - 2.0 * kPi * std::floor((lon + kPi) / (2.0 * kPi));
}

inline SphereCoord pixel_to_sphere(double row, double col, int height, int width) {
  SphereCoord s;
  s.lat = kPi / 2.0 - kPi * (row + 0.5) / static_cast<double>(height);
  s.lon = wrap_lon(2.0 * kPi * (col + 0.5) / static_cast<double>(width) - kPi);
  return s;
}

// Inverse of pixel_to_sphere; returns fractional pixel coordinates.
inline void sphere_to_pixel(const SphereCoord& s, int height, int width, double* row,
                            double* col) {
  *row = (0.5 - s.lat / kPi) * static_cast<double>(height) - 0.5;
  *col = (wrap_lon(s.lon) + kPi) / (2.0 * kPi) * static_cast<double>(width) - 0.5;
}

// Inverse gnomonic projection: maps tangent-plane coordinates (x, y) at
// `center` back onto the sphere. y points north, x points east. A point past
// the pole comes out reflected in latitude with its longitude shifted by pi,
// which is exactly the continuous continuation across the pole.
inline SphereCoord gnomonic_inverse(const SphereCoord& center, double x, double y) {
  if (!(std::isfinite(x) && std::isfinite(y)))
    throw NumericError("gnomonic_inverse: non-finite tangent coordinates");
  if (!(center.lat > -kPi / 2.0 && center.lat < kPi / 2.0))
    throw NumericError("gnomonic_inverse: center latitude must be strictly inside (-pi/2, pi/2)");
  double rho = std::hypot(x, y);
  if (rho == 0.0) return {center.lat, wrap_lon(center.lon)};
  double nu = std::atan(rho);
  double sin_nu = std::sin(nu), cos_nu = std::cos(nu);
  double sin_c = std::sin(center.lat), cos_c = std::cos(center.lat);
  double s = cos_nu * sin_c + y * sin_nu * cos_c / rho;
  s = std::max(-1.0, std::min(1.0, s));
  SphereCoord out;
  out.lat = std::asin(s);
  out.lon = wrap_lon(center.lon +
                     std::atan2(x * sin_nu, rho * cos_c * cos_nu - y * sin_c * sin_nu));
  return out;
}

// Kernel tap pattern on the tangent plane. Defined as the forward-gnomonic
// image of the pixel lattice seen from a kernel centered on the equator:
//   x(j) = tan(j*delta),  y(i, j) = tan(i*delta) / cos(j*delta)
// with delta = 2*pi/W (one equator pixel pitch). On-axis taps sit at
// {-tan(delta), 0, tan(delta)}; corners carry the 1/cos(delta) factor that
// makes the re-projected kernel coincide with the planar 3x3 lattice exactly
// at latitude zero. Tap order is row-major over the pattern, north-west
// first.
struct TapPattern {
  int count = 0;
  std::array<double, 9> x{};
  std::array<double, 9> y{};
};

inline TapPattern conv_tap_pattern(double delta) {
  TapPattern p;
  p.count = 9;
  for (int kr = 0; kr < 3; ++kr) {
    for (int kc = 0; kc < 3; ++kc) {
      int i = 1 - kr;  // +1 = north
      int j = kc - 1;  // +1 = east
      int t = kr * 3 + kc;
      p.x[t] = std::tan(j * delta);
      p.y[t] = std::tan(i * delta) / std::cos(j * delta);
    }
  }
  return p;
}

// 2x2 pooling pattern anchored at the top-left pixel of each stride-2 block:
// taps cover {0, +1 row south} x {0, +1 col east}.
inline TapPattern pool_tap_pattern(double delta) {
  TapPattern p;
  p.count = 4;
  for (int kr = 0; kr < 2; ++kr) {
    for (int kc = 0; kc < 2; ++kc) {
      int t = kr * 2 + kc;
      p.x[t] = std::tan(kc * delta);
      p.y[t] = std::tan(-kr * delta) / std::cos(kc * delta);
    }
  }
  return p;
}

// Precomputed bilinear gather: 4 flat source indices + weights. Column
// indexing is periodic; a footprint row beyond the top/bottom edge reads the
// pole-reflected row (same latitude band on the antipodal meridian), so
// sampling is continuous across the poles.
struct BilinearFootprint {
  int32_t idx[4];
  double w[4];
};

// fractional (row, col) -> footprint. Valid rows are (-1, height); anything
// outside indicates a geometry bug upstream and is rejected.
inline BilinearFootprint compute_footprint(double row, double col, int height, int width) {
  if (!(row > -1.0 && row < static_cast<double>(height)))
    throw NumericError("bilinear sample row out of range");
  double r0f = std::floor(row);
  double c0f = std::floor(col);
  double ar = row - r0f;
  double ac = col - c0f;
  int64_t rows[2] = {static_cast<int64_t>(r0f), static_cast<int64_t>(r0f) + 1};
  int64_t cols[2] = {static_cast<int64_t>(c0f), static_cast<int64_t>(c0f) + 1};
  double rw[2] = {1.0 - ar, ar};
  double cw[2] = {1.0 - ac, ac};
  BilinearFootprint f;
  int k = 0;
  for (int ri = 0; ri < 2; ++ri) {
    int64_t rr = rows[ri];
    int64_t shift = 0;
    if (rr < 0) {
      rr = -1 - rr;
      shift = width / 2;
    } else if (rr >= height) {
      rr = 2 * static_cast<int64_t>(height) - 1 - rr;
      shift = width / 2;
    }
    for (int ci = 0; ci < 2; ++ci) {
      int64_t cc = (cols[ci] + shift) % width;
      if (cc < 0) cc += width;
      f.idx[k] = static_cast<int32_t>(rr * width + cc);
      f.w[k] = rw[ri] * cw[ci];
      ++k;
    }
  }
  return f;
}

// Fractional (row, col) source coordinates for every tap of every output
// pixel of one spherical conv/pool layer, plus the precomputed bilinear
// footprints. Taps for output column j are the column-0 taps shifted by
// j*stride pixels (the tangent pattern does not depend on longitude); tap
// rows are identical across a row and column offsets agree to within one
// rounding of the shift-and-wrap arithmetic.
class SamplingGrid {
 public:
  int in_height = 0, in_width = 0;
  int out_height = 0, out_width = 0;
  int taps_per_pixel = 0;
  int stride = 1;
  // (out_h * out_w * taps) x 2, row-major, (row, col) pairs
  std::vector<double> coords;
  std::vector<BilinearFootprint> footprints;

  double coord_row(int64_t or_, int64_t oc, int64_t t) const {
    return coords[(((or_ * out_width) + oc) * taps_per_pixel + t) * 2];
  }
  double coord_col(int64_t or_, int64_t oc, int64_t t) const {
    return coords[(((or_ * out_width) + oc) * taps_per_pixel + t) * 2 + 1];
  }
  const BilinearFootprint* footprints_at(int64_t pixel) const {
    return &footprints[static_cast<size_t>(pixel) * taps_per_pixel];
  }
  int64_t out_pixels() const { return static_cast<int64_t>(out_height) * out_width; }
};

namespace detail {

// Column coordinate wrapped into [-0.5, in_width - 0.5).
inline double wrap_col(double c, int width) {
  double w = static_cast<double>(width);
  return c - w * std::floor((c + 0.5) / w);
}

inline SamplingGrid build_grid(int height, int width, const TapPattern& pattern, int stride,
                               int out_height, int out_width) {
  SamplingGrid g;
  g.in_height = height;
  g.in_width = width;
  g.out_height = out_height;
  g.out_width = out_width;
  g.taps_per_pixel = pattern.count;
  g.stride = stride;
  g.coords.resize(static_cast<size_t>(out_height) * out_width * pattern.count * 2);
  g.footprints.resize(static_cast<size_t>(out_height) * out_width * pattern.count);

  parallel_for(out_height, [&](int64_t r0, int64_t r1) {
    for (int64_t orow = r0; orow < r1; ++orow) {
      int64_t anchor_row = orow * stride;
      SphereCoord center = pixel_to_sphere(static_cast<double>(anchor_row), 0.0, height, width);
      // Taps for column 0; other columns are pixel-shifted copies.
      std::array<double, 9> trow, tcol;
      for (int t = 0; t < pattern.count; ++t) {
        if (pattern.x[t] == 0.0 && pattern.y[t] == 0.0) {
          trow[t] = static_cast<double>(anchor_row);  // exact center-tap identity
          tcol[t] = 0.0;
        } else {
          SphereCoord tap = gnomonic_inverse(center, pattern.x[t], pattern.y[t]);
          sphere_to_pixel(tap, height, width, &trow[t], &tcol[t]);
        }
      }
      for (int64_t ocol = 0; ocol < out_width; ++ocol) {
        for (int t = 0; t < pattern.count; ++t) {
          double rr = trow[t];
          double cc = detail::wrap_col(tcol[t] + static_cast<double>(ocol * stride), width);
          size_t base = ((static_cast<size_t>(orow) * out_width + ocol) * pattern.count + t);
          g.coords[base * 2] = rr;
          g.coords[base * 2 + 1] = cc;
          g.footprints[base] = compute_footprint(rr, cc, height, width);
        }
      }
    }
  });
  return g;
}

}  // namespace detail

// 3x3 spherical convolution grid, stride 1, output same size as input.
inline SamplingGrid build_conv_grid(int height, int width) {
  if (width != 2 * height)
    throw ConfigError("build_conv_grid: width must equal 2*height, got " +
                      std::to_string(width) + " vs " + std::to_string(height));
  if (height < 4) throw ConfigError("build_conv_grid: height must be >= 4");
  double delta = 2.0 * kPi / static_cast<double>(width);
  return detail::build_grid(height, width, conv_tap_pattern(delta), 1, height, width);
}

// 2x2 spherical max-pool grid, stride 2, halves both dimensions.
inline SamplingGrid build_pool_grid(int height, int width) {
  if (width != 2 * height)
    throw ConfigError("build_pool_grid: width must equal 2*height, got " +
                      std::to_string(width) + " vs " + std::to_string(height));
  if (height % 2 != 0 || width % 2 != 0)
    throw ConfigError("build_pool_grid: dimensions must be even");
  if (height < 4) throw ConfigError("build_pool_grid: height must be >= 4");
  double delta = 2.0 * kPi / static_cast<double>(width);
  return detail::build_grid(height, width, pool_tap_pattern(delta), 2, height / 2, width / 2);
}

// Per-pixel loss weights: cos(latitude) of the row, normalized to mean 1, so
// equator rows weigh more than pole rows and a uniform error field reduces to
// plain MSE. Values are constant along each row.
template <typename T>
inline Tensor<T> spherical_weights(int height, int width) {
  if (width != 2 * height)
    throw ConfigError("spherical_weights: width must equal 2*height");
  std::vector<double> roww(static_cast<size_t>(height));
  double sum = 0.0;
  for (int r = 0; r < height; ++r) {
    double lat = kPi / 2.0 - kPi * (r + 0.5) / static_cast<double>(height);
    roww[static_cast<size_t>(r)] = std::cos(lat);
    sum += roww[static_cast<size_t>(r)];
  }
  double mean = sum / static_cast<double>(height);
  Tensor<T> out({height, width});
  for (int r = 0; r < height; ++r) {
    T v = static_cast<T>(roww[static_cast<size_t>(r)] / mean);
    for (int c = 0; c < width; ++c) out(r, c) = v;
  }
  return out;
}

}  // namespace sgan
