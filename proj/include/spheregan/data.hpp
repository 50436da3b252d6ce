#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spheregan/geometry.hpp"
#include "spheregan/image_io.hpp"
#include "spheregan/metrics.hpp"
#include "spheregan/rng.hpp"
#include "spheregan/tensor.hpp"

namespace sgan {

namespace fs = std::filesystem;

// One video: RGB frames, ground-truth saliency maps and gaze fixations, all
// the same length and resolution.
//
// On-disk layout of a sequence directory:
//   <dir>/frames/NNNNNN.png     8-bit RGB
//   <dir>/saliency/NNNNNN.png   8-bit gray
//   <dir>/fixations/NNNNNN.csv  one "row,col" pair per line
struct VideoSequence {
  std::string id;
  int height = 0;
  int width = 0;
  std::vector<Tensor<float>> frames;    // 3 x H x W in [0,1]
  std::vector<Tensor<float>> saliency;  // H x W in [0,1]
  std::vector<FixationSet> fixations;

  size_t length() const { return frames.size(); }

  void validate() const {
    if (frames.size() != saliency.size() || frames.size() != fixations.size())
      throw DataError("sequence " + id + ": frame/saliency/fixation counts differ");
    for (size_t i = 0; i < frames.size(); ++i) {
      if (frames[i].rank() != 3 || frames[i].extent(0) != 3 || frames[i].extent(1) != height ||
          frames[i].extent(2) != width)
        throw DataError("sequence " + id + ": frame " + std::to_string(i) + " has wrong shape");
      if (saliency[i].rank() != 2 || saliency[i].extent(0) != height ||
          saliency[i].extent(1) != width)
        throw DataError("sequence " + id + ": saliency " + std::to_string(i) +
                        " has wrong shape");
      for (int64_t j = 0; j < saliency[i].size(); ++j)
        if (saliency[i][j] < 0.f)
          throw DataError("sequence " + id + ": negative saliency values");
      for (const auto& f : fixations[i])
        if (f.row < 0 || f.row >= height || f.col < 0 || f.col >= width)
          throw DataError("sequence " + id + ": fixation out of bounds in frame " +
                          std::to_string(i));
    }
  }
};

// One training sample: frame at t, ground-truth saliency at t-k as the hint
// input, saliency and fixations at t as targets.
struct TrainingPair {
  const VideoSequence* video = nullptr;
  int t = 0;
  int k = 0;

  const Tensor<float>& frame() const { return video->frames[static_cast<size_t>(t)]; }
  const Tensor<float>& sal_prev() const { return video->saliency[static_cast<size_t>(t - k)]; }
  const Tensor<float>& sal_target() const { return video->saliency[static_cast<size_t>(t)]; }
  const FixationSet& fixations() const { return video->fixations[static_cast<size_t>(t)]; }
};

inline std::vector<TrainingPair> make_pairs(const VideoSequence& seq, int k) {
  if (k < 1) throw ConfigError("make_pairs: k must be >= 1");
  std::vector<TrainingPair> out;
  for (int t = k; t < static_cast<int>(seq.length()); ++t) out.push_back({&seq, t, k});
  return out;
}

namespace detail {

inline std::string frame_name(int idx) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", idx);
  return buf;
}

inline FixationSet read_fixation_csv(const fs::path& path, int height, int width) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  FixationSet fix;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    int r = 0, c = 0;
    if (std::sscanf(line.c_str(), "%d,%d", &r, &c) != 2)
      throw DataError("bad fixation line " + std::to_string(lineno) + " in " + path.string());
    if (r < 0 || r >= height || c < 0 || c >= width)
      throw DataError("fixation out of bounds in " + path.string() + " line " +
                      std::to_string(lineno));
    fix.push_back({r, c});
  }
  return fix;
}

inline int count_frames(const fs::path& dir, const char* ext) {
  if (!fs::is_directory(dir)) throw IoError("missing directory " + dir.string());
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ext) ++n;
  return n;
}

}  // namespace detail

inline VideoSequence load_sequence(const std::string& dir, int expect_height, int expect_width) {
  fs::path root(dir);
  VideoSequence seq;
  seq.id = root.filename().string();
  seq.height = expect_height;
  seq.width = expect_width;
  int nf = detail::count_frames(root / "frames", ".png");
  int ns = detail::count_frames(root / "saliency", ".png");
  int nx = detail::count_frames(root / "fixations", ".csv");
  if (nf != ns || nf != nx)
    throw DataError("sequence " + seq.id + ": counts differ (frames=" + std::to_string(nf) +
                    ", saliency=" + std::to_string(ns) + ", fixations=" + std::to_string(nx) +
                    ")");
  if (nf == 0) throw DataError("sequence " + seq.id + ": empty");
  for (int i = 0; i < nf; ++i) {
    std::string name = detail::frame_name(i);
    fs::path fpath = root / "frames" / (name + ".png");
    fs::path spath = root / "saliency" / (name + ".png");
    fs::path xpath = root / "fixations" / (name + ".csv");
    for (const fs::path* p : {&fpath, &spath, &xpath})
      if (!fs::exists(*p)) throw DataError("missing file " + p->string());
    Image8 fi = read_png(fpath.string());
    Image8 si = read_png(spath.string());
    if (fi.channels != 3) throw DataError(fpath.string() + ": expected RGB");
    if (si.channels != 1) throw DataError(spath.string() + ": expected grayscale");
    if (fi.width != expect_width || fi.height != expect_height || si.width != expect_width ||
        si.height != expect_height)
      throw DataError("size mismatch in " + fpath.string() + " (expected " +
                      std::to_string(expect_width) + "x" + std::to_string(expect_height) + ")");
    seq.frames.push_back(rgb_to_tensor(fi));
    seq.saliency.push_back(gray_to_tensor(si));
    seq.fixations.push_back(detail::read_fixation_csv(xpath, expect_height, expect_width));
  }
  seq.validate();
  return seq;
}

inline void save_sequence(const std::string& dir, const VideoSequence& seq) {
  fs::path root(dir);
  fs::create_directories(root / "frames");
  fs::create_directories(root / "saliency");
  fs::create_directories(root / "fixations");
  for (size_t i = 0; i < seq.length(); ++i) {
    std::string name = detail::frame_name(static_cast<int>(i));
    write_png_rgb((root / "frames" / (name + ".png")).string(), seq.frames[i]);
    write_png_gray((root / "saliency" / (name + ".png")).string(), seq.saliency[i]);
    std::ofstream out(root / "fixations" / (name + ".csv"));
    if (!out) throw IoError("cannot write fixation csv in " + dir);
    for (const auto& f : seq.fixations[i]) out << f.row << ',' << f.col << '\n';
  }
}

// Dataset root = one directory per video plus dataset.json.
inline std::vector<VideoSequence> load_dataset(const std::string& root_dir) {
  fs::path root(root_dir);
  fs::path manifest = root / "dataset.json";
  if (!fs::exists(manifest)) throw IoError("missing dataset manifest " + manifest.string());
  std::ifstream in(manifest);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid dataset.json: " + std::string(e.what()));
  }
  std::vector<VideoSequence> out;
  for (const auto& v : j.at("videos")) {
    std::string id = v.at("id").get<std::string>();
    int h = v.at("height").get<int>();
    int w = v.at("width").get<int>();
    VideoSequence seq = load_sequence((root / id).string(), h, w);
    if (static_cast<int>(seq.length()) != v.at("frames").get<int>())
      throw DataError("sequence " + id + ": frame count differs from manifest");
    out.push_back(std::move(seq));
  }
  if (out.empty()) throw DataError("dataset has no videos");
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthConfig {
  int num_videos = 4;
  int frames_per_video = 20;
  int height = 64;
  uint64_t seed = 1;
  int fixations_per_frame = 15;
  double sigma_deg = 12.0;  // saliency blob width, degrees of arc
};

namespace detail {

struct Vec3 {
  double x, y, z;
};
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 normalize(const Vec3& v) {
  double n = std::sqrt(dot(v, v));
  return {v.x / n, v.y / n, v.z / n};
}
inline Vec3 sphere_dir(const SphereCoord& s) {
  return {std::cos(s.lat) * std::cos(s.lon), std::cos(s.lat) * std::sin(s.lon), std::sin(s.lat)};
}
inline Vec3 random_unit(Rng& rng) {
  while (true) {
    Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    double n = dot(v, v);
    if (n > 1e-12) return normalize(v);
  }
}

struct Harmonic {
  Vec3 dir;
  double freq, phase, amp;
};

}  // namespace detail

// A bright disk target riding a random great circle over a smooth textured
// background, rendered in ERP. Ground-truth saliency is a peak-normalized
// spherical Gaussian in geodesic distance around the target (so pole
// crossings produce the correct ERP-distorted blobs); fixations are sampled
// from the saliency distribution. Fully deterministic given the seed.
inline VideoSequence synth_sequence(const SynthConfig& cfg, int video_index) {
  const int h = cfg.height, w = 2 * cfg.height;
  Rng rng(mix_seed(cfg.seed, static_cast<uint64_t>(video_index)));
  VideoSequence seq;
  char idbuf[32];
  std::snprintf(idbuf, sizeof idbuf, "video_%03d", video_index);
  seq.id = idbuf;
  seq.height = h;
  seq.width = w;

  // smooth background texture per channel, built from spherical harmonics of
  // random direction so it is continuous across the seam and the poles
  std::array<std::vector<detail::Harmonic>, 3> tex;
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < 4; ++k) {
      detail::Harmonic hm;
      hm.dir = detail::random_unit(rng);
      hm.freq = 1.0 + 3.0 * rng.uniform();
      hm.phase = 2.0 * kPi * rng.uniform();
      hm.amp = 0.04 + 0.08 * rng.uniform();
      tex[static_cast<size_t>(c)].push_back(hm);
    }
  }
  std::array<double, 3> base{0.35 + 0.2 * rng.uniform(), 0.35 + 0.2 * rng.uniform(),
                             0.35 + 0.2 * rng.uniform()};
  std::array<double, 3> disk_color{0.75 + 0.25 * rng.uniform(), 0.75 + 0.25 * rng.uniform(),
                                   0.75 + 0.25 * rng.uniform()};

  // great-circle motion
  detail::Vec3 axis = detail::random_unit(rng);
  detail::Vec3 ref = std::abs(axis.z) < 0.9 ? detail::Vec3{0, 0, 1} : detail::Vec3{1, 0, 0};
  detail::Vec3 u = detail::normalize(detail::cross(axis, ref));
  detail::Vec3 v = detail::cross(axis, u);
  double phase0 = 2.0 * kPi * rng.uniform();
  double revs = 0.2 + 0.4 * rng.uniform();
  double omega = 2.0 * kPi * revs / static_cast<double>(cfg.frames_per_video);

  const double sigma = cfg.sigma_deg * kPi / 180.0;
  const double disk_r = 10.0 * kPi / 180.0;

  // per-pixel directions
  std::vector<detail::Vec3> dirs(static_cast<size_t>(h) * w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      dirs[static_cast<size_t>(r) * w + c] = detail::sphere_dir(pixel_to_sphere(r, c, h, w));

  for (int t = 0; t < cfg.frames_per_video; ++t) {
    double a = phase0 + omega * t;
    detail::Vec3 target{u.x * std::cos(a) + v.x * std::sin(a), u.y * std::cos(a) + v.y * std::sin(a),
                        u.z * std::cos(a) + v.z * std::sin(a)};
    Tensor<float> frame({3, h, w});
    Tensor<float> sal({h, w});
    for (int64_t p = 0; p < static_cast<int64_t>(dirs.size()); ++p) {
      const detail::Vec3& d = dirs[static_cast<size_t>(p)];
      double cosg = std::max(-1.0, std::min(1.0, detail::dot(d, target)));
      double geo = std::acos(cosg);
      double g = std::exp(-0.5 * (geo / sigma) * (geo / sigma));
      sal[p] = static_cast<float>(g);
      double mix = geo <= disk_r ? 1.0 : std::max(0.0, 1.0 - (geo - disk_r) / (0.3 * disk_r));
      for (int c = 0; c < 3; ++c) {
        double b = base[static_cast<size_t>(c)];
        for (const auto& hm : tex[static_cast<size_t>(c)])
          b += hm.amp * std::sin(hm.freq * 3.0 * detail::dot(hm.dir, d) + hm.phase);
        double val = b * (1.0 - mix) + disk_color[static_cast<size_t>(c)] * mix;
        frame[c * h * w + p] = static_cast<float>(std::max(0.0, std::min(1.0, val)));
      }
    }
    // peak-normalize so the target-center pixel is exactly 1
    double sal_max = 0.0;
    for (int64_t p = 0; p < sal.size(); ++p) sal_max = std::max(sal_max, static_cast<double>(sal[p]));
    for (int64_t p = 0; p < sal.size(); ++p)
      sal[p] = static_cast<float>(static_cast<double>(sal[p]) / sal_max);

    // fixations sampled from the (normalized) saliency distribution
    std::vector<double> cdf(static_cast<size_t>(sal.size()));
    double acc = 0.0;
    for (int64_t p = 0; p < sal.size(); ++p) {
      acc += sal[p];
      cdf[static_cast<size_t>(p)] = acc;
    }
    FixationSet fix;
    for (int i = 0; i < cfg.fixations_per_frame; ++i) {
      double uq = rng.uniform() * acc;
      auto it = std::lower_bound(cdf.begin(), cdf.end(), uq);
      int64_t p = it == cdf.end() ? sal.size() - 1 : static_cast<int64_t>(it - cdf.begin());
      fix.push_back({static_cast<int>(p / w), static_cast<int>(p % w)});
    }
    seq.frames.push_back(std::move(frame));
    seq.saliency.push_back(std::move(sal));
    seq.fixations.push_back(std::move(fix));
  }
  seq.validate();
  return seq;
}

// Writes num_videos synthetic sequences plus dataset.json under out_dir.
inline nlohmann::ordered_json synth_generate(const SynthConfig& cfg, const std::string& out_dir) {
  if (cfg.num_videos < 1 || cfg.frames_per_video < 1)
    throw ConfigError("synth_generate: need at least one video and one frame");
  if (cfg.height % 8 != 0 || cfg.height < 8)
    throw ConfigError("synth_generate: height must be a positive multiple of 8");
  fs::create_directories(out_dir);
  nlohmann::ordered_json manifest;
  manifest["format_version"] = 1;
  manifest["seed"] = cfg.seed;
  nlohmann::ordered_json videos = nlohmann::ordered_json::array();
  for (int v = 0; v < cfg.num_videos; ++v) {
    VideoSequence seq = synth_sequence(cfg, v);
    save_sequence((fs::path(out_dir) / seq.id).string(), seq);
    nlohmann::ordered_json entry;
    entry["id"] = seq.id;
    entry["frames"] = cfg.frames_per_video;
    entry["height"] = seq.height;
    entry["width"] = seq.width;
    videos.push_back(std::move(entry));
  }
  manifest["videos"] = std::move(videos);
  std::ofstream out(fs::path(out_dir) / "dataset.json");
  if (!out) throw IoError("cannot write dataset.json in " + out_dir);
  out << manifest.dump(2) << '\n';
  return manifest;
}

}  // namespace sgan
