#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "spheregan/common.hpp"

namespace sgan {

// Deterministic RNG with serializable state. The mt19937_64 output sequence
// is fully specified by the C++ standard; uniform/normal mappings are spelled
// out here (instead of std distributions, which are implementation-defined)
// so draws stay bit-reproducible across rebuilds and through checkpoints.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  // [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; the spare draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // [0, bound); bound > 0. Multiply-shift mapping, no rejection loop.
  uint64_t uniform_int(uint64_t bound) {
    return static_cast<uint64_t>((static_cast<unsigned __int128>(engine_()) * bound) >> 64);
  }

  template <typename V>
  void shuffle(std::vector<V>& v) {
    for (size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[static_cast<size_t>(uniform_int(i))]);
  }

  std::string serialize() const {
    std::ostringstream os;
    os << engine_ << ' ' << (has_spare_ ? 1 : 0);
    if (has_spare_) {
      char buf[48];
      std::snprintf(buf, sizeof buf, "%a", spare_);
      os << ' ' << buf;
    }
    return os.str();
  }

  static Rng deserialize(const std::string& s) {
    Rng r(0);
    std::istringstream is(s);
    is >> r.engine_;
    int flag = 0;
    is >> flag;
    if (!is) throw DataError("invalid rng state string");
    r.has_spare_ = flag != 0;
    if (r.has_spare_) {
      std::string hex;
      is >> hex;
      if (hex.empty()) throw DataError("invalid rng state string (missing spare)");
      r.spare_ = std::strtod(hex.c_str(), nullptr);
    }
    return r;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64 finalizer; used to derive independent substreams (per-epoch
// shuffles, per-video synthesis) from one master seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace sgan
