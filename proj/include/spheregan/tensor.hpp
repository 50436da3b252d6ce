#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spheregan/common.hpp"

namespace sgan {

inline std::string shape_to_string(const std::vector<int64_t>& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

// Dense row-major N-d array. Production paths use float (32-bit storage and
// arithmetic); gradient-verification tests instantiate double.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape, T value = T(0))
      : shape_(std::move(shape)), data_(checked_size(shape_), value) {}

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int64_t> shape, T value) {
    return Tensor(std::move(shape), value);
  }

  const std::vector<int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t extent(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  T& operator()(int64_t i) {
    assert(rank() == 1);
    return data_[static_cast<size_t>(i)];
  }
  const T& operator()(int64_t i) const {
    assert(rank() == 1);
    return data_[static_cast<size_t>(i)];
  }
  T& operator()(int64_t i, int64_t j) {
    assert(rank() == 2);
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }
  const T& operator()(int64_t i, int64_t j) const {
    assert(rank() == 2);
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }
  T& operator()(int64_t i, int64_t j, int64_t k) {
    assert(rank() == 3);
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  const T& operator()(int64_t i, int64_t j, int64_t k) const {
    assert(rank() == 3);
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  T& operator()(int64_t i, int64_t j, int64_t k, int64_t l) {
    assert(rank() == 4);
    return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }
  const T& operator()(int64_t i, int64_t j, int64_t k, int64_t l) const {
    assert(rank() == 4);
    return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  // Same element count, new shape metadata (data is copied).
  Tensor reshaped(std::vector<int64_t> s) const {
    Tensor out;
    out.shape_ = std::move(s);
    if (checked_size(out.shape_) != size())
      throw DataError("reshape size mismatch: " + shape_to_string(shape_) + " -> " +
                      shape_to_string(out.shape_));
    out.data_ = data_;
    return out;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (int64_t i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

 private:
  static int64_t checked_size(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t e : shape) {
      if (e < 0) throw DataError("negative tensor extent");
      n *= e;
    }
    return n;
  }

  std::vector<int64_t> shape_;
  std::vector<T> data_;
};

template <typename T>
inline bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape();
}

template <typename T>
inline void check_finite(const Tensor<T>& t, const char* what) {
  if (!debug_checks()) return;
  if (!t.all_finite()) throw NumericError(std::string("non-finite values after ") + what);
}

}  // namespace sgan
