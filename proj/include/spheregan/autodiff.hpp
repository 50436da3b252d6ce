#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "spheregan/tensor.hpp"

namespace sgan {

// One value in the computation graph. Gradients are allocated lazily and
// accumulate with +=, so a Var may feed several consumers.
template <typename T>
struct Var {
  Tensor<T> value;
  Tensor<T> grad;

  explicit Var(Tensor<T> v) : value(std::move(v)) {}

  Tensor<T>& ensure_grad() {
    if (grad.size() != value.size()) grad = Tensor<T>::zeros(value.shape());
    return grad;
  }
  void zero_grad() {
    if (grad.size() == value.size())
      grad.fill(T(0));
    else
      grad = Tensor<T>::zeros(value.shape());
  }
};

// Reverse-mode tape for the fixed op set. Ops append their output Var and a
// backward closure in forward order; backward() replays the closures in
// reverse. Creation order is the topological order because graphs are built
// by straight-line forward code.
template <typename T>
class Tape {
 public:
  Var<T>* make(Tensor<T> value) {
    vars_.push_back(std::make_unique<Var<T>>(std::move(value)));
    return vars_.back().get();
  }

  void record(std::function<void()> back) { backs_.push_back(std::move(back)); }

  // out must be scalar (size 1).
  void backward(Var<T>* out) {
    if (out->value.size() != 1) throw NumericError("backward: output is not a scalar");
    out->ensure_grad();
    out->grad[0] = T(1);
    for (auto it = backs_.rbegin(); it != backs_.rend(); ++it) (*it)();
  }

  size_t num_nodes() const { return vars_.size(); }

 private:
  std::vector<std::unique_ptr<Var<T>>> vars_;
  std::vector<std::function<void()>> backs_;
};

}  // namespace sgan
