#pragma once

#include <cstdint>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace exitnet {

/// Dense n-dimensional tensor of 64-bit reals with an optional gradient slot.
///
/// Copies are shallow (shared buffer); values are treated as immutable once a
/// tensor has entered a computation, the grad slot is the only mutable part.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape, bool requires_grad = false)
      : impl_(std::make_shared<Impl>()) {
    impl_->shape = std::move(shape);
    impl_->data.assign(check_shape(impl_->shape), 0.0);
    impl_->requires_grad = requires_grad;
  }

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    return Tensor(std::move(shape), requires_grad);
  }

  static Tensor from(std::vector<int> shape, std::vector<double> values,
                     bool requires_grad = false) {
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    std::size_t n = check_shape(shape);
    if (values.size() != n)
      throw std::invalid_argument("Tensor::from: data length " +
                                  std::to_string(values.size()) +
                                  " does not match shape product " +
                                  std::to_string(n));
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::move(values);
    t.impl_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(double v) { return from({1}, {v}); }

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int i) const { return impl_->shape.at(static_cast<std::size_t>(i)); }
  int size() const { return static_cast<int>(impl_->data.size()); }

  double* data() { return impl_->data.data(); }
  const double* data() const { return impl_->data.data(); }
  const std::vector<double>& values() const { return impl_->data; }

  /// Value of a one-element tensor.
  double item() const {
    if (size() != 1)
      throw std::invalid_argument("Tensor::item: tensor is not scalar");
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }

  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient buffer, allocated (zeroed) on first access.
  std::vector<double>& grad() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
    return impl_->grad;
  }
  const std::vector<double>& grad() const {
    if (impl_->grad.empty())
      throw std::logic_error("Tensor::grad: gradient not populated");
    return impl_->grad;
  }
  void zero_grad() { impl_->grad.clear(); }

  /// Stable identity used by the tape to recognize tensors across ops.
  const void* id() const { return impl_.get(); }

  /// Deep copy of the values into a fresh buffer (grad not copied).
  Tensor clone() const {
    return from(impl_->shape, impl_->data, impl_->requires_grad);
  }

 private:
  struct Impl {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until needed
    bool requires_grad = false;
  };

  static std::size_t check_shape(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw std::invalid_argument("Tensor: nonpositive dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::shared_ptr<Impl> impl_;
};

}  // namespace exitnet
