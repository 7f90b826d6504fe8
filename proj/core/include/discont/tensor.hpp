#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace discont {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
struct TensorImpl;
}

/// Dense row-major float32 array with an optional gradient slot.
///
/// A Tensor is a cheap handle: copies share storage. Operations in ops.hpp
/// record a backward closure on their result whenever gradient recording is
/// enabled and at least one input requires a gradient; `backward()` on a
/// scalar result then walks that graph in reverse topological order.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<float> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor scalar(float value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<float> values();
  std::span<const float> values() const;
  float item() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const float> grad() const;
  // Allocates a zero-filled slot on first use.
  std::span<float> mutable_grad();
  void zero_grad();
  void clear_grad();

  // Same values, fresh storage, no graph history.
  Tensor clone() const;
  // Alias of clone() that reads better when the point is cutting the graph.
  Tensor detach() const { return clone(); }

  // Reverse-mode sweep from this scalar. Gradients accumulate into every
  // reachable tensor that requires one.
  void backward() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

bool grad_enabled();

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool all_finite(std::span<const float> values);

}  // namespace discont
