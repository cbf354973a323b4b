#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace wasr {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Propagates this node's grad into its parents' grads.
  std::function<void(const Node&)> backward;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Dense row-major double tensor with an optional gradient slot.
///
/// Tensor is a cheap handle; copies share the underlying node. Results of
/// differentiable operations record their parents while gradient recording
/// is enabled on the current thread and at least one input requires grad.
class Tensor {
 public:
  using BackwardFn = std::function<void(const detail::Node&)>;

  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int dim(int axis) const;
  std::int64_t numel() const;

  std::span<const double> data() const;
  /// Writable view; only legal on leaf tensors (parameters, buffers, inputs).
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Reverse-mode differentiation from this scalar. Gradients accumulate into
  /// every reachable leaf that requires grad; the recorded graph is released.
  void backward() const;

  /// Copy of the values with no graph attached.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

  /// Builds an operation result. Records `parents` and `fn` only when
  /// recording is enabled and some parent requires grad.
  static Tensor make_result(Shape shape, std::vector<double> data,
                            std::initializer_list<Tensor> parents, BackwardFn fn);
  static Tensor make_result(Shape shape, std::vector<double> data,
                            const std::vector<Tensor>& parents, BackwardFn fn);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace wasr
