#pragma once

// Dense rank-2 tensors with a per-thread reverse-mode tape.
//
// Every tensor is a rows x cols matrix of doubles; scalars are 1x1 and
// vectors are 1xd. Operations whose inputs require gradients are appended to
// the calling thread's tape. backward() replays the tape in reverse.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mmvm::diff {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a backward pass touches it
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor filled(std::size_t rows, std::size_t cols, double v, bool requires_grad = false);
  static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor row(std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rows() const { return impl_->shape.rows; }
  std::size_t cols() const { return impl_->shape.cols; }
  std::size_t size() const { return impl_->value.size(); }

  std::span<const double> data() const { return impl_->value; }
  std::span<double> mutable_data() { return impl_->value; }
  double at(std::size_t r, std::size_t c) const { return impl_->value[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }

  /// Gradient buffer; all zeros when no backward pass has reached this tensor.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Copy of the values with no tape connection.
  Tensor detach() const;

  /// Deep copy that keeps requires_grad.
  Tensor clone() const;

  bool same_as(const Tensor& other) const { return impl_ == other.impl_; }

  detail::TensorImpl& impl() const { return *impl_; }
  const std::shared_ptr<detail::TensorImpl>& handle() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_tensor(Shape, std::vector<double>, bool);

  std::shared_ptr<detail::TensorImpl> impl_;
};

Tensor make_tensor(Shape shape, std::vector<double> data, bool requires_grad);

/// Recorded primitive applications of one thread, in execution order.
class Tape {
 public:
  using Backward = std::function<void(detail::TensorImpl& out,
                                      std::span<detail::TensorImpl* const> inputs)>;

  struct Node {
    std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
    std::shared_ptr<detail::TensorImpl> output;
    Backward backward;
  };

  static Tape& current();

  void record(std::vector<Tensor> inputs, const Tensor& output, Backward backward);
  void reset() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return enabled_; }

  /// Propagates d(loss)/d(x) into every tensor reachable from loss.
  void backward(const Tensor& loss);

 private:
  friend class NoGradGuard;
  std::vector<Node> nodes_;
  bool enabled_ = true;
};

/// Disables recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Clears the thread's tape on entry and exit.
class TapeScope {
 public:
  TapeScope() { Tape::current().reset(); }
  ~TapeScope() { Tape::current().reset(); }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;
};

void backward(const Tensor& loss);

/// Runs backward and returns d(loss)/d(leaf) for each leaf. Leaves that do not
/// participate in the loss come back as all zeros.
std::vector<std::vector<double>> gradients(const Tensor& loss, std::span<const Tensor> leaves);

// Primitives. Binary elementwise ops require identical shapes; use
// broadcast_to to expand rows or columns first.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor shift(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor sum(const Tensor& a);
/// axis 0 reduces rows to [1, cols]; axis 1 reduces columns to [rows, 1].
Tensor sum_axis(const Tensor& a, int axis);
Tensor mean(const Tensor& a);
Tensor broadcast_to(const Tensor& a, std::size_t rows, std::size_t cols);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);

// Composites built from the primitives above.
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);
/// Row-wise log-sum-exp of a [rows, k] tensor, giving [rows, 1].
Tensor logsumexp_cols(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }

}  // namespace mmvm::diff
