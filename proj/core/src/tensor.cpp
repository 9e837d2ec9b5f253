#include "mmvm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mmvm/error.hpp"

namespace mmvm::diff {

using detail::TensorImpl;

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << '[' << s.rows << ", " << s.cols << ']';
  return os.str();
}

Tensor make_tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape.rows == 0 || shape.cols == 0) {
    throw ConformanceError("tensor shape must be positive, got " + to_string(shape));
  }
  if (data.size() != shape.size()) {
    throw ConformanceError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + to_string(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->value = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return make_tensor({rows, cols}, std::vector<double>(rows * cols, 0.0), requires_grad);
}

Tensor Tensor::filled(std::size_t rows, std::size_t cols, double v, bool requires_grad) {
  return make_tensor({rows, cols}, std::vector<double>(rows * cols, v), requires_grad);
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> data,
                    bool requires_grad) {
  return make_tensor({rows, cols}, std::move(data), requires_grad);
}

Tensor Tensor::row(std::vector<double> data, bool requires_grad) {
  const std::size_t n = data.size();
  return make_tensor({1, n}, std::move(data), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return make_tensor({1, 1}, {v}, requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on non-scalar tensor " + to_string(shape()));
  return impl_->value[0];
}

std::span<const double> Tensor::grad() const {
  impl_->ensure_grad();
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() {
  impl_->ensure_grad();
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.assign(impl_->value.size(), 0.0); }

Tensor Tensor::detach() const { return make_tensor(shape(), impl_->value, false); }

Tensor Tensor::clone() const { return make_tensor(shape(), impl_->value, impl_->requires_grad); }

// ---------------------------------------------------------------------------
// Tape

Tape& Tape::current() {
  thread_local Tape tape;
  return tape;
}

void Tape::record(std::vector<Tensor> inputs, const Tensor& output, Backward backward) {
  Node node;
  node.inputs.reserve(inputs.size());
  for (auto& t : inputs) node.inputs.push_back(t.handle());
  node.output = output.handle();
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() requires a scalar loss");
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward() loss is not connected to any tensor requiring gradients");
  }
  for (auto& node : nodes_) {
    node.output->grad.assign(node.output->value.size(), 0.0);
    for (auto& in : node.inputs) {
      if (in->requires_grad) in->grad.assign(in->value.size(), 0.0);
    }
  }
  loss.impl().ensure_grad();
  loss.impl().grad[0] = 1.0;

  std::vector<TensorImpl*> raw;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto& out = *it->output;
    if (std::all_of(out.grad.begin(), out.grad.end(), [](double g) { return g == 0.0; })) {
      continue;
    }
    raw.clear();
    for (auto& in : it->inputs) raw.push_back(in.get());
    it->backward(out, raw);
  }
}

NoGradGuard::NoGradGuard() : previous_(Tape::current().enabled_) {
  Tape::current().enabled_ = false;
}

NoGradGuard::~NoGradGuard() { Tape::current().enabled_ = previous_; }

void backward(const Tensor& loss) { Tape::current().backward(loss); }

std::vector<std::vector<double>> gradients(const Tensor& loss, std::span<const Tensor> leaves) {
  for (const auto& leaf : leaves) leaf.impl().grad.assign(leaf.size(), 0.0);
  backward(loss);
  std::vector<std::vector<double>> out;
  out.reserve(leaves.size());
  for (const auto& leaf : leaves) {
    auto g = leaf.grad();
    out.emplace_back(g.begin(), g.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Primitives

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ConformanceError(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                           " vs " + to_string(b.shape()));
  }
}

// Records when recording is enabled and any input requires grad.
Tensor finish(std::vector<Tensor> inputs, Shape shape, std::vector<double> value,
              Tape::Backward bw) {
  bool needs = false;
  if (Tape::current().recording()) {
    for (const auto& t : inputs) needs = needs || t.requires_grad();
  }
  Tensor out = make_tensor(shape, std::move(value), needs);
  if (needs) Tape::current().record(std::move(inputs), out, std::move(bw));
  return out;
}

void accumulate(TensorImpl* in, std::size_t i, double g) {
  if (in->requires_grad) {
    in->ensure_grad();
    in->grad[i] += g;
  }
}

template <typename F, typename DF>
Tensor unary(const Tensor& a, F f, DF df) {
  std::vector<double> v(a.size());
  auto x = a.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(x[i]);
  return finish({a}, a.shape(), std::move(v), [df](TensorImpl& out, std::span<TensorImpl* const> in) {
    TensorImpl* a = in[0];
    if (!a->requires_grad) return;
    a->ensure_grad();
    for (std::size_t i = 0; i < out.value.size(); ++i) {
      a->grad[i] += out.grad[i] * df(a->value[i], out.value[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] + b.data()[i];
  return finish({a, b}, a.shape(), std::move(v), [](TensorImpl& out, std::span<TensorImpl* const> in) {
    for (std::size_t i = 0; i < out.value.size(); ++i) {
      accumulate(in[0], i, out.grad[i]);
      accumulate(in[1], i, out.grad[i]);
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] - b.data()[i];
  return finish({a, b}, a.shape(), std::move(v), [](TensorImpl& out, std::span<TensorImpl* const> in) {
    for (std::size_t i = 0; i < out.value.size(); ++i) {
      accumulate(in[0], i, out.grad[i]);
      accumulate(in[1], i, -out.grad[i]);
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] * b.data()[i];
  return finish({a, b}, a.shape(), std::move(v), [](TensorImpl& out, std::span<TensorImpl* const> in) {
    for (std::size_t i = 0; i < out.value.size(); ++i) {
      accumulate(in[0], i, out.grad[i] * in[1]->value[i]);
      accumulate(in[1], i, out.grad[i] * in[0]->value[i]);
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape("div", a, b);
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = b.data()[i];
    if (d == 0.0) throw DomainError("div: zero divisor at index " + std::to_string(i));
    v[i] = a.data()[i] / d;
  }
  return finish({a, b}, a.shape(), std::move(v), [](TensorImpl& out, std::span<TensorImpl* const> in) {
    for (std::size_t i = 0; i < out.value.size(); ++i) {
      const double d = in[1]->value[i];
      accumulate(in[0], i, out.grad[i] / d);
      accumulate(in[1], i, -out.grad[i] * out.value[i] / d);
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  return unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor shift(const Tensor& a, double c) {
  return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ConformanceError("matmul: inner dimensions differ " + to_string(a.shape()) + " x " +
                           to_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> v(m * n, 0.0);
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* out_row = v.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* b_row = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) out_row[j] += aip * b_row[j];
    }
  }
  return finish({a, b}, {m, n}, std::move(v),
                [m, k, n](TensorImpl& out, std::span<TensorImpl* const> in) {
                  TensorImpl* a = in[0];
                  TensorImpl* b = in[1];
                  const double* G = out.grad.data();
                  if (a->requires_grad) {
                    a->ensure_grad();
                    // dA = G * B^T
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t p = 0; p < k; ++p) {
                        const double* b_row = b->value.data() + p * n;
                        const double* g_row = G + i * n;
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) acc += g_row[j] * b_row[j];
                        a->grad[i * k + p] += acc;
                      }
                    }
                  }
                  if (b->requires_grad) {
                    b->ensure_grad();
                    // dB = A^T * G
                    for (std::size_t i = 0; i < m; ++i) {
                      const double* g_row = G + i * n;
                      for (std::size_t p = 0; p < k; ++p) {
                        const double aip = a->value[i * k + p];
                        if (aip == 0.0) continue;
                        double* gb_row = b->grad.data() + p * n;
                        for (std::size_t j = 0; j < n; ++j) gb_row[j] += aip * g_row[j];
                      }
                    }
                  }
                });
}

Tensor exp(const Tensor& a) {
  auto x = a.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || x[i] > 709.0) {
      throw DomainError("exp: argument " + std::to_string(x[i]) + " out of range at index " +
                        std::to_string(i));
    }
  }
  return unary(a, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  auto x = a.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !std::isfinite(x[i])) {
      throw DomainError("log: non-positive argument " + std::to_string(x[i]) + " at index " +
                        std::to_string(i));
    }
  }
  return unary(a, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a, [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
      [](double v, double) {
        // logistic sigmoid, evaluated without overflow
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(a, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  return finish({a}, {1, 1}, {s}, [](TensorImpl& out, std::span<TensorImpl* const> in) {
    if (!in[0]->requires_grad) return;
    in[0]->ensure_grad();
    for (double& g : in[0]->grad) g += out.grad[0];
  });
}

Tensor sum_axis(const Tensor& a, int axis) {
  const std::size_t r = a.rows(), c = a.cols();
  auto x = a.data();
  if (axis == 0) {
    std::vector<double> v(c, 0.0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) v[j] += x[i * c + j];
    return finish({a}, {1, c}, std::move(v), [r, c](TensorImpl& out, std::span<TensorImpl* const> in) {
      if (!in[0]->requires_grad) return;
      in[0]->ensure_grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) in[0]->grad[i * c + j] += out.grad[j];
    });
  }
  if (axis == 1) {
    std::vector<double> v(r, 0.0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) v[i] += x[i * c + j];
    return finish({a}, {r, 1}, std::move(v), [r, c](TensorImpl& out, std::span<TensorImpl* const> in) {
      if (!in[0]->requires_grad) return;
      in[0]->ensure_grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) in[0]->grad[i * c + j] += out.grad[i];
    });
  }
  throw ConformanceError("sum_axis: axis must be 0 or 1, got " + std::to_string(axis));
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.size());
  double s = 0.0;
  for (double x : a.data()) s += x;
  return finish({a}, {1, 1}, {s / n}, [n](TensorImpl& out, std::span<TensorImpl* const> in) {
    if (!in[0]->requires_grad) return;
    in[0]->ensure_grad();
    for (double& g : in[0]->grad) g += out.grad[0] / n;
  });
}

Tensor broadcast_to(const Tensor& a, std::size_t rows, std::size_t cols) {
  const std::size_t r = a.rows(), c = a.cols();
  const bool rows_ok = r == rows || r == 1;
  const bool cols_ok = c == cols || c == 1;
  if (!rows_ok || !cols_ok) {
    throw ConformanceError("broadcast_to: cannot expand " + to_string(a.shape()) + " to " +
                           to_string(Shape{rows, cols}));
  }
  std::vector<double> v(rows * cols);
  auto x = a.data();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      v[i * cols + j] = x[(r == 1 ? 0 : i) * c + (c == 1 ? 0 : j)];
  return finish({a}, {rows, cols}, std::move(v),
                [r, c, rows, cols](TensorImpl& out, std::span<TensorImpl* const> in) {
                  if (!in[0]->requires_grad) return;
                  in[0]->ensure_grad();
                  for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cols; ++j)
                      in[0]->grad[(r == 1 ? 0 : i) * c + (c == 1 ? 0 : j)] +=
                          out.grad[i * cols + j];
                });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ConformanceError("concat_cols: no inputs");
  const std::size_t r = parts.front().rows();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) {
      throw ConformanceError("concat_cols: row mismatch " + to_string(parts.front().shape()) +
                             " vs " + to_string(p.shape()));
    }
    offsets.push_back(total);
    total += p.cols();
  }
  std::vector<double> v(r * total);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto x = parts[k].data();
    const std::size_t c = parts[k].cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) v[i * total + offsets[k] + j] = x[i * c + j];
  }
  return finish(std::vector<Tensor>(parts.begin(), parts.end()), {r, total}, std::move(v),
                [r, total, offsets](TensorImpl& out, std::span<TensorImpl* const> in) {
                  for (std::size_t k = 0; k < in.size(); ++k) {
                    TensorImpl* p = in[k];
                    if (!p->requires_grad) continue;
                    p->ensure_grad();
                    const std::size_t c = p->shape.cols;
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < c; ++j)
                        p->grad[i * c + j] += out.grad[i * total + offsets[k] + j];
                  }
                });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin >= end || end > a.cols()) {
    throw ConformanceError("slice_cols: range [" + std::to_string(begin) + ", " +
                           std::to_string(end) + ") invalid for " + to_string(a.shape()));
  }
  const std::size_t r = a.rows(), c = a.cols(), w = end - begin;
  std::vector<double> v(r * w);
  auto x = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) v[i * w + j] = x[i * c + begin + j];
  return finish({a}, {r, w}, std::move(v),
                [r, c, w, begin](TensorImpl& out, std::span<TensorImpl* const> in) {
                  if (!in[0]->requires_grad) return;
                  in[0]->ensure_grad();
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < w; ++j)
                      in[0]->grad[i * c + begin + j] += out.grad[i * w + j];
                });
}

// ---------------------------------------------------------------------------
// Composites

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor square(const Tensor& a) { return mul(a, a); }

Tensor logsumexp_cols(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> row_max(r, -std::numeric_limits<double>::infinity());
  auto x = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) row_max[i] = std::max(row_max[i], x[i * c + j]);
  // The shift is a constant: its gradient contributions cancel exactly.
  Tensor m = Tensor::from(r, 1, std::move(row_max));
  Tensor shifted = sub(a, broadcast_to(m, r, c));
  return add(log(sum_axis(exp(shifted), 1)), m);
}

}  // namespace mmvm::diff
