#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mmvm/tensor.hpp"

namespace mmvm::diff {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

using ScalarFn = std::function<Tensor(std::span<const Tensor>)>;

/// Compares backward() gradients of f at `point` against central differences.
///
/// The error of one coordinate is |analytic - numeric| / max(1, |analytic|,
/// |numeric|), so it is relative for large gradients and absolute near zero.
/// The check passes when the maximum error is strictly below `tolerance`.
/// f is re-evaluated on fresh tapes; the tensors in `point` are perturbed in
/// place and restored. Throws DomainError when f is non-finite near point.
GradCheckReport finite_diff_check(const ScalarFn& f, std::span<Tensor> point, double tolerance,
                                  double step = 1e-5);

}  // namespace mmvm::diff
