#include "mmvm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mmvm/error.hpp"

namespace mmvm::diff {

namespace {

double eval_value(const ScalarFn& f, std::span<Tensor> point) {
  NoGradGuard guard;
  const double v = f(point).item();
  if (!std::isfinite(v)) throw DomainError("finite_diff_check: f is not finite near point");
  return v;
}

}  // namespace

GradCheckReport finite_diff_check(const ScalarFn& f, std::span<Tensor> point, double tolerance,
                                  double step) {
  std::vector<std::vector<double>> analytic;
  {
    TapeScope scope;
    for (auto& p : point) p.set_requires_grad(true);
    Tensor loss = f(point);
    if (!std::isfinite(loss.item())) {
      throw DomainError("finite_diff_check: f is not finite at point");
    }
    analytic = gradients(loss, point);
  }

  GradCheckReport report;
  for (std::size_t k = 0; k < point.size(); ++k) {
    auto data = point[k].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + step;
      const double up = eval_value(f, point);
      data[i] = orig - step;
      const double down = eval_value(f, point);
      data[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[k][i];
      const double err =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      ++report.checked;
      if (err > report.max_rel_error || report.checked == 1) {
        report.max_rel_error = err;
        report.worst_param = k;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace mmvm::diff
