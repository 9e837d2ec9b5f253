#include "mmvm/gaussians.hpp"

#include <cmath>
#include <numbers>

#include "mmvm/error.hpp"

namespace mmvm::gauss {

using diff::Tensor;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // ln(2 pi)

void check_finite(const char* what, const Tensor& t) {
  auto x = t.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      throw DomainError(std::string(what) + " has a non-finite entry at index " +
                        std::to_string(i));
    }
  }
}

void check_same(const char* op, const DiagGaussian& a, const DiagGaussian& b) {
  if (a.mean.shape() != b.mean.shape()) {
    throw ConformanceError(std::string(op) + ": dimension mismatch " +
                           diff::to_string(a.mean.shape()) + " vs " +
                           diff::to_string(b.mean.shape()));
  }
}

}  // namespace

DiagGaussian DiagGaussian::make(Tensor mean, Tensor log_var) {
  if (mean.shape() != log_var.shape()) {
    throw ConformanceError("DiagGaussian: mean " + diff::to_string(mean.shape()) +
                           " and log_var " + diff::to_string(log_var.shape()) + " differ");
  }
  check_finite("DiagGaussian mean", mean);
  check_finite("DiagGaussian log_var", log_var);
  return {std::move(mean), diff::clamp(log_var, kLogVarMin, kLogVarMax)};
}

DiagGaussian DiagGaussian::from_values(std::vector<double> mean, std::vector<double> log_var) {
  return make(Tensor::row(std::move(mean)), Tensor::row(std::move(log_var)));
}

DiagGaussian DiagGaussian::standard(std::size_t batch, std::size_t dim) {
  return {Tensor::zeros(batch, dim), Tensor::zeros(batch, dim)};
}

GaussianMixture GaussianMixture::uniform(std::vector<DiagGaussian> components) {
  if (components.empty()) throw ContractError("mixture needs at least one component");
  const double w = 1.0 / static_cast<double>(components.size());
  GaussianMixture m{std::move(components), {}};
  m.weights.assign(m.components.size(), w);
  m.validate();
  return m;
}

void GaussianMixture::validate() const {
  if (components.empty()) throw ContractError("mixture needs at least one component");
  if (weights.size() != components.size()) {
    throw ContractError("mixture weight count differs from component count");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ContractError("mixture weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("mixture weights must sum to 1");
  for (const auto& c : components) check_same("mixture", components.front(), c);
}

LatentSample sample_reparam(const DiagGaussian& g, const Tensor& noise, std::string source) {
  if (noise.shape() != g.mean.shape()) {
    throw ConformanceError("sample_reparam: noise " + diff::to_string(noise.shape()) +
                           " does not match " + diff::to_string(g.mean.shape()));
  }
  Tensor std_dev = diff::exp(diff::scale(g.log_var, 0.5));
  return {diff::add(g.mean, diff::mul(std_dev, noise)), std::move(source)};
}

Tensor log_prob_diag(const DiagGaussian& g, const Tensor& z) {
  if (z.shape() != g.mean.shape()) {
    throw ConformanceError("log_prob_diag: z " + diff::to_string(z.shape()) +
                           " does not match " + diff::to_string(g.mean.shape()));
  }
  check_finite("log_prob_diag z", z);
  Tensor diff_sq = diff::square(diff::sub(z, g.mean));
  Tensor quad = diff::mul(diff_sq, diff::exp(diff::neg(g.log_var)));
  Tensor per_dim = diff::shift(diff::scale(diff::add(g.log_var, quad), -0.5), -0.5 * kLog2Pi);
  return diff::sum_axis(per_dim, 1);
}

Tensor kl_diag(const DiagGaussian& q, const DiagGaussian& p) {
  check_same("kl_diag", q, p);
  // 0.5 * [ lv_p - lv_q + (var_q + (mu_q - mu_p)^2) / var_p - 1 ]
  Tensor inv_var_p = diff::exp(diff::neg(p.log_var));
  Tensor num = diff::add(diff::exp(q.log_var), diff::square(diff::sub(q.mean, p.mean)));
  Tensor per_dim =
      diff::shift(diff::add(diff::sub(p.log_var, q.log_var), diff::mul(num, inv_var_p)), -1.0);
  return diff::scale(diff::sum_axis(per_dim, 1), 0.5);
}

DiagGaussian poe_fuse(const std::vector<DiagGaussian>& experts, bool include_standard_prior) {
  if (experts.empty()) throw ContractError("poe_fuse: empty expert list");
  for (const auto& e : experts) check_same("poe_fuse", experts.front(), e);
  const std::size_t b = experts.front().batch(), d = experts.front().dim();

  Tensor precision = include_standard_prior ? Tensor::filled(b, d, 1.0) : Tensor();
  Tensor weighted = include_standard_prior ? Tensor::zeros(b, d) : Tensor();
  for (const auto& e : experts) {
    Tensor prec = diff::exp(diff::neg(e.log_var));
    Tensor wm = diff::mul(prec, e.mean);
    precision = precision.defined() ? diff::add(precision, prec) : prec;
    weighted = weighted.defined() ? diff::add(weighted, wm) : wm;
  }
  Tensor mean = diff::div(weighted, precision);
  Tensor log_var = diff::neg(diff::log(precision));
  return DiagGaussian::make(mean, log_var);
}

DiagGaussian moment_average(const std::vector<DiagGaussian>& experts) {
  if (experts.empty()) throw ContractError("moment_average: empty expert list");
  for (const auto& e : experts) check_same("moment_average", experts.front(), e);
  const double inv_n = 1.0 / static_cast<double>(experts.size());
  Tensor mean_sum = experts.front().mean;
  Tensor var_sum = diff::exp(experts.front().log_var);
  for (std::size_t i = 1; i < experts.size(); ++i) {
    mean_sum = diff::add(mean_sum, experts[i].mean);
    var_sum = diff::add(var_sum, diff::exp(experts[i].log_var));
  }
  return DiagGaussian::make(diff::scale(mean_sum, inv_n), diff::log(diff::scale(var_sum, inv_n)));
}

Tensor mixture_log_prob(const GaussianMixture& m, const Tensor& z) {
  m.validate();
  std::vector<Tensor> cols;
  cols.reserve(m.components.size());
  for (std::size_t k = 0; k < m.components.size(); ++k) {
    if (m.weights[k] == 0.0) continue;
    cols.push_back(diff::shift(log_prob_diag(m.components[k], z), std::log(m.weights[k])));
  }
  if (cols.size() == 1) return cols.front();
  return diff::logsumexp_cols(diff::concat_cols(cols));
}

}  // namespace mmvm::gauss
