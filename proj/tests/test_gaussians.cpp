#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "mmvm/error.hpp"
#include "mmvm/gaussians.hpp"
#include "mmvm/gradcheck.hpp"

using namespace mmvm;
using namespace mmvm::gauss;
using diff::Tensor;

namespace {

const double kLn2Pi = std::log(2.0 * std::numbers::pi);

DiagGaussian g1(double mu, double var) { return DiagGaussian::from_values({mu}, {std::log(var)}); }

double log_prob_at(const DiagGaussian& g, double z) {
  return log_prob_diag(g, Tensor::scalar(z)).item();
}

// Trapezoid rule on [-10, 10].
template <class F>
double integrate(F f, double lo = -10.0, double hi = 10.0, int n = 40000) {
  const double h = (hi - lo) / n;
  double s = 0.5 * (f(lo) + f(hi));
  for (int i = 1; i < n; ++i) s += f(lo + i * h);
  return s * h;
}

double variance(const DiagGaussian& g, std::size_t i = 0) { return std::exp(g.log_var.data()[i]); }

}  // namespace

TEST_CASE("log density closed forms") {
  auto std2 = DiagGaussian::standard(1, 2);
  CHECK(log_prob_diag(std2, Tensor::zeros(1, 2)).item() == doctest::Approx(-kLn2Pi).epsilon(1e-15));

  auto g = DiagGaussian::from_values({0.3, -1.2, 2.0}, {0.5, -0.7, 1.1});
  const double expected = -1.5 * kLn2Pi - 0.5 * (0.5 - 0.7 + 1.1);
  CHECK(log_prob_diag(g, g.mean).item() == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("log density integrates to one") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mu(-2.0, 2.0), sd(0.3, 2.0);
  for (int i = 0; i < 20; ++i) {
    auto g = g1(mu(rng), std::pow(sd(rng), 2));
    CHECK(std::abs(integrate([&](double z) { return std::exp(log_prob_at(g, z)); }) - 1.0) < 1e-3);
  }
}

TEST_CASE("reparameterised sampling") {
  auto g = DiagGaussian::from_values({1.0, -2.0}, {0.4, -0.3});
  CHECK(sample_reparam(g, Tensor::zeros(1, 2)).z.data()[1] == -2.0);
  Tensor eps = Tensor::row({0.7, -1.3});
  auto s = sample_reparam(DiagGaussian::standard(1, 2), eps).z;
  CHECK(s.data()[0] == 0.7);
  CHECK(s.data()[1] == -1.3);
  CHECK_THROWS_AS(sample_reparam(g, Tensor::zeros(1, 3)), ConformanceError);

  // Monte Carlo: 1e5 draws, mean and variance within 3 standard errors.
  const std::size_t n = 100000;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  std::vector<double> noise(n);
  for (auto& v : noise) v = normal(rng);
  auto wide = DiagGaussian::make(Tensor::filled(n, 1, 1.5), Tensor::filled(n, 1, std::log(0.8)));
  auto z = sample_reparam(wide, Tensor::from(n, 1, noise)).z;
  double m = 0.0, v = 0.0;
  for (double x : z.data()) m += x;
  m /= n;
  for (double x : z.data()) v += (x - m) * (x - m);
  v /= (n - 1);
  CHECK(std::abs(m - 1.5) < 3.0 * std::sqrt(0.8 / n));
  CHECK(std::abs(v - 0.8) < 3.0 * 0.8 * std::sqrt(2.0 / (n - 1)));
}

TEST_CASE("log-variance is clamped") {
  auto g = DiagGaussian::from_values({0.0, 0.0}, {-50.0, 50.0});
  CHECK(g.log_var.data()[0] == kLogVarMin);
  CHECK(g.log_var.data()[1] == kLogVarMax);
  CHECK_THROWS_AS(DiagGaussian::from_values({std::nan("")}, {0.0}), DomainError);
}

TEST_CASE("KL closed forms and non-negativity") {
  CHECK(kl_diag(g1(0, 1), g1(0, 1)).item() == 0.0);
  CHECK(kl_diag(g1(1, 1), g1(0, 1)).item() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(kl_diag(DiagGaussian::standard(1, 2), DiagGaussian::standard(1, 3)),
                  ConformanceError);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    auto q = DiagGaussian::from_values({u(rng), u(rng)}, {u(rng), u(rng)});
    auto p = DiagGaussian::from_values({u(rng), u(rng)}, {u(rng), u(rng)});
    CHECK(kl_diag(q, p).item() > 0.0);
    CHECK(std::abs(kl_diag(q, q).item()) < 1e-12);
  }
}

TEST_CASE("KL matches grid quadrature") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> mu(-1.5, 1.5), sd(0.5, 1.5);
  for (int i = 0; i < 20; ++i) {
    auto q = g1(mu(rng), std::pow(sd(rng), 2));
    auto p = g1(mu(rng), std::pow(sd(rng), 2));
    const double numeric = integrate([&](double z) {
      const double lq = log_prob_at(q, z), lp = log_prob_at(p, z);
      return std::exp(lq) * (lq - lp);
    });
    CHECK(std::abs(numeric - kl_diag(q, p).item()) < 1e-3);
  }
}

TEST_CASE("product of experts") {
  auto a = g1(0, 1), b = g1(2, 1);
  auto no_prior = poe_fuse({a, b}, false);
  CHECK(no_prior.mean.item() == 1.0);
  CHECK(variance(no_prior) == doctest::Approx(0.5).epsilon(1e-15));
  auto with_prior = poe_fuse({a, b}, true);
  CHECK(with_prior.mean.item() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(variance(with_prior) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  auto single = poe_fuse({g1(0.7, 2.5)}, false);
  CHECK(single.mean.item() == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(variance(single) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK_THROWS_AS(poe_fuse({}, true), ContractError);
}

TEST_CASE("product of experts precision arithmetic") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<DiagGaussian> experts;
    const int k = 1 + static_cast<int>(rng() % 4);
    for (int e = 0; e < k; ++e) experts.push_back(DiagGaussian::from_values({u(rng), u(rng)}, {u(rng), u(rng)}));
    for (bool prior : {false, true}) {
      auto fused = poe_fuse(experts, prior);
      for (std::size_t j = 0; j < 2; ++j) {
        double precision = prior ? 1.0 : 0.0, weighted = 0.0;
        for (const auto& e : experts) {
          const double p = 1.0 / std::exp(e.log_var.data()[j]);
          precision += p;
          weighted += p * e.mean.data()[j];
        }
        CHECK(1.0 / variance(fused, j) == doctest::Approx(precision).epsilon(1e-14));
        CHECK(fused.mean.data()[j] == doctest::Approx(weighted / precision).epsilon(1e-14));
        for (const auto& e : experts) CHECK(variance(fused, j) <= variance(e, j) * (1 + 1e-15));
      }
    }
  }
}

TEST_CASE("product of experts density is the product up to a constant") {
  std::vector<DiagGaussian> experts{DiagGaussian::from_values({0.3, -0.4}, {0.2, 0.6}),
                                    DiagGaussian::from_values({-1.0, 0.8}, {-0.5, 0.1})};
  auto fused = poe_fuse(experts, false);
  auto total = [&](const Tensor& z) {
    double s = 0.0;
    for (const auto& e : experts) s += log_prob_diag(e, z).item();
    return s;
  };
  Tensor z1 = Tensor::row({0.1, 0.2}), z2 = Tensor::row({-1.3, 2.4});
  const double lhs = log_prob_diag(fused, z1).item() - log_prob_diag(fused, z2).item();
  CHECK(std::abs(lhs - (total(z1) - total(z2))) < 1e-9);
}

TEST_CASE("moment averaging") {
  auto avg = moment_average({g1(0, 1), g1(2, 1)});
  CHECK(avg.mean.item() == 1.0);
  CHECK(variance(avg) == doctest::Approx(1.0).epsilon(1e-15));
  auto g = DiagGaussian::from_values({0.4, -0.2}, {0.3, -0.9});
  auto same = moment_average({g, g, g});
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(same.mean.data()[j] == doctest::Approx(g.mean.data()[j]).epsilon(1e-15));
    CHECK(same.log_var.data()[j] == doctest::Approx(g.log_var.data()[j]).epsilon(1e-14));
  }
  CHECK_THROWS_AS(moment_average({}), ContractError);
}

TEST_CASE("mixture density") {
  auto m = GaussianMixture::uniform({g1(0, 1), g1(0, 1)});
  CHECK(mixture_log_prob(m, Tensor::scalar(0.0)).item() ==
        doctest::Approx(-0.5 * kLn2Pi).epsilon(1e-15));

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> mu(-3.0, 3.0), sd(0.3, 1.5), w(0.1, 1.0);
  for (int i = 0; i < 10; ++i) {
    GaussianMixture mix;
    double total = 0.0;
    for (int k = 0; k < 3; ++k) {
      mix.components.push_back(g1(mu(rng), std::pow(sd(rng), 2)));
      mix.weights.push_back(w(rng));
      total += mix.weights.back();
    }
    for (auto& x : mix.weights) x /= total;
    const double mass = integrate(
        [&](double z) { return std::exp(mixture_log_prob(mix, Tensor::scalar(z)).item()); });
    CHECK(std::abs(mass - 1.0) < 1e-3);
    for (double z : {-2.0, 0.0, 1.7}) {
      const double lm = mixture_log_prob(mix, Tensor::scalar(z)).item();
      for (std::size_t k = 0; k < 3; ++k) {
        CHECK(lm >= std::log(mix.weights[k]) + log_prob_at(mix.components[k], z));
      }
    }
  }
  CHECK_THROWS_AS(mixture_log_prob(m, Tensor::row({0.0, 0.0})), ConformanceError);
  GaussianMixture bad{{g1(0, 1)}, {0.5}};
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("sampling through a mixture density is differentiable") {
  std::vector<Tensor> point{Tensor::row({0.3, -0.2}), Tensor::row({0.1, 0.4}),
                            Tensor::row({-0.5, 0.9}), Tensor::row({-0.3, 0.2})};
  Tensor noise = Tensor::row({0.8, -1.1});
  auto f = [&](std::span<const Tensor> p) {
    auto a = DiagGaussian::make(p[0], p[1]);
    auto b = DiagGaussian::make(p[2], p[3]);
    auto z = sample_reparam(a, noise).z;
    return diff::sum(mixture_log_prob(GaussianMixture::uniform({a, b}), z));
  };
  CHECK(diff::finite_diff_check(f, point, 1e-4).passed);
}
