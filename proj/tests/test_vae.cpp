#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "mmvm/checkpoint.hpp"
#include "mmvm/data.hpp"
#include "mmvm/error.hpp"
#include "mmvm/gradcheck.hpp"
#include "mmvm/vae.hpp"

using namespace mmvm;
using namespace mmvm::vae;
using diff::Tensor;
using gauss::DiagGaussian;

namespace {

const double kLn2Pi = std::log(2.0 * std::numbers::pi);

ModelSpec tiny(const std::string& method, std::vector<std::size_t> dims = {5, 7}) {
  auto s = ModelSpec::for_method(method, std::move(dims));
  s.latent_dim = 2;
  s.hidden_sizes = {4};
  return s;
}

Tensor random_input(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> n;
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = n(rng);
  return Tensor::from(rows, cols, v);
}

void zero_last_layer(const nn::Mlp& net) {
  auto& last = const_cast<nn::Mlp&>(net).layers().back();
  for (auto& w : last.weight.mutable_data()) w = 0.0;
  for (auto& b : last.bias.mutable_data()) b = 0.0;
}

double value(const Model& m, const std::vector<Tensor>& x, const NoiseBlock& noise) {
  diff::NoGradGuard guard;
  return objective(m, x, noise).item();
}

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "mmvm_test_vae";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("model specs") {
  CHECK(all_methods().size() == 6);
  for (const auto& m : all_methods()) CHECK(ModelSpec::for_method(m, {3, 4}).method_name() == m);
  CHECK_THROWS_AS(ModelSpec::for_method("vanilla", {3}), ParseError);

  auto s = tiny("mopoe");
  s.beta = 0.25;
  s.detach_mixture_prior = true;
  nlohmann::json j = s;
  ModelSpec back = j.get<ModelSpec>();
  CHECK(back.method_name() == "mopoe");
  CHECK(back.beta == 0.25);
  CHECK(back.detach_mixture_prior);
  CHECK(back.hidden_sizes == s.hidden_sizes);

  auto bad = tiny("mmvm");
  bad.latent_dim = 0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = tiny("mmvm");
  bad.likelihood.sigma = 0.0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("noise slot counts") {
  CHECK(noise_slots(tiny("independent")) == 2);
  CHECK(noise_slots(tiny("avg")) == 1);
  CHECK(noise_slots(tiny("poe")) == 1);
  CHECK(noise_slots(tiny("moe")) == 2);
  CHECK(noise_slots(tiny("mopoe")) == 3);
  CHECK(noise_slots(tiny("mmvm")) == 2);
  auto s = tiny("mopoe", {2, 2, 2});
  s.samples = 2;
  CHECK(noise_slots(s) == 14);
}

TEST_CASE("encoder") {
  std::mt19937_64 rng(1);
  auto s = tiny("mmvm");
  s.zero_init_encoder_head = true;
  Model zero(s, 3);
  auto q = encode(zero, 0, random_input(rng, 4, 5));
  for (double v : q.mean.data()) CHECK(v == 0.0);
  for (double v : q.log_var.data()) CHECK(v == 0.0);

  Model m(tiny("mmvm"), 3);
  Tensor x = random_input(rng, 6, 7);
  auto a = encode(m, 1, x), b = encode(m, 1, x);
  CHECK(a.mean.rows() == 6);
  CHECK(a.mean.cols() == 2);
  CHECK(std::vector<double>(a.mean.data().begin(), a.mean.data().end()) ==
        std::vector<double>(b.mean.data().begin(), b.mean.data().end()));
  CHECK_THROWS_AS(encode(m, 0, x), ConformanceError);
  CHECK_THROWS_AS(encode(m, 2, x), ContractError);
}

TEST_CASE("decoder log-likelihoods") {
  std::mt19937_64 rng(2);
  Model g(tiny("independent"), 1);
  zero_last_layer(g.decoder(1));
  Tensor z = random_input(rng, 3, 2);
  auto ll = decode_loglik(g, 1, z, Tensor::zeros(3, 7));
  for (double v : ll.data()) CHECK(v == doctest::Approx(-3.5 * kLn2Pi).epsilon(1e-14));

  auto bs = tiny("independent");
  bs.likelihood.kind = LikelihoodKind::bernoulli;
  Model b(bs, 1);
  zero_last_layer(b.decoder(0));
  Tensor x = Tensor::from(1, 5, {0, 1, 1, 0, 1});
  CHECK(decode_loglik(b, 0, random_input(rng, 1, 2), x).item() ==
        doctest::Approx(5.0 * std::log(0.5)).epsilon(1e-14));
  CHECK_THROWS_AS(decode_loglik(b, 0, random_input(rng, 1, 2), Tensor::filled(1, 5, 1.5)),
                  DomainError);

  // d/dz through the decoder.
  Model m(tiny("independent"), 4);
  Tensor target = random_input(rng, 2, 7);
  std::vector<Tensor> point{random_input(rng, 2, 2)};
  auto r = diff::finite_diff_check(
      [&](auto p) { return diff::sum(decode_loglik(m, 1, p[0], target)); }, point, 1e-4);
  CHECK(r.passed);
}

TEST_CASE("independent ELBO closed forms") {
  std::mt19937_64 rng(3);
  auto s = tiny("independent");
  s.beta = 0.0;
  Model m(s, 5);
  zero_last_layer(m.decoder(0));
  zero_last_layer(m.decoder(1));
  std::vector<Tensor> x{Tensor::zeros(3, 5), Tensor::zeros(3, 7)};
  auto noise = make_noise(2, 3, 2, 9);
  CHECK(elbo_independent(m, x, noise).item() == doctest::Approx(-6.0 * kLn2Pi).epsilon(1e-14));

  // With q equal to the prior the KL term vanishes whatever beta is.
  auto p = tiny("independent");
  p.zero_init_encoder_head = true;
  Model at_prior(p, 5);
  auto p0 = p;
  p0.beta = 0.0;
  Model at_prior0(p0, 5);
  std::vector<Tensor> xr{random_input(rng, 3, 5), random_input(rng, 3, 7)};
  CHECK(value(at_prior, xr, noise) == value(at_prior0, xr, noise));
}

TEST_CASE("objectives reject the wrong model kind") {
  Model m(tiny("mmvm"), 1);
  std::vector<Tensor> x{Tensor::zeros(1, 5), Tensor::zeros(1, 7)};
  auto noise = make_noise(3, 1, 2, 0);
  CHECK_THROWS_AS(elbo_independent(m, x, noise), ContractError);
  CHECK_THROWS_AS(elbo_aggregated(m, x, noise), ContractError);
  Model a(tiny("avg"), 1);
  CHECK_THROWS_AS(mmvm_objective(a, x, noise), ContractError);
  CHECK_THROWS_AS(objective(m, x, make_noise(1, 1, 2, 0)), ContractError);
}

TEST_CASE("all objectives pass gradient checks") {
  std::mt19937_64 rng(4);
  std::vector<Tensor> x{random_input(rng, 3, 5), random_input(rng, 3, 7)};
  for (const auto& method : all_methods()) {
    CAPTURE(method);
    Model m(tiny(method), 11);
    auto noise = make_noise(noise_slots(m.spec()), 3, 2, 21);
    auto params = m.parameters();
    auto report = diff::finite_diff_check(
        [&](auto) { return objective(m, x, noise); }, params, 1e-4);
    CHECK(report.passed);
    CHECK(report.checked > 100);
  }
  // Non-default estimator paths too. Detaching h is excluded: its gradient is
  // deliberately not the derivative of the objective value.
  auto cat = tiny("mopoe");
  cat.stratified = false;
  auto two = tiny("moe");
  two.samples = 2;
  for (const auto& s : {cat, two}) {
    CAPTURE(s.method_name());
    Model m(s, 12);
    auto noise = make_noise(noise_slots(s), 3, 2, 22);
    auto params = m.parameters();
    CHECK(diff::finite_diff_check([&](auto) { return objective(m, x, noise); }, params, 1e-4)
              .passed);
  }
}

TEST_CASE("single-modality objectives coincide") {
  std::mt19937_64 rng(5);
  std::vector<Tensor> x{random_input(rng, 4, 5)};
  auto noise = make_noise(1, 4, 2, 31);
  for (double beta : {0.0, 1.0}) {
    CAPTURE(beta);
    auto ref_spec = tiny("independent", {5});
    ref_spec.beta = beta;
    const double ref = value(Model(ref_spec, 7), x, noise);
    for (const auto& method : all_methods()) {
      CAPTURE(method);
      auto s = tiny(method, {5});
      s.beta = beta;
      const double v = value(Model(s, 7), x, noise);
      if (method == "mmvm" && beta > 0.0) {
        // h(z|X) is q itself, leaving the reconstruction term.
        auto r = ref_spec;
        r.beta = 0.0;
        CHECK(std::abs(v - value(Model(r, 7), x, noise)) < 1e-9);
      } else {
        CHECK(std::abs(v - ref) < 1e-9);
      }
    }
  }
}

TEST_CASE("averaging identical posteriors gives the unimodal ELBO") {
  std::mt19937_64 rng(6);
  auto s = tiny("avg", {5, 5});
  Model m(s, 8);
  // Copy encoder 0 into encoder 1 so both modalities share one posterior.
  const auto& e0 = m.encoder(0).layers();
  const auto& e1 = const_cast<nn::Mlp&>(m.encoder(1)).layers();
  for (std::size_t l = 0; l < e0.size(); ++l) {
    std::copy(e0[l].weight.data().begin(), e0[l].weight.data().end(),
              const_cast<nn::Linear&>(e1[l]).weight.mutable_data().begin());
    std::copy(e0[l].bias.data().begin(), e0[l].bias.data().end(),
              const_cast<nn::Linear&>(e1[l]).bias.mutable_data().begin());
  }
  Tensor x0 = random_input(rng, 3, 5);
  std::vector<Tensor> x{x0, x0};
  auto noise = make_noise(1, 3, 2, 41);

  diff::NoGradGuard guard;
  auto q = encode(m, 0, x0);
  Tensor z = gauss::sample_reparam(q, noise.slots[0]).z;
  Tensor rows = decode_loglik(m, 0, z, x0) + decode_loglik(m, 1, z, x0) -
                gauss::kl_diag(q, DiagGaussian::standard(3, 2));
  CHECK(std::abs(elbo_aggregated(m, x, noise).item() - diff::mean(rows).item()) < 1e-12);
}

TEST_CASE("aggregated estimator is stable across noise streams") {
  std::mt19937_64 rng(7);
  Model m(tiny("moe"), 9);
  std::vector<Tensor> x{random_input(rng, 1, 5), random_input(rng, 1, 7)};
  const std::size_t batches = 100, rows = 100;
  // The same sample repeated, so a batch mean averages independent draws.
  std::vector<Tensor> xb;
  for (const auto& xm : x) xb.push_back(diff::broadcast_to(xm, rows, xm.cols()));
  auto run = [&](std::uint64_t seed) {
    std::vector<double> means;
    for (std::size_t b = 0; b < batches; ++b) {
      means.push_back(value(m, xb, make_noise(2, rows, 2, derive_seed(seed, "mc", b))));
    }
    double mu = 0.0, var = 0.0;
    for (double v : means) mu += v;
    mu /= batches;
    for (double v : means) var += (v - mu) * (v - mu);
    var /= (batches - 1);
    return std::pair{mu, var / batches};
  };
  auto [m1, se1] = run(1);
  auto [m2, se2] = run(2);
  CHECK(std::abs(m1 - m2) < 3.0 * std::sqrt(se1 + se2));
}

TEST_CASE("mixture-prior regulariser") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  auto q = DiagGaussian::from_values({0.4, -0.3}, {0.2, -0.5});
  for (int i = 0; i < 20; ++i) {
    std::vector<gauss::LatentSample> z;
    for (int m = 0; m < 3; ++m) z.push_back({Tensor::row({3 * n(rng), 3 * n(rng)}), ""});
    auto reg = mmvm_regularizer({q, q, q}, z);
    CHECK(reg.total.item() == 0.0);
    CHECK(mmvm_regularizer({q}, {z[0]}).total.item() == 0.0);
  }
  CHECK_THROWS_AS(mmvm_regularizer({q, q}, {{Tensor::row({0.0, 0.0}), ""}}), ContractError);

  // Pointwise upper bound ln M on random posteriors and far-away samples.
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int i = 0; i < 500; ++i) {
    const std::size_t M = 2 + i % 3;
    std::vector<DiagGaussian> post;
    std::vector<gauss::LatentSample> z;
    for (std::size_t m = 0; m < M; ++m) {
      post.push_back(DiagGaussian::from_values({u(rng), u(rng)}, {u(rng), u(rng)}));
      z.push_back({Tensor::row({5 * u(rng), 5 * u(rng)}), ""});
    }
    auto reg = mmvm_regularizer(post, z);
    for (const auto& t : reg.per_modality) CHECK(t.item() <= std::log(static_cast<double>(M)));
  }

  // In expectation each term is a KL divergence, so it lies in [0, ln M].
  const std::size_t N = 100000;
  auto a = DiagGaussian::make(Tensor::filled(N, 2, 0.0), Tensor::filled(N, 2, 0.0));
  auto b = DiagGaussian::make(Tensor::filled(N, 2, 1.5), Tensor::filled(N, 2, -0.7));
  std::vector<double> ea(2 * N), eb(2 * N);
  for (auto& v : ea) v = n(rng);
  for (auto& v : eb) v = n(rng);
  auto za = gauss::sample_reparam(a, Tensor::from(N, 2, ea));
  auto zb = gauss::sample_reparam(b, Tensor::from(N, 2, eb));
  auto reg = mmvm_regularizer({a, b}, {za, zb});
  for (const auto& t : reg.per_modality) {
    const double mean = diff::mean(t).item();
    CHECK(mean >= 0.0);
    CHECK(mean <= std::log(2.0));
  }
}

TEST_CASE("mixture-prior objective reductions") {
  std::mt19937_64 rng(9);
  std::vector<Tensor> x{random_input(rng, 4, 5), random_input(rng, 4, 7)};
  auto noise = make_noise(2, 4, 2, 51);
  auto ms = tiny("mmvm");
  ms.beta = 0.0;
  auto is = tiny("independent");
  is.beta = 0.0;
  CHECK(std::abs(value(Model(ms, 3), x, noise) - value(Model(is, 3), x, noise)) < 1e-9);

  // Identical posteriors: the objective is the reconstruction term alone.
  auto zs = tiny("mmvm");
  zs.zero_init_encoder_head = true;
  auto zs0 = zs;
  zs0.beta = 0.0;
  CHECK(value(Model(zs, 3), x, noise) == value(Model(zs0, 3), x, noise));
}

TEST_CASE("training") {
  data::SyntheticConfig small;
  small.n_subjects = 40;
  auto ds = data::generate_synthetic(small, 1);
  const auto x = ds.modalities();
  auto spec = ModelSpec::for_method("mmvm", {ds.dim_f, ds.dim_l});
  spec.hidden_sizes = {16};

  auto untouched = train_model(spec, x, {.epochs = 0, .seed = 3});
  CHECK(untouched.epoch_objective.empty());
  Model init(spec, derive_seed(3, "init"));
  auto a = untouched.model.parameters(), b = init.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::equal(a[i].data().begin(), a[i].data().end(), b[i].data().begin()));
  }

  auto t1 = train_model(spec, x, {.epochs = 3, .seed = 4});
  auto t2 = train_model(spec, x, {.epochs = 3, .seed = 4});
  CHECK(t1.epoch_objective == t2.epoch_objective);
  auto p1 = t1.model.parameters(), p2 = t2.model.parameters();
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(std::equal(p1[i].data().begin(), p1[i].data().end(), p2[i].data().begin()));
  }

  // Every kind sees the same batches and noise.
  for (const auto& method : all_methods()) {
    auto s = ModelSpec::for_method(method, {ds.dim_f, ds.dim_l});
    s.hidden_sizes = {16};
    CHECK(train_model(s, x, {.epochs = 1, .seed = 4}).stream_hash ==
          train_model(spec, x, {.epochs = 1, .seed = 4}).stream_hash);
  }

  CHECK_THROWS_AS(train_model(spec, {x[0]}, {.epochs = 1}), ContractError);
  CHECK_THROWS_AS(train_model(spec, x, {.epochs = 1, .batch_size = 0}), ContractError);

  auto blown = x;
  for (auto& v : blown[0].values) v *= 1e200;
  try {
    train_model(spec, blown, {.epochs = 1});
    FAIL("expected a numeric failure");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch 0") != std::string::npos);
  }
}

TEST_CASE("every kind improves over 30 epochs on default synthetic data") {
  auto ds = data::generate_synthetic({}, 0);
  const auto x = ds.modalities();
  for (const auto& method : all_methods()) {
    CAPTURE(method);
    auto t = train_model(ModelSpec::for_method(method, {ds.dim_f, ds.dim_l}), x, {.seed = 0});
    REQUIRE(t.epoch_objective.size() == 30);
    CHECK(t.epoch_objective.back() > t.epoch_objective.front());
  }
}

TEST_CASE("representations") {
  std::mt19937_64 rng(10);
  Matrix data0(6, 5), data1(6, 7);
  for (auto& v : data0.values) v = std::normal_distribution<double>()(rng);
  for (auto& v : data1.values) v = std::normal_distribution<double>()(rng);
  Model m(tiny("moe"), 2);
  auto z = extract_representations(m, {data0, data1}, Representation::of_modality(1));
  CHECK(z.rows == 6);
  CHECK(z.cols == 2);
  CHECK(z == extract_representations(m, {data0, data1}, Representation::of_modality(1)));
  auto j = extract_representations(m, {data0, data1}, Representation::joint());
  auto z0 = extract_representations(m, {data0, data1}, Representation::of_modality(0));
  for (std::size_t i = 0; i < j.values.size(); ++i) {
    CHECK(j.values[i] == doctest::Approx(0.5 * (z0.values[i] + z.values[i])).epsilon(1e-15));
  }

  for (const char* method : {"independent", "mmvm"}) {
    Model nm(tiny(method), 2);
    CHECK_FALSE(has_representation(nm.spec(), Representation::joint()));
    CHECK_THROWS_AS(extract_representations(nm, {data0, data1}, Representation::joint()),
                    ContractError);
  }

  auto zs = tiny("mmvm");
  zs.zero_init_encoder_head = true;
  auto zero = extract_representations(Model(zs, 1), {data0, data1}, Representation::of_modality(0));
  for (double v : zero.values) CHECK(v == 0.0);
}

TEST_CASE("conditional generation") {
  std::mt19937_64 rng(11);
  Matrix src(3, 7);
  for (auto& v : src.values) v = std::normal_distribution<double>()(rng);
  for (const auto& method : all_methods()) {
    CAPTURE(method);
    Model m(tiny(method), 4);
    auto g = conditional_generate(m, 1, src, 0, Matrix(3, 2));
    CHECK(g.rows == 3);
    CHECK(g.cols == 5);
    CHECK(g == conditional_generate(m, 1, src, 0, Matrix(3, 2)));
    CHECK(conditional_generate(m, 1, src, 1, Matrix(3, 2)).cols == 7);
    CHECK_THROWS_AS(conditional_generate(m, 1, src, 2, Matrix(3, 2)), ContractError);
    CHECK_THROWS_AS(conditional_generate(m, 1, src, 0, Matrix(2, 2)), ConformanceError);
  }
}

TEST_CASE("checkpoints") {
  auto s = tiny("mopoe");
  s.beta = 0.5;
  Model m(s, 13);
  const auto path = temp_path("model.ckpt");
  save_model(m, path);
  Model back = load_model(path);
  CHECK(back.spec().method_name() == "mopoe");
  CHECK(back.spec().beta == 0.5);
  auto a = m.parameters(), b = back.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::equal(a[i].data().begin(), a[i].data().end(), b[i].data().begin()));
  }

  // Header layout: magic, version, spec length, spec, values.
  auto ck = read_checkpoint(path);
  CHECK(ck.version == kCheckpointVersion);
  std::size_t total = 0;
  for (const auto& p : a) total += p.size();
  CHECK(ck.values.size() == total);
  CHECK(ck.values.front() == a.front().data()[0]);
  CHECK(std::filesystem::file_size(path) == 12 + ck.spec.size() + 8 * total);

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << b;
  };
  write("XXXX" + bytes.substr(4));
  CHECK_THROWS_AS(load_model(path), ParseError);
  write(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_model(path), ParseError);
  CHECK_THROWS_AS(load_model(temp_path("missing.ckpt")), Error);
}
