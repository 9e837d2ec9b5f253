#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mmvm/error.hpp"
#include "mmvm/harness.hpp"
#include "mmvm/textio.hpp"

namespace fs = std::filesystem;
using namespace mmvm;

namespace {

enum Exit { kOk = 0, kConfig = 2, kData = 3, kNumeric = 4 };

struct Globals {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t threads = 1;
};

harness::ExperimentConfig resolve(const Globals& g) {
  harness::ExperimentConfig c =
      g.config.empty() ? harness::parse_config("{}") : harness::load_config(g.config);
  if (!g.out.empty()) c.out = g.out;
  if (g.seed_set) {
    c.seeds = {g.seed};
    c.data_seed = g.seed;
  }
  return c;
}

void cmd_gen_data(const Globals& g) {
  auto c = resolve(g);
  if (!c.synthetic) throw ConfigError("gen-data needs a synthetic data section");
  auto ds = data::generate_synthetic(*c.synthetic, c.data_seed);
  auto path = data::write_dataset(ds, c.out / "data");
  std::cout << "wrote " << ds.size() << " samples to " << path.string() << "\n";
}

void cmd_train(const Globals& g) {
  auto c = resolve(g);
  auto split = harness::load_data(c);
  fs::create_directories(c.out / "models");
  std::string csv = "method,seed,epoch,objective\n";
  for (const auto& method : c.methods) {
    for (auto seed : c.seeds) {
      vae::TrainConfig t = c.train;
      t.seed = seed;
      auto trained = vae::train_model(harness::model_spec(c, method, split.train),
                                      split.train.modalities(), t);
      const std::string stem = method + "_seed" + std::to_string(seed);
      vae::save_model(trained.model, c.out / "models" / (stem + ".ckpt"));
      for (std::size_t e = 0; e < trained.epoch_objective.size(); ++e) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", trained.epoch_objective[e]);
        csv += method + "," + std::to_string(seed) + "," + std::to_string(e) + "," + buf + "\n";
      }
      std::cout << "trained " << stem << "\n";
    }
  }
  spit(c.out / "training.csv", csv);
}

void cmd_latent(const Globals& g) {
  auto c = resolve(g);
  auto split = harness::load_data(c);
  auto result = harness::run_latent_experiment(c, split, g.threads);
  harness::write_report({result.table}, c.out);
  std::cout << harness::summary_csv(result.table);
}

void cmd_sweep(const Globals& g) {
  auto c = resolve(g);
  auto split = harness::load_data(c);
  auto table = harness::run_label_sweep(c, split, g.threads);
  harness::write_report({table}, c.out);
  std::cout << harness::curve_data(table);
}

void cmd_generate(const Globals& g) {
  auto c = resolve(g);
  auto split = harness::load_data(c);
  auto demo = harness::run_generation_demo(c, split, g.threads);
  harness::write_generation(demo, split.test, c.out / "generation");
  std::cout << harness::generation_csv(demo.rows);
}

void cmd_report(const Globals& g) {
  const fs::path dir = g.out.empty() ? fs::path("results") : fs::path(g.out);
  std::vector<harness::ResultTable> tables;
  for (const char* name : {"latent", "sweep"}) {
    if (fs::exists(dir / (std::string(name) + ".csv"))) {
      tables.push_back(harness::read_table(dir / (std::string(name) + ".csv")));
    }
  }
  if (tables.empty()) throw ParseError("no latent.csv or sweep.csv under " + dir.string());
  harness::write_report(tables, dir);
  for (const auto& t : tables) std::cout << harness::summary_csv(t);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal VAE experiments"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON)");
  app.add_option("--out", g.out, "Output directory");
  auto* seed_opt = app.add_option("--seed", g.seed, "Run a single seed (also the data seed)");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

  struct Sub {
    const char* name;
    const char* help;
    void (*run)(const Globals&);
  };
  const Sub subs[] = {
      {"gen-data", "Write the synthetic dataset as manifest + files", cmd_gen_data},
      {"train", "Train every configured method and seed, save checkpoints", cmd_train},
      {"latent-exp", "Random-forest probes on latent representations", cmd_latent},
      {"label-sweep", "Probe and supervised AUROC against labeled-set size", cmd_sweep},
      {"generate", "Cross-modal generation with MSE against prior samples", cmd_generate},
      {"report", "Rebuild summaries and curve files from result CSVs", cmd_report},
  };
  void (*selected)(const Globals&) = nullptr;
  for (const auto& s : subs) {
    app.add_subcommand(s.name, s.help)->callback([&selected, run = s.run] { selected = run; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    selected(g);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const DomainError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const ContractError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kOk;
}
