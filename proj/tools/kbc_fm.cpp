// Command-line driver: stats, train, evaluate, grid.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "bigramfm/experiment.hpp"

namespace {

struct Options {
  std::string config;
  std::string checkpoint;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)")->required();
  cmd->add_option("--out", o.out, "Output directory (overrides out_dir)");
  cmd->add_option("--seed", o.seed, "Random seed (overrides seed)");
  cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
}

bfm::ExperimentSpec resolve(const Options& o) {
  bfm::ExperimentSpec spec = bfm::load_spec(o.config);
  if (!o.out.empty()) spec.out_dir = o.out;
  if (o.seed) spec.train.seed = *o.seed;
  if (o.threads) spec.train.threads = *o.threads;
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Factorization-machine knowledge-base completion"};
  app.require_subcommand(1);
  Options opt;

  auto* stats = app.add_subcommand("stats", "Dataset and bigram coverage statistics");
  add_common(stats, opt);
  auto* train = app.add_subcommand("train", "Train a model (grid-searches when the config has a grid)");
  add_common(train, opt);
  auto* evaluate = app.add_subcommand("evaluate", "Filtered ranking metrics on the test split");
  add_common(evaluate, opt);
  evaluate->add_option("--checkpoint", opt.checkpoint, "Checkpoint to evaluate")->required();
  auto* grid = app.add_subcommand("grid", "Grid search over l2, eta, tau and k");
  add_common(grid, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? bfm::kExitOk : bfm::kExitConfig;
  }

  try {
    const bfm::ExperimentSpec spec = resolve(opt);
    if (stats->parsed()) {
      bfm::cmd_stats(spec, std::cout);
      return bfm::kExitOk;
    }
    if (train->parsed()) return bfm::cmd_train(spec, std::cout);
    if (grid->parsed()) {
      if (!spec.grid) throw bfm::ConfigError("config has no 'grid' section");
      return bfm::cmd_train(spec, std::cout);
    }
    if (evaluate->parsed()) {
      bfm::cmd_evaluate(spec, opt.checkpoint, std::cout);
      return bfm::kExitOk;
    }
  } catch (const bfm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return bfm::kExitConfig;
  } catch (const bfm::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return bfm::kExitData;
  } catch (const bfm::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return bfm::kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return bfm::kExitData;
  }
  return bfm::kExitConfig;
}
