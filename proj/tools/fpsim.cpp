// fpsim: federated training with relevance-guided pruning.
//
//   fpsim run <config.json> --outdir D [--parallel] [--seed S] [--record-wall-time]
//   fpsim validate <config.json>

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "fedprune/checkpoint.hpp"
#include "fedprune/config.hpp"
#include "fedprune/errors.hpp"
#include "fedprune/parallel.hpp"
#include "fedprune/report.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

std::string cell_stem(const fedprune::SweepCell& cell) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_q%.2f", std::string(fedprune::to_string(cell.strategy)).c_str(),
                cell.rate);
  return buf;
}

int run(const std::string& config_path, const std::string& outdir, bool parallel,
        std::optional<std::uint64_t> seed, bool wall_time) {
  using namespace fedprune;
  SweepConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  }
  if (seed) cfg.base.federation.seed = *seed;

  try {
    std::filesystem::create_directories(outdir);
    const auto cells = cfg.cells();
    const std::size_t threads = default_thread_count();
    cfg.base.threads = parallel ? 1 : threads;

    std::vector<CellResult> results(cells.size());
    parallel_for(cells.size(), parallel ? threads : 1, [&](std::size_t i) {
      const ExperimentConfig ec = cfg.cell_config(cells[i]);
      ExperimentResult r = run_experiment(ec);
      save_checkpoint(r.final_model, outdir + "/" + cell_stem(cells[i]) + ".fpnn");
      results[i] = {cells[i], std::move(r.records)};
    });

    write_text(outdir + "/records.csv", records_csv(results, wall_time));
    write_text(outdir + "/summary.csv", summary_csv(results));
    write_text(outdir + "/map_vs_round.svg", map_vs_round_svg(results));
    std::cout << summary_csv(results);
  } catch (const std::exception& e) {
    std::cerr << "fpsim: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}

int validate(const std::string& config_path) {
  try {
    const auto cfg = fedprune::load_config(config_path);
    std::cout << fedprune::normalized_config(cfg);
    return 0;
  } catch (const fedprune::Error& e) {
    std::cerr << config_path << ": " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with relevance-guided pruning"};
  app.require_subcommand(1);

  std::string run_config, outdir;
  bool parallel = false, wall_time = false;
  std::optional<std::uint64_t> seed;
  auto* run_cmd = app.add_subcommand("run", "Run every strategy/rate cell of a config");
  run_cmd->add_option("config", run_config, "JSON configuration")->required();
  run_cmd->add_option("--outdir", outdir, "Output directory")->required();
  run_cmd->add_flag("--parallel", parallel, "Run sweep cells concurrently");
  run_cmd->add_option("--seed", seed, "Override the configured seed");
  run_cmd->add_flag("--record-wall-time", wall_time,
                    "Write measured round times into records.csv");

  std::string validate_config;
  auto* validate_cmd = app.add_subcommand("validate", "Check a config and print it with defaults");
  validate_cmd->add_option("config", validate_config, "JSON configuration")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*run_cmd) return run(run_config, outdir, parallel, seed, wall_time);
  return validate(validate_config);
}
