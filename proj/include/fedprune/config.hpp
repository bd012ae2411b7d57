#pragma once

#include <string>
#include <vector>

#include "fedprune/federation.hpp"

namespace fedprune {

/// One experiment cell of a sweep.
struct SweepCell {
  Strategy strategy = Strategy::standard;
  double rate = 0.0;
};

/// A JSON run configuration: shared federation/data settings plus the
/// strategies and pruning rates to sweep.
struct SweepConfig {
  ExperimentConfig base;
  std::vector<Strategy> strategies{Strategy::standard, Strategy::random, Strategy::proposed};
  std::vector<double> rates{0.1, 0.2, 0.3, 0.4};

  /// standard contributes one cell at rate 0; random and proposed one cell
  /// per rate, in the order listed.
  std::vector<SweepCell> cells() const;
  ExperimentConfig cell_config(const SweepCell& cell) const;
};

/// Parses and validates a configuration document. Unknown keys, wrong types
/// and out-of-range values raise ConfigError carrying the 1-based line of
/// the offending key when it can be located.
SweepConfig parse_config(const std::string& text);
SweepConfig load_config(const std::string& path);

/// Effective configuration, defaults filled in, as pretty-printed JSON.
std::string normalized_config(const SweepConfig& config);

}  // namespace fedprune
