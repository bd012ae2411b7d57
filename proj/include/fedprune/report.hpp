#pragma once

#include <string>
#include <vector>

#include "fedprune/config.hpp"
#include "fedprune/federation.hpp"

namespace fedprune {

struct CellResult {
  SweepCell cell;
  std::vector<RoundRecord> records;
};

/// Header round,strategy,q,map,uplink_bytes,downlink_bytes,pruned_fraction,wall_ms.
/// With `wall_time` unset the wall_ms column is written as 0 so the file is a
/// pure function of the configuration.
std::string records_csv(const std::vector<CellResult>& results, bool wall_time);

/// Final-round mAP (%) per strategy and pruning rate (%), "-" for cells that
/// were not run.
std::string summary_csv(const std::vector<CellResult>& results);

/// Two stacked line charts: test mAP and uplink bytes per round, one line
/// per cell.
std::string map_vs_round_svg(const std::vector<CellResult>& results);

void write_text(const std::string& path, const std::string& text);

}  // namespace fedprune
