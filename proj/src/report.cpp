#include "fedprune/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "fedprune/errors.hpp"

namespace fedprune {

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string cell_label(const SweepCell& c) {
  if (c.strategy == Strategy::standard) return "standard";
  return std::string(to_string(c.strategy)) + " q=" + fmt("%g", c.rate);
}

}  // namespace

std::string records_csv(const std::vector<CellResult>& results, bool wall_time) {
  std::string out = "round,strategy,q,map,uplink_bytes,downlink_bytes,pruned_fraction,wall_ms\n";
  for (const auto& r : results) {
    for (const RoundRecord& rec : r.records) {
      out += std::to_string(rec.round) + ',' + std::string(to_string(rec.strategy)) + ',' +
             fmt("%g", rec.rate) + ',' + fmt("%.6f", rec.map) + ',' +
             std::to_string(rec.uplink_bytes) + ',' + std::to_string(rec.downlink_bytes) + ',' +
             fmt("%.6f", rec.pruned_fraction) + ',' +
             fmt("%.3f", wall_time ? rec.wall_ms : 0.0) + '\n';
    }
  }
  return out;
}

std::string summary_csv(const std::vector<CellResult>& results) {
  std::vector<double> rates;
  for (const auto& r : results) {
    if (std::ranges::find(rates, r.cell.rate) == rates.end()) rates.push_back(r.cell.rate);
  }
  std::ranges::sort(rates);
  const Strategy order[] = {Strategy::standard, Strategy::random, Strategy::proposed};

  std::string out = "strategy";
  for (double q : rates) out += ',' + fmt("%g", q * 100.0);
  out += '\n';
  for (Strategy s : order) {
    std::map<double, double> final_map;
    for (const auto& r : results) {
      if (r.cell.strategy == s && !r.records.empty()) {
        final_map[r.cell.rate] = r.records.back().map;
      }
    }
    if (final_map.empty()) continue;
    out += std::string(to_string(s));
    for (double q : rates) {
      auto it = final_map.find(q);
      out += ',' + (it == final_map.end() ? std::string("-") : fmt("%.2f", it->second * 100.0));
    }
    out += '\n';
  }
  return out;
}

std::string map_vs_round_svg(const std::vector<CellResult>& results) {
  constexpr double kWidth = 760, kPanel = 260, kLeft = 80, kRight = 200, kTop = 30, kGap = 60;
  const double plot_w = kWidth - kLeft - kRight;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::size_t max_round = 1;
  double map_lo = 1.0, bytes_hi = 1.0;
  for (const auto& r : results) {
    for (const auto& rec : r.records) {
      max_round = std::max(max_round, rec.round);
      map_lo = std::min(map_lo, rec.map);
      bytes_hi = std::max(bytes_hi, static_cast<double>(rec.uplink_bytes));
    }
  }
  map_lo = std::floor(map_lo * 10.0) / 10.0;
  if (map_lo >= 1.0) map_lo = 0.9;

  const double height = kTop + 2 * kPanel + kGap + 40;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", kWidth) +
                    "\" height=\"" + fmt("%.0f", height) +
                    "\" font-family=\"sans-serif\" font-size=\"12\">\n"
                    "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  auto x_of = [&](std::size_t round) {
    return kLeft + (max_round == 1 ? 0.0
                                   : plot_w * static_cast<double>(round - 1) /
                                         static_cast<double>(max_round - 1));
  };
  auto panel = [&](double top, const std::string& title, double lo, double hi,
                   const char* tick_fmt, auto value_of) {
    svg += "<text x=\"" + fmt("%.0f", kLeft) + "\" y=\"" + fmt("%.0f", top - 8) + "\">" + title +
           "</text>\n";
    svg += "<rect x=\"" + fmt("%.0f", kLeft) + "\" y=\"" + fmt("%.0f", top) + "\" width=\"" +
           fmt("%.0f", plot_w) + "\" height=\"" + fmt("%.0f", kPanel) +
           "\" fill=\"none\" stroke=\"#444\"/>\n";
    auto y_of = [&](double v) { return top + kPanel * (1.0 - (v - lo) / (hi - lo)); };
    for (int t = 0; t <= 4; ++t) {
      const double v = lo + (hi - lo) * t / 4.0;
      svg += "<text x=\"" + fmt("%.0f", kLeft - 6) + "\" y=\"" + fmt("%.1f", y_of(v) + 4) +
             "\" text-anchor=\"end\">" + fmt(tick_fmt, v) + "</text>\n";
    }
    for (std::size_t round = 1; round <= max_round; ++round) {
      svg += "<text x=\"" + fmt("%.1f", x_of(round)) + "\" y=\"" + fmt("%.0f", top + kPanel + 16) +
             "\" text-anchor=\"middle\">" + std::to_string(round) + "</text>\n";
    }
    for (std::size_t i = 0; i < results.size(); ++i) {
      std::string pts;
      for (const auto& rec : results[i].records) {
        pts += fmt("%.1f", x_of(rec.round)) + ',' + fmt("%.1f", y_of(value_of(rec))) + ' ';
      }
      svg += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" +
             std::string(palette[i % std::size(palette)]) + "\" points=\"" + pts + "\"/>\n";
    }
  };
  panel(kTop, "test mAP vs communication round", map_lo, 1.0, "%.2f",
        [](const RoundRecord& r) { return r.map; });
  panel(kTop + kPanel + kGap, "uplink bytes per round", 0.0, bytes_hi * 1.05, "%.0f",
        [](const RoundRecord& r) { return static_cast<double>(r.uplink_bytes); });

  for (std::size_t i = 0; i < results.size(); ++i) {
    const double y = kTop + 12 + 18 * static_cast<double>(i);
    const double x = kWidth - kRight + 16;
    svg += "<line x1=\"" + fmt("%.0f", x) + "\" y1=\"" + fmt("%.0f", y - 4) + "\" x2=\"" +
           fmt("%.0f", x + 20) + "\" y2=\"" + fmt("%.0f", y - 4) + "\" stroke-width=\"2\" stroke=\"" +
           palette[i % std::size(palette)] + "\"/>\n";
    svg += "<text x=\"" + fmt("%.0f", x + 26) + "\" y=\"" + fmt("%.0f", y) + "\">" +
           cell_label(results[i].cell) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace fedprune
