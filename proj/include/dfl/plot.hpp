#pragma once

// SVG line charts built from run summaries: one chart per (dataset, attack,
// metric), x = poisoned node ratio, one series per aggregator, error bars
// of one standard deviation.

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace dfl {

struct ChartPoint {
  double pnr = 0.0;
  double mean = 0.0;
  double std = 0.0;
};

struct Chart {
  std::string dataset;
  std::string attack;
  std::string metric;
  std::map<std::string, std::vector<ChartPoint>> series;  // aggregator -> points sorted by pnr
};

/// Groups summaries into charts. Throws std::invalid_argument when summaries
/// of one (dataset, attack) group report different metric sets, or when two
/// summaries claim the same (aggregator, pnr) point.
std::vector<Chart> collect_charts(std::span<const std::filesystem::path> summaries);

std::string render_svg(const Chart& chart);

/// Writes <dataset>_<attack>_<metric>.svg files; returns their paths.
std::vector<std::filesystem::path> plot(std::span<const std::filesystem::path> summaries,
                                        const std::filesystem::path& out_dir);

}  // namespace dfl
