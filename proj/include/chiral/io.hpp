#pragma once

#include <chiral/scan.hpp>

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace chiral {

constexpr double kDecibelFloor = -80.0;

/// 10 log10(p) clamped below at `floor`.
double to_db(double power, double floor = kDecibelFloor);

/// Map table as stored on disk: rows run from the largest z down.
struct MapTable {
  std::vector<double> x_mm;
  std::vector<double> z_mm;  // one per row, top row first
  Eigen::MatrixXd values;    // (row, col) in file order
};

MapTable to_table(const ScanMap& map, bool decibels);

/// First line "z_mm\x_mm,x0,x1,...", then one line per row "z,v0,v1,...".
void write_map_csv(const std::filesystem::path& path, const MapTable& table);
/// Throws ConfigError on malformed input.
MapTable read_map_csv(const std::filesystem::path& path);

/// Plain-text graymap: linear power mapped from [floor, 0] dB to [0, 255],
/// each cell drawn as a block x block square.
std::string render_pgm(const MapTable& linear_power, int block = 16);

}  // namespace chiral
