#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "scoopsim/rng.hpp"
#include "scoopsim/worldmodel.hpp"

namespace scoopsim {

// 1D overhead strip along the pushing axis.
struct OverheadGrid {
  static constexpr int kCells = 128;
  static constexpr double kHalfSpan = 0.125;  // m
  static constexpr double cell_size() { return 2.0 * kHalfSpan / kCells; }
  static double cell_center(int i) { return -kHalfSpan + (i + 0.5) * cell_size(); }

  std::vector<double> cells = std::vector<double>(kCells, 0.0);
};

// Side view from the spoon-mounted camera. Row 0 is the top of the image.
struct SideGrid {
  static constexpr int kWidth = 64;
  static constexpr int kHeight = 48;

  std::vector<double> pixels = std::vector<double>(kWidth * kHeight, 0.0);

  double at(int row, int col) const { return pixels[row * kWidth + col]; }
  double& at(int row, int col) { return pixels[row * kWidth + col]; }
  bool operator==(const SideGrid&) const = default;
};

inline constexpr double kSpoonIntensity = 0.15;
inline constexpr double kPusherIntensity = 0.25;

// Camera rigidly attached to the scooper. The window is expressed in the
// tool frame (world frame rotated by pitch - mount), with the origin at the
// lip; negative u looks out of the mouth toward the food and pusher.
struct SideCamera {
  double u_min = -0.10;
  double v_min = -0.01;
  double width = 0.12;
  double height = 0.09;
  bool flip_vertical = false;
};

// Albedo plus Gaussian noise truncated at 3 sigma, clamped to [0, 1].
OverheadGrid render_overhead(const WorldState& world, RandomStream& noise,
                             double sigma = 0.01);
// Noise-free side render; deterministic in the world alone.
SideGrid render_side(const WorldState& world, const SideCamera& camera = {});
SideGrid flip_vertical(const SideGrid& grid);

struct Segmentation {
  double x_f = 0.0;
  std::vector<std::uint8_t> mask;
};
// Threshold, keep the largest run (leftmost on ties), intensity-weighted
// centroid. Throws NoFoodDetected.
Segmentation segment_center(const OverheadGrid& grid, double threshold = 0.1);

// Overhead strip lifted to side-grid shape for the risk classifier: columns
// are resampled pairs of cells, rows are noisy copies.
SideGrid lift_overhead(const OverheadGrid& grid, RandomStream& noise, double sigma = 0.01);

inline constexpr int kPoolX = 4;
inline constexpr int kPoolY = 4;
inline constexpr int kFeatureCols = SideGrid::kWidth / kPoolX;   // 16
inline constexpr int kFeatureRows = SideGrid::kHeight / kPoolY;  // 12
inline constexpr int kFeatureDim = kFeatureCols * kFeatureRows;  // 192

std::vector<double> pool(const SideGrid& grid);

struct FeatureNorm {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool fitted() const { return !mean.empty() && mean.size() == stddev.size(); }
  static FeatureNorm fit(std::span<const std::vector<double>> pooled);
  bool operator==(const FeatureNorm&) const = default;
};

// Pooled and standardized features. Throws NormNotFitted.
std::vector<double> features(const SideGrid& grid, const FeatureNorm& norm);
std::vector<double> standardize(std::span<const double> pooled, const FeatureNorm& norm);

// 8-bit binary PGM (P5).
void write_pgm(const std::filesystem::path& path, std::span<const double> values, int width,
               int height);
std::vector<double> read_pgm(const std::filesystem::path& path, int& width, int& height);

}  // namespace scoopsim
