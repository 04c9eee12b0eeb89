#include "scoopsim/perception.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "scoopsim/errors.hpp"

namespace scoopsim {
namespace {

// Highest food surface above abscissa x, or nullopt when no item covers it.
struct Cover {
  double top;
  double albedo;
};

std::optional<Cover> top_surface(const WorldState& world, double x) {
  std::optional<Cover> best;
  for (const auto& it : world.items) {
    const auto& spec = world.spec_of(it);
    double top = 0.0;
    if (item_is_disc(world, it)) {
      const double r = item_radius(world, it);
      const double dx = x - it.pose.position.x;
      if (std::abs(dx) > r) continue;
      top = it.pose.position.z + std::sqrt(r * r - dx * dx);
    } else {
      const auto outline = item_outline(world, it);
      const auto span = vertical_span(outline, x);
      if (!span) continue;
      top = span->second;
    }
    if (!best || top > best->top) best = Cover{top, spec.albedo};
  }
  return best;
}

bool item_covers(const WorldState& world, const FoodItem& it, Vec2 q) {
  Vec2 c = it.pose.position;
  // Fragile items are drawn shortened along the pushing axis.
  if (it.compression > 0.0) {
    const double extent = shape_width(world.spec_of(it).shape, it.size_scale);
    const double shrink = std::min(it.compression, 0.9 * extent);
    q.x = c.x + (q.x - c.x) * extent / (extent - shrink);
  }
  if (item_is_disc(world, it)) return norm(q - c) <= item_radius(world, it);
  const auto outline = item_outline(world, it);
  return point_in_polygon(outline, q);
}

}  // namespace

OverheadGrid render_overhead(const WorldState& world, RandomStream& noise, double sigma) {
  OverheadGrid g;
  for (int i = 0; i < OverheadGrid::kCells; ++i) {
    const auto cover = top_surface(world, OverheadGrid::cell_center(i));
    const double v = (cover ? cover->albedo : 0.0) + sigma * std::clamp(noise.gaussian(), -3.0, 3.0);
    g.cells[i] = std::clamp(v, 0.0, 1.0);
  }
  return g;
}

SideGrid render_side(const WorldState& world, const SideCamera& cam) {
  SideGrid g;
  const ToolState& tools = world.tools;
  const Vec2 lip = tools.lip_point();
  const double frame_angle = tools.scooper.angle - tools.geometry.mount_angle;

  const auto inner = tools.spoon_inner();
  const auto outer = tools.spoon_outer();
  std::vector<std::vector<Vec2>> shell;
  for (std::size_t i = 0; i + 1 < inner.size(); ++i) {
    std::vector<Vec2> q{inner[i], inner[i + 1], outer[i + 1], outer[i]};
    make_ccw(q);
    shell.push_back(std::move(q));
  }
  const auto pusher = tools.pusher_quad();

  const double px = cam.width / SideGrid::kWidth;
  const double py = cam.height / SideGrid::kHeight;
  for (int row = 0; row < SideGrid::kHeight; ++row) {
    const int src_row = cam.flip_vertical ? SideGrid::kHeight - 1 - row : row;
    const double v = cam.v_min + cam.height - (src_row + 0.5) * py;
    for (int col = 0; col < SideGrid::kWidth; ++col) {
      const double u = cam.u_min + (col + 0.5) * px;
      const Vec2 q = lip + rotate({u, v}, frame_angle);
      double value = 0.0;
      bool spoon = false;
      for (const auto& quad : shell) {
        if (point_in_polygon(quad, q)) {
          spoon = true;
          break;
        }
      }
      if (spoon) {
        value = kSpoonIntensity;
      } else if (point_in_polygon(pusher, q)) {
        value = kPusherIntensity;
      } else {
        for (const auto& it : world.items) {
          if (item_covers(world, it, q)) value = world.spec_of(it).albedo;
        }
      }
      g.at(row, col) = value;
    }
  }
  return g;
}

SideGrid flip_vertical(const SideGrid& grid) {
  SideGrid out;
  for (int row = 0; row < SideGrid::kHeight; ++row) {
    for (int col = 0; col < SideGrid::kWidth; ++col) {
      out.at(row, col) = grid.at(SideGrid::kHeight - 1 - row, col);
    }
  }
  return out;
}

Segmentation segment_center(const OverheadGrid& grid, double threshold) {
  Segmentation s;
  s.mask.assign(grid.cells.size(), 0);
  int best_start = -1, best_len = 0;
  const int n = static_cast<int>(grid.cells.size());
  for (int i = 0; i < n;) {
    if (grid.cells[i] <= threshold) {
      ++i;
      continue;
    }
    int j = i;
    while (j < n && grid.cells[j] > threshold) ++j;
    if (j - i > best_len) {
      best_len = j - i;
      best_start = i;
    }
    i = j;
  }
  if (best_start < 0) throw ScoopError(ErrorKind::NoFoodDetected, "no cell above threshold");
  double wsum = 0.0, xsum = 0.0;
  for (int i = best_start; i < best_start + best_len; ++i) {
    s.mask[i] = 1;
    wsum += grid.cells[i];
    xsum += grid.cells[i] * OverheadGrid::cell_center(i);
  }
  s.x_f = xsum / wsum;
  return s;
}

SideGrid lift_overhead(const OverheadGrid& grid, RandomStream& noise, double sigma) {
  SideGrid g;
  const int ratio = OverheadGrid::kCells / SideGrid::kWidth;
  for (int col = 0; col < SideGrid::kWidth; ++col) {
    double sum = 0.0;
    for (int k = 0; k < ratio; ++k) sum += grid.cells[col * ratio + k];
    const double base = sum / ratio;
    for (int row = 0; row < SideGrid::kHeight; ++row) {
      g.at(row, col) = std::clamp(base + sigma * noise.gaussian(), 0.0, 1.0);
    }
  }
  return g;
}

std::vector<double> pool(const SideGrid& grid) {
  std::vector<double> out(kFeatureDim, 0.0);
  for (int r = 0; r < kFeatureRows; ++r) {
    for (int c = 0; c < kFeatureCols; ++c) {
      double sum = 0.0;
      for (int dy = 0; dy < kPoolY; ++dy) {
        for (int dx = 0; dx < kPoolX; ++dx) sum += grid.at(r * kPoolY + dy, c * kPoolX + dx);
      }
      out[r * kFeatureCols + c] = sum / (kPoolX * kPoolY);
    }
  }
  return out;
}

FeatureNorm FeatureNorm::fit(std::span<const std::vector<double>> pooled) {
  FeatureNorm n;
  if (pooled.empty()) return n;
  const std::size_t d = pooled.front().size();
  n.mean.assign(d, 0.0);
  n.stddev.assign(d, 0.0);
  for (const auto& v : pooled) {
    if (v.size() != d) throw ScoopError(ErrorKind::ShapeMismatch, "inconsistent feature length");
    for (std::size_t i = 0; i < d; ++i) n.mean[i] += v[i];
  }
  for (auto& m : n.mean) m /= static_cast<double>(pooled.size());
  for (const auto& v : pooled) {
    for (std::size_t i = 0; i < d; ++i) n.stddev[i] += (v[i] - n.mean[i]) * (v[i] - n.mean[i]);
  }
  for (auto& s : n.stddev) {
    s = std::sqrt(s / static_cast<double>(pooled.size()));
    if (s < 1e-6) s = 1.0;  // constant feature
  }
  return n;
}

std::vector<double> standardize(std::span<const double> pooled, const FeatureNorm& norm) {
  if (!norm.fitted()) throw ScoopError(ErrorKind::NormNotFitted, "feature norm not fitted");
  if (pooled.size() != norm.mean.size()) {
    throw ScoopError(ErrorKind::ShapeMismatch, "feature length " + std::to_string(pooled.size()) +
                                                   " vs norm " +
                                                   std::to_string(norm.mean.size()));
  }
  std::vector<double> out(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    out[i] = (pooled[i] - norm.mean[i]) / norm.stddev[i];
  }
  return out;
}

std::vector<double> features(const SideGrid& grid, const FeatureNorm& norm) {
  if (!norm.fitted()) throw ScoopError(ErrorKind::NormNotFitted, "feature norm not fitted");
  return standardize(pool(grid), norm);
}

void write_pgm(const std::filesystem::path& path, std::span<const double> values, int width,
               int height) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ScoopError(ErrorKind::MissingFile, "cannot write " + path.string());
  os << "P5\n" << width << ' ' << height << "\n255\n";
  std::string bytes(values.size(), '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    bytes[i] = static_cast<char>(
        static_cast<unsigned char>(std::lround(std::clamp(values[i], 0.0, 1.0) * 255.0)));
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<double> read_pgm(const std::filesystem::path& path, int& width, int& height) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ScoopError(ErrorKind::MissingFile, path.string());
  std::string magic;
  int maxval = 0;
  is >> magic >> width >> height >> maxval;
  if (magic != "P5" || width <= 0 || height <= 0 || maxval != 255) {
    throw ScoopError(ErrorKind::InvalidDataset, "not an 8-bit P5 PGM: " + path.string());
  }
  is.get();
  std::string bytes(static_cast<std::size_t>(width) * height, '\0');
  is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (is.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw ScoopError(ErrorKind::InvalidDataset, "truncated PGM: " + path.string());
  }
  std::vector<double> out(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    out[i] = static_cast<unsigned char>(bytes[i]) / 255.0;
  }
  return out;
}

}  // namespace scoopsim
