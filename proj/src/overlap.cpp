#include "obs360/overlap.hpp"

#include <algorithm>
#include <cmath>

namespace obs360 {

namespace {

int positive_mod(int x, int y) { return ((x % y) + y) % y; }

double clamp_pitch(double p) { return std::min(std::max(p, -90.0), 90.0); }

// Length of [a1, a2] ∩ [b1, b2].
double overlap_1d(double a1, double a2, double b1, double b2) {
  return std::max(0.0, std::min(a2, b2) - std::max(a1, b1));
}

// Overlap of the wrapped yaw interval starting at `left` with width
// `width` (width <= 360) against the plain interval [b1, b2] in
// [-180, 180].
double yaw_overlap(double left, double width, double b1, double b2) {
  double total = overlap_1d(left, std::min(left + width, 180.0), b1, b2);
  if (left + width > 180.0)
    total += overlap_1d(-180.0, left + width - 360.0, b1, b2);
  return total;
}

}  // namespace

double wrap_yaw(double yaw_deg) {
  double y = std::fmod(yaw_deg + 180.0, 360.0);
  if (y < 0) y += 360.0;
  return y - 180.0;
}

int tile_index(int row, int col, int ref_row, int ref_col, const TileGrid& grid) {
  if (row < 1 || row > grid.rows || ref_row < 1 || ref_row > grid.rows)
    throw std::invalid_argument("tile_index: row outside 1..rows");
  if (col < 1 || col > grid.cols || ref_col < 1 || ref_col > grid.cols)
    throw std::invalid_argument("tile_index: col outside 1..cols");
  return grid.cols * positive_mod(row - ref_row, grid.rows) +
         positive_mod(col - ref_col, grid.cols) + 1;
}

std::pair<int, int> reference_corner_tile(double pitch_deg, double yaw_deg,
                                          double fov_vertical_deg,
                                          double fov_horizontal_deg,
                                          const TileGrid& grid) {
  const double top = clamp_pitch(pitch_deg + fov_vertical_deg / 2.0);
  const double left = wrap_yaw(yaw_deg - fov_horizontal_deg / 2.0);
  int m0 = static_cast<int>(std::floor((90.0 - top) / grid.tile_height_deg())) + 1;
  int n0 = static_cast<int>(std::floor((left + 180.0) / grid.tile_width_deg())) + 1;
  m0 = std::min(std::max(m0, 1), grid.rows);
  n0 = std::min(std::max(n0, 1), grid.cols);
  return {m0, n0};
}

OverlapMap overlap_fractions(const ViewportTrace& user, const ViewportTrace& reference,
                             const TileGrid& grid) {
  user.validate();
  reference.validate();
  if (user.segments() != reference.segments())
    throw ValidationError("overlap_fractions: user and reference trace lengths differ");

  const int segments = user.segments();
  const int K = grid.tiles();
  const double dp = grid.tile_height_deg();
  const double dy = grid.tile_width_deg();

  OverlapMap map;
  map.omega = Eigen::MatrixXd::Zero(segments, K);

  for (int i = 0; i < segments; ++i) {
    const auto [m0, n0] = reference_corner_tile(reference.pitch_deg(i), reference.yaw_deg(i),
                                                reference.fov_vertical_deg,
                                                reference.fov_horizontal_deg, grid);

    const double p_hi = clamp_pitch(user.pitch_deg(i) + user.fov_vertical_deg / 2.0);
    const double p_lo = clamp_pitch(user.pitch_deg(i) - user.fov_vertical_deg / 2.0);
    const double width = std::min(user.fov_horizontal_deg, 360.0);
    const double y_left = wrap_yaw(user.yaw_deg(i) - width / 2.0);

    for (int m = 1; m <= grid.rows; ++m) {
      const double row_top = 90.0 - (m - 1) * dp;
      const double row_bot = 90.0 - m * dp;
      const double pov = overlap_1d(p_lo, p_hi, row_bot, row_top);
      if (pov <= 0) continue;
      for (int n = 1; n <= grid.cols; ++n) {
        const double col_l = -180.0 + (n - 1) * dy;
        const double yov = (width >= 360.0) ? dy : yaw_overlap(y_left, width, col_l, col_l + dy);
        if (yov <= 0) continue;
        const int k = tile_index(m, n, m0, n0, grid);
        map.omega(i, k - 1) = (pov * yov) / (dp * dy);
      }
    }
  }
  return map;
}

}  // namespace obs360
