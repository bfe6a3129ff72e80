#pragma once

#include "obs360/types.hpp"

namespace obs360 {

// Tile index of grid cell (row, col) relative to the reference FoV whose
// top-left tile is (ref_row, ref_col). All arguments 1-based; the result
// is 1-based and ranges over 1..rows*cols. The reference tile itself maps
// to 1 and indices grow left to right, then row by row, wrapping in both
// directions.
int tile_index(int row, int col, int ref_row, int ref_col, const TileGrid& grid);

// Grid cell (1-based row, col) containing the top-left corner of the FoV
// rectangle centered at (pitch, yaw). A corner exactly on a seam belongs
// to the tile that has it as its own top-left corner.
std::pair<int, int> reference_corner_tile(double pitch_deg, double yaw_deg,
                                          double fov_vertical_deg,
                                          double fov_horizontal_deg,
                                          const TileGrid& grid);

// Fraction of each tile's area covered by the user FoV, per segment, with
// tiles numbered relative to the reference FoV of the same segment. The
// FoV is an axis-aligned rectangle on the equirectangular frame: yaw wraps
// at +-180, pitch is clamped at the poles.
OverlapMap overlap_fractions(const ViewportTrace& user, const ViewportTrace& reference,
                             const TileGrid& grid);

// Yaw normalized to [-180, 180).
double wrap_yaw(double yaw_deg);

}  // namespace obs360
