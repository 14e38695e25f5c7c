#pragma once

#include <span>
#include <vector>

#include "entropic_hedge/core.hpp"

namespace ehedge::detail {

/// Upper hull of the points (node_i, values_i), evaluated at every node.
std::vector<double> upper_hull_1d(const Grid1D& grid, std::span<const double> values);

/// Concave envelope of gridded 2D data evaluated at the grid nodes (row-major, y fastest).
std::vector<double> upper_hull_2d(const Grid1D& gx, const Grid1D& gy, std::span<const double> values);

}  // namespace ehedge::detail
