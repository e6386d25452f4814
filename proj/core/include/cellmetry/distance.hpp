#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "cellmetry/voxel_grid.hpp"

namespace cellmetry {

inline constexpr std::uint32_t kUnreachable = std::numeric_limits<std::uint32_t>::max();

/// Squared Euclidean distance (in voxel units) from every voxel centre to the
/// nearest non-zero voxel of `source`. Three separable lower-envelope passes;
/// every intermediate value is an exact integer. Throws EmptyComponent when
/// `source` has no foreground.
std::vector<std::uint32_t> squared_distance_transform(const VoxelGrid& source);

/// f32 map of sqrt(squared distance) * pixel_to_um; exactly 0 on the foreground.
VoxelGrid distance_transform(const VoxelGrid& source, double pixel_to_um);

/// Peak bytes held by distance_transform for a grid of this shape and type,
/// including the source itself.
std::size_t distance_transform_bytes(const Extent& extent, DataType source_type);

}  // namespace cellmetry
