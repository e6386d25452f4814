#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "cellmetry/store.hpp"
#include "cellmetry/tiff.hpp"
#include "cellmetry/voxel_grid.hpp"

namespace cellmetry {

/// Output voxels per input voxel along each axis.
struct ScaleSpec {
    double sx = 1.0;
    double sy = 1.0;
    double sz = 1.0;

    bool is_identity() const { return sx == 1.0 && sy == 1.0 && sz == 1.0; }
    Extent output_extent(const Extent& input) const;
    friend bool operator==(const ScaleSpec&, const ScaleSpec&) = default;
};

/// Scale that maps voxels of `input_size` (any unit) to isotropic voxels of
/// `target_size` (same unit). Ratios are rounded to 12 significant digits, so
/// decimal pixel sizes give the decimal factors users expect (4 nm -> 16 nm = 0.25).
ScaleSpec scale_for_pixel_size(const std::array<double, 3>& input_size, double target_size);

VoxelGrid grid_from_stack(const TiffStack& stack);

/// {0,1} and {0,255} (or a mix) map to a u8 {0,1} grid; anything else throws NotBinary.
VoxelGrid normalize_mask(const TiffStack& stack);
VoxelGrid normalize_mask(const VoxelGrid& grid);

/// Label ids are kept verbatim. u16 unless the largest id needs u32.
VoxelGrid normalize_labels(const TiffStack& stack);
VoxelGrid normalize_labels(const VoxelGrid& grid);

/// Nearest-neighbour resampling: output voxel x reads input floor((x + 0.5) / sx).
VoxelGrid rescale(const VoxelGrid& grid, const ScaleSpec& spec);
/// Trilinear resampling for intensity data, sampled at the same input positions.
VoxelGrid rescale_trilinear(const VoxelGrid& grid, const ScaleSpec& spec);

/// Voxels outside `boundary` with a face neighbour inside it. Throws EmptyBoundary.
VoxelGrid derive_membrane(const VoxelGrid& boundary);

inline constexpr std::string_view kMembraneId = "membrane";

struct ComponentSpec {
    std::filesystem::path path;
    DatasetKind kind = DatasetKind::mask;
    std::string id;
    Rgba color;
    ScaleSpec scale;
};

/// read -> normalize -> rescale -> put. A boundary also registers `membrane`.
std::string add_component(Project& project, const ComponentSpec& spec);
std::string add_component(Project& project, const ComponentSpec& spec, const TiffStack& stack);

/// Dimensions shared by every non-distance dataset already in the project, if any.
std::optional<Extent> project_extent(const Project& project);

}  // namespace cellmetry
