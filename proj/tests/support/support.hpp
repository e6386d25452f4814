#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cellmetry/error.hpp"
#include "cellmetry/skeleton.hpp"
#include "cellmetry/store.hpp"
#include "cellmetry/voxel_grid.hpp"

namespace cellmetry::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "cellmetry");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Code of the cellmetry::Error thrown by fn, or nullopt when nothing is thrown.
template <typename Fn>
std::optional<ErrorCode> error_code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

std::string read_bytes(const std::filesystem::path& path);

/// u8 {0,1} grid where each voxel is foreground with probability `density`.
VoxelGrid random_mask(const Extent& extent, double density, std::mt19937_64& rng);

/// Exhaustive nearest-foreground search, in squared voxel units.
std::vector<std::uint32_t> brute_force_squared_edt(const VoxelGrid& mask);

/// Voxels whose centre lies within `radius` of `centre`.
VoxelGrid digitized_ball(const Extent& extent, double radius, const std::array<double, 3>& centre);

/// Two-sample KS statistic by evaluating both empirical CDFs at every sample value.
double ks_oracle(const std::vector<double>& a, const std::vector<double>& b);

/// Adds a grid through the TIFF ingest path (boundary kinds also derive the membrane).
std::string add_grid(Project& project, const std::string& id, DatasetKind kind, const VoxelGrid& grid);

struct SyntheticCellOptions {
    std::size_t size = 64;
    std::size_t labels = 20;
    std::size_t filaments = 10;
    std::uint64_t seed = 7;
    double pixel_to_um = 0.016;
};

struct SyntheticCell {
    std::filesystem::path root;
    std::string name;
    VoxelGrid boundary;
    VoxelGrid nucleus;
    VoxelGrid granules;
    SkeletonDocument skeleton;
};

/// Ellipsoidal boundary (plus derived membrane), a spherical `nucleus` mask,
/// `granules` labelmap of spheres (some touching the nucleus or membrane) and a
/// `microtubules` filament set of straight-ish polylines inside the cell.
SyntheticCell build_synthetic_cell(const std::filesystem::path& parent, const std::string& name,
                                   const SyntheticCellOptions& options = {});

}  // namespace cellmetry::testing
