#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cellmetry/store.hpp"
#include "cellmetry/voxel_grid.hpp"

namespace cellmetry {

struct TriangleMesh {
    std::vector<std::array<double, 3>> vertices;  // µm
    std::vector<std::array<std::uint32_t, 3>> triangles;
};

/// Isosurface of the foreground of `mask` (any non-zero voxel counts as 1).
/// The grid is treated as zero-padded by one voxel, so surfaces always close.
/// Vertex i sits at voxel-centre coordinates times `pixel_to_um`.
TriangleMesh marching_cubes(const VoxelGrid& mask, double pixel_to_um, double isolevel = 0.5);

/// Mesh of the voxels of one label only.
TriangleMesh marching_cubes_label(const VoxelGrid& labels, std::uint32_t label, double pixel_to_um);

double surface_area(const TriangleMesh& mesh);
double signed_volume(const TriangleMesh& mesh);
/// Every undirected edge is used by exactly two triangles, once in each direction.
bool is_closed_and_oriented(const TriangleMesh& mesh);
std::size_t connected_components(const TriangleMesh& mesh);
long euler_characteristic(const TriangleMesh& mesh);

struct StlTriangle {
    std::array<float, 3> normal;
    std::array<std::array<float, 3>, 3> vertices;
    friend bool operator==(const StlTriangle&, const StlTriangle&) = default;
};

std::vector<StlTriangle> to_stl_triangles(const TriangleMesh& mesh);
std::string encode_stl(const std::vector<StlTriangle>& triangles);
std::vector<StlTriangle> decode_stl(std::string_view bytes);
void write_stl(const std::filesystem::path& path, const TriangleMesh& mesh);
std::vector<StlTriangle> read_stl(const std::filesystem::path& path);

/// Comma-separated substrings; blank entries are dropped.
std::vector<std::string> split_selection(std::string_view comma_list);

/// True when `id` contains some include entry (or include is empty) and no exclude entry.
bool is_selected(std::string_view id, const std::vector<std::string>& include, const std::vector<std::string>& exclude);

struct MeshExportOptions {
    std::vector<std::string> include;
    std::vector<std::string> exclude;
    bool split_labels = false;
};

struct MeshExportResult {
    std::vector<std::filesystem::path> stl_files;
    std::filesystem::path scene;
};

/// Writes `export/meshes/<id>.stl` per selected component (labelmaps as one
/// merged mesh, or `<id>_<label>.stl` per label when split) and `scene.json`.
MeshExportResult export_meshes(Project& project, const MeshExportOptions& options);

}  // namespace cellmetry
