#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cellmetry/voxel_grid.hpp"

namespace cellmetry {

inline constexpr std::string_view kFormatVersion = "1.0.0";

struct ProjectMeta {
    std::string name;
    double pixel_to_um = 0.0;
    std::string version{kFormatVersion};
};

using BlockIndex = std::array<std::size_t, 3>;

/// Dataset ids are used as directory names and CSV column fragments:
/// `[A-Za-z0-9][A-Za-z0-9_-]*`, excluding the reserved `analysis` and `export`.
bool is_valid_dataset_id(std::string_view id);

/// Id of the distance map computed for `source_id`.
std::string distance_map_id(std::string_view source_id);

// A project directory `NAME.n5`:
//   attributes.json              project meta + dataset registry
//   <id>/attributes.json         DatasetMeta
//   <id>/<i>_<j>_<k>             raw little-endian block, x-fastest, no compression
//   analysis/ export/ export/meshes/
class Project {
public:
    static Project create(const std::filesystem::path& parent_dir, const std::string& name, double pixel_to_um);
    static Project open(const std::filesystem::path& root);

    const std::filesystem::path& root() const { return root_; }
    const ProjectMeta& meta() const { return meta_; }
    std::filesystem::path analysis_dir() const { return root_ / "analysis"; }
    std::filesystem::path export_dir() const { return root_ / "export"; }
    std::filesystem::path mesh_dir() const { return root_ / "export" / "meshes"; }
    std::filesystem::path dataset_dir(std::string_view id) const { return root_ / std::string(id); }

    /// Registry listing in insertion order.
    const std::vector<std::string>& dataset_ids() const { return registry_; }
    bool has_dataset(std::string_view id) const;
    DatasetMeta dataset(std::string_view id) const;
    std::vector<DatasetMeta> datasets() const;

    /// Writes `grid` block-wise. All-zero blocks produce no file. If a distance
    /// map was derived from this id earlier it becomes stale.
    std::string put_dataset(DatasetMeta meta, const VoxelGrid& grid);
    /// Same as put_dataset but overwrites an existing dataset of the same id.
    std::string replace_dataset(DatasetMeta meta, const VoxelGrid& grid);

    std::vector<std::byte> read_block(std::string_view id, const BlockIndex& block) const;
    VoxelGrid read_dataset(std::string_view id) const;
    void delete_dataset(std::string_view id);

    /// Rewrites `<id>/attributes.json` from `meta` (dimensions and type must not change).
    void update_meta(const DatasetMeta& meta);
    void mark_stale(std::string_view id);

    std::array<std::size_t, 3> block_grid(const DatasetMeta& meta) const;

private:
    Project(std::filesystem::path root, ProjectMeta meta, std::vector<std::string> registry)
        : root_(std::move(root)), meta_(std::move(meta)), registry_(std::move(registry)) {}

    void write_root_attributes() const;
    void write_blocks(const DatasetMeta& meta, const VoxelGrid& grid) const;
    void invalidate_dependents(std::string_view source_id);

    std::filesystem::path root_;
    ProjectMeta meta_;
    std::vector<std::string> registry_;
};

/// Writes `text` to `path` via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

/// UTC wall-clock timestamp with microsecond resolution.
std::string timestamp_now();

}  // namespace cellmetry
