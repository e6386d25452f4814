#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cellmetry/ingest.hpp"
#include "cellmetry/store.hpp"
#include "cellmetry/voxel_grid.hpp"

namespace cellmetry {

using Point3 = std::array<double, 3>;

struct SkeletonNode {
    std::int64_t id = 0;
    Point3 position{};  // annotation voxel units
};

struct SkeletonEdge {
    std::int64_t source = 0;
    std::int64_t target = 0;
};

struct Thing {
    std::int64_t id = 0;
    std::vector<SkeletonNode> nodes;
    std::vector<SkeletonEdge> edges;
};

struct SkeletonDocument {
    std::vector<Thing> things;
    std::optional<std::int64_t> boundary_z;  // z-extent declared in <parameters><boundary z=.../>
};

/// Knossos-style XML: <thing id> elements with <nodes><node id x y z/></nodes>
/// and <edges><edge source target/></edges>. Self-loops are dropped; unknown
/// elements are ignored.
SkeletonDocument parse_skeleton_xml(const std::filesystem::path& path);
SkeletonDocument parse_skeleton_xml_string(std::string_view xml);

/// Slices missing at the start of the annotation: the project z-extent in
/// annotation units minus the declared boundary_z, never negative. Without a
/// declared extent the offset is 0 and a warning is emitted.
std::int64_t compute_z_offset(const SkeletonDocument& doc, std::size_t project_nz, double scale_z);

using NodePath = std::vector<std::int64_t>;

/// Splits a thing into maximal unbranched paths (see README for the rules):
/// free ends within one annotation voxel of each other are joined first, nodes
/// of degree >= 3 split paths, pure cycles are broken at their lowest node id,
/// and each path starts at the lexicographically smaller endpoint position.
/// The result does not depend on the order of the thing's edge list.
std::vector<NodePath> reconstruct_filaments(const Thing& thing);

struct Filament {
    std::string id;
    std::vector<Point3> points;  // µm
};

using FilamentSet = std::vector<Filament>;

double filament_length(const Filament& filament);
/// Arc length over chord; nullopt when the chord is shorter than 1e-9 µm.
std::optional<double> filament_tortuosity(const Filament& filament);

inline constexpr double kDefaultFilamentRadiusUm = 0.0125;

struct FilamentImportSpec {
    ScaleSpec scale;
    std::optional<std::int64_t> z_offset;  // nullopt: derive from the document
    double radius_um = kDefaultFilamentRadiusUm;
};

/// Rounds a coordinate to the precision stored in filaments.yaml.
double quantize_um(double value);

/// Converts a document to µm filaments without touching a project.
FilamentSet build_filaments(const SkeletonDocument& doc, std::int64_t z_offset, const ScaleSpec& scale,
                            double pixel_to_um);

std::string format_filaments_yaml(const FilamentSet& filaments);
FilamentSet parse_filaments_yaml(std::string_view text);
FilamentSet read_filaments_yaml(const std::filesystem::path& path);

/// Filament k (1-based position in `filaments`) is drawn with value k: every
/// voxel whose centre lies within `radius_um` of a segment, plus the voxel
/// nearest to each point sampled every half voxel along the segment. Where
/// filaments overlap, the lower ordinal wins.
VoxelGrid rasterize_filaments(const FilamentSet& filaments, const Extent& extent, double pixel_to_um,
                              double radius_um);

struct FilamentImport {
    FilamentSet filaments;
    std::string dataset_id;
};

/// Registers a filaments_labels dataset `name` and writes `<name>/filaments.yaml`.
FilamentImport import_filaments(Project& project, const SkeletonDocument& doc, const FilamentImportSpec& spec,
                                const std::string& name, Rgba color = {255, 255, 0, 255});

inline constexpr std::string_view kFilamentsFile = "filaments.yaml";

}  // namespace cellmetry
