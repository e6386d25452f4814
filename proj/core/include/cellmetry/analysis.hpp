#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cellmetry/skeleton.hpp"
#include "cellmetry/store.hpp"
#include "cellmetry/voxel_grid.hpp"

namespace cellmetry {

inline constexpr std::size_t kGiB = std::size_t{1} << 30;
inline constexpr std::size_t kDefaultMemoryBudget = 4 * kGiB;

struct AnalysisConfig {
    double connected_threshold_um = 0.02;
    double filament_end_threshold_um = 0.02;
    bool skip_existing_distance_maps = false;
    std::size_t memory_budget_bytes = kDefaultMemoryBudget;
};

// Tracks bytes of large buffers held at once. reserve() throws
// OutOfMemoryBudget before the allocation would happen.
class MemoryBudget {
public:
    class Reservation {
    public:
        Reservation() = default;
        Reservation(MemoryBudget* owner, std::size_t bytes) : owner_(owner), bytes_(bytes) {}
        Reservation(Reservation&& other) noexcept : owner_(other.owner_), bytes_(other.bytes_) { other.owner_ = nullptr; }
        Reservation& operator=(Reservation&& other) noexcept;
        Reservation(const Reservation&) = delete;
        Reservation& operator=(const Reservation&) = delete;
        ~Reservation() { release(); }
        void release();

    private:
        MemoryBudget* owner_ = nullptr;
        std::size_t bytes_ = 0;
    };

    explicit MemoryBudget(std::size_t limit_bytes) : limit_(limit_bytes) {}

    Reservation reserve(std::size_t bytes, std::string_view purpose);
    std::size_t limit() const { return limit_; }
    std::size_t in_use() const;
    std::size_t peak() const;

private:
    mutable std::mutex mutex_;
    std::size_t limit_;
    std::size_t in_use_ = 0;
    std::size_t peak_ = 0;
};

struct SummaryStats {
    std::size_t count = 0;
    double mean = 0.0;
    double stdev = 0.0;  // sample (n - 1); 0 when count == 1
    double median = 0.0;
};

/// nullopt for an empty sample.
std::optional<SummaryStats> summarize_values(std::vector<double> values);

/// Voxel count per non-zero label, ascending by label.
std::map<std::uint32_t, std::uint64_t> label_voxel_counts(const VoxelGrid& labels);

struct LabelStatistics {
    std::map<std::uint32_t, std::uint64_t> voxels;
    std::optional<SummaryStats> size_um3;
};

LabelStatistics label_statistics(const VoxelGrid& labels, double pixel_to_um);

/// Minimum of `target_map` over the voxels of each label.
std::map<std::uint32_t, double> label_target_distance(const VoxelGrid& labels, const VoxelGrid& target_map);

/// Voxel whose centre is nearest to a µm position (voxel i has its centre at i * pixel_to_um), clamped.
Voxel nearest_voxel(const Point3& um, double pixel_to_um, const Extent& extent);

/// Rounds a distance to the six decimals written to CSV; connectivity is decided on this value.
double csv_distance(double distance_um);

struct TargetMap {
    std::string id;
    const VoxelGrid* map = nullptr;
};

struct LabelTargetRecord {
    double distance_um = 0.0;
    bool connected = false;
};

struct LabelRecord {
    std::uint32_t label = 0;
    std::uint64_t size_voxels = 0;
    double size_um3 = 0.0;
    std::vector<LabelTargetRecord> targets;  // parallel to the target list
};

std::vector<LabelRecord> label_records(const VoxelGrid& labels, const std::vector<TargetMap>& targets,
                                       double pixel_to_um, double connected_threshold_um);

struct FilamentTargetRecord {
    double end1_distance_um = 0.0;
    double end2_distance_um = 0.0;
    double distance_um = 0.0;  // min of the two ends
    bool connected = false;    // by the filament-end threshold
    std::optional<double> pixel_distance_um;  // over every rasterized voxel of the filament
    bool pixel_connected = false;             // by the label threshold
};

struct FilamentRecord {
    std::string id;
    double length_um = 0.0;
    std::optional<double> tortuosity;
    std::vector<FilamentTargetRecord> targets;
};

/// `filament_labels` may be null, in which case pixel distances are left empty.
std::vector<FilamentRecord> filament_analysis(const FilamentSet& filaments, const VoxelGrid* filament_labels,
                                              const std::vector<TargetMap>& targets, double pixel_to_um,
                                              const AnalysisConfig& config);

std::string labelmap_summary_csv_name(std::string_view project, std::string_view labelmap);
std::string labelmap_individual_csv_name(std::string_view project, std::string_view labelmap);

struct AnalysisResult {
    std::vector<std::string> maps_computed;
    std::vector<std::string> maps_reused;
    std::vector<std::string> skipped_components;  // no foreground
    std::vector<std::filesystem::path> csv_files;
    std::size_t peak_bytes = 0;
};

/// Distance maps for every component, then per-labelmap and per-filament-set
/// tables in `analysis/`.
AnalysisResult run_analysis(Project& project, const AnalysisConfig& config);

}  // namespace cellmetry
