#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "cellmetry/store.hpp"
#include "cellmetry/voxel_grid.hpp"

namespace cellmetry {

struct BaselineConfig {
    std::size_t samples = 10;  // random placements per observed label
    std::uint64_t seed = 0;
    std::vector<std::string> exclude;  // dataset ids whose foreground is off limits
};

/// Uniform in [0, bound) from a mt19937_64 stream by rejection, so the
/// sequence is identical on every standard library.
class SeededSampler {
public:
    explicit SeededSampler(std::uint64_t seed);
    std::uint64_t below(std::uint64_t bound);

private:
    std::mt19937_64 engine_;
};

/// `n` voxels drawn uniformly with replacement from boundary minus every
/// excluded foreground: draw ranks in the admissible set, then one counting
/// sweep over the grid maps ranks to voxels. Returned in draw order.
std::vector<Voxel> random_positions(const VoxelGrid& boundary, const std::vector<const VoxelGrid*>& exclude,
                                    std::size_t n, std::uint64_t seed);

/// Two-sample Kolmogorov-Smirnov statistic; 0 when either sample is empty.
double ks_statistic(std::vector<double> a, std::vector<double> b);

struct BaselineResult {
    std::vector<double> observed;
    std::vector<double> random;
    std::vector<Voxel> positions;
    double ks_d = 0.0;
    std::filesystem::path csv;
};

std::string baseline_csv_name(std::string_view project, std::string_view labelmap, std::string_view target);

/// Observed per-label distances to `target` against distances at
/// samples x label_count random admissible voxels. Needs the target's distance map.
BaselineResult baseline_distances(Project& project, const std::string& labelmap_id, const std::string& target_id,
                                  const BaselineConfig& config);

}  // namespace cellmetry
