#include "cellmetry/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "cellmetry/analysis.hpp"
#include "cellmetry/csv.hpp"
#include "cellmetry/diagnostics.hpp"
#include "cellmetry/error.hpp"

namespace cellmetry {

SeededSampler::SeededSampler(std::uint64_t seed) : engine_(seed) {}

std::uint64_t SeededSampler::below(std::uint64_t bound) {
    if (bound == 0) throw Error(ErrorCode::EmptyRegion, "cannot sample from an empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % bound;
}

std::vector<Voxel> random_positions(const VoxelGrid& boundary, const std::vector<const VoxelGrid*>& exclude,
                                    std::size_t n, std::uint64_t seed) {
    const Extent& e = boundary.extent();
    for (const auto* mask : exclude) {
        if (mask->extent() != e) throw Error(ErrorCode::DimensionMismatch, "exclusion mask differs from boundary grid");
    }
    auto admissible = [&](std::size_t i) {
        if (!boundary.is_foreground(i)) return false;
        return std::none_of(exclude.begin(), exclude.end(), [i](const VoxelGrid* m) { return m->is_foreground(i); });
    };
    std::uint64_t region = 0;
    for (std::size_t i = 0; i < e.voxels(); ++i) region += admissible(i) ? 1 : 0;
    if (region == 0) throw Error(ErrorCode::EmptyRegion, "boundary minus exclusions has no voxels");

    SeededSampler sampler(seed);
    std::vector<std::uint64_t> ranks(n);
    for (auto& r : ranks) r = sampler.below(region);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ranks[a] < ranks[b]; });

    std::vector<Voxel> out(n);
    std::size_t next = 0;
    std::uint64_t seen = 0;
    for (std::size_t i = 0; i < e.voxels() && next < n; ++i) {
        if (!admissible(i)) continue;
        while (next < n && ranks[order[next]] == seen) {
            out[order[next]] = {static_cast<std::int64_t>(i % e.nx), static_cast<std::int64_t>((i / e.nx) % e.ny),
                                static_cast<std::int64_t>(i / (e.nx * e.ny))};
            ++next;
        }
        ++seen;
    }
    return out;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) return 0.0;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() || j < b.size()) {
        double x;
        if (j >= b.size() || (i < a.size() && a[i] <= b[j])) {
            x = a[i];
        } else {
            x = b[j];
        }
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

std::string baseline_csv_name(std::string_view project, std::string_view labelmap, std::string_view target) {
    return std::string(project) + "_" + std::string(labelmap) + "_vs_" + std::string(target) + "_baseline.csv";
}

BaselineResult baseline_distances(Project& project, const std::string& labelmap_id, const std::string& target_id,
                                  const BaselineConfig& config) {
    if (config.samples == 0) throw Error(ErrorCode::InvalidMeta, "samples must be >= 1");
    const DatasetMeta labels_meta = project.dataset(labelmap_id);
    if (!is_label_kind(labels_meta.kind)) {
        throw Error(ErrorCode::InvalidMeta, "'" + labelmap_id + "' is not a labelmap");
    }
    if (!project.has_dataset(target_id)) throw Error(ErrorCode::UnknownTarget, "no component '" + target_id + "'");
    const std::string map_id = distance_map_id(target_id);
    if (!project.has_dataset(map_id)) {
        throw Error(ErrorCode::NoAnalysis, "no distance map for '" + target_id + "'; run the analysis first");
    }

    std::string boundary_id;
    for (const auto& meta : project.datasets()) {
        if (meta.kind == DatasetKind::boundary) {
            boundary_id = meta.id;
            break;
        }
    }
    if (boundary_id.empty()) throw Error(ErrorCode::EmptyRegion, "project has no boundary dataset");

    const VoxelGrid labels = project.read_dataset(labelmap_id);
    const VoxelGrid map = project.read_dataset(map_id);
    const VoxelGrid boundary = project.read_dataset(boundary_id);
    std::vector<VoxelGrid> excluded;
    excluded.reserve(config.exclude.size());
    for (const auto& id : config.exclude) excluded.push_back(project.read_dataset(id));
    std::vector<const VoxelGrid*> exclude_ptrs;
    for (const auto& g : excluded) exclude_ptrs.push_back(&g);

    BaselineResult result;
    for (const auto& [label, d] : label_target_distance(labels, map)) result.observed.push_back(csv_distance(d));
    if (result.observed.empty()) warn("labelmap '" + labelmap_id + "' has no labels; baseline is empty");

    result.positions = random_positions(boundary, exclude_ptrs, config.samples * result.observed.size(), config.seed);
    const auto values = map.values<float>();
    const Extent& e = map.extent();
    result.random.reserve(result.positions.size());
    for (const auto& v : result.positions) {
        result.random.push_back(csv_distance(values[e.index(static_cast<std::size_t>(v.x), static_cast<std::size_t>(v.y),
                                                            static_cast<std::size_t>(v.z))]));
    }
    result.ks_d = ks_statistic(result.observed, result.random);

    CsvTable table;
    table.header = {"kind", "distance_um"};
    for (double d : result.observed) table.rows.push_back({"observed", format_fixed6(d)});
    for (double d : result.random) table.rows.push_back({"random", format_fixed6(d)});
    char ks[64];
    std::snprintf(ks, sizeof ks, "%.12f", result.ks_d);
    table.rows.push_back({"ks_d", ks});
    table.rows.push_back({"seed", std::to_string(config.seed)});
    table.rows.push_back({"null_model", "point"});
    result.csv = project.analysis_dir() / baseline_csv_name(project.meta().name, labelmap_id, target_id);
    write_csv(result.csv, table);
    return result;
}

}  // namespace cellmetry
