#include "cellmetry/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>

#include "cellmetry/csv.hpp"
#include "cellmetry/diagnostics.hpp"
#include "cellmetry/distance.hpp"
#include "cellmetry/error.hpp"

namespace cellmetry {
namespace {

std::string mib(std::size_t bytes) { return std::to_string((bytes + (1u << 20) - 1) >> 20) + " MiB"; }

void append_stats(CsvTable& table, std::string_view prefix, const std::optional<SummaryStats>& stats) {
    if (!stats) return;
    table.rows.push_back({std::string(prefix) + "_mean", format_fixed6(stats->mean)});
    table.rows.push_back({std::string(prefix) + "_stdev", format_fixed6(stats->stdev)});
    table.rows.push_back({std::string(prefix) + "_median", format_fixed6(stats->median)});
}

}  // namespace

MemoryBudget::Reservation& MemoryBudget::Reservation::operator=(Reservation&& other) noexcept {
    if (this != &other) {
        release();
        owner_ = other.owner_;
        bytes_ = other.bytes_;
        other.owner_ = nullptr;
    }
    return *this;
}

void MemoryBudget::Reservation::release() {
    if (!owner_) return;
    std::lock_guard lock(owner_->mutex_);
    owner_->in_use_ -= bytes_;
    owner_ = nullptr;
}

MemoryBudget::Reservation MemoryBudget::reserve(std::size_t bytes, std::string_view purpose) {
    std::lock_guard lock(mutex_);
    if (bytes > limit_ || in_use_ > limit_ - bytes) {
        throw Error(ErrorCode::OutOfMemoryBudget, std::string(purpose) + " needs " + mib(bytes) + " with " +
                                                      mib(in_use_) + " already held; budget is " + mib(limit_));
    }
    in_use_ += bytes;
    peak_ = std::max(peak_, in_use_);
    return Reservation(this, bytes);
}

std::size_t MemoryBudget::in_use() const {
    std::lock_guard lock(mutex_);
    return in_use_;
}

std::size_t MemoryBudget::peak() const {
    std::lock_guard lock(mutex_);
    return peak_;
}

std::optional<SummaryStats> summarize_values(std::vector<double> values) {
    if (values.empty()) return std::nullopt;
    SummaryStats s;
    s.count = values.size();
    std::sort(values.begin(), values.end());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.count);
    if (s.count > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stdev = std::sqrt(ss / static_cast<double>(s.count - 1));
    }
    const std::size_t mid = s.count / 2;
    s.median = s.count % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
    return s;
}

std::map<std::uint32_t, std::uint64_t> label_voxel_counts(const VoxelGrid& labels) {
    std::map<std::uint32_t, std::uint64_t> counts;
    labels.visit([&](const auto& values) {
        for (auto v : values) {
            if (v != 0) ++counts[static_cast<std::uint32_t>(v)];
        }
    });
    return counts;
}

LabelStatistics label_statistics(const VoxelGrid& labels, double pixel_to_um) {
    LabelStatistics stats;
    stats.voxels = label_voxel_counts(labels);
    const double voxel_um3 = pixel_to_um * pixel_to_um * pixel_to_um;
    std::vector<double> sizes;
    sizes.reserve(stats.voxels.size());
    for (const auto& [label, count] : stats.voxels) sizes.push_back(static_cast<double>(count) * voxel_um3);
    stats.size_um3 = summarize_values(std::move(sizes));
    return stats;
}

std::map<std::uint32_t, double> label_target_distance(const VoxelGrid& labels, const VoxelGrid& target_map) {
    if (labels.extent() != target_map.extent()) {
        throw Error(ErrorCode::DimensionMismatch, "labelmap " + to_string(labels.extent()) +
                                                      " vs distance map " + to_string(target_map.extent()));
    }
    const auto map = target_map.values<float>();
    std::map<std::uint32_t, float> best;
    labels.visit([&](const auto& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            const auto label = static_cast<std::uint32_t>(values[i]);
            if (label == 0) continue;
            auto [it, inserted] = best.try_emplace(label, map[i]);
            if (!inserted && map[i] < it->second) it->second = map[i];
        }
    });
    std::map<std::uint32_t, double> out;
    for (const auto& [label, d] : best) out[label] = static_cast<double>(d);
    return out;
}

Voxel nearest_voxel(const Point3& um, double pixel_to_um, const Extent& extent) {
    auto axis = [&](double v, std::size_t n) {
        const auto i = std::llround(v / pixel_to_um);
        return std::clamp<std::int64_t>(i, 0, static_cast<std::int64_t>(n) - 1);
    };
    return {axis(um[0], extent.nx), axis(um[1], extent.ny), axis(um[2], extent.nz)};
}

double csv_distance(double distance_um) {
    return parse_number(format_fixed6(distance_um)).value_or(distance_um);
}

std::vector<LabelRecord> label_records(const VoxelGrid& labels, const std::vector<TargetMap>& targets,
                                       double pixel_to_um, double connected_threshold_um) {
    const auto counts = label_voxel_counts(labels);
    const double voxel_um3 = pixel_to_um * pixel_to_um * pixel_to_um;
    std::vector<LabelRecord> records;
    records.reserve(counts.size());
    for (const auto& [label, count] : counts) {
        records.push_back({label, count, static_cast<double>(count) * voxel_um3, {}});
    }
    for (const auto& target : targets) {
        const auto distances = label_target_distance(labels, *target.map);
        for (auto& r : records) {
            const double d = csv_distance(distances.at(r.label));
            r.targets.push_back({d, d <= connected_threshold_um});
        }
    }
    return records;
}

std::vector<FilamentRecord> filament_analysis(const FilamentSet& filaments, const VoxelGrid* filament_labels,
                                              const std::vector<TargetMap>& targets, double pixel_to_um,
                                              const AnalysisConfig& config) {
    std::vector<FilamentRecord> records;
    records.reserve(filaments.size());
    for (const auto& f : filaments) {
        records.push_back({f.id, filament_length(f), filament_tortuosity(f), {}});
    }
    for (const auto& target : targets) {
        const Extent& e = target.map->extent();
        const auto map = target.map->values<float>();
        std::map<std::uint32_t, double> pixel;
        if (filament_labels) pixel = label_target_distance(*filament_labels, *target.map);
        for (std::size_t k = 0; k < filaments.size(); ++k) {
            const auto& pts = filaments[k].points;
            auto sample = [&](const Point3& p) {
                const Voxel v = nearest_voxel(p, pixel_to_um, e);
                return csv_distance(map[e.index(static_cast<std::size_t>(v.x), static_cast<std::size_t>(v.y),
                                                static_cast<std::size_t>(v.z))]);
            };
            FilamentTargetRecord r;
            r.end1_distance_um = sample(pts.front());
            r.end2_distance_um = sample(pts.back());
            r.distance_um = std::min(r.end1_distance_um, r.end2_distance_um);
            r.connected = r.distance_um <= config.filament_end_threshold_um;
            if (auto it = pixel.find(static_cast<std::uint32_t>(k + 1)); it != pixel.end()) {
                r.pixel_distance_um = csv_distance(it->second);
                r.pixel_connected = *r.pixel_distance_um <= config.connected_threshold_um;
            }
            records[k].targets.push_back(r);
        }
    }
    std::sort(records.begin(), records.end(), [](const FilamentRecord& a, const FilamentRecord& b) { return a.id < b.id; });
    return records;
}

std::string labelmap_summary_csv_name(std::string_view project, std::string_view labelmap) {
    return std::string(project) + "_" + std::string(labelmap) + ".csv";
}

std::string labelmap_individual_csv_name(std::string_view project, std::string_view labelmap) {
    return std::string(project) + "_" + std::string(labelmap) + "_individual.csv";
}

AnalysisResult run_analysis(Project& project, const AnalysisConfig& config) {
    if (!(config.connected_threshold_um > 0.0) || !(config.filament_end_threshold_um > 0.0)) {
        throw Error(ErrorCode::InvalidMeta, "analysis thresholds must be > 0");
    }
    AnalysisResult result;
    MemoryBudget budget(config.memory_budget_bytes);
    const double pixel = project.meta().pixel_to_um;

    std::vector<DatasetMeta> components;
    for (const auto& meta : project.datasets()) {
        if (is_component(meta.kind)) {
            components.push_back(meta);
        } else if (meta.kind == DatasetKind::distance_map && meta.distance_map &&
                   !project.has_dataset(meta.distance_map->source_dataset)) {
            project.delete_dataset(meta.id);
        }
    }
    if (components.empty()) throw Error(ErrorCode::NoSuchDataset, "project has no components to analyze");
    std::sort(components.begin(), components.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

    std::vector<std::string> mapped;
    for (std::size_t c = 0; c < components.size(); ++c) {
        const DatasetMeta& comp = components[c];
        const std::string map_id = distance_map_id(comp.id);
        progress("distance_maps", static_cast<int>(100 * c / components.size()));
        if (config.skip_existing_distance_maps && project.has_dataset(map_id)) {
            const DatasetMeta existing = project.dataset(map_id);
            if (existing.distance_map && !existing.distance_map->stale &&
                existing.distance_map->source_dataset == comp.id && existing.dimensions == comp.dimensions) {
                result.maps_reused.push_back(map_id);
                mapped.push_back(comp.id);
                continue;
            }
        }
        auto hold = budget.reserve(distance_transform_bytes(comp.dimensions, comp.data_type),
                                   "distance map for '" + comp.id + "'");
        const VoxelGrid source = project.read_dataset(comp.id);
        VoxelGrid map;
        try {
            map = distance_transform(source, pixel);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::EmptyComponent) throw;
            warn("component '" + comp.id + "' has no foreground; excluded from distance analysis");
            result.skipped_components.push_back(comp.id);
            if (project.has_dataset(map_id)) project.delete_dataset(map_id);
            continue;
        }
        DatasetMeta meta;
        meta.id = map_id;
        meta.kind = DatasetKind::distance_map;
        meta.dimensions = comp.dimensions;
        meta.data_type = DataType::f32;
        meta.color = comp.color;
        meta.distance_map = DistanceMapInfo{comp.id, timestamp_now(), false};
        project.replace_dataset(meta, map);
        result.maps_computed.push_back(map_id);
        mapped.push_back(comp.id);
    }
    progress("distance_maps", 100);

    const std::string& name = project.meta().name;
    const std::size_t map_bytes = components.front().dimensions.voxels() * sizeof(float);

    for (const DatasetMeta& comp : components) {
        if (comp.kind != DatasetKind::labels && comp.kind != DatasetKind::filaments_labels) continue;
        std::vector<std::string> target_ids;
        for (const auto& id : mapped) {
            if (id != comp.id) target_ids.push_back(id);
        }

        auto hold_labels = budget.reserve(comp.dimensions.voxels() * byte_width(comp.data_type),
                                          "labelmap '" + comp.id + "'");
        const VoxelGrid labels = project.read_dataset(comp.id);

        FilamentSet filaments;
        if (comp.kind == DatasetKind::filaments_labels) {
            filaments = read_filaments_yaml(project.dataset_dir(comp.id) / kFilamentsFile);
        }

        std::vector<LabelRecord> label_rows;
        std::vector<FilamentRecord> filament_rows;
        if (comp.kind == DatasetKind::labels) {
            label_rows = label_records(labels, {}, pixel, config.connected_threshold_um);
        } else {
            filament_rows = filament_analysis(filaments, &labels, {}, pixel, config);
        }
        // One target map resident at a time.
        for (const auto& target_id : target_ids) {
            auto hold_map = budget.reserve(map_bytes, "distance map of '" + target_id + "'");
            const VoxelGrid map = project.read_dataset(distance_map_id(target_id));
            const std::vector<TargetMap> one{{target_id, &map}};
            if (comp.kind == DatasetKind::labels) {
                const auto rows = label_records(labels, one, pixel, config.connected_threshold_um);
                for (std::size_t i = 0; i < rows.size(); ++i) label_rows[i].targets.push_back(rows[i].targets.front());
            } else {
                const auto rows = filament_analysis(filaments, &labels, one, pixel, config);
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    filament_rows[i].targets.push_back(rows[i].targets.front());
                }
            }
        }

        CsvTable individual, summary;
        summary.header = {"metric", "value"};
        if (comp.kind == DatasetKind::labels) {
            individual.header = {"label", "size_voxels", "size_um3"};
            for (const auto& t : target_ids) {
                individual.header.push_back("distance_to_" + t + "_um");
                individual.header.push_back("connected_to_" + t);
            }
            std::vector<double> sizes;
            std::vector<std::size_t> connected(target_ids.size(), 0);
            for (const auto& r : label_rows) {
                std::vector<std::string> row{std::to_string(r.label), std::to_string(r.size_voxels),
                                             format_fixed6(r.size_um3)};
                for (std::size_t t = 0; t < r.targets.size(); ++t) {
                    row.push_back(format_fixed6(r.targets[t].distance_um));
                    row.push_back(format_bool(r.targets[t].connected));
                    if (r.targets[t].connected) ++connected[t];
                }
                individual.rows.push_back(std::move(row));
                sizes.push_back(r.size_um3);
            }
            summary.rows.push_back({"label_count", std::to_string(label_rows.size())});
            append_stats(summary, "size_um3", summarize_values(sizes));
            for (std::size_t t = 0; t < target_ids.size(); ++t) {
                summary.rows.push_back({"connected_to_" + target_ids[t], std::to_string(connected[t])});
                summary.rows.push_back(
                    {"not_connected_to_" + target_ids[t], std::to_string(label_rows.size() - connected[t])});
            }
        } else {
            individual.header = {"filament", "length_um", "tortuosity"};
            for (const auto& t : target_ids) {
                for (const char* col : {"distance_to_", "connected_to_", "end1_distance_to_", "end2_distance_to_",
                                        "pixel_distance_to_", "pixel_connected_to_"}) {
                    const bool is_distance = std::string_view(col).find("distance") != std::string_view::npos;
                    individual.header.push_back(std::string(col) + t + (is_distance ? "_um" : ""));
                }
            }
            std::vector<double> lengths, tortuosities;
            std::size_t undefined = 0;
            std::vector<std::size_t> connected(target_ids.size(), 0);
            for (const auto& r : filament_rows) {
                std::vector<std::string> row{r.id, format_fixed6(r.length_um),
                                             r.tortuosity ? format_fixed6(*r.tortuosity) : std::string{}};
                for (std::size_t t = 0; t < r.targets.size(); ++t) {
                    const auto& x = r.targets[t];
                    row.push_back(format_fixed6(x.distance_um));
                    row.push_back(format_bool(x.connected));
                    row.push_back(format_fixed6(x.end1_distance_um));
                    row.push_back(format_fixed6(x.end2_distance_um));
                    row.push_back(x.pixel_distance_um ? format_fixed6(*x.pixel_distance_um) : std::string{});
                    row.push_back(x.pixel_distance_um ? format_bool(x.pixel_connected) : std::string{});
                    if (x.connected) ++connected[t];
                }
                individual.rows.push_back(std::move(row));
                lengths.push_back(r.length_um);
                if (r.tortuosity) {
                    tortuosities.push_back(*r.tortuosity);
                } else {
                    ++undefined;
                }
            }
            summary.rows.push_back({"filament_count", std::to_string(filament_rows.size())});
            append_stats(summary, "length_um", summarize_values(lengths));
            append_stats(summary, "tortuosity", summarize_values(tortuosities));
            summary.rows.push_back({"tortuosity_n_undefined", std::to_string(undefined)});
            for (std::size_t t = 0; t < target_ids.size(); ++t) {
                summary.rows.push_back({"connected_to_" + target_ids[t], std::to_string(connected[t])});
                summary.rows.push_back(
                    {"not_connected_to_" + target_ids[t], std::to_string(filament_rows.size() - connected[t])});
            }
        }

        const auto summary_path = project.analysis_dir() / labelmap_summary_csv_name(name, comp.id);
        const auto individual_path = project.analysis_dir() / labelmap_individual_csv_name(name, comp.id);
        write_csv(summary_path, summary);
        write_csv(individual_path, individual);
        result.csv_files.push_back(summary_path);
        result.csv_files.push_back(individual_path);
    }

    nlohmann::ordered_json meta;
    meta["connected_threshold_um"] = config.connected_threshold_um;
    meta["filament_end_threshold_um"] = config.filament_end_threshold_um;
    meta["distance_metric"] = "voxel_center";
    meta["filament_labelmaps_as_targets"] = true;
    meta["components"] = mapped;
    meta["skipped_components"] = result.skipped_components;
    write_file_atomic(project.analysis_dir() / "analysis.json", meta.dump(2) + "\n");

    result.peak_bytes = budget.peak();
    progress("analysis", 100);
    return result;
}

}  // namespace cellmetry
