#include "cellmetry/connectivity.hpp"

#include <map>
#include <unordered_set>

#include "cellmetry/analysis.hpp"
#include "cellmetry/csv.hpp"
#include "cellmetry/error.hpp"
#include "cellmetry/skeleton.hpp"
#include "cellmetry/tiff.hpp"

namespace cellmetry {

std::filesystem::path export_connectivity(const Project& project, const std::string& labelmap_id,
                                          const std::string& target_id, bool inverted) {
    const DatasetMeta meta = project.dataset(labelmap_id);
    if (!is_label_kind(meta.kind)) throw Error(ErrorCode::InvalidMeta, "'" + labelmap_id + "' is not a labelmap");
    const auto csv_path = project.analysis_dir() / labelmap_individual_csv_name(project.meta().name, labelmap_id);
    if (!std::filesystem::exists(csv_path)) {
        throw Error(ErrorCode::NoAnalysis, "no analysis table for '" + labelmap_id + "'; run analyze first");
    }
    const CsvTable table = read_csv(csv_path);
    const auto column = table.column("connected_to_" + target_id);
    if (!column) {
        if (!project.has_dataset(target_id)) {
            throw Error(ErrorCode::UnknownTarget, "no component named '" + target_id + "'");
        }
        throw Error(ErrorCode::NoAnalysis, "analysis of '" + labelmap_id + "' has no results for '" + target_id + "'");
    }

    // Filament rows are keyed by filament id; their label is the 1-based position in filaments.yaml.
    std::map<std::string, std::uint32_t> filament_label;
    if (meta.kind == DatasetKind::filaments_labels) {
        const auto filaments = read_filaments_yaml(project.dataset_dir(labelmap_id) / kFilamentsFile);
        for (std::size_t k = 0; k < filaments.size(); ++k) {
            filament_label[filaments[k].id] = static_cast<std::uint32_t>(k + 1);
        }
    }
    const std::size_t key = table.require_column(meta.kind == DatasetKind::labels ? "label" : "filament");

    std::unordered_set<std::uint32_t> chosen;
    for (const auto& row : table.rows) {
        const auto connected = parse_bool(row.at(*column));
        if (!connected) throw Error(ErrorCode::CorruptFile, "non-boolean cell in " + csv_path.filename().string());
        if (*connected == inverted) continue;
        if (meta.kind == DatasetKind::labels) {
            const auto label = parse_number(row.at(key));
            if (!label) throw Error(ErrorCode::CorruptFile, "non-numeric label in " + csv_path.filename().string());
            chosen.insert(static_cast<std::uint32_t>(*label));
        } else if (auto it = filament_label.find(row.at(key)); it != filament_label.end()) {
            chosen.insert(it->second);
        }
    }

    const VoxelGrid labels = project.read_dataset(labelmap_id);
    VoxelGrid mask(labels.extent(), DataType::u8);
    auto out = mask.values<std::uint8_t>();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto l = labels.label_at(i);
        if (l != 0 && chosen.contains(l)) out[i] = 255;
    }
    const auto path = project.export_dir() /
                      (labelmap_id + "_connected_to_" + target_id + (inverted ? "_inverted" : "") + ".tif");
    std::filesystem::create_directories(project.export_dir());
    write_tiff(path, stack_from_grid(mask, 8));
    return path;
}

}  // namespace cellmetry
