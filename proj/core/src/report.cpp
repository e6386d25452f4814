#include "cellmetry/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "cellmetry/analysis.hpp"
#include "cellmetry/baseline.hpp"
#include "cellmetry/error.hpp"

namespace cellmetry {
namespace {

constexpr double kWidth = 800, kHeight = 600;
constexpr double kLeft = 70, kRight = 770, kTop = 50, kBottom = 530;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string label_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(std::string_view text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string svg_open(std::string_view title) {
    std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"0 0 800 600\" width=\"800\" "
         "height=\"600\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) + "\" fill=\"white\"/>\n";
    s += "<text x=\"400.00\" y=\"30.00\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"18\">" +
         escape(title) + "</text>\n";
    return s;
}

std::string axes(double x_lo, double x_hi, double y_hi, std::string_view x_label, std::string_view y_label) {
    std::string s;
    s += "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
    s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kBottom) + "\" x2=\"" + num(kRight) + "\" y2=\"" +
         num(kBottom) + "\"/>\n";
    s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kBottom) + "\" x2=\"" + num(kLeft) + "\" y2=\"" + num(kTop) +
         "\"/>\n";
    s += "</g>\n<g font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<text x=\"" + num(kLeft) + "\" y=\"" + num(kBottom + 18) + "\" text-anchor=\"middle\">" + label_num(x_lo) +
         "</text>\n";
    s += "<text x=\"" + num(kRight) + "\" y=\"" + num(kBottom + 18) + "\" text-anchor=\"middle\">" +
         label_num(x_hi) + "</text>\n";
    s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(kBottom) + "\" text-anchor=\"end\">0</text>\n";
    s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(kTop + 4) + "\" text-anchor=\"end\">" + label_num(y_hi) +
         "</text>\n";
    s += "<text x=\"" + num((kLeft + kRight) / 2) + "\" y=\"" + num(kBottom + 40) + "\" text-anchor=\"middle\">" +
         escape(x_label) + "</text>\n";
    s += "<text x=\"20.00\" y=\"" + num((kTop + kBottom) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 20.00 " +
         num((kTop + kBottom) / 2) + ")\">" + escape(y_label) + "</text>\n";
    s += "</g>\n";
    return s;
}

std::string histogram_svg(const std::vector<double>& values, std::size_t undefined, std::string_view column,
                          const HistogramSpec& spec) {
    Histogram h = histogram(values, spec);
    h.n_undefined = undefined;
    const std::size_t peak = h.counts.empty() ? 0 : *std::max_element(h.counts.begin(), h.counts.end());
    const double y_hi = peak == 0 ? 1.0 : static_cast<double>(peak);
    std::string s = svg_open(std::string(column) + " (n=" + std::to_string(values.size()) +
                             ", undefined=" + std::to_string(undefined) + ")");
    s += axes(h.lo, h.hi, y_hi, column, "count");
    s += "<g class=\"bars\" fill=\"steelblue\" stroke=\"white\">\n";
    const double bar_w = (kRight - kLeft) / static_cast<double>(h.counts.size());
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        const double height = (kBottom - kTop) * static_cast<double>(h.counts[b]) / y_hi;
        s += "<rect x=\"" + num(kLeft + bar_w * static_cast<double>(b)) + "\" y=\"" + num(kBottom - height) +
             "\" width=\"" + num(bar_w) + "\" height=\"" + num(height) + "\" data-count=\"" +
             std::to_string(h.counts[b]) + "\"/>\n";
    }
    s += "</g>\n</svg>\n";
    return s;
}

std::string cdf_polyline(std::vector<double> sample, double x_hi, std::string_view cls, std::string_view color) {
    std::sort(sample.begin(), sample.end());
    std::string points;
    const double n = static_cast<double>(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double x = kLeft + (kRight - kLeft) * sample[i] / x_hi;
        const double y = kBottom - (kBottom - kTop) * static_cast<double>(i + 1) / n;
        if (!points.empty()) points += ' ';
        points += num(x) + "," + num(y);
    }
    return "<polyline class=\"" + std::string(cls) + "\" fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
}

nlohmann::ordered_json metric_value(const std::string& cell) {
    if (const auto b = parse_bool(cell)) return *b;
    if (const auto v = parse_number(cell)) return *v;
    return cell;
}

}  // namespace

Histogram histogram(const std::vector<double>& values, const HistogramSpec& spec) {
    if (spec.bins == 0) throw Error(ErrorCode::InvalidMeta, "histogram needs at least one bin");
    Histogram h;
    if (spec.range) {
        if (!(spec.range->second > spec.range->first)) {
            throw Error(ErrorCode::InvalidMeta, "histogram range needs hi > lo");
        }
        h.lo = spec.range->first;
        h.hi = spec.range->second;
    } else {
        h.lo = 0.0;
        const double max = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
        h.hi = max > 0.0 ? max : 1.0;
    }
    h.counts.assign(spec.bins, 0);
    const double width = (h.hi - h.lo) / static_cast<double>(spec.bins);
    for (double v : values) {
        const double pos = std::floor((v - h.lo) / width);
        const auto last = static_cast<double>(spec.bins - 1);
        ++h.counts[static_cast<std::size_t>(std::clamp(pos, 0.0, last))];
    }
    return h;
}

std::pair<std::vector<double>, std::size_t> numeric_column(const CsvTable& table, std::string_view column) {
    const std::size_t c = table.require_column(column);
    std::vector<double> values;
    std::size_t undefined = 0;
    for (const auto& row : table.rows) {
        const auto v = c < row.size() ? parse_number(row[c]) : std::nullopt;
        if (v) {
            values.push_back(*v);
        } else {
            ++undefined;
        }
    }
    return {values, undefined};
}

std::string plot_column_histogram(const CsvTable& table, std::string_view column, const HistogramSpec& spec) {
    const auto [values, undefined] = numeric_column(table, column);
    return histogram_svg(values, undefined, column, spec);
}

std::string plot_distance_histogram(const CsvTable& individual, std::string_view target, const HistogramSpec& spec) {
    return plot_column_histogram(individual, "distance_to_" + std::string(target) + "_um", spec);
}

std::string plot_observed_vs_random(const CsvTable& baseline, const HistogramSpec& spec) {
    const std::size_t kind = baseline.require_column("kind");
    const std::size_t dist = baseline.require_column("distance_um");
    std::vector<double> observed, random;
    for (const auto& row : baseline.rows) {
        if (row.size() <= std::max(kind, dist)) continue;
        const auto v = parse_number(row[dist]);
        if (!v) continue;
        if (row[kind] == "observed") observed.push_back(*v);
        if (row[kind] == "random") random.push_back(*v);
    }
    const double d = ks_statistic(observed, random);
    double x_hi = 1.0;
    if (spec.range) {
        x_hi = spec.range->second;
    } else {
        double max = 0.0;
        for (double v : observed) max = std::max(max, v);
        for (double v : random) max = std::max(max, v);
        if (max > 0.0) x_hi = max;
    }
    char ks[64];
    std::snprintf(ks, sizeof ks, "KS D = %.6f", d);
    std::string s = svg_open("observed vs random distance CDF");
    s += axes(0.0, x_hi, 1.0, "distance_um", "cumulative fraction");
    s += cdf_polyline(observed, x_hi, "observed", "crimson");
    s += cdf_polyline(random, x_hi, "random", "gray");
    s += "<text class=\"ks\" x=\"" + num(kRight - 10) + "\" y=\"" + num(kTop + 20) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"14\">" + ks + "</text>\n";
    s += "<text x=\"" + num(kRight - 10) + "\" y=\"" + num(kTop + 40) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"crimson\">observed (n=" +
         std::to_string(observed.size()) + ")</text>\n";
    s += "<text x=\"" + num(kRight - 10) + "\" y=\"" + num(kTop + 56) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"gray\">random (n=" +
         std::to_string(random.size()) + ")</text>\n";
    s += "</svg>\n";
    return s;
}

std::filesystem::path summarize(const Project& project) {
    if (!std::filesystem::exists(project.analysis_dir() / "analysis.json")) {
        throw Error(ErrorCode::NoAnalysis, "project has no analysis results; run analyze first");
    }
    const double voxel_um3 = std::pow(project.meta().pixel_to_um, 3);
    std::optional<DatasetMeta> boundary_meta;
    for (const auto& meta : project.datasets()) {
        if (meta.kind == DatasetKind::boundary) {
            boundary_meta = meta;
            break;
        }
    }
    std::optional<VoxelGrid> boundary;
    std::size_t boundary_voxels = 0;
    if (boundary_meta) {
        boundary = project.read_dataset(boundary_meta->id);
        boundary_voxels = boundary->count_nonzero();
    }

    nlohmann::ordered_json out;
    out["project"] = project.meta().name;
    out["pixel_to_um"] = project.meta().pixel_to_um;
    out["boundary"] = boundary_meta ? nlohmann::ordered_json(boundary_meta->id) : nlohmann::ordered_json(nullptr);
    auto components = nlohmann::ordered_json::array();
    auto tables = nlohmann::ordered_json::object();
    for (const auto& meta : project.datasets()) {
        if (!is_component(meta.kind)) continue;
        const VoxelGrid grid = project.read_dataset(meta.id);
        std::size_t voxels = 0, inside = 0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (!grid.is_foreground(i)) continue;
            ++voxels;
            if (boundary && boundary->extent() == grid.extent() && boundary->is_foreground(i)) ++inside;
        }
        nlohmann::ordered_json c;
        c["id"] = meta.id;
        c["kind"] = std::string(to_string(meta.kind));
        c["voxels"] = voxels;
        c["volume_um3"] = static_cast<double>(voxels) * voxel_um3;
        if (boundary_voxels > 0) {
            c["volume_fraction"] = static_cast<double>(inside) / static_cast<double>(boundary_voxels);
        } else {
            c["volume_fraction"] = nullptr;
        }
        components.push_back(c);

        if (!is_label_kind(meta.kind)) continue;
        const auto path = project.analysis_dir() / labelmap_summary_csv_name(project.meta().name, meta.id);
        if (!std::filesystem::exists(path)) continue;
        const CsvTable summary = read_csv(path);
        const std::size_t key = summary.require_column("metric");
        const std::size_t value = summary.require_column("value");
        nlohmann::ordered_json metrics;
        for (const auto& row : summary.rows) {
            if (row.size() > std::max(key, value)) metrics[row[key]] = metric_value(row[value]);
        }
        if (metrics.contains("tortuosity_n_undefined")) metrics["n_undefined"] = metrics["tortuosity_n_undefined"];
        tables[meta.id] = metrics;
    }
    out["components"] = components;
    out["tables"] = tables;
    const auto path = project.analysis_dir() / "summary.json";
    write_file_atomic(path, out.dump(2) + "\n");
    return path;
}

ReportResult write_report(const Project& project, const std::filesystem::path& output_dir, const HistogramSpec& spec) {
    ReportResult result;
    result.summary = summarize(project);
    std::filesystem::create_directories(output_dir);
    const std::string& name = project.meta().name;
    auto emit = [&](const std::string& file, const std::string& svg) {
        const auto path = output_dir / file;
        write_file_atomic(path, svg);
        result.plots.push_back(path);
    };
    for (const auto& meta : project.datasets()) {
        if (!is_label_kind(meta.kind)) continue;
        const auto path = project.analysis_dir() / labelmap_individual_csv_name(name, meta.id);
        if (!std::filesystem::exists(path)) continue;
        const CsvTable table = read_csv(path);
        for (const auto& column : table.header) {
            const bool is_target_distance = column.rfind("distance_to_", 0) == 0 && column.size() > 15 &&
                                            column.compare(column.size() - 3, 3, "_um") == 0;
            const bool is_filament_metric = column == "length_um" || column == "tortuosity";
            if (is_target_distance || is_filament_metric) {
                emit(meta.id + "_" + column + ".svg", plot_column_histogram(table, column, spec));
            }
        }
    }
    std::vector<std::filesystem::path> baselines;
    for (const auto& entry : std::filesystem::directory_iterator(project.analysis_dir())) {
        const std::string file = entry.path().filename().string();
        if (file.size() > 13 && file.compare(file.size() - 13, 13, "_baseline.csv") == 0) {
            baselines.push_back(entry.path());
        }
    }
    std::sort(baselines.begin(), baselines.end());
    for (const auto& path : baselines) {
        emit(path.stem().string() + ".svg", plot_observed_vs_random(read_csv(path), spec));
    }
    return result;
}

}  // namespace cellmetry
