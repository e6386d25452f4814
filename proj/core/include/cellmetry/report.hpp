#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cellmetry/csv.hpp"
#include "cellmetry/store.hpp"

namespace cellmetry {

struct HistogramSpec {
    std::size_t bins = 32;
    std::optional<std::pair<double, double>> range;  // auto: [0, max sample]
};

struct Histogram {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<std::size_t> counts;
    std::size_t n_undefined = 0;
};

/// Uniform bins over the range; samples outside it land in the first or last bin.
Histogram histogram(const std::vector<double>& values, const HistogramSpec& spec);

/// Values of a numeric column; blank cells count as undefined.
std::pair<std::vector<double>, std::size_t> numeric_column(const CsvTable& table, std::string_view column);

/// Histogram of `distance_to_<target>_um` from an individual table.
std::string plot_distance_histogram(const CsvTable& individual, std::string_view target, const HistogramSpec& spec);
/// Histogram of any numeric column (e.g. `length_um`, `tortuosity`).
std::string plot_column_histogram(const CsvTable& table, std::string_view column, const HistogramSpec& spec);
/// Step curves of the two empirical CDFs from a baseline table, one polyline node per sample.
std::string plot_observed_vs_random(const CsvTable& baseline, const HistogramSpec& spec);

/// Aggregates component volumes, volume fractions and the summary tables into `analysis/summary.json`.
std::filesystem::path summarize(const Project& project);

struct ReportResult {
    std::filesystem::path summary;
    std::vector<std::filesystem::path> plots;
};

/// summary.json plus every histogram and baseline plot the analysis tables allow, under `output_dir`.
ReportResult write_report(const Project& project, const std::filesystem::path& output_dir, const HistogramSpec& spec);

}  // namespace cellmetry
