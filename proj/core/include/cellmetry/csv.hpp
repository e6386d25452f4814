#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cellmetry {

// Plain comma-separated table: no quoting, since every cell is a number,
// boolean or dataset id.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(std::string_view name) const;
    /// Throws MissingColumn naming the available columns.
    std::size_t require_column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);
std::string format_csv(const CsvTable& table);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Fixed six decimals, '.' separator.
std::string format_fixed6(double value);
std::string format_bool(bool value);
std::optional<double> parse_number(std::string_view cell);
std::optional<bool> parse_bool(std::string_view cell);

}  // namespace cellmetry
