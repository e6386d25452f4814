#include "cellmetry/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>

#include "cellmetry/error.hpp"
#include "cellmetry/store.hpp"

namespace cellmetry {
namespace {

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        cells.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

}  // namespace

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return std::nullopt;
}

std::size_t CsvTable::require_column(std::string_view name) const {
    if (auto c = column(name)) return *c;
    std::string available;
    for (const auto& h : header) available += (available.empty() ? "" : ", ") + h;
    throw Error(ErrorCode::MissingColumn,
                "column '" + std::string(name) + "' not found; available columns: " + available);
}

CsvTable parse_csv(std::string_view text) {
    CsvTable table;
    bool first = true;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        start = end + 1;
        if (line.empty()) continue;
        if (first) {
            table.header = split_line(line);
            first = false;
        } else {
            table.rows.push_back(split_line(line));
        }
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text_file(path)); }

std::string format_csv(const CsvTable& table) {
    std::string out;
    auto emit = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    emit(table.header);
    for (const auto& row : table.rows) emit(row);
    return out;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) { write_file_atomic(path, format_csv(table)); }

std::string format_fixed6(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    std::string s(buf);
    if (s == "-0.000000") s = "0.000000";
    return s;
}

std::string format_bool(bool value) { return value ? "true" : "false"; }

std::optional<double> parse_number(std::string_view cell) {
    if (cell.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size()) return std::nullopt;
    return v;
}

std::optional<bool> parse_bool(std::string_view cell) {
    if (cell == "true") return true;
    if (cell == "false") return false;
    return std::nullopt;
}

}  // namespace cellmetry
