#include "cellmetry/voxel_grid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "cellmetry/error.hpp"

namespace cellmetry {

std::string to_string(const Extent& extent) {
    return std::to_string(extent.nx) + "x" + std::to_string(extent.ny) + "x" + std::to_string(extent.nz);
}

std::string_view to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::raw: return "raw";
        case DatasetKind::mask: return "mask";
        case DatasetKind::labels: return "labels";
        case DatasetKind::boundary: return "boundary";
        case DatasetKind::membrane: return "membrane";
        case DatasetKind::filaments_labels: return "filaments_labels";
        case DatasetKind::distance_map: return "distance_map";
    }
    return "raw";
}

std::string_view to_string(DataType type) {
    switch (type) {
        case DataType::u8: return "u8";
        case DataType::u16: return "u16";
        case DataType::u32: return "u32";
        case DataType::f32: return "f32";
    }
    return "u8";
}

DatasetKind parse_dataset_kind(std::string_view text) {
    for (auto kind : {DatasetKind::raw, DatasetKind::mask, DatasetKind::labels, DatasetKind::boundary,
                      DatasetKind::membrane, DatasetKind::filaments_labels, DatasetKind::distance_map}) {
        if (to_string(kind) == text) return kind;
    }
    throw Error(ErrorCode::InvalidMeta, "unknown dataset kind '" + std::string(text) + "'");
}

DataType parse_data_type(std::string_view text) {
    for (auto type : {DataType::u8, DataType::u16, DataType::u32, DataType::f32}) {
        if (to_string(type) == text) return type;
    }
    throw Error(ErrorCode::InvalidMeta, "unknown data type '" + std::string(text) + "'");
}

std::size_t byte_width(DataType type) {
    switch (type) {
        case DataType::u8: return 1;
        case DataType::u16: return 2;
        case DataType::u32:
        case DataType::f32: return 4;
    }
    return 1;
}

bool is_component(DatasetKind kind) { return kind != DatasetKind::raw && kind != DatasetKind::distance_map; }

bool is_binary_kind(DatasetKind kind) {
    return kind == DatasetKind::mask || kind == DatasetKind::boundary || kind == DatasetKind::membrane;
}

bool is_label_kind(DatasetKind kind) {
    return kind == DatasetKind::labels || kind == DatasetKind::filaments_labels;
}

Rgba parse_rgba(std::string_view hex) {
    if (hex.size() != 6 && hex.size() != 8) {
        throw Error(ErrorCode::InvalidMeta, "color must be RRGGBB or RRGGBBAA, got '" + std::string(hex) + "'");
    }
    std::array<std::uint8_t, 4> channels{0, 0, 0, 255};
    for (std::size_t c = 0; c < hex.size() / 2; ++c) {
        const char* first = hex.data() + 2 * c;
        auto [ptr, ec] = std::from_chars(first, first + 2, channels[c], 16);
        if (ec != std::errc{} || ptr != first + 2) {
            throw Error(ErrorCode::InvalidMeta, "invalid hex color '" + std::string(hex) + "'");
        }
    }
    return {channels[0], channels[1], channels[2], channels[3]};
}

VoxelGrid::VoxelGrid(Extent extent, DataType type) : extent_(extent), type_(type) {
    const std::size_t n = extent.voxels();
    switch (type) {
        case DataType::u8: storage_ = std::vector<std::uint8_t>(n, 0); break;
        case DataType::u16: storage_ = std::vector<std::uint16_t>(n, 0); break;
        case DataType::u32: storage_ = std::vector<std::uint32_t>(n, 0); break;
        case DataType::f32: storage_ = std::vector<float>(n, 0.0f); break;
    }
}

std::uint32_t VoxelGrid::label_at(std::size_t i) const {
    return std::visit([i](const auto& v) { return static_cast<std::uint32_t>(v[i]); }, storage_);
}

double VoxelGrid::value_at(std::size_t i) const {
    return std::visit([i](const auto& v) { return static_cast<double>(v[i]); }, storage_);
}

void VoxelGrid::set(std::size_t i, double value) {
    std::visit([i, value](auto& v) { v[i] = static_cast<typename std::decay_t<decltype(v)>::value_type>(value); },
               storage_);
}

std::size_t VoxelGrid::count_nonzero() const {
    return std::visit(
        [](const auto& v) {
            return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](auto x) { return x != 0; }));
        },
        storage_);
}

double VoxelGrid::max_value() const {
    return std::visit(
        [](const auto& v) {
            if (v.empty()) return 0.0;
            return static_cast<double>(*std::max_element(v.begin(), v.end()));
        },
        storage_);
}

std::span<const std::byte> VoxelGrid::bytes() const {
    return std::visit([](const auto& v) { return std::as_bytes(std::span(v)); }, storage_);
}

std::span<std::byte> VoxelGrid::bytes() {
    return std::visit([](auto& v) { return std::as_writable_bytes(std::span(v)); }, storage_);
}

VoxelGrid VoxelGrid::converted(DataType target) const {
    if (target == type_) return *this;
    VoxelGrid out(extent_, target);
    for (std::size_t i = 0; i < size(); ++i) out.set(i, value_at(i));
    return out;
}

}  // namespace cellmetry
