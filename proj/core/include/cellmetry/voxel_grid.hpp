#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace cellmetry {

struct Extent {
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::size_t nz = 0;

    std::size_t voxels() const { return nx * ny * nz; }
    std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return x + nx * (y + ny * z); }
    bool contains(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return x >= 0 && y >= 0 && z >= 0 && static_cast<std::size_t>(x) < nx &&
               static_cast<std::size_t>(y) < ny && static_cast<std::size_t>(z) < nz;
    }
    friend bool operator==(const Extent&, const Extent&) = default;
};

std::string to_string(const Extent& extent);

struct Voxel {
    std::int64_t x = 0;
    std::int64_t y = 0;
    std::int64_t z = 0;
    friend bool operator==(const Voxel&, const Voxel&) = default;
    friend auto operator<=>(const Voxel&, const Voxel&) = default;
};

enum class DatasetKind { raw, mask, labels, boundary, membrane, filaments_labels, distance_map };
enum class DataType { u8, u16, u32, f32 };

std::string_view to_string(DatasetKind kind);
std::string_view to_string(DataType type);
DatasetKind parse_dataset_kind(std::string_view text);
DataType parse_data_type(std::string_view text);
std::size_t byte_width(DataType type);

/// Kinds that take part in distance analysis and meshing as cell components.
bool is_component(DatasetKind kind);
bool is_binary_kind(DatasetKind kind);
bool is_label_kind(DatasetKind kind);

struct Rgba {
    std::uint8_t r = 255;
    std::uint8_t g = 255;
    std::uint8_t b = 255;
    std::uint8_t a = 255;
    friend bool operator==(const Rgba&, const Rgba&) = default;
};

/// Parses `RRGGBBAA` (or `RRGGBB`, alpha 255) hex.
Rgba parse_rgba(std::string_view hex);

// Dense in-memory voxel array. Linear index is x-fastest: x + nx * (y + ny * z).
class VoxelGrid {
public:
    VoxelGrid() = default;
    VoxelGrid(Extent extent, DataType type);

    const Extent& extent() const { return extent_; }
    DataType data_type() const { return type_; }
    std::size_t size() const { return extent_.voxels(); }

    template <typename T>
    std::span<T> values() {
        return std::get<std::vector<T>>(storage_);
    }
    template <typename T>
    std::span<const T> values() const {
        return std::get<std::vector<T>>(storage_);
    }

    /// Calls fn with the typed sample vector.
    template <typename Fn>
    decltype(auto) visit(Fn&& fn) const {
        return std::visit(std::forward<Fn>(fn), storage_);
    }

    /// Integer view of voxel i; f32 values are truncated.
    std::uint32_t label_at(std::size_t i) const;
    double value_at(std::size_t i) const;
    void set(std::size_t i, double value);

    bool is_foreground(std::size_t i) const { return value_at(i) != 0.0; }
    std::size_t count_nonzero() const;
    double max_value() const;

    /// Raw little-endian bytes of the whole grid.
    std::span<const std::byte> bytes() const;
    std::span<std::byte> bytes();

    /// Widens or narrows the sample type; values must fit.
    VoxelGrid converted(DataType target) const;

    friend bool operator==(const VoxelGrid& a, const VoxelGrid& b) {
        return a.extent_ == b.extent_ && a.type_ == b.type_ && a.storage_ == b.storage_;
    }

private:
    Extent extent_;
    DataType type_ = DataType::u8;
    std::variant<std::vector<std::uint8_t>, std::vector<std::uint16_t>, std::vector<std::uint32_t>,
                 std::vector<float>>
        storage_;
};

struct DistanceMapInfo {
    std::string source_dataset;
    std::string produced_at;
    bool stale = false;
};

struct DatasetMeta {
    std::string id;
    DatasetKind kind = DatasetKind::mask;
    Extent dimensions;
    std::array<std::size_t, 3> block_size{64, 64, 64};
    DataType data_type = DataType::u8;
    Rgba color;
    std::optional<DistanceMapInfo> distance_map;
};

inline constexpr std::array<std::size_t, 3> kDefaultBlockSize{64, 64, 64};

}  // namespace cellmetry
