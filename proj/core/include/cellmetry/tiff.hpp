#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cellmetry/voxel_grid.hpp"

namespace cellmetry {

enum class ByteOrder { little, big };

// Grayscale page stack. Samples are widened to u16 regardless of the stored depth;
// page p, row y, column x lives at samples[x + width * (y + height * p)].
struct TiffStack {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t pages = 0;
    int bits_per_sample = 8;
    ByteOrder byte_order = ByteOrder::little;
    std::vector<std::uint16_t> samples;

    std::uint16_t at(std::size_t x, std::size_t y, std::size_t page) const {
        return samples[x + width * (y + height * page)];
    }
};

/// Baseline TIFF 6.0 subset: grayscale, 8/16-bit unsigned, strips, no
/// compression, either byte order, multiple pages through the IFD chain.
TiffStack decode_tiff(std::span<const std::uint8_t> data);
TiffStack read_tiff(const std::filesystem::path& path);

/// One strip per page. 16-bit stacks keep full range; 8-bit stacks must hold values < 256.
std::vector<std::uint8_t> encode_tiff(const TiffStack& stack, ByteOrder order = ByteOrder::little);
void write_tiff(const std::filesystem::path& path, const TiffStack& stack, ByteOrder order = ByteOrder::little);

/// Page z of the stack is slice z of the grid.
TiffStack stack_from_grid(const VoxelGrid& grid, int bits_per_sample);

}  // namespace cellmetry
