#include "cellmetry/tiff.hpp"

#include <fstream>
#include <iterator>
#include <string>

#include "cellmetry/error.hpp"

namespace cellmetry {
namespace {

enum Tag : std::uint16_t {
    kImageWidth = 256,
    kImageLength = 257,
    kBitsPerSample = 258,
    kCompression = 259,
    kPhotometric = 262,
    kStripOffsets = 273,
    kSamplesPerPixel = 277,
    kRowsPerStrip = 278,
    kStripByteCounts = 279,
    kPlanarConfig = 284,
    kTileWidth = 322,
    kTileLength = 323,
    kTileOffsets = 324,
    kSampleFormat = 339,
};

enum FieldType : std::uint16_t { kByte = 1, kAscii = 2, kShort = 3, kLong = 4 };

std::size_t type_size(std::uint16_t type) {
    switch (type) {
        case 1: case 2: case 6: case 7: return 1;
        case 3: case 8: return 2;
        case 4: case 9: case 11: return 4;
        case 5: case 10: case 12: return 8;
        default: return 0;
    }
}

class Reader {
public:
    Reader(std::span<const std::uint8_t> data, ByteOrder order) : data_(data), order_(order) {}

    void require(std::size_t offset, std::size_t n, const char* what) const {
        if (offset > data_.size() || n > data_.size() - offset) {
            throw Error(ErrorCode::CorruptFile, std::string("truncated TIFF: ") + what + " at offset " +
                                                    std::to_string(offset));
        }
    }
    std::uint8_t u8(std::size_t offset) const {
        require(offset, 1, "byte field");
        return data_[offset];
    }
    std::uint16_t u16(std::size_t offset) const {
        require(offset, 2, "16-bit field");
        const std::uint16_t a = data_[offset], b = data_[offset + 1];
        return order_ == ByteOrder::little ? static_cast<std::uint16_t>(a | (b << 8))
                                           : static_cast<std::uint16_t>((a << 8) | b);
    }
    std::uint32_t u32(std::size_t offset) const {
        require(offset, 4, "32-bit field");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            const std::uint32_t byte = data_[offset + i];
            v |= order_ == ByteOrder::little ? byte << (8 * i) : byte << (8 * (3 - i));
        }
        return v;
    }

private:
    std::span<const std::uint8_t> data_;
    ByteOrder order_;
};

struct Entry {
    std::uint16_t type = 0;
    std::uint32_t count = 0;
    std::size_t value_offset = 0;  // where the values live (inline or pointed-to)
};

std::vector<std::uint32_t> entry_values(const Reader& r, const Entry& e) {
    std::vector<std::uint32_t> out;
    out.reserve(e.count);
    for (std::uint32_t i = 0; i < e.count; ++i) {
        switch (e.type) {
            case kByte: out.push_back(r.u8(e.value_offset + i)); break;
            case kShort: out.push_back(r.u16(e.value_offset + 2 * i)); break;
            case kLong: out.push_back(r.u32(e.value_offset + 4 * i)); break;
            default:
                throw Error(ErrorCode::UnsupportedTiff, "unsupported field type " + std::to_string(e.type));
        }
    }
    return out;
}

struct Page {
    std::size_t width = 0;
    std::size_t height = 0;
    int bits = 0;
    std::vector<std::uint32_t> strip_offsets;
    std::vector<std::uint32_t> strip_counts;
    std::size_t rows_per_strip = 0;
};

Page parse_ifd(const Reader& r, std::size_t ifd, std::size_t& next) {
    const std::uint16_t count = r.u16(ifd);
    r.require(ifd + 2, std::size_t{count} * 12 + 4, "IFD");
    Page page;
    bool have_width = false, have_height = false;
    std::uint32_t samples_per_pixel = 1;
    std::uint32_t compression = 1;
    std::uint32_t photometric = 1;
    for (std::uint16_t i = 0; i < count; ++i) {
        const std::size_t at = ifd + 2 + std::size_t{i} * 12;
        const std::uint16_t tag = r.u16(at);
        Entry e;
        e.type = r.u16(at + 2);
        e.count = r.u32(at + 4);
        const std::size_t bytes = type_size(e.type) * e.count;
        e.value_offset = bytes <= 4 ? at + 8 : r.u32(at + 8);
        auto single = [&]() -> std::uint32_t {
            const auto v = entry_values(r, e);
            if (v.empty()) throw Error(ErrorCode::CorruptFile, "empty value for tag " + std::to_string(tag));
            return v.front();
        };
        switch (tag) {
            case kImageWidth: page.width = single(); have_width = true; break;
            case kImageLength: page.height = single(); have_height = true; break;
            case kBitsPerSample: page.bits = static_cast<int>(single()); break;
            case kCompression: compression = single(); break;
            case kPhotometric: photometric = single(); break;
            case kStripOffsets: page.strip_offsets = entry_values(r, e); break;
            case kSamplesPerPixel: samples_per_pixel = single(); break;
            case kRowsPerStrip: page.rows_per_strip = single(); break;
            case kStripByteCounts: page.strip_counts = entry_values(r, e); break;
            case kPlanarConfig: break;
            case kTileWidth:
            case kTileLength:
            case kTileOffsets:
                throw Error(ErrorCode::UnsupportedTiff, "tiled layout (tag " + std::to_string(tag) + ") not supported");
            case kSampleFormat:
                if (single() != 1) {
                    throw Error(ErrorCode::UnsupportedTiff, "SampleFormat (tag 339) must be unsigned integer");
                }
                break;
            default: break;
        }
    }
    next = r.u32(ifd + 2 + std::size_t{count} * 12);

    if (compression != 1) {
        throw Error(ErrorCode::UnsupportedTiff,
                    "Compression (tag 259) = " + std::to_string(compression) + "; only 1 (none) is supported");
    }
    if (samples_per_pixel != 1 || photometric > 1) {
        throw Error(ErrorCode::UnsupportedTiff, "only single-channel grayscale is supported (tags 262/277)");
    }
    if (page.bits == 0) page.bits = 1;
    if (page.bits != 8 && page.bits != 16) {
        throw Error(ErrorCode::UnsupportedTiff,
                    "BitsPerSample (tag 258) = " + std::to_string(page.bits) + "; only 8 or 16 supported");
    }
    if (!have_width || !have_height || page.width == 0 || page.height == 0) {
        throw Error(ErrorCode::CorruptFile, "missing image dimensions");
    }
    if (page.strip_offsets.empty() || page.strip_offsets.size() != page.strip_counts.size()) {
        throw Error(ErrorCode::CorruptFile, "missing or inconsistent strip tables (tags 273/279)");
    }
    if (page.rows_per_strip == 0 || page.rows_per_strip > page.height) page.rows_per_strip = page.height;
    return page;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v, ByteOrder order) {
    if (order == ByteOrder::little) {
        out.push_back(static_cast<std::uint8_t>(v & 0xff));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
    } else {
        out.push_back(static_cast<std::uint8_t>(v >> 8));
        out.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v, ByteOrder order) {
    for (int i = 0; i < 4; ++i) {
        const int shift = order == ByteOrder::little ? 8 * i : 8 * (3 - i);
        out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xff));
    }
}

}  // namespace

TiffStack decode_tiff(std::span<const std::uint8_t> data) {
    if (data.size() < 8) throw Error(ErrorCode::CorruptFile, "file too short for a TIFF header");
    ByteOrder order;
    if (data[0] == 'I' && data[1] == 'I') {
        order = ByteOrder::little;
    } else if (data[0] == 'M' && data[1] == 'M') {
        order = ByteOrder::big;
    } else {
        throw Error(ErrorCode::CorruptFile, "not a TIFF file (bad byte-order mark)");
    }
    const Reader r(data, order);
    if (r.u16(2) != 42) throw Error(ErrorCode::UnsupportedTiff, "not a classic TIFF (magic != 42)");

    TiffStack stack;
    stack.byte_order = order;
    std::size_t ifd = r.u32(4);
    std::size_t guard = 0;
    while (ifd != 0) {
        if (++guard > (1u << 20)) throw Error(ErrorCode::CorruptFile, "IFD chain does not terminate");
        std::size_t next = 0;
        const Page page = parse_ifd(r, ifd, next);
        if (stack.pages == 0) {
            stack.width = page.width;
            stack.height = page.height;
            stack.bits_per_sample = page.bits;
        } else if (page.width != stack.width || page.height != stack.height || page.bits != stack.bits_per_sample) {
            throw Error(ErrorCode::UnsupportedTiff, "pages differ in size or bit depth");
        }
        const std::size_t bytes_per_sample = static_cast<std::size_t>(page.bits / 8);
        const std::size_t row_bytes = page.width * bytes_per_sample;
        const std::size_t base = stack.samples.size();
        stack.samples.resize(base + page.width * page.height);

        std::size_t row = 0;
        for (std::size_t s = 0; s < page.strip_offsets.size() && row < page.height; ++s) {
            const std::size_t rows = std::min(page.rows_per_strip, page.height - row);
            const std::size_t need = rows * row_bytes;
            if (page.strip_counts[s] < need) throw Error(ErrorCode::CorruptFile, "strip shorter than its rows");
            r.require(page.strip_offsets[s], page.strip_counts[s], "strip data");
            const std::uint8_t* src = data.data() + page.strip_offsets[s];
            std::uint16_t* dst = stack.samples.data() + base + row * page.width;
            const std::size_t n = rows * page.width;
            if (bytes_per_sample == 1) {
                for (std::size_t i = 0; i < n; ++i) dst[i] = src[i];
            } else {
                for (std::size_t i = 0; i < n; ++i) dst[i] = r.u16(page.strip_offsets[s] + 2 * i);
            }
            row += rows;
        }
        if (row < page.height) throw Error(ErrorCode::CorruptFile, "strips cover fewer rows than the image height");
        ++stack.pages;
        ifd = next;
    }
    if (stack.pages == 0) throw Error(ErrorCode::CorruptFile, "TIFF has no pages");
    return stack;
}

TiffStack read_tiff(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_tiff(bytes);
}

std::vector<std::uint8_t> encode_tiff(const TiffStack& stack, ByteOrder order) {
    if (stack.bits_per_sample != 8 && stack.bits_per_sample != 16) {
        throw Error(ErrorCode::UnsupportedTiff, "can only write 8- or 16-bit stacks");
    }
    const std::size_t bps = static_cast<std::size_t>(stack.bits_per_sample / 8);
    const std::size_t page_samples = stack.width * stack.height;
    const std::size_t page_bytes = page_samples * bps;
    constexpr std::uint16_t kEntries = 9;
    const std::size_t ifd_bytes = 2 + kEntries * 12 + 4;
    if (8 + stack.pages * (page_bytes + ifd_bytes) > 0xffffffffu) {
        throw Error(ErrorCode::UnsupportedTiff, "stack too large for classic TIFF");
    }

    std::vector<std::uint8_t> out;
    out.reserve(8 + stack.pages * (page_bytes + ifd_bytes));
    out.push_back(order == ByteOrder::little ? 'I' : 'M');
    out.push_back(order == ByteOrder::little ? 'I' : 'M');
    put_u16(out, 42, order);
    put_u32(out, 0, order);

    auto patch_u32 = [&](std::size_t at, std::uint32_t v) {
        std::vector<std::uint8_t> fix;
        put_u32(fix, v, order);
        std::copy(fix.begin(), fix.end(), out.begin() + static_cast<std::ptrdiff_t>(at));
    };
    std::size_t pointer_at = 4;
    for (std::size_t p = 0; p < stack.pages; ++p) {
        const std::uint32_t strip_offset = static_cast<std::uint32_t>(out.size());
        for (std::size_t i = 0; i < page_samples; ++i) {
            const std::uint16_t v = stack.samples[p * page_samples + i];
            if (bps == 1) {
                if (v > 0xff) throw Error(ErrorCode::InvariantViolation, "8-bit stack holds value > 255");
                out.push_back(static_cast<std::uint8_t>(v));
            } else {
                put_u16(out, v, order);
            }
        }
        if (out.size() % 2) out.push_back(0);
        patch_u32(pointer_at, static_cast<std::uint32_t>(out.size()));
        put_u16(out, kEntries, order);
        auto entry = [&](std::uint16_t tag, std::uint16_t type, std::uint32_t value) {
            put_u16(out, tag, order);
            put_u16(out, type, order);
            put_u32(out, 1, order);
            if (type == kShort) {
                put_u16(out, static_cast<std::uint16_t>(value), order);
                put_u16(out, 0, order);
            } else {
                put_u32(out, value, order);
            }
        };
        entry(kImageWidth, kLong, static_cast<std::uint32_t>(stack.width));
        entry(kImageLength, kLong, static_cast<std::uint32_t>(stack.height));
        entry(kBitsPerSample, kShort, static_cast<std::uint32_t>(stack.bits_per_sample));
        entry(kCompression, kShort, 1);
        entry(kPhotometric, kShort, 1);
        entry(kStripOffsets, kLong, strip_offset);
        entry(kSamplesPerPixel, kShort, 1);
        entry(kRowsPerStrip, kLong, static_cast<std::uint32_t>(stack.height));
        entry(kStripByteCounts, kLong, static_cast<std::uint32_t>(page_bytes));
        pointer_at = out.size();
        put_u32(out, 0, order);
    }
    return out;
}

void write_tiff(const std::filesystem::path& path, const TiffStack& stack, ByteOrder order) {
    const auto bytes = encode_tiff(stack, order);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

TiffStack stack_from_grid(const VoxelGrid& grid, int bits_per_sample) {
    TiffStack stack;
    stack.width = grid.extent().nx;
    stack.height = grid.extent().ny;
    stack.pages = grid.extent().nz;
    stack.bits_per_sample = bits_per_sample;
    stack.samples.resize(grid.size());
    const double limit = bits_per_sample == 8 ? 255.0 : 65535.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = grid.value_at(i);
        if (v < 0.0 || v > limit) {
            throw Error(ErrorCode::InvariantViolation,
                        "value " + std::to_string(v) + " does not fit " + std::to_string(bits_per_sample) + "-bit TIFF");
        }
        stack.samples[i] = static_cast<std::uint16_t>(v);
    }
    return stack;
}

}  // namespace cellmetry
