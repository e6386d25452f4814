#include "cellmetry/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "cellmetry/diagnostics.hpp"
#include "cellmetry/error.hpp"
#include "cellmetry/parallel.hpp"

namespace cellmetry {
namespace {

std::size_t scaled_dim(std::size_t n, double s) {
    const auto out = static_cast<long long>(std::llround(static_cast<double>(n) * s));
    return static_cast<std::size_t>(std::max(1LL, out));
}

std::size_t source_index(std::size_t out, double s, std::size_t n) {
    const double pos = std::floor((static_cast<double>(out) + 0.5) / s);
    if (pos <= 0.0) return 0;
    return std::min(static_cast<std::size_t>(pos), n - 1);
}

double round_significant(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::strtod(buf, nullptr);
}

void validate_scale(const ScaleSpec& spec) {
    if (!(spec.sx > 0.0) || !(spec.sy > 0.0) || !(spec.sz > 0.0)) {
        throw Error(ErrorCode::InvalidMeta, "scale factors must be > 0");
    }
}

}  // namespace

Extent ScaleSpec::output_extent(const Extent& input) const {
    return {scaled_dim(input.nx, sx), scaled_dim(input.ny, sy), scaled_dim(input.nz, sz)};
}

ScaleSpec scale_for_pixel_size(const std::array<double, 3>& input_size, double target_size) {
    if (!(target_size > 0.0)) throw Error(ErrorCode::InvalidMeta, "target pixel size must be > 0");
    for (double s : input_size) {
        if (!(s > 0.0)) throw Error(ErrorCode::InvalidMeta, "input pixel sizes must be > 0");
    }
    return {round_significant(input_size[0] / target_size), round_significant(input_size[1] / target_size),
            round_significant(input_size[2] / target_size)};
}

VoxelGrid grid_from_stack(const TiffStack& stack) {
    VoxelGrid grid({stack.width, stack.height, stack.pages}, stack.bits_per_sample == 8 ? DataType::u8 : DataType::u16);
    for (std::size_t i = 0; i < grid.size(); ++i) grid.set(i, stack.samples[i]);
    return grid;
}

VoxelGrid normalize_mask(const VoxelGrid& grid) {
    VoxelGrid out(grid.extent(), DataType::u8);
    auto dst = out.values<std::uint8_t>();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = grid.value_at(i);
        if (v == 0.0) continue;
        if (v != 1.0 && v != 255.0) {
            throw Error(ErrorCode::NotBinary, "mask holds value " + std::to_string(static_cast<long long>(v)) +
                                                  "; only 0, 1 and 255 are accepted");
        }
        dst[i] = 1;
    }
    return out;
}

VoxelGrid normalize_mask(const TiffStack& stack) { return normalize_mask(grid_from_stack(stack)); }

VoxelGrid normalize_labels(const VoxelGrid& grid) {
    if (grid.data_type() == DataType::f32) throw Error(ErrorCode::InvalidMeta, "labelmaps must be integer typed");
    const double max = grid.max_value();
    return grid.converted(max > 65535.0 ? DataType::u32 : DataType::u16);
}

VoxelGrid normalize_labels(const TiffStack& stack) { return normalize_labels(grid_from_stack(stack)); }

VoxelGrid rescale(const VoxelGrid& grid, const ScaleSpec& spec) {
    validate_scale(spec);
    if (spec.is_identity()) return grid;
    const Extent in = grid.extent();
    const Extent out_extent = spec.output_extent(in);
    VoxelGrid out(out_extent, grid.data_type());

    std::vector<std::size_t> xs(out_extent.nx), ys(out_extent.ny);
    for (std::size_t x = 0; x < out_extent.nx; ++x) xs[x] = source_index(x, spec.sx, in.nx);
    for (std::size_t y = 0; y < out_extent.ny; ++y) ys[y] = source_index(y, spec.sy, in.ny);

    parallel_for(out_extent.nz, [&](std::size_t z) {
        const std::size_t sz = source_index(z, spec.sz, in.nz);
        for (std::size_t y = 0; y < out_extent.ny; ++y) {
            for (std::size_t x = 0; x < out_extent.nx; ++x) {
                out.set(out_extent.index(x, y, z), grid.value_at(in.index(xs[x], ys[y], sz)));
            }
        }
    });
    return out;
}

VoxelGrid rescale_trilinear(const VoxelGrid& grid, const ScaleSpec& spec) {
    validate_scale(spec);
    if (spec.is_identity()) return grid;
    const Extent in = grid.extent();
    const Extent out_extent = spec.output_extent(in);
    VoxelGrid out(out_extent, grid.data_type());

    // Continuous input coordinate of an output voxel centre, clamped to the voxel-centre range.
    auto coord = [](std::size_t o, double s, std::size_t n) {
        const double c = (static_cast<double>(o) + 0.5) / s - 0.5;
        return std::clamp(c, 0.0, static_cast<double>(n - 1));
    };
    const bool integral = grid.data_type() != DataType::f32;

    parallel_for(out_extent.nz, [&](std::size_t z) {
        const double cz = coord(z, spec.sz, in.nz);
        const std::size_t z0 = static_cast<std::size_t>(cz);
        const std::size_t z1 = std::min(z0 + 1, in.nz - 1);
        const double tz = cz - static_cast<double>(z0);
        for (std::size_t y = 0; y < out_extent.ny; ++y) {
            const double cy = coord(y, spec.sy, in.ny);
            const std::size_t y0 = static_cast<std::size_t>(cy);
            const std::size_t y1 = std::min(y0 + 1, in.ny - 1);
            const double ty = cy - static_cast<double>(y0);
            for (std::size_t x = 0; x < out_extent.nx; ++x) {
                const double cx = coord(x, spec.sx, in.nx);
                const std::size_t x0 = static_cast<std::size_t>(cx);
                const std::size_t x1 = std::min(x0 + 1, in.nx - 1);
                const double tx = cx - static_cast<double>(x0);
                auto at = [&](std::size_t a, std::size_t b, std::size_t c) { return grid.value_at(in.index(a, b, c)); };
                const double c00 = at(x0, y0, z0) * (1 - tx) + at(x1, y0, z0) * tx;
                const double c10 = at(x0, y1, z0) * (1 - tx) + at(x1, y1, z0) * tx;
                const double c01 = at(x0, y0, z1) * (1 - tx) + at(x1, y0, z1) * tx;
                const double c11 = at(x0, y1, z1) * (1 - tx) + at(x1, y1, z1) * tx;
                const double v = (c00 * (1 - ty) + c10 * ty) * (1 - tz) + (c01 * (1 - ty) + c11 * ty) * tz;
                out.set(out_extent.index(x, y, z), integral ? std::round(v) : v);
            }
        }
    });
    return out;
}

VoxelGrid derive_membrane(const VoxelGrid& boundary) {
    const Extent e = boundary.extent();
    if (boundary.count_nonzero() == 0) throw Error(ErrorCode::EmptyBoundary, "boundary mask has no foreground");
    VoxelGrid membrane(e, DataType::u8);
    auto out = membrane.values<std::uint8_t>();
    constexpr std::array<std::array<int, 3>, 6> kFaces{{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};

    parallel_for(e.nz, [&](std::size_t z) {
        for (std::size_t y = 0; y < e.ny; ++y) {
            for (std::size_t x = 0; x < e.nx; ++x) {
                const std::size_t i = e.index(x, y, z);
                if (boundary.is_foreground(i)) continue;
                for (const auto& d : kFaces) {
                    const auto nx = static_cast<std::int64_t>(x) + d[0];
                    const auto ny = static_cast<std::int64_t>(y) + d[1];
                    const auto nz = static_cast<std::int64_t>(z) + d[2];
                    if (!e.contains(nx, ny, nz)) continue;
                    if (boundary.is_foreground(e.index(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny),
                                                       static_cast<std::size_t>(nz)))) {
                        out[i] = 1;
                        break;
                    }
                }
            }
        }
    });
    if (membrane.count_nonzero() == 0) warn("boundary fills the whole grid; derived membrane is empty");
    return membrane;
}

std::optional<Extent> project_extent(const Project& project) {
    for (const auto& meta : project.datasets()) {
        if (meta.kind != DatasetKind::distance_map) return meta.dimensions;
    }
    return std::nullopt;
}

std::string add_component(Project& project, const ComponentSpec& spec) {
    return add_component(project, spec, read_tiff(spec.path));
}

std::string add_component(Project& project, const ComponentSpec& spec, const TiffStack& stack) {
    if (!is_valid_dataset_id(spec.id)) throw Error(ErrorCode::InvalidMeta, "invalid dataset id '" + spec.id + "'");
    if (project.has_dataset(spec.id)) throw Error(ErrorCode::DuplicateId, "dataset '" + spec.id + "' already exists");
    if (spec.kind == DatasetKind::boundary && project.has_dataset(kMembraneId)) {
        throw Error(ErrorCode::DuplicateId, "project already has a 'membrane' dataset");
    }

    VoxelGrid grid;
    switch (spec.kind) {
        case DatasetKind::mask:
        case DatasetKind::boundary:
            grid = rescale(normalize_mask(stack), spec.scale);
            break;
        case DatasetKind::labels:
            grid = rescale(normalize_labels(stack), spec.scale);
            break;
        case DatasetKind::raw:
            grid = rescale_trilinear(grid_from_stack(stack), spec.scale);
            break;
        default:
            throw Error(ErrorCode::InvalidMeta,
                        "cannot add a dataset of kind " + std::string(to_string(spec.kind)) + " from a TIFF");
    }

    if (const auto shared = project_extent(project); shared && *shared != grid.extent()) {
        throw Error(ErrorCode::DimensionMismatch, "dataset '" + spec.id + "' is " + to_string(grid.extent()) +
                                                      " after scaling but the project grid is " + to_string(*shared));
    }

    VoxelGrid membrane;
    if (spec.kind == DatasetKind::boundary) membrane = derive_membrane(grid);

    DatasetMeta meta;
    meta.id = spec.id;
    meta.kind = spec.kind;
    meta.dimensions = grid.extent();
    meta.data_type = grid.data_type();
    meta.color = spec.color;
    project.put_dataset(meta, grid);

    if (spec.kind == DatasetKind::boundary) {
        DatasetMeta m;
        m.id = std::string(kMembraneId);
        m.kind = DatasetKind::membrane;
        m.dimensions = membrane.extent();
        m.data_type = DataType::u8;
        m.color = {200, 200, 200, 255};
        project.put_dataset(m, membrane);
    }
    return spec.id;
}

}  // namespace cellmetry
