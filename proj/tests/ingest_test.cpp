#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "cellmetry/diagnostics.hpp"
#include "cellmetry/error.hpp"
#include "cellmetry/ingest.hpp"
#include "support/support.hpp"

namespace cellmetry {
namespace {

using testing::error_code_of;

TiffStack stack_of(std::size_t w, std::size_t h, std::size_t pages, std::vector<std::uint16_t> samples, int bits = 8) {
    TiffStack s;
    s.width = w;
    s.height = h;
    s.pages = pages;
    s.bits_per_sample = bits;
    s.samples = std::move(samples);
    return s;
}

std::set<std::uint32_t> value_set(const VoxelGrid& g) {
    std::set<std::uint32_t> out;
    for (std::size_t i = 0; i < g.size(); ++i) out.insert(g.label_at(i));
    return out;
}

TEST(Ingest, ScaleFromPixelSizesMatchesPublishedFactors) {
    const ScaleSpec s = scale_for_pixel_size({0.004, 0.004, 0.0034}, 0.016);
    EXPECT_EQ(s.sx, 0.25);
    EXPECT_EQ(s.sy, 0.25);
    EXPECT_EQ(s.sz, 0.2125);
    EXPECT_EQ(s.output_extent({1000, 1000, 800}), (Extent{250, 250, 170}));
    EXPECT_EQ((ScaleSpec{0.01, 0.01, 0.01}.output_extent({10, 10, 10})), (Extent{1, 1, 1}));
    EXPECT_EQ(error_code_of([] { scale_for_pixel_size({0.0, 1.0, 1.0}, 1.0); }), ErrorCode::InvalidMeta);
}

TEST(Ingest, NormalizeMaskAcceptsOneAnd255) {
    const auto s = stack_of(2, 2, 2, {0, 255, 0, 1, 255, 0, 0, 0});
    const VoxelGrid g = normalize_mask(s);
    EXPECT_EQ(g.data_type(), DataType::u8);
    EXPECT_EQ(g.count_nonzero(), 3u);
    EXPECT_EQ(value_set(g), (std::set<std::uint32_t>{0, 1}));
    EXPECT_EQ(g.label_at(g.extent().index(1, 0, 0)), 1u);
    EXPECT_EQ(g.label_at(g.extent().index(0, 0, 1)), 1u);

    EXPECT_EQ(normalize_mask(stack_of(2, 1, 1, {0, 0})).count_nonzero(), 0u);
    EXPECT_EQ(error_code_of([] { normalize_mask(stack_of(2, 1, 1, {0, 128})); }), ErrorCode::NotBinary);
}

TEST(Ingest, NormalizeLabelsKeepsIdsAndWidens) {
    const VoxelGrid g = normalize_labels(stack_of(3, 1, 1, {0, 3, 7}, 16));
    EXPECT_EQ(g.data_type(), DataType::u16);
    EXPECT_EQ(value_set(g), (std::set<std::uint32_t>{0, 3, 7}));

    VoxelGrid wide({2, 1, 1}, DataType::u32);
    wide.set(1, 70000);
    const VoxelGrid w = normalize_labels(wide);
    EXPECT_EQ(w.data_type(), DataType::u32);
    EXPECT_EQ(w.label_at(1), 70000u);

    const VoxelGrid empty = normalize_labels(stack_of(2, 2, 1, {0, 0, 0, 0}, 16));
    EXPECT_EQ(empty.count_nonzero(), 0u);
}

TEST(Ingest, RescaleIdentityAndNearestNeighbourMapping) {
    std::mt19937_64 rng(11);
    const Extent e{9, 7, 5};
    VoxelGrid labels(e, DataType::u16);
    std::uniform_int_distribution<int> v(0, 6);
    for (auto& x : labels.values<std::uint16_t>()) x = static_cast<std::uint16_t>(v(rng));
    EXPECT_EQ(rescale(labels, ScaleSpec{}), labels);

    for (const ScaleSpec spec : {ScaleSpec{0.5, 0.5, 0.5}, ScaleSpec{2.0, 1.5, 0.7}, ScaleSpec{0.25, 3.0, 1.0}}) {
        const VoxelGrid out = rescale(labels, spec);
        const Extent& o = out.extent();
        EXPECT_EQ(o, spec.output_extent(e));
        for (std::size_t z = 0; z < o.nz; ++z) {
            for (std::size_t y = 0; y < o.ny; ++y) {
                for (std::size_t x = 0; x < o.nx; ++x) {
                    auto src = [](std::size_t i, double s, std::size_t n) {
                        const auto f = static_cast<std::size_t>(std::floor((static_cast<double>(i) + 0.5) / s));
                        return std::min(f, n - 1);
                    };
                    const std::size_t sx = src(x, spec.sx, e.nx), sy = src(y, spec.sy, e.ny), sz = src(z, spec.sz, e.nz);
                    ASSERT_EQ(out.label_at(o.index(x, y, z)), labels.label_at(e.index(sx, sy, sz)));
                }
            }
        }
        const auto in_set = value_set(labels);
        for (auto value : value_set(out)) EXPECT_TRUE(in_set.contains(value));
    }
}

TEST(Ingest, RescaleSingleLabelCubeKeepsLabelSet) {
    const Extent e{8, 8, 8};
    VoxelGrid g(e, DataType::u16);
    for (std::size_t z = 2; z < 6; ++z) {
        for (std::size_t y = 2; y < 6; ++y) {
            for (std::size_t x = 2; x < 6; ++x) g.set(e.index(x, y, z), 9);
        }
    }
    EXPECT_EQ(value_set(rescale(g, ScaleSpec{0.5, 0.5, 0.5})), (std::set<std::uint32_t>{0, 9}));
}

TEST(Ingest, TrilinearIdentityAndRange) {
    std::mt19937_64 rng(2);
    const Extent e{6, 5, 4};
    VoxelGrid raw(e, DataType::u16);
    std::uniform_int_distribution<int> v(0, 1000);
    for (auto& x : raw.values<std::uint16_t>()) x = static_cast<std::uint16_t>(v(rng));
    EXPECT_EQ(rescale_trilinear(raw, ScaleSpec{}), raw);
    const VoxelGrid half = rescale_trilinear(raw, ScaleSpec{0.5, 0.5, 0.5});
    EXPECT_EQ(half.extent(), (Extent{3, 3, 2}));
    EXPECT_LE(half.max_value(), raw.max_value());
}

TEST(Ingest, MembraneOfSingleVoxelIsItsFaceNeighbours) {
    const Extent e{5, 5, 5};
    VoxelGrid b(e, DataType::u8);
    b.set(e.index(2, 2, 2), 1);
    const VoxelGrid m = derive_membrane(b);
    EXPECT_EQ(m.count_nonzero(), 6u);
    for (auto [x, y, z] : std::vector<std::array<std::size_t, 3>>{{1, 2, 2}, {3, 2, 2}, {2, 1, 2}, {2, 3, 2}, {2, 2, 1}, {2, 2, 3}}) {
        EXPECT_EQ(m.label_at(e.index(x, y, z)), 1u);
    }
}

TEST(Ingest, MembraneOfCentredCubeHas54Voxels) {
    const Extent e{7, 7, 7};
    VoxelGrid b(e, DataType::u8);
    for (std::size_t z = 2; z < 5; ++z) {
        for (std::size_t y = 2; y < 5; ++y) {
            for (std::size_t x = 2; x < 5; ++x) b.set(e.index(x, y, z), 1);
        }
    }
    EXPECT_EQ(derive_membrane(b).count_nonzero(), 54u);
}

TEST(Ingest, MembraneIsDisjointAndFaceAdjacentOnRandomShapes) {
    std::mt19937_64 rng(8);
    const Extent e{12, 10, 9};
    for (int trial = 0; trial < 10; ++trial) {
        const VoxelGrid b = testing::random_mask(e, 0.2, rng);
        const VoxelGrid m = derive_membrane(b);
        for (std::size_t z = 0; z < e.nz; ++z) {
            for (std::size_t y = 0; y < e.ny; ++y) {
                for (std::size_t x = 0; x < e.nx; ++x) {
                    const std::size_t i = e.index(x, y, z);
                    bool adjacent = false;
                    const std::int64_t xs = static_cast<std::int64_t>(x), ys = static_cast<std::int64_t>(y),
                                       zs = static_cast<std::int64_t>(z);
                    for (auto [dx, dy, dz] : std::vector<std::array<int, 3>>{
                             {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}) {
                        if (e.contains(xs + dx, ys + dy, zs + dz) &&
                            b.is_foreground(e.index(static_cast<std::size_t>(xs + dx), static_cast<std::size_t>(ys + dy),
                                                    static_cast<std::size_t>(zs + dz)))) {
                            adjacent = true;
                        }
                    }
                    ASSERT_EQ(m.is_foreground(i), !b.is_foreground(i) && adjacent);
                }
            }
        }
    }
}

TEST(Ingest, MembraneEdgeCases) {
    const Extent e{3, 3, 3};
    VoxelGrid full(e, DataType::u8);
    for (auto& v : full.values<std::uint8_t>()) v = 1;
    testing::TempDir tmp;
    {
        ScopedWarningCapture warnings;
        EXPECT_EQ(derive_membrane(full).count_nonzero(), 0u);
        EXPECT_TRUE(warnings.contains("membrane"));
    }
    EXPECT_EQ(error_code_of([&] { derive_membrane(VoxelGrid(e, DataType::u8)); }), ErrorCode::EmptyBoundary);
}

TEST(Ingest, AddBoundaryRegistersMembraneAndChecksDimensions) {
    testing::TempDir tmp;
    Project p = Project::create(tmp.path(), "cell", 0.016);
    const Extent e{8, 8, 8};
    VoxelGrid b(e, DataType::u8);
    for (std::size_t z = 2; z < 6; ++z) {
        for (std::size_t y = 2; y < 6; ++y) {
            for (std::size_t x = 2; x < 6; ++x) b.set(e.index(x, y, z), 1);
        }
    }
    const auto tif = tmp.path() / "boundary.tif";
    write_tiff(tif, stack_from_grid(b, 8));
    ComponentSpec spec{tif, DatasetKind::boundary, "boundary", parse_rgba("FF000080"), {}};
    EXPECT_EQ(add_component(p, spec), "boundary");
    EXPECT_TRUE(p.has_dataset("membrane"));
    EXPECT_EQ(p.dataset("membrane").kind, DatasetKind::membrane);
    EXPECT_EQ(p.read_dataset("membrane"), derive_membrane(b));
    EXPECT_EQ(error_code_of([&] { add_component(p, spec); }), ErrorCode::DuplicateId);

    ComponentSpec small{tif, DatasetKind::mask, "half", {}, ScaleSpec{0.5, 0.5, 0.5}};
    EXPECT_EQ(error_code_of([&] { add_component(p, small); }), ErrorCode::DimensionMismatch);

    write_tiff(tmp.path() / "labels.tif", stack_from_grid(b, 16));
    ComponentSpec labels{tmp.path() / "labels.tif", DatasetKind::labels, "cells", {}, {}};
    add_component(p, labels);
    EXPECT_EQ(p.dataset("cells").data_type, DataType::u16);
    EXPECT_EQ(project_extent(p), e);
}

}  // namespace
}  // namespace cellmetry
