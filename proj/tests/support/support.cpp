#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "cellmetry/ingest.hpp"
#include "cellmetry/tiff.hpp"

namespace cellmetry::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            (tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

VoxelGrid random_mask(const Extent& extent, double density, std::mt19937_64& rng) {
    VoxelGrid grid(extent, DataType::u8);
    std::bernoulli_distribution fg(density);
    for (auto& v : grid.values<std::uint8_t>()) v = fg(rng) ? 1 : 0;
    return grid;
}

std::vector<std::uint32_t> brute_force_squared_edt(const VoxelGrid& mask) {
    const Extent& e = mask.extent();
    std::vector<std::array<std::int64_t, 3>> fg;
    for (std::size_t z = 0; z < e.nz; ++z) {
        for (std::size_t y = 0; y < e.ny; ++y) {
            for (std::size_t x = 0; x < e.nx; ++x) {
                if (mask.is_foreground(e.index(x, y, z))) {
                    fg.push_back({static_cast<std::int64_t>(x), static_cast<std::int64_t>(y),
                                  static_cast<std::int64_t>(z)});
                }
            }
        }
    }
    std::vector<std::uint32_t> out(e.voxels(), std::numeric_limits<std::uint32_t>::max());
    if (fg.empty()) return out;
    const auto n = static_cast<std::int64_t>(std::max({e.nx, e.ny, e.nz}));
    auto is_fg = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
        return e.contains(x, y, z) &&
               mask.is_foreground(e.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                          static_cast<std::size_t>(z)));
    };
    for (std::int64_t z = 0; z < static_cast<std::int64_t>(e.nz); ++z) {
        for (std::int64_t y = 0; y < static_cast<std::int64_t>(e.ny); ++y) {
            for (std::int64_t x = 0; x < static_cast<std::int64_t>(e.nx); ++x) {
                std::int64_t best = std::numeric_limits<std::int64_t>::max();
                if (fg.size() <= 2048) {
                    for (const auto& f : fg) {
                        const std::int64_t dx = f[0] - x, dy = f[1] - y, dz = f[2] - z;
                        best = std::min(best, dx * dx + dy * dy + dz * dz);
                    }
                } else {
                    // Scan Chebyshev shells outward; stop once no unscanned voxel can be closer.
                    for (std::int64_t r = 0; r <= n; ++r) {
                        for (std::int64_t dz = -r; dz <= r; ++dz) {
                            for (std::int64_t dy = -r; dy <= r; ++dy) {
                                for (std::int64_t dx = -r; dx <= r; ++dx) {
                                    if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
                                    if (is_fg(x + dx, y + dy, z + dz)) {
                                        best = std::min(best, dx * dx + dy * dy + dz * dz);
                                    }
                                }
                            }
                        }
                        if ((r + 1) * (r + 1) >= best) break;
                    }
                }
                out[e.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<std::size_t>(z))] =
                    static_cast<std::uint32_t>(best);
            }
        }
    }
    return out;
}

VoxelGrid digitized_ball(const Extent& extent, double radius, const std::array<double, 3>& centre) {
    VoxelGrid grid(extent, DataType::u8);
    auto v = grid.values<std::uint8_t>();
    for (std::size_t z = 0; z < extent.nz; ++z) {
        for (std::size_t y = 0; y < extent.ny; ++y) {
            for (std::size_t x = 0; x < extent.nx; ++x) {
                const double dx = static_cast<double>(x) - centre[0];
                const double dy = static_cast<double>(y) - centre[1];
                const double dz = static_cast<double>(z) - centre[2];
                if (dx * dx + dy * dy + dz * dz <= radius * radius) v[extent.index(x, y, z)] = 1;
            }
        }
    }
    return grid;
}

double ks_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) return 0.0;
    auto cdf = [](const std::vector<double>& s, double x) {
        const auto count = std::count_if(s.begin(), s.end(), [x](double v) { return v <= x; });
        return static_cast<double>(count) / static_cast<double>(s.size());
    };
    double d = 0.0;
    for (const auto* s : {&a, &b}) {
        for (double x : *s) d = std::max(d, std::fabs(cdf(a, x) - cdf(b, x)));
    }
    return d;
}

std::string add_grid(Project& project, const std::string& id, DatasetKind kind, const VoxelGrid& grid) {
    ComponentSpec spec;
    spec.id = id;
    spec.kind = kind;
    const int bits = grid.max_value() > 255.0 ? 16 : 8;
    return add_component(project, spec, stack_from_grid(grid, bits));
}

namespace {

struct Shape {
    Extent extent;
    std::array<double, 3> centre;
    std::array<double, 3> semi_axes;

    bool in_cell(double x, double y, double z, double margin = 0.0) const {
        const double ax = semi_axes[0] - margin, ay = semi_axes[1] - margin, az = semi_axes[2] - margin;
        const double u = (x - centre[0]) / ax, v = (y - centre[1]) / ay, w = (z - centre[2]) / az;
        return u * u + v * v + w * w <= 1.0;
    }
};

template <typename Fn>
void for_each_voxel(const Extent& e, Fn fn) {
    for (std::size_t z = 0; z < e.nz; ++z) {
        for (std::size_t y = 0; y < e.ny; ++y) {
            for (std::size_t x = 0; x < e.nx; ++x) fn(x, y, z);
        }
    }
}

}  // namespace

SyntheticCell build_synthetic_cell(const fs::path& parent, const std::string& name, const SyntheticCellOptions& options) {
    const auto n = static_cast<double>(options.size);
    const Extent e{options.size, options.size, options.size};
    const Shape cell{e, {(n - 1) / 2, (n - 1) / 2, (n - 1) / 2}, {0.44 * n, 0.38 * n, 0.32 * n}};
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    SyntheticCell out;
    out.name = name;
    out.boundary = VoxelGrid(e, DataType::u8);
    out.nucleus = VoxelGrid(e, DataType::u8);
    out.granules = VoxelGrid(e, DataType::u16);

    const std::array<double, 3> nucleus_centre{cell.centre[0] + 0.1 * n, cell.centre[1], cell.centre[2]};
    const double nucleus_r = 0.13 * n;
    for_each_voxel(e, [&](std::size_t x, std::size_t y, std::size_t z) {
        const double fx = static_cast<double>(x), fy = static_cast<double>(y), fz = static_cast<double>(z);
        const std::size_t i = e.index(x, y, z);
        if (cell.in_cell(fx, fy, fz)) out.boundary.set(i, 1);
        const double dx = fx - nucleus_centre[0], dy = fy - nucleus_centre[1], dz = fz - nucleus_centre[2];
        if (dx * dx + dy * dy + dz * dz <= nucleus_r * nucleus_r) out.nucleus.set(i, 1);
    });

    // The first granules rest against the nucleus so some labels are connected to it.
    const double gr = std::max(2.0, 0.035 * n);
    std::vector<std::array<double, 3>> centres;
    const std::size_t touching = std::min<std::size_t>(4, options.labels);
    std::size_t attempts = 0;
    while (centres.size() < options.labels) {
        if (++attempts > 200000) throw std::runtime_error("could not place synthetic granules");
        std::array<double, 3> c{};
        if (centres.size() < touching) {
            std::normal_distribution<double> g(0.0, 1.0);
            std::array<double, 3> d{g(rng), g(rng), g(rng)};
            const double len = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            for (int a = 0; a < 3; ++a) c[a] = std::round(nucleus_centre[a] + d[a] / len * (nucleus_r + gr));
        } else {
            for (int a = 0; a < 3; ++a) c[a] = std::round(unit(rng) * (n - 1));
        }
        if (!cell.in_cell(c[0], c[1], c[2], gr + 1.0)) continue;
        const double ndx = c[0] - nucleus_centre[0], ndy = c[1] - nucleus_centre[1], ndz = c[2] - nucleus_centre[2];
        if (centres.size() >= touching && std::sqrt(ndx * ndx + ndy * ndy + ndz * ndz) < nucleus_r + gr + 0.5) continue;
        const bool clear = std::all_of(centres.begin(), centres.end(), [&](const auto& o) {
            const double dx = o[0] - c[0], dy = o[1] - c[1], dz = o[2] - c[2];
            return std::sqrt(dx * dx + dy * dy + dz * dz) > 2 * gr + 2.0;
        });
        if (clear) centres.push_back(c);
    }
    auto labels = out.granules.values<std::uint16_t>();
    for (std::size_t k = 0; k < centres.size(); ++k) {
        const auto& c = centres[k];
        const auto lo = [&](int a) { return static_cast<std::size_t>(std::max(0.0, std::floor(c[a] - gr))); };
        const auto hi = [&](int a) { return static_cast<std::size_t>(std::min(n - 1, std::ceil(c[a] + gr))); };
        for (std::size_t z = lo(2); z <= hi(2); ++z) {
            for (std::size_t y = lo(1); y <= hi(1); ++y) {
                for (std::size_t x = lo(0); x <= hi(0); ++x) {
                    const double dx = static_cast<double>(x) - c[0], dy = static_cast<double>(y) - c[1],
                                 dz = static_cast<double>(z) - c[2];
                    if (dx * dx + dy * dy + dz * dz <= gr * gr) labels[e.index(x, y, z)] = static_cast<std::uint16_t>(k + 1);
                }
            }
        }
    }

    // One unbranched polyline per thing, nodes in voxel units.
    std::int64_t node_id = 1;
    std::uniform_int_distribution<int> node_count(3, 5);
    std::normal_distribution<double> jitter(0.0, 1.0);
    while (out.skeleton.things.size() < options.filaments) {
        Thing thing;
        thing.id = static_cast<std::int64_t>(out.skeleton.things.size()) + 1;
        std::array<double, 3> p{};
        do {
            for (int a = 0; a < 3; ++a) p[a] = std::round(unit(rng) * (n - 1));
        } while (!cell.in_cell(p[0], p[1], p[2], 2.0));
        std::array<double, 3> dir{jitter(rng), jitter(rng), jitter(rng)};
        const double len = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
        for (auto& d : dir) d /= len;
        const int count = node_count(rng);
        bool ok = true;
        for (int i = 0; i < count && ok; ++i) {
            thing.nodes.push_back({node_id + i, p});
            const double step = 3.0 + 3.0 * unit(rng);
            for (int a = 0; a < 3; ++a) p[a] = std::round(p[a] + dir[a] * step + 0.5 * jitter(rng));
            ok = cell.in_cell(p[0], p[1], p[2], 1.0);
        }
        if (!ok) continue;
        for (int i = 0; i + 1 < count; ++i) thing.edges.push_back({node_id + i, node_id + i + 1});
        node_id += count;
        out.skeleton.things.push_back(std::move(thing));
    }
    out.skeleton.boundary_z = static_cast<std::int64_t>(options.size);

    Project project = Project::create(parent, name, options.pixel_to_um);
    out.root = project.root();
    add_grid(project, "boundary", DatasetKind::boundary, out.boundary);
    add_grid(project, "nucleus", DatasetKind::mask, out.nucleus);
    add_grid(project, "granules", DatasetKind::labels, out.granules);
    import_filaments(project, out.skeleton, FilamentImportSpec{}, "microtubules");
    return out;
}

}  // namespace cellmetry::testing
