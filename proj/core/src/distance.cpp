#include "cellmetry/distance.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cellmetry/error.hpp"
#include "cellmetry/parallel.hpp"

namespace cellmetry {
namespace {

// Breakpoint between two parabolas as an exact fraction num / den with den > 0.
struct Breakpoint {
    std::int64_t num = 0;
    std::int64_t den = 1;
    bool neg_inf = false;
    bool pos_inf = false;
};

bool less_equal(const Breakpoint& a, const Breakpoint& b) {
    if (a.neg_inf || b.pos_inf) return true;
    if (a.pos_inf || b.neg_inf) return false;
    return a.num * b.den <= b.num * a.den;
}

// Exact 1D squared-distance transform of one line. `f` holds squared
// distances from earlier passes (kUnreachable = no site); result goes to `out`.
class LineEnvelope {
public:
    explicit LineEnvelope(std::size_t n) : sites_(n), bounds_(n + 1) {}

    void run(const std::uint32_t* f, std::uint32_t* out, std::size_t n) {
        std::size_t k = 0;
        bool any = false;
        for (std::size_t q = 0; q < n; ++q) {
            if (f[q] == kUnreachable) continue;
            if (!any) {
                sites_[0] = q;
                bounds_[0] = Breakpoint{0, 1, true, false};
                bounds_[1] = Breakpoint{0, 1, false, true};
                k = 0;
                any = true;
                continue;
            }
            Breakpoint s;
            while (true) {
                const std::size_t v = sites_[k];
                const auto qi = static_cast<std::int64_t>(q);
                const auto vi = static_cast<std::int64_t>(v);
                s.num = (static_cast<std::int64_t>(f[q]) + qi * qi) - (static_cast<std::int64_t>(f[v]) + vi * vi);
                s.den = 2 * (qi - vi);
                s.neg_inf = s.pos_inf = false;
                if (k > 0 && less_equal(s, bounds_[k])) {
                    --k;
                    continue;
                }
                break;
            }
            ++k;
            sites_[k] = q;
            bounds_[k] = s;
            bounds_[k + 1] = Breakpoint{0, 1, false, true};
        }
        if (!any) {
            for (std::size_t q = 0; q < n; ++q) out[q] = kUnreachable;
            return;
        }
        std::size_t j = 0;
        for (std::size_t q = 0; q < n; ++q) {
            const auto qi = static_cast<std::int64_t>(q);
            // Advance while the next breakpoint lies strictly left of q.
            while (!bounds_[j + 1].pos_inf && bounds_[j + 1].num < qi * bounds_[j + 1].den) ++j;
            const auto d = qi - static_cast<std::int64_t>(sites_[j]);
            out[q] = static_cast<std::uint32_t>(d * d + static_cast<std::int64_t>(f[sites_[j]]));
        }
    }

private:
    std::vector<std::size_t> sites_;
    std::vector<Breakpoint> bounds_;
};

}  // namespace

std::vector<std::uint32_t> squared_distance_transform(const VoxelGrid& source) {
    const Extent e = source.extent();
    const std::size_t longest = std::max({e.nx, e.ny, e.nz});
    const double worst = 3.0 * static_cast<double>(longest) * static_cast<double>(longest);
    if (worst >= static_cast<double>(kUnreachable)) {
        throw Error(ErrorCode::InvalidMeta, "grid " + to_string(e) + " too large for 32-bit squared distances");
    }
    std::vector<std::uint32_t> d(e.voxels(), kUnreachable);

    // x: two sweeps per row give the 1D distance to the nearest site.
    std::size_t foreground = 0;
    std::vector<std::size_t> per_slab(e.nz, 0);
    parallel_for(e.nz, [&](std::size_t z) {
        for (std::size_t y = 0; y < e.ny; ++y) {
            std::uint32_t* row = d.data() + e.index(0, y, z);
            std::int64_t last = -1;
            for (std::size_t x = 0; x < e.nx; ++x) {
                if (source.is_foreground(e.index(x, y, z))) {
                    last = static_cast<std::int64_t>(x);
                    row[x] = 0;
                    ++per_slab[z];
                } else if (last >= 0) {
                    row[x] = static_cast<std::uint32_t>(static_cast<std::int64_t>(x) - last);
                }
            }
            last = -1;
            for (std::size_t x = e.nx; x-- > 0;) {
                if (row[x] == 0) {
                    last = static_cast<std::int64_t>(x);
                } else if (last >= 0) {
                    const auto gap = static_cast<std::uint32_t>(last - static_cast<std::int64_t>(x));
                    if (gap < row[x]) row[x] = gap;
                }
            }
            for (std::size_t x = 0; x < e.nx; ++x) {
                if (row[x] != kUnreachable) row[x] *= row[x];
            }
        }
    });
    for (std::size_t c : per_slab) foreground += c;
    if (foreground == 0) throw Error(ErrorCode::EmptyComponent, "component has no foreground voxels");

    // y: lines within each z slab.
    parallel_for(e.nz, [&](std::size_t z) {
        LineEnvelope env(e.ny);
        std::vector<std::uint32_t> in(e.ny), out(e.ny);
        for (std::size_t x = 0; x < e.nx; ++x) {
            for (std::size_t y = 0; y < e.ny; ++y) in[y] = d[e.index(x, y, z)];
            env.run(in.data(), out.data(), e.ny);
            for (std::size_t y = 0; y < e.ny; ++y) d[e.index(x, y, z)] = out[y];
        }
    });

    // z: lines within each y plane.
    parallel_for(e.ny, [&](std::size_t y) {
        LineEnvelope env(e.nz);
        std::vector<std::uint32_t> in(e.nz), out(e.nz);
        for (std::size_t x = 0; x < e.nx; ++x) {
            for (std::size_t z = 0; z < e.nz; ++z) in[z] = d[e.index(x, y, z)];
            env.run(in.data(), out.data(), e.nz);
            for (std::size_t z = 0; z < e.nz; ++z) d[e.index(x, y, z)] = out[z];
        }
    });
    return d;
}

VoxelGrid distance_transform(const VoxelGrid& source, double pixel_to_um) {
    const auto squared = squared_distance_transform(source);
    VoxelGrid map(source.extent(), DataType::f32);
    auto out = map.values<float>();
    parallel_for(source.extent().nz, [&](std::size_t z) {
        const std::size_t plane = source.extent().nx * source.extent().ny;
        for (std::size_t i = z * plane; i < (z + 1) * plane; ++i) {
            out[i] = static_cast<float>(std::sqrt(static_cast<double>(squared[i])) * pixel_to_um);
        }
    });
    return map;
}

std::size_t distance_transform_bytes(const Extent& extent, DataType source_type) {
    const std::size_t n = extent.voxels();
    return n * (byte_width(source_type) + sizeof(std::uint32_t) + sizeof(float));
}

}  // namespace cellmetry
