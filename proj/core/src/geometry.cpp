#include "cellmetry/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "cellmetry/diagnostics.hpp"
#include "cellmetry/error.hpp"
#include "cellmetry/parallel.hpp"
#include "mc_tables.hpp"

namespace cellmetry {
namespace {

constexpr std::array<std::array<int, 3>, 8> kCorner{{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
}};

// Edge e starts at corner offset kEdgeOrigin[e] and runs along kEdgeAxis[e].
constexpr std::array<std::array<int, 3>, 12> kEdgeOrigin{{
    {0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 0}, {0, 0, 1}, {1, 0, 1},
    {0, 1, 1}, {0, 0, 1}, {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
}};
constexpr std::array<int, 12> kEdgeAxis{0, 1, 0, 1, 0, 1, 0, 1, 2, 2, 2, 2};

// Occupancy with one voxel of zero padding on every side; padded index p is voxel p - 1.
struct PaddedField {
    std::size_t px = 0, py = 0, pz = 0;
    std::vector<float> values;
    std::array<double, 3> origin{0, 0, 0};  // voxel coordinate of the unpadded (0,0,0)

    float at(std::size_t x, std::size_t y, std::size_t z) const { return values[x + px * (y + py * z)]; }
};

template <typename Inside>
PaddedField make_field(const Extent& e, const Voxel& origin, Inside inside) {
    PaddedField f;
    f.px = e.nx + 2;
    f.py = e.ny + 2;
    f.pz = e.nz + 2;
    f.values.assign(f.px * f.py * f.pz, 0.0f);
    f.origin = {static_cast<double>(origin.x), static_cast<double>(origin.y), static_cast<double>(origin.z)};
    parallel_for(e.nz, [&](std::size_t z) {
        for (std::size_t y = 0; y < e.ny; ++y) {
            for (std::size_t x = 0; x < e.nx; ++x) {
                if (inside(x, y, z)) f.values[(x + 1) + f.px * ((y + 1) + f.py * (z + 1))] = 1.0f;
            }
        }
    });
    return f;
}

std::uint64_t edge_key(const PaddedField& f, std::size_t x, std::size_t y, std::size_t z, int axis) {
    return ((static_cast<std::uint64_t>(z) * f.py + y) * f.px + x) * 3 + static_cast<std::uint64_t>(axis);
}

std::array<double, 3> cross(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

std::array<double, 3> sub(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

double dot(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

TriangleMesh polygonise(const PaddedField& f, double pixel_to_um, double isolevel) {
    using KeyTriangle = std::array<std::uint64_t, 3>;
    const std::size_t slabs = f.pz - 1;
    std::vector<std::vector<KeyTriangle>> per_slab(slabs);
    const auto iso = static_cast<float>(isolevel);

    parallel_for(slabs, [&](std::size_t z) {
        auto& out = per_slab[z];
        for (std::size_t y = 0; y + 1 < f.py; ++y) {
            for (std::size_t x = 0; x + 1 < f.px; ++x) {
                unsigned cube = 0;
                for (int c = 0; c < 8; ++c) {
                    if (f.at(x + kCorner[c][0], y + kCorner[c][1], z + kCorner[c][2]) < iso) cube |= 1u << c;
                }
                if (mc_tables::kEdgeTable[cube] == 0) continue;
                const auto& tris = mc_tables::kTriTable[cube];
                for (int t = 0; tris[t] != -1; t += 3) {
                    KeyTriangle k{};
                    for (int v = 0; v < 3; ++v) {
                        const int e = tris[t + v];
                        k[v] = edge_key(f, x + kEdgeOrigin[e][0], y + kEdgeOrigin[e][1], z + kEdgeOrigin[e][2],
                                        kEdgeAxis[e]);
                    }
                    out.push_back(k);
                }
            }
        }
    });

    TriangleMesh mesh;
    std::unordered_map<std::uint64_t, std::uint32_t> index;
    auto vertex_for = [&](std::uint64_t key) {
        auto [it, inserted] = index.try_emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
        if (inserted) {
            const int axis = static_cast<int>(key % 3);
            std::uint64_t cell = key / 3;
            std::array<std::size_t, 3> p{};
            p[0] = cell % f.px;
            cell /= f.px;
            p[1] = cell % f.py;
            p[2] = cell / f.py;
            auto q = p;
            ++q[axis];
            const double v0 = f.at(p[0], p[1], p[2]);
            const double v1 = f.at(q[0], q[1], q[2]);
            const double t = v1 == v0 ? 0.5 : (isolevel - v0) / (v1 - v0);
            std::array<double, 3> pos{};
            for (int a = 0; a < 3; ++a) {
                double c = static_cast<double>(p[a]) - 1.0 + f.origin[a];
                if (a == axis) c += t;
                pos[a] = c * pixel_to_um;
            }
            mesh.vertices.push_back(pos);
        }
        return it->second;
    };
    for (const auto& slab : per_slab) {
        for (const auto& k : slab) {
            std::array<std::uint32_t, 3> tri{vertex_for(k[0]), vertex_for(k[1]), vertex_for(k[2])};
            const auto n = cross(sub(mesh.vertices[tri[1]], mesh.vertices[tri[0]]),
                                 sub(mesh.vertices[tri[2]], mesh.vertices[tri[0]]));
            if (dot(n, n) == 0.0) continue;
            mesh.triangles.push_back(tri);
        }
    }
    if (signed_volume(mesh) < 0.0) {
        for (auto& t : mesh.triangles) std::swap(t[1], t[2]);
    }
    return mesh;
}

std::uint64_t undirected(std::uint32_t a, std::uint32_t b) {
    return (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(std::string_view in, std::size_t offset) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
    return v;
}

float get_f32(std::string_view in, std::size_t offset) { return std::bit_cast<float>(get_u32(in, offset)); }

constexpr std::size_t kStlHeader = 80;
constexpr std::size_t kStlRecord = 50;

}  // namespace

TriangleMesh marching_cubes(const VoxelGrid& mask, double pixel_to_um, double isolevel) {
    if (mask.count_nonzero() == 0) throw Error(ErrorCode::EmptyComponent, "grid has no foreground to mesh");
    const Extent& e = mask.extent();
    auto field = make_field(e, Voxel{}, [&](std::size_t x, std::size_t y, std::size_t z) {
        return mask.is_foreground(e.index(x, y, z));
    });
    return polygonise(field, pixel_to_um, isolevel);
}

TriangleMesh marching_cubes_label(const VoxelGrid& labels, std::uint32_t label, double pixel_to_um) {
    const Extent& e = labels.extent();
    std::array<std::size_t, 3> lo{e.nx, e.ny, e.nz};
    std::array<std::size_t, 3> hi{0, 0, 0};
    bool found = false;
    for (std::size_t z = 0; z < e.nz; ++z) {
        for (std::size_t y = 0; y < e.ny; ++y) {
            for (std::size_t x = 0; x < e.nx; ++x) {
                if (labels.label_at(e.index(x, y, z)) != label) continue;
                found = true;
                lo = {std::min(lo[0], x), std::min(lo[1], y), std::min(lo[2], z)};
                hi = {std::max(hi[0], x), std::max(hi[1], y), std::max(hi[2], z)};
            }
        }
    }
    if (!found) throw Error(ErrorCode::EmptyComponent, "label " + std::to_string(label) + " has no voxels");
    const Extent crop{hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1};
    const Voxel origin{static_cast<std::int64_t>(lo[0]), static_cast<std::int64_t>(lo[1]),
                       static_cast<std::int64_t>(lo[2])};
    auto field = make_field(crop, origin, [&](std::size_t x, std::size_t y, std::size_t z) {
        return labels.label_at(e.index(x + lo[0], y + lo[1], z + lo[2])) == label;
    });
    return polygonise(field, pixel_to_um, 0.5);
}

double surface_area(const TriangleMesh& mesh) {
    double area = 0.0;
    for (const auto& t : mesh.triangles) {
        const auto n = cross(sub(mesh.vertices[t[1]], mesh.vertices[t[0]]), sub(mesh.vertices[t[2]], mesh.vertices[t[0]]));
        area += 0.5 * std::sqrt(dot(n, n));
    }
    return area;
}

double signed_volume(const TriangleMesh& mesh) {
    double volume = 0.0;
    for (const auto& t : mesh.triangles) {
        volume += dot(mesh.vertices[t[0]], cross(mesh.vertices[t[1]], mesh.vertices[t[2]]));
    }
    return volume / 6.0;
}

bool is_closed_and_oriented(const TriangleMesh& mesh) {
    std::unordered_map<std::uint64_t, int> uses;
    std::unordered_map<std::uint64_t, int> directed;
    for (const auto& t : mesh.triangles) {
        for (int i = 0; i < 3; ++i) {
            const std::uint32_t a = t[i], b = t[(i + 1) % 3];
            ++uses[undirected(a, b)];
            ++directed[(static_cast<std::uint64_t>(a) << 32) | b];
        }
    }
    for (const auto& [edge, count] : uses) {
        if (count != 2) return false;
    }
    return std::all_of(directed.begin(), directed.end(), [](const auto& kv) { return kv.second == 1; });
}

std::size_t connected_components(const TriangleMesh& mesh) {
    std::vector<std::uint32_t> parent(mesh.vertices.size());
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t v) {
        while (parent[v] != v) v = parent[v] = parent[parent[v]];
        return v;
    };
    for (const auto& t : mesh.triangles) {
        const auto a = find(t[0]);
        parent[find(t[1])] = a;
        parent[find(t[2])] = a;
    }
    std::vector<bool> used(mesh.vertices.size(), false);
    for (const auto& t : mesh.triangles) used[t[0]] = true;
    std::size_t count = 0;
    for (std::uint32_t v = 0; v < parent.size(); ++v) {
        if (used[v] && find(v) == v) ++count;
    }
    return count;
}

long euler_characteristic(const TriangleMesh& mesh) {
    std::vector<std::uint64_t> edges;
    edges.reserve(mesh.triangles.size() * 3);
    std::vector<bool> used(mesh.vertices.size(), false);
    for (const auto& t : mesh.triangles) {
        for (int i = 0; i < 3; ++i) {
            edges.push_back(undirected(t[i], t[(i + 1) % 3]));
            used[t[i]] = true;
        }
    }
    std::sort(edges.begin(), edges.end());
    const auto e = std::unique(edges.begin(), edges.end()) - edges.begin();
    const auto v = std::count(used.begin(), used.end(), true);
    return static_cast<long>(v) - static_cast<long>(e) + static_cast<long>(mesh.triangles.size());
}

std::vector<StlTriangle> to_stl_triangles(const TriangleMesh& mesh) {
    std::vector<StlTriangle> out;
    out.reserve(mesh.triangles.size());
    for (const auto& t : mesh.triangles) {
        StlTriangle s{};
        auto n = cross(sub(mesh.vertices[t[1]], mesh.vertices[t[0]]), sub(mesh.vertices[t[2]], mesh.vertices[t[0]]));
        const double len = std::sqrt(dot(n, n));
        for (int a = 0; a < 3; ++a) s.normal[a] = len > 0 ? static_cast<float>(n[a] / len) : 0.0f;
        for (int v = 0; v < 3; ++v) {
            for (int a = 0; a < 3; ++a) s.vertices[v][a] = static_cast<float>(mesh.vertices[t[v]][a]);
        }
        out.push_back(s);
    }
    return out;
}

std::string encode_stl(const std::vector<StlTriangle>& triangles) {
    std::string out(kStlHeader, '\0');
    constexpr std::string_view kTitle = "cellmetry binary STL";
    std::copy(kTitle.begin(), kTitle.end(), out.begin());
    out.reserve(kStlHeader + 4 + kStlRecord * triangles.size());
    put_u32(out, static_cast<std::uint32_t>(triangles.size()));
    for (const auto& t : triangles) {
        for (float c : t.normal) put_f32(out, c);
        for (const auto& v : t.vertices) {
            for (float c : v) put_f32(out, c);
        }
        out.push_back('\0');
        out.push_back('\0');
    }
    return out;
}

std::vector<StlTriangle> decode_stl(std::string_view bytes) {
    if (bytes.size() < kStlHeader + 4) throw Error(ErrorCode::CorruptFile, "STL shorter than its header");
    const std::uint32_t count = get_u32(bytes, kStlHeader);
    if (bytes.size() != kStlHeader + 4 + kStlRecord * static_cast<std::size_t>(count)) {
        throw Error(ErrorCode::CorruptFile, "STL size does not match its triangle count " + std::to_string(count));
    }
    std::vector<StlTriangle> out(count);
    std::size_t at = kStlHeader + 4;
    for (auto& t : out) {
        for (auto& c : t.normal) {
            c = get_f32(bytes, at);
            at += 4;
        }
        for (auto& v : t.vertices) {
            for (auto& c : v) {
                c = get_f32(bytes, at);
                at += 4;
            }
        }
        at += 2;
    }
    return out;
}

void write_stl(const std::filesystem::path& path, const TriangleMesh& mesh) {
    write_file_atomic(path, encode_stl(to_stl_triangles(mesh)));
}

std::vector<StlTriangle> read_stl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_stl(bytes);
}

std::vector<std::string> split_selection(std::string_view comma_list) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= comma_list.size()) {
        const std::size_t end = std::min(comma_list.find(',', start), comma_list.size());
        std::string_view item = comma_list.substr(start, end - start);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        if (!item.empty()) out.emplace_back(item);
        start = end + 1;
    }
    return out;
}

bool is_selected(std::string_view id, const std::vector<std::string>& include, const std::vector<std::string>& exclude) {
    auto contains = [id](const std::string& s) { return id.find(s) != std::string_view::npos; };
    if (!include.empty() && std::none_of(include.begin(), include.end(), contains)) return false;
    return std::none_of(exclude.begin(), exclude.end(), contains);
}

MeshExportResult export_meshes(Project& project, const MeshExportOptions& options) {
    MeshExportResult result;
    std::vector<DatasetMeta> selected;
    for (const auto& meta : project.datasets()) {
        if (is_component(meta.kind) && is_selected(meta.id, options.include, options.exclude)) selected.push_back(meta);
    }
    if (selected.empty()) {
        warn("NothingSelected: no component matches the include/exclude selection");
        return result;
    }

    const double pixel = project.meta().pixel_to_um;
    std::filesystem::create_directories(project.mesh_dir());
    nlohmann::ordered_json scene = nlohmann::ordered_json::array();
    auto emit = [&](const std::string& id, const TriangleMesh& mesh, const Rgba& color) {
        const std::string file = id + ".stl";
        const auto path = project.mesh_dir() / file;
        write_stl(path, mesh);
        result.stl_files.push_back(path);
        scene.push_back({{"id", id}, {"path", file}, {"color", {color.r, color.g, color.b, color.a}}});
    };

    for (std::size_t i = 0; i < selected.size(); ++i) {
        const auto& meta = selected[i];
        progress("export-meshes", static_cast<int>(100 * i / selected.size()));
        const VoxelGrid grid = project.read_dataset(meta.id);
        if (grid.count_nonzero() == 0) {
            warn("component '" + meta.id + "' is empty; no mesh written");
            continue;
        }
        if (options.split_labels && is_label_kind(meta.kind)) {
            std::set<std::uint32_t> labels;
            for (std::size_t v = 0; v < grid.size(); ++v) {
                if (const auto l = grid.label_at(v); l != 0) labels.insert(l);
            }
            for (const auto label : labels) {
                emit(meta.id + "_" + std::to_string(label), marching_cubes_label(grid, label, pixel), meta.color);
            }
        } else {
            emit(meta.id, marching_cubes(grid, pixel), meta.color);
        }
    }
    progress("export-meshes", 100);
    result.scene = project.mesh_dir() / "scene.json";
    write_file_atomic(result.scene, scene.dump(2) + "\n");
    return result;
}

}  // namespace cellmetry
