#include "cellmetry/skeleton.hpp"

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <yaml-cpp/yaml.h>

#include "cellmetry/diagnostics.hpp"
#include "cellmetry/error.hpp"
#include "cellmetry/parallel.hpp"

namespace pt = boost::property_tree;

namespace cellmetry {
namespace {

template <typename T>
T numeric_attribute(const pt::ptree& attrs, const char* name, const char* element) {
    const auto text = attrs.get_optional<std::string>(name);
    if (!text) throw Error(ErrorCode::MalformedXml, std::string("<") + element + "> lacks attribute '" + name + "'");
    try {
        std::size_t used = 0;
        T value;
        if constexpr (std::is_floating_point_v<T>) {
            value = static_cast<T>(std::stod(*text, &used));
        } else {
            value = static_cast<T>(std::stoll(*text, &used));
        }
        if (used != text->size()) throw std::invalid_argument("trailing characters");
        return value;
    } catch (const std::exception&) {
        throw Error(ErrorCode::MalformedXml,
                    std::string("<") + element + "> attribute '" + name + "' is not a number: '" + *text + "'");
    }
}

Thing parse_thing(const pt::ptree& node) {
    static const pt::ptree kEmpty;
    Thing thing;
    const auto& attrs = node.get_child("<xmlattr>", kEmpty);
    thing.id = numeric_attribute<std::int64_t>(attrs, "id", "thing");
    std::set<std::int64_t> ids;
    for (const auto& [name, nodes] : node) {
        if (name == "nodes") {
            for (const auto& [child_name, child] : nodes) {
                if (child_name != "node") continue;
                const auto& a = child.get_child("<xmlattr>", kEmpty);
                SkeletonNode n;
                n.id = numeric_attribute<std::int64_t>(a, "id", "node");
                n.position = {numeric_attribute<double>(a, "x", "node"), numeric_attribute<double>(a, "y", "node"),
                              numeric_attribute<double>(a, "z", "node")};
                if (!ids.insert(n.id).second) {
                    throw Error(ErrorCode::MalformedXml,
                                "thing " + std::to_string(thing.id) + " repeats node id " + std::to_string(n.id));
                }
                thing.nodes.push_back(n);
            }
        }
    }
    for (const auto& [name, edges] : node) {
        if (name != "edges") continue;
        for (const auto& [child_name, child] : edges) {
            if (child_name != "edge") continue;
            const auto& a = child.get_child("<xmlattr>", kEmpty);
            SkeletonEdge e{numeric_attribute<std::int64_t>(a, "source", "edge"),
                           numeric_attribute<std::int64_t>(a, "target", "edge")};
            for (auto end : {e.source, e.target}) {
                if (!ids.contains(end)) {
                    throw Error(ErrorCode::DanglingEdge, "thing " + std::to_string(thing.id) +
                                                             " has an edge to missing node " + std::to_string(end));
                }
            }
            if (e.source != e.target) thing.edges.push_back(e);
        }
    }
    return thing;
}

SkeletonDocument parse_document(std::istream& in, const std::string& origin) {
    pt::ptree tree;
    try {
        pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error& e) {
        throw Error(ErrorCode::MalformedXml, origin + ": " + e.what());
    }
    if (tree.empty()) throw Error(ErrorCode::MalformedXml, origin + ": no root element");

    SkeletonDocument doc;
    for (const auto& [root_name, root] : tree) {
        if (root_name == "<xmlcomment>") continue;
        for (const auto& [name, child] : root) {
            if (name == "thing") {
                doc.things.push_back(parse_thing(child));
            } else if (name == "things") {
                for (const auto& [inner_name, inner] : child) {
                    if (inner_name == "thing") doc.things.push_back(parse_thing(inner));
                }
            } else if (name == "parameters") {
                if (const auto boundary = child.get_child_optional("boundary")) {
                    static const pt::ptree kEmpty;
                    const auto& a = boundary->get_child("<xmlattr>", kEmpty);
                    if (a.get_optional<std::string>("z")) doc.boundary_z = numeric_attribute<std::int64_t>(a, "z", "boundary");
                }
            }
        }
    }
    std::stable_sort(doc.things.begin(), doc.things.end(), [](const Thing& a, const Thing& b) { return a.id < b.id; });
    return doc;
}

double distance(const Point3& a, const Point3& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

std::string format_fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

SkeletonDocument parse_skeleton_xml(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return parse_document(in, path.string());
}

SkeletonDocument parse_skeleton_xml_string(std::string_view xml) {
    std::istringstream in{std::string(xml)};
    return parse_document(in, "<string>");
}

std::int64_t compute_z_offset(const SkeletonDocument& doc, std::size_t project_nz, double scale_z) {
    if (!doc.boundary_z) {
        warn("skeleton declares no z-extent; using z offset 0 (pass an explicit offset if slices are missing)");
        return 0;
    }
    if (!(scale_z > 0.0)) throw Error(ErrorCode::InvalidMeta, "scale_z must be > 0");
    const auto annotation_nz = static_cast<std::int64_t>(std::llround(static_cast<double>(project_nz) / scale_z));
    return std::max<std::int64_t>(0, annotation_nz - *doc.boundary_z);
}

std::vector<NodePath> reconstruct_filaments(const Thing& thing) {
    std::map<std::int64_t, Point3> position;
    for (const auto& n : thing.nodes) position[n.id] = n.position;
    std::map<std::int64_t, std::set<std::int64_t>> adjacency;
    for (const auto& e : thing.edges) {
        if (e.source == e.target) continue;
        if (!position.contains(e.source) || !position.contains(e.target)) {
            throw Error(ErrorCode::DanglingEdge, "thing " + std::to_string(thing.id) + " has a dangling edge");
        }
        adjacency[e.source].insert(e.target);
        adjacency[e.target].insert(e.source);
    }

    // Join free ends lying within one annotation voxel of each other.
    struct Candidate {
        double dist;
        std::int64_t a, b;
        bool operator<(const Candidate& o) const { return std::tie(dist, a, b) < std::tie(o.dist, o.a, o.b); }
    };
    std::vector<std::int64_t> ends;
    for (const auto& [id, nbrs] : adjacency) {
        if (nbrs.size() == 1) ends.push_back(id);
    }
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < ends.size(); ++i) {
        for (std::size_t j = i + 1; j < ends.size(); ++j) {
            const double d = distance(position[ends[i]], position[ends[j]]);
            if (d <= 1.0 && !adjacency[ends[i]].contains(ends[j])) candidates.push_back({d, ends[i], ends[j]});
        }
    }
    std::sort(candidates.begin(), candidates.end());
    for (const auto& c : candidates) {
        if (adjacency[c.a].size() == 1 && adjacency[c.b].size() == 1) {
            adjacency[c.a].insert(c.b);
            adjacency[c.b].insert(c.a);
        }
    }

    std::set<std::pair<std::int64_t, std::int64_t>> used;
    auto key = [](std::int64_t a, std::int64_t b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
    auto walk = [&](std::int64_t start, std::int64_t first) {
        NodePath path{start, first};
        used.insert(key(start, first));
        std::int64_t prev = start, cur = first;
        while (adjacency[cur].size() == 2 && cur != start) {
            std::int64_t next = 0;
            for (auto n : adjacency[cur]) {
                if (n != prev) next = n;
            }
            if (used.contains(key(cur, next))) break;
            used.insert(key(cur, next));
            path.push_back(next);
            prev = cur;
            cur = next;
        }
        return path;
    };

    std::vector<NodePath> paths;
    for (const auto& [id, nbrs] : adjacency) {
        if (nbrs.size() == 2) continue;
        for (auto n : nbrs) {
            if (!used.contains(key(id, n))) paths.push_back(walk(id, n));
        }
    }
    // Whatever remains consists of cycles of degree-2 nodes.
    for (const auto& [id, nbrs] : adjacency) {
        if (nbrs.empty()) continue;
        const auto first = *nbrs.begin();
        if (used.contains(key(id, first))) continue;
        paths.push_back(walk(id, first));
    }

    for (auto& p : paths) {
        if (p.front() == p.back()) continue;
        const Point3& a = position[p.front()];
        const Point3& b = position[p.back()];
        if (b < a || (b == a && p.back() < p.front())) std::reverse(p.begin(), p.end());
    }
    return paths;
}

double filament_length(const Filament& filament) {
    double total = 0.0;
    for (std::size_t i = 1; i < filament.points.size(); ++i) total += distance(filament.points[i - 1], filament.points[i]);
    return total;
}

std::optional<double> filament_tortuosity(const Filament& filament) {
    if (filament.points.size() < 2) return std::nullopt;
    const double chord = distance(filament.points.front(), filament.points.back());
    if (chord < 1e-9) return std::nullopt;
    return filament_length(filament) / chord;
}

double quantize_um(double value) {
    const double q = std::strtod(format_fixed6(value).c_str(), nullptr);
    return q == 0.0 ? 0.0 : q;
}

FilamentSet build_filaments(const SkeletonDocument& doc, std::int64_t z_offset, const ScaleSpec& scale,
                            double pixel_to_um) {
    FilamentSet out;
    for (const auto& thing : doc.things) {
        std::map<std::int64_t, Point3> position;
        for (const auto& n : thing.nodes) position[n.id] = n.position;
        std::vector<Filament> pieces;
        for (const auto& path : reconstruct_filaments(thing)) {
            Filament f;
            for (auto id : path) {
                const Point3& p = position.at(id);
                const Point3 um{quantize_um(p[0] * scale.sx * pixel_to_um), quantize_um(p[1] * scale.sy * pixel_to_um),
                                quantize_um((p[2] + static_cast<double>(z_offset)) * scale.sz * pixel_to_um)};
                if (!f.points.empty() && f.points.back() == um) continue;
                f.points.push_back(um);
            }
            if (f.points.size() < 2 || !(filament_length(f) > 0.0)) {
                warn("thing " + std::to_string(thing.id) + ": dropping a path that collapses to a single point");
                continue;
            }
            pieces.push_back(std::move(f));
        }
        for (std::size_t k = 0; k < pieces.size(); ++k) {
            pieces[k].id = pieces.size() == 1 ? std::to_string(thing.id)
                                              : std::to_string(thing.id) + "." + std::to_string(k + 1);
            out.push_back(std::move(pieces[k]));
        }
    }
    return out;
}

std::string format_filaments_yaml(const FilamentSet& filaments) {
    if (filaments.empty()) return "[]\n";
    std::string out;
    for (const auto& f : filaments) {
        out += "- id: \"" + f.id + "\"\n  points:\n";
        for (const auto& p : f.points) {
            out += "    - [" + format_fixed6(p[0]) + ", " + format_fixed6(p[1]) + ", " + format_fixed6(p[2]) + "]\n";
        }
    }
    return out;
}

FilamentSet parse_filaments_yaml(std::string_view text) {
    FilamentSet out;
    try {
        const YAML::Node root = YAML::Load(std::string(text));
        if (!root.IsSequence()) throw Error(ErrorCode::CorruptFile, "filaments YAML must be a list");
        for (const auto& entry : root) {
            Filament f;
            f.id = entry["id"].as<std::string>();
            for (const auto& p : entry["points"]) {
                if (!p.IsSequence() || p.size() != 3) throw Error(ErrorCode::CorruptFile, "points must be [x, y, z]");
                f.points.push_back({p[0].as<double>(), p[1].as<double>(), p[2].as<double>()});
            }
            out.push_back(std::move(f));
        }
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::CorruptFile, std::string("filaments YAML: ") + e.what());
    }
    return out;
}

FilamentSet read_filaments_yaml(const std::filesystem::path& path) { return parse_filaments_yaml(read_text_file(path)); }

VoxelGrid rasterize_filaments(const FilamentSet& filaments, const Extent& extent, double pixel_to_um,
                              double radius_um) {
    if (!(radius_um > 0.0)) throw Error(ErrorCode::InvalidMeta, "filament radius must be > 0");
    VoxelGrid grid(extent, filaments.size() > 65535 ? DataType::u32 : DataType::u16);
    const double radius_vox = radius_um / pixel_to_um;

    std::vector<std::vector<std::size_t>> claimed(filaments.size());
    parallel_for(filaments.size(), [&](std::size_t k) {
        std::set<std::size_t> voxels;
        const auto& pts = filaments[k].points;
        auto claim = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
            if (extent.contains(x, y, z)) {
                voxels.insert(extent.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                           static_cast<std::size_t>(z)));
            }
        };
        for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
            Point3 a, b;
            for (int i = 0; i < 3; ++i) {
                a[i] = pts[s][i] / pixel_to_um;
                b[i] = pts[s + 1][i] / pixel_to_um;
            }
            const Point3 ab{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
            const double len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
            std::array<std::int64_t, 3> lo, hi;
            for (int i = 0; i < 3; ++i) {
                lo[i] = static_cast<std::int64_t>(std::floor(std::min(a[i], b[i]) - radius_vox));
                hi[i] = static_cast<std::int64_t>(std::ceil(std::max(a[i], b[i]) + radius_vox));
            }
            for (std::int64_t z = lo[2]; z <= hi[2]; ++z) {
                for (std::int64_t y = lo[1]; y <= hi[1]; ++y) {
                    for (std::int64_t x = lo[0]; x <= hi[0]; ++x) {
                        const Point3 c{static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
                        double t = 0.0;
                        if (len2 > 0.0) {
                            t = ((c[0] - a[0]) * ab[0] + (c[1] - a[1]) * ab[1] + (c[2] - a[2]) * ab[2]) / len2;
                            t = std::clamp(t, 0.0, 1.0);
                        }
                        const Point3 p{a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]};
                        if (distance(p, c) * pixel_to_um <= radius_um) claim(x, y, z);
                    }
                }
            }
            const double len = std::sqrt(len2);
            const auto steps = static_cast<std::size_t>(std::ceil(len / 0.5));
            for (std::size_t i = 0; i <= steps; ++i) {
                const double t = steps == 0 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps);
                claim(std::llround(a[0] + t * ab[0]), std::llround(a[1] + t * ab[1]), std::llround(a[2] + t * ab[2]));
            }
        }
        claimed[k].assign(voxels.begin(), voxels.end());
    });

    for (std::size_t k = 0; k < filaments.size(); ++k) {
        for (std::size_t i : claimed[k]) {
            if (grid.label_at(i) == 0) grid.set(i, static_cast<double>(k + 1));
        }
    }
    return grid;
}

FilamentImport import_filaments(Project& project, const SkeletonDocument& doc, const FilamentImportSpec& spec,
                                const std::string& name, Rgba color) {
    if (!is_valid_dataset_id(name)) throw Error(ErrorCode::InvalidMeta, "invalid dataset id '" + name + "'");
    if (project.has_dataset(name)) throw Error(ErrorCode::DuplicateId, "dataset '" + name + "' already exists");
    const auto extent = project_extent(project);
    if (!extent) throw Error(ErrorCode::InvalidMeta, "add a mask or labelmap before importing filaments");

    const std::int64_t offset = spec.z_offset ? *spec.z_offset : compute_z_offset(doc, extent->nz, spec.scale.sz);
    FilamentImport result;
    result.filaments = build_filaments(doc, offset, spec.scale, project.meta().pixel_to_um);
    const VoxelGrid grid = rasterize_filaments(result.filaments, *extent, project.meta().pixel_to_um, spec.radius_um);

    DatasetMeta meta;
    meta.id = name;
    meta.kind = DatasetKind::filaments_labels;
    meta.dimensions = *extent;
    meta.data_type = grid.data_type();
    meta.color = color;
    result.dataset_id = project.put_dataset(meta, grid);
    write_file_atomic(project.dataset_dir(name) / kFilamentsFile, format_filaments_yaml(result.filaments));
    return result;
}

}  // namespace cellmetry
