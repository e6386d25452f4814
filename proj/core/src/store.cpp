#include "cellmetry/store.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstring>
#include <ctime>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "cellmetry/error.hpp"
#include "cellmetry/parallel.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace cellmetry {

static_assert(std::endian::native == std::endian::little, "block files are written in host order");

namespace {

constexpr std::string_view kDistanceMapPrefix = "distance_map.";

json meta_to_json(const DatasetMeta& meta) {
    json j;
    j["id"] = meta.id;
    j["kind"] = to_string(meta.kind);
    j["dimensions"] = {meta.dimensions.nx, meta.dimensions.ny, meta.dimensions.nz};
    j["block_size"] = {meta.block_size[0], meta.block_size[1], meta.block_size[2]};
    j["data_type"] = to_string(meta.data_type);
    j["color"] = {meta.color.r, meta.color.g, meta.color.b, meta.color.a};
    if (meta.distance_map) {
        j["source_dataset"] = meta.distance_map->source_dataset;
        j["produced_at"] = meta.distance_map->produced_at;
        j["stale"] = meta.distance_map->stale;
    }
    return j;
}

DatasetMeta meta_from_json(const json& j) {
    DatasetMeta meta;
    meta.id = j.at("id").get<std::string>();
    meta.kind = parse_dataset_kind(j.at("kind").get<std::string>());
    const auto& d = j.at("dimensions");
    meta.dimensions = {d.at(0).get<std::size_t>(), d.at(1).get<std::size_t>(), d.at(2).get<std::size_t>()};
    const auto& b = j.at("block_size");
    meta.block_size = {b.at(0).get<std::size_t>(), b.at(1).get<std::size_t>(), b.at(2).get<std::size_t>()};
    meta.data_type = parse_data_type(j.at("data_type").get<std::string>());
    const auto& c = j.at("color");
    meta.color = {c.at(0).get<std::uint8_t>(), c.at(1).get<std::uint8_t>(), c.at(2).get<std::uint8_t>(),
                  c.at(3).get<std::uint8_t>()};
    if (j.contains("source_dataset")) {
        meta.distance_map = DistanceMapInfo{j.at("source_dataset").get<std::string>(),
                                            j.value("produced_at", std::string{}), j.value("stale", false)};
    }
    return meta;
}

json parse_json_file(const fs::path& path) {
    try {
        return json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptFile, path.string() + ": " + e.what());
    }
}

std::string block_file_name(const BlockIndex& b) {
    return std::to_string(b[0]) + "_" + std::to_string(b[1]) + "_" + std::to_string(b[2]);
}

void validate_meta(const DatasetMeta& meta, const VoxelGrid& grid) {
    if (!is_valid_dataset_id(meta.id) && !meta.id.starts_with(kDistanceMapPrefix)) {
        throw Error(ErrorCode::InvalidMeta, "invalid dataset id '" + meta.id + "'");
    }
    const Extent& e = meta.dimensions;
    if (e.nx == 0 || e.ny == 0 || e.nz == 0) throw Error(ErrorCode::InvalidMeta, "dimensions must be positive");
    if (grid.extent() != e) {
        throw Error(ErrorCode::DimensionMismatch,
                    "grid " + to_string(grid.extent()) + " does not match declared " + to_string(e));
    }
    if (grid.data_type() != meta.data_type) throw Error(ErrorCode::InvalidMeta, "grid data type differs from meta");
    for (std::size_t b : meta.block_size) {
        if (b == 0) throw Error(ErrorCode::InvalidMeta, "block size must be positive");
    }

    if (is_binary_kind(meta.kind)) {
        if (meta.data_type != DataType::u8) {
            throw Error(ErrorCode::InvariantViolation, std::string(to_string(meta.kind)) + " datasets must be u8");
        }
        for (auto v : grid.values<std::uint8_t>()) {
            if (v > 1) {
                throw Error(ErrorCode::InvariantViolation,
                            "dataset '" + meta.id + "' of kind " + std::string(to_string(meta.kind)) +
                                " holds value " + std::to_string(v) + " outside {0, 1}");
            }
        }
    } else if (is_label_kind(meta.kind)) {
        if (meta.data_type == DataType::f32) {
            throw Error(ErrorCode::InvariantViolation, "labelmap '" + meta.id + "' must have an integer type");
        }
    } else if (meta.kind == DatasetKind::distance_map) {
        if (meta.data_type != DataType::f32) throw Error(ErrorCode::InvariantViolation, "distance maps must be f32");
        for (float v : grid.values<float>()) {
            if (!(v >= 0.0f)) throw Error(ErrorCode::InvariantViolation, "distance map values must be >= 0");
        }
    }
}

}  // namespace

bool is_valid_dataset_id(std::string_view id) {
    if (id.empty() || id == "analysis" || id == "export") return false;
    auto alnum = [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
    };
    if (!alnum(id.front())) return false;
    return std::all_of(id.begin(), id.end(), [&](char c) { return alnum(c) || c == '_' || c == '-'; });
}

std::string distance_map_id(std::string_view source_id) { return std::string(kDistanceMapPrefix) + std::string(source_id); }

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view text) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw Error(ErrorCode::Io, "short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const auto micros =
        std::chrono::duration_cast<std::chrono::microseconds>(now.time_since_epoch()).count() % 1000000;
    const std::time_t seconds = std::chrono::system_clock::to_time_t(now);
    std::tm utc{};
    gmtime_r(&seconds, &utc);
    char date[32];
    std::strftime(date, sizeof date, "%Y-%m-%dT%H:%M:%S", &utc);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%06lldZ", date, static_cast<long long>(micros));
    return out;
}

Project Project::create(const fs::path& parent_dir, const std::string& name, double pixel_to_um) {
    if (!(pixel_to_um > 0.0)) throw Error(ErrorCode::InvalidMeta, "pixel_to_um must be > 0");
    if (name.empty() || name.find_first_of("/\\") != std::string::npos) {
        throw Error(ErrorCode::InvalidMeta, "project name must be non-empty and contain no path separators");
    }
    if (!fs::is_directory(parent_dir)) throw Error(ErrorCode::Io, "parent directory " + parent_dir.string() + " missing");
    fs::path root = parent_dir / (name + ".n5");
    if (fs::exists(root)) throw Error(ErrorCode::AlreadyExists, root.string() + " already exists");

    fs::create_directory(root);
    fs::create_directories(root / "analysis");
    fs::create_directories(root / "export" / "meshes");
    Project project(root, ProjectMeta{name, pixel_to_um, std::string(kFormatVersion)}, {});
    project.write_root_attributes();
    return project;
}

Project Project::open(const fs::path& root) {
    if (!fs::is_regular_file(root / "attributes.json")) {
        throw Error(ErrorCode::Io, root.string() + " is not a project (no attributes.json)");
    }
    const json j = parse_json_file(root / "attributes.json");
    ProjectMeta meta;
    try {
        meta.name = j.at("name").get<std::string>();
        meta.pixel_to_um = j.at("pixel_to_um").get<double>();
        meta.version = j.value("version", std::string(kFormatVersion));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptFile, "project attributes: " + std::string(e.what()));
    }
    if (!(meta.pixel_to_um > 0.0)) throw Error(ErrorCode::InvalidMeta, "pixel_to_um must be > 0");
    std::vector<std::string> registry = j.value("datasets", std::vector<std::string>{});
    return Project(root, std::move(meta), std::move(registry));
}

void Project::write_root_attributes() const {
    json j;
    j["name"] = meta_.name;
    j["pixel_to_um"] = meta_.pixel_to_um;
    j["version"] = meta_.version;
    j["datasets"] = registry_;
    write_file_atomic(root_ / "attributes.json", j.dump(2) + "\n");
}

bool Project::has_dataset(std::string_view id) const {
    return std::find(registry_.begin(), registry_.end(), id) != registry_.end();
}

DatasetMeta Project::dataset(std::string_view id) const {
    if (!has_dataset(id)) throw Error(ErrorCode::NoSuchDataset, "no dataset '" + std::string(id) + "'");
    try {
        return meta_from_json(parse_json_file(dataset_dir(id) / "attributes.json"));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptFile, "dataset '" + std::string(id) + "' attributes: " + e.what());
    }
}

std::vector<DatasetMeta> Project::datasets() const {
    std::vector<DatasetMeta> out;
    out.reserve(registry_.size());
    for (const auto& id : registry_) out.push_back(dataset(id));
    return out;
}

std::array<std::size_t, 3> Project::block_grid(const DatasetMeta& meta) const {
    const Extent& e = meta.dimensions;
    const auto& b = meta.block_size;
    return {(e.nx + b[0] - 1) / b[0], (e.ny + b[1] - 1) / b[1], (e.nz + b[2] - 1) / b[2]};
}

void Project::write_blocks(const DatasetMeta& meta, const VoxelGrid& grid) const {
    const auto grid_blocks = block_grid(meta);
    const auto& bs = meta.block_size;
    const std::size_t width = byte_width(meta.data_type);
    const fs::path dir = dataset_dir(meta.id);
    const Extent& e = meta.dimensions;
    const auto src = grid.bytes();
    const std::size_t total = grid_blocks[0] * grid_blocks[1] * grid_blocks[2];

    parallel_for(total, [&](std::size_t flat) {
        const BlockIndex b{flat % grid_blocks[0], (flat / grid_blocks[0]) % grid_blocks[1],
                           flat / (grid_blocks[0] * grid_blocks[1])};
        std::vector<std::byte> buffer(bs[0] * bs[1] * bs[2] * width, std::byte{0});
        bool any = false;
        for (std::size_t z = 0; z < bs[2]; ++z) {
            const std::size_t gz = b[2] * bs[2] + z;
            if (gz >= e.nz) break;
            for (std::size_t y = 0; y < bs[1]; ++y) {
                const std::size_t gy = b[1] * bs[1] + y;
                if (gy >= e.ny) break;
                const std::size_t gx0 = b[0] * bs[0];
                const std::size_t run = std::min(bs[0], e.nx - gx0);
                const std::byte* from = src.data() + e.index(gx0, gy, gz) * width;
                std::byte* to = buffer.data() + (bs[0] * (y + bs[1] * z)) * width;
                std::memcpy(to, from, run * width);
                if (!any) any = std::any_of(from, from + run * width, [](std::byte v) { return v != std::byte{0}; });
            }
        }
        const fs::path file = dir / block_file_name(b);
        if (!any) {
            fs::remove(file);
            return;
        }
        std::ofstream out(file, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
        if (!out) throw Error(ErrorCode::Io, "cannot write block " + file.string());
    });
}

std::string Project::put_dataset(DatasetMeta meta, const VoxelGrid& grid) {
    if (has_dataset(meta.id)) throw Error(ErrorCode::DuplicateId, "dataset '" + meta.id + "' already exists");
    return replace_dataset(std::move(meta), grid);
}

std::string Project::replace_dataset(DatasetMeta meta, const VoxelGrid& grid) {
    validate_meta(meta, grid);
    const fs::path dir = dataset_dir(meta.id);
    const bool existed = has_dataset(meta.id);
    if (existed) fs::remove_all(dir);
    fs::create_directories(dir);
    write_file_atomic(dir / "attributes.json", meta_to_json(meta).dump(2) + "\n");
    write_blocks(meta, grid);
    if (!existed) {
        registry_.push_back(meta.id);
        write_root_attributes();
    }
    if (meta.kind != DatasetKind::distance_map) invalidate_dependents(meta.id);
    return meta.id;
}

std::vector<std::byte> Project::read_block(std::string_view id, const BlockIndex& block) const {
    const DatasetMeta meta = dataset(id);
    const auto grid_blocks = block_grid(meta);
    for (int a = 0; a < 3; ++a) {
        if (block[a] >= grid_blocks[a]) {
            throw Error(ErrorCode::OutOfRange, "block " + block_file_name(block) + " outside dataset '" +
                                                   std::string(id) + "'");
        }
    }
    const std::size_t bytes = meta.block_size[0] * meta.block_size[1] * meta.block_size[2] * byte_width(meta.data_type);
    std::vector<std::byte> buffer(bytes, std::byte{0});
    const fs::path file = dataset_dir(id) / block_file_name(block);
    std::ifstream in(file, std::ios::binary);
    if (!in) return buffer;
    in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(bytes));
    if (in.gcount() != static_cast<std::streamsize>(bytes)) {
        throw Error(ErrorCode::CorruptFile, "truncated block " + file.string());
    }
    return buffer;
}

VoxelGrid Project::read_dataset(std::string_view id) const {
    const DatasetMeta meta = dataset(id);
    VoxelGrid grid(meta.dimensions, meta.data_type);
    const auto grid_blocks = block_grid(meta);
    const auto& bs = meta.block_size;
    const std::size_t width = byte_width(meta.data_type);
    const Extent& e = meta.dimensions;
    auto dst = grid.bytes();
    const std::size_t total = grid_blocks[0] * grid_blocks[1] * grid_blocks[2];

    parallel_for(total, [&](std::size_t flat) {
        const BlockIndex b{flat % grid_blocks[0], (flat / grid_blocks[0]) % grid_blocks[1],
                           flat / (grid_blocks[0] * grid_blocks[1])};
        if (!fs::exists(dataset_dir(id) / block_file_name(b))) return;
        const auto buffer = read_block(id, b);
        for (std::size_t z = 0; z < bs[2]; ++z) {
            const std::size_t gz = b[2] * bs[2] + z;
            if (gz >= e.nz) break;
            for (std::size_t y = 0; y < bs[1]; ++y) {
                const std::size_t gy = b[1] * bs[1] + y;
                if (gy >= e.ny) break;
                const std::size_t gx0 = b[0] * bs[0];
                const std::size_t run = std::min(bs[0], e.nx - gx0);
                std::memcpy(dst.data() + e.index(gx0, gy, gz) * width,
                            buffer.data() + (bs[0] * (y + bs[1] * z)) * width, run * width);
            }
        }
    });
    return grid;
}

void Project::delete_dataset(std::string_view id) {
    if (!has_dataset(id)) throw Error(ErrorCode::NoSuchDataset, "no dataset '" + std::string(id) + "'");
    fs::remove_all(dataset_dir(id));
    registry_.erase(std::find(registry_.begin(), registry_.end(), id));
    write_root_attributes();
    invalidate_dependents(id);
}

void Project::update_meta(const DatasetMeta& meta) {
    const DatasetMeta current = dataset(meta.id);
    if (current.dimensions != meta.dimensions || current.data_type != meta.data_type ||
        current.block_size != meta.block_size) {
        throw Error(ErrorCode::InvalidMeta, "update_meta cannot change the layout of '" + meta.id + "'");
    }
    write_file_atomic(dataset_dir(meta.id) / "attributes.json", meta_to_json(meta).dump(2) + "\n");
}

void Project::mark_stale(std::string_view id) {
    DatasetMeta meta = dataset(id);
    if (!meta.distance_map) return;
    meta.distance_map->stale = true;
    update_meta(meta);
}

void Project::invalidate_dependents(std::string_view source_id) {
    const std::string map_id = distance_map_id(source_id);
    if (has_dataset(map_id)) mark_stale(map_id);
}

}  // namespace cellmetry
