// Acceptance suite: one PASS/FAIL line per criterion. `--only N` runs a single criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cellmetry/analysis.hpp"
#include "cellmetry/baseline.hpp"
#include "cellmetry/connectivity.hpp"
#include "cellmetry/csv.hpp"
#include "cellmetry/diagnostics.hpp"
#include "cellmetry/distance.hpp"
#include "cellmetry/error.hpp"
#include "cellmetry/geometry.hpp"
#include "cellmetry/ingest.hpp"
#include "cellmetry/parallel.hpp"
#include "cellmetry/skeleton.hpp"
#include "cellmetry/tiff.hpp"
#include "cellmetry_cli/cli.hpp"
#include "support/support.hpp"

namespace cellmetry {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

std::size_t peak_rss_bytes() {
    std::ifstream in("/proc/self/status");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("VmHWM:", 0) == 0) return std::stoull(line.substr(6)) * 1024;
    }
    return 0;
}

// Criterion 1 inputs: 200 masks of 32^3 with log-uniform density in [0.001, 0.5].
std::vector<VoxelGrid> edt_masks(std::size_t count) {
    std::mt19937_64 rng(1001);
    std::uniform_real_distribution<double> log_density(std::log(0.001), std::log(0.5));
    std::vector<VoxelGrid> masks;
    for (std::size_t i = 0; i < count; ++i) {
        VoxelGrid m = testing::random_mask({32, 32, 32}, std::exp(log_density(rng)), rng);
        if (m.count_nonzero() == 0) m.set(rng() % m.size(), 1);
        masks.push_back(std::move(m));
    }
    return masks;
}

Verdict edt_exactness() {
    const auto masks = edt_masks(200);
    std::size_t bad_voxels = 0, bad_masks = 0;
    double transform_s = 0.0;
    const auto start = Clock::now();
    for (const auto& m : masks) {
        const auto t0 = Clock::now();
        const auto got = squared_distance_transform(m);
        const VoxelGrid um = distance_transform(m, 1.0);
        transform_s += seconds_since(t0);
        const auto want = testing::brute_force_squared_edt(m);
        std::size_t bad = 0;
        for (std::size_t i = 0; i < want.size(); ++i) {
            if (got[i] != want[i] || um.value_at(i) != static_cast<double>(static_cast<float>(std::sqrt(want[i])))) ++bad;
        }
        bad_voxels += bad;
        if (bad) ++bad_masks;
    }
    const double total = seconds_since(start);
    return {bad_voxels == 0 && total < 60.0,
            fmt("200 masks of 32^3, %zu mismatching voxels in %zu masks, transform %.2f s, total with oracle %.2f s",
                bad_voxels, bad_masks, transform_s, total)};
}

Verdict scale_factors() {
    const ScaleSpec s = scale_for_pixel_size({0.004, 0.004, 0.0034}, 0.016);
    return {s.sx == 0.25 && s.sy == 0.25 && s.sz == 0.2125,
            fmt("4 x 4 x 3.4 nm to 0.016 um gives [X=%g, Y=%g, Z=%g] (exact comparison)", s.sx, s.sy, s.sz)};
}

// Random graph families for criterion 3. Node positions are distinct even lattice points, so
// no two free ends are within one annotation voxel of each other.
Thing random_graph(std::mt19937_64& rng, int family, std::size_t& star_degree) {
    const std::size_t n = 2 + rng() % 49;
    Thing t;
    t.id = 1;
    std::set<std::array<int, 3>> used;
    std::vector<std::int64_t> ids;
    while (t.nodes.size() < n) {
        const std::array<int, 3> p{static_cast<int>(rng() % 40), static_cast<int>(rng() % 40), static_cast<int>(rng() % 40)};
        if (!used.insert(p).second) continue;
        const auto id = static_cast<std::int64_t>(1000 + rng() % 100000);
        if (std::find(ids.begin(), ids.end(), id) != ids.end()) continue;
        ids.push_back(id);
        t.nodes.push_back({id, {2.0 * p[0], 2.0 * p[1], 2.0 * p[2]}});
    }
    star_degree = 0;
    switch (family) {
        case 0:  // random tree
            for (std::size_t i = 1; i < n; ++i) t.edges.push_back({ids[rng() % i], ids[i]});
            break;
        case 1:  // path
            for (std::size_t i = 1; i < n; ++i) t.edges.push_back({ids[i - 1], ids[i]});
            break;
        case 2:  // cycle
            for (std::size_t i = 1; i < n; ++i) t.edges.push_back({ids[i - 1], ids[i]});
            if (n >= 3) t.edges.push_back({ids[n - 1], ids[0]});
            break;
        default: {  // star of unbranched arms around ids[0]
            if (n < 4) {
                for (std::size_t i = 1; i < n; ++i) t.edges.push_back({ids[0], ids[i]});
                break;
            }
            const std::size_t arms = 3 + rng() % std::min<std::size_t>(6, n - 3);
            std::vector<std::int64_t> tips(arms, ids[0]);
            for (std::size_t i = 1; i < n; ++i) {
                const std::size_t arm = i <= arms ? i - 1 : rng() % arms;
                t.edges.push_back({tips[arm], ids[i]});
                tips[arm] = ids[i];
            }
            star_degree = arms;
        }
    }
    return t;
}

std::string check_paths(const Thing& t, const std::vector<NodePath>& paths) {
    std::map<std::int64_t, std::set<std::int64_t>> adj;
    std::multiset<std::pair<std::int64_t, std::int64_t>> edges;
    for (const auto& e : t.edges) {
        adj[e.source].insert(e.target);
        adj[e.target].insert(e.source);
        edges.insert({std::min(e.source, e.target), std::max(e.source, e.target)});
    }
    std::multiset<std::pair<std::int64_t, std::int64_t>> covered;
    std::size_t steps = 0;
    for (const auto& p : paths) {
        if (p.size() < 2) return "path with fewer than two nodes";
        for (std::size_t i = 1; i < p.size(); ++i) {
            if (!adj[p[i - 1]].contains(p[i])) return "consecutive path nodes are not adjacent";
            covered.insert({std::min(p[i - 1], p[i]), std::max(p[i - 1], p[i])});
            ++steps;
        }
        for (std::size_t i = 1; i + 1 < p.size(); ++i) {
            if (adj[p[i]].size() != 2) return "path runs through a branch point or end";
        }
        const bool closed = p.front() == p.back();
        if (!closed && (adj[p.front()].size() == 2 || adj[p.back()].size() == 2)) return "path stops at a degree-2 node";
    }
    if (covered != edges) return "paths do not cover every edge exactly once";
    if (steps != t.edges.size()) return "sum of (points - 1) differs from the edge count";
    return {};
}

Verdict filament_reconstruction() {
    std::mt19937_64 rng(3003);
    const auto start = Clock::now();
    std::size_t failures = 0, stars = 0;
    std::string first_problem;
    for (int g = 0; g < 500; ++g) {
        std::size_t star_degree = 0;
        Thing t = random_graph(rng, g % 4, star_degree);
        const auto reference = reconstruct_filaments(t);
        std::string problem = check_paths(t, reference);
        if (problem.empty() && star_degree > 0) {
            ++stars;
            if (reference.size() != star_degree) problem = "star split into " + std::to_string(reference.size()) + " paths";
        }
        for (int s = 0; s < 5 && problem.empty(); ++s) {
            std::shuffle(t.edges.begin(), t.edges.end(), rng);
            for (auto& e : t.edges) {
                if (rng() % 2) std::swap(e.source, e.target);
            }
            std::shuffle(t.nodes.begin(), t.nodes.end(), rng);
            if (reconstruct_filaments(t) != reference) problem = "output changes under edge permutation";
        }
        if (!problem.empty()) {
            ++failures;
            if (first_problem.empty()) first_problem = "graph " + std::to_string(g) + ": " + problem;
        }
    }
    const double s = seconds_since(start);
    return {failures == 0 && s < 10.0, fmt("500 graphs (%zu stars), %zu failures, %.2f s%s%s", stars, failures, s,
                                           first_problem.empty() ? "" : "; ", first_problem.c_str())};
}

Verdict filament_metrics() {
    const Filament bent{"a", {{0, 0, 0}, {3, 0, 0}, {3, 4, 0}}};
    const double length = filament_length(bent);
    const double tortuosity = filament_tortuosity(bent).value_or(0.0);
    std::mt19937_64 rng(4004);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst_straight = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Point3 origin{u(rng), u(rng), u(rng)}, dir{u(rng), u(rng), u(rng)};
        Filament f{"s", {}};
        double t = 0.0;
        for (int k = 0; k < 2 + i % 6; ++k) {
            f.points.push_back({origin[0] + t * dir[0], origin[1] + t * dir[1], origin[2] + t * dir[2]});
            t += 0.1 + (u(rng) + 1.0);
        }
        worst_straight = std::max(worst_straight, std::abs(filament_tortuosity(f).value_or(0.0) - 1.0));
    }
    const bool pass = std::abs(length - 7.0) <= 1e-12 && std::abs(tortuosity - 1.4) <= 1e-12 && worst_straight <= 1e-12;
    return {pass, fmt("length %.15g, tortuosity %.15g, straight filaments max |t-1| = %.2g", length, tortuosity,
                      worst_straight)};
}

testing::SyntheticCell synthetic(const fs::path& parent, std::size_t size = 64) {
    testing::SyntheticCellOptions opts;
    opts.size = size;
    opts.labels = 20;
    opts.filaments = 10;
    return testing::build_synthetic_cell(parent, "synth", opts);
}

std::map<std::string, std::string> directory_bytes(const fs::path& dir, const std::string& suffix) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), dir).string();
        if (rel.size() >= suffix.size() && rel.compare(rel.size() - suffix.size(), suffix.size(), suffix) == 0) {
            out[rel] = testing::read_bytes(entry.path());
        }
    }
    return out;
}

// Number of rows whose connectivity flag disagrees with its printed distance.
std::size_t incoherent_rows(const CsvTable& table, double label_threshold, double end_threshold) {
    std::size_t bad = 0;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        const std::string& col = table.header[c];
        std::string distance_col;
        double threshold = label_threshold;
        if (col.rfind("pixel_connected_to_", 0) == 0) {
            distance_col = "pixel_distance_to_" + col.substr(19) + "_um";
        } else if (col.rfind("connected_to_", 0) == 0) {
            distance_col = "distance_to_" + col.substr(13) + "_um";
            if (table.column("filament")) threshold = end_threshold;
        } else {
            continue;
        }
        const std::size_t d = table.require_column(distance_col);
        for (const auto& row : table.rows) {
            const auto flag = parse_bool(row[c]);
            const auto dist = parse_number(row[d]);
            if (!flag || !dist || *flag != (*dist <= threshold)) ++bad;
        }
    }
    return bad;
}

Verdict pipeline() {
    testing::TempDir tmp("cellmetry-accept5");
    const auto start = Clock::now();
    const auto cell = synthetic(tmp.path());
    Project p = Project::open(cell.root);
    const AnalysisConfig config;
    const auto first = run_analysis(p, config);
    std::set<std::string> csvs;
    for (const auto& entry : fs::directory_iterator(p.analysis_dir())) {
        if (entry.path().extension() == ".csv") csvs.insert(entry.path().filename().string());
    }
    const std::set<std::string> expected{"synth_granules.csv", "synth_granules_individual.csv", "synth_microtubules.csv",
                                         "synth_microtubules_individual.csv"};
    std::size_t rows = 0, bad = 0;
    for (const auto& name : {"synth_granules_individual.csv", "synth_microtubules_individual.csv"}) {
        const CsvTable t = read_csv(p.analysis_dir() / name);
        rows += t.rows.size();
        bad += incoherent_rows(t, config.connected_threshold_um, config.filament_end_threshold_um);
    }
    const auto before = directory_bytes(p.analysis_dir(), ".csv");
    AnalysisConfig resume = config;
    resume.skip_existing_distance_maps = true;
    const auto second = run_analysis(p, resume);
    const auto after = directory_bytes(p.analysis_dir(), ".csv");
    const double s = seconds_since(start);
    const bool pass = csvs == expected && bad == 0 && rows == 30 && before == after && second.maps_computed.empty() &&
                      second.maps_reused.size() == first.maps_computed.size() && s < 30.0;
    return {pass, fmt("%zu CSV files (%s), %zu rows, %zu incoherent flags, re-run %s with %zu maps recomputed, %.2f s",
                      csvs.size(), csvs == expected ? "names match" : "names differ", rows, bad,
                      before == after ? "byte-identical" : "DIFFERS", second.maps_computed.size(), s)};
}

Verdict connectivity_partition() {
    testing::TempDir tmp("cellmetry-accept6");
    const auto cell = synthetic(tmp.path());
    Project p = Project::open(cell.root);
    run_analysis(p, AnalysisConfig{});
    std::size_t checked = 0, overlap = 0, missing = 0, extra = 0, connected = 0, pairs = 0;
    for (const std::string labelmap : {"granules", "microtubules"}) {
        const VoxelGrid labels = p.read_dataset(labelmap);
        for (const std::string target : {"boundary", "membrane", "nucleus", "granules", "microtubules"}) {
            if (target == labelmap) continue;
            ++pairs;
            const TiffStack a = read_tiff(export_connectivity(p, labelmap, target, false));
            const TiffStack b = read_tiff(export_connectivity(p, labelmap, target, true));
            for (std::size_t i = 0; i < labels.size(); ++i) {
                const bool in_a = a.samples[i] != 0, in_b = b.samples[i] != 0;
                if (in_a && in_b) ++overlap;
                if (labels.is_foreground(i) && !in_a && !in_b) ++missing;
                if (!labels.is_foreground(i) && (in_a || in_b)) ++extra;
                if (in_a) ++connected;
                ++checked;
            }
        }
    }
    return {overlap == 0 && missing == 0 && extra == 0 && connected > 0,
            fmt("%zu labelmap/target pairs, %zu voxels checked, %zu connected; overlap %zu, uncovered %zu, "
                "outside foreground %zu",
                pairs, checked, connected, overlap, missing, extra)};
}

VoxelGrid criterion_ball() { return testing::digitized_ball({45, 45, 45}, 20.0, {22, 22, 22}); }

Verdict mesh_quality() {
    const double r = 20.0;
    const TriangleMesh mesh = marching_cubes(criterion_ball(), 1.0);
    const bool closed = is_closed_and_oriented(mesh);
    const double volume = signed_volume(mesh);
    const double area_ratio = surface_area(mesh) / (4.0 * std::numbers::pi * r * r);
    const double volume_ratio = volume / (4.0 / 3.0 * std::numbers::pi * r * r * r);

    testing::TempDir tmp("cellmetry-accept7");
    const fs::path stl = tmp.path() / "ball.stl";
    write_stl(stl, mesh);
    const std::string bytes = testing::read_bytes(stl);
    const auto triangles = read_stl(stl);
    const bool round_trip = triangles == to_stl_triangles(mesh) && encode_stl(triangles) == bytes;

    const bool pass = closed && volume > 0.0 && std::abs(area_ratio - 1.0) <= 0.05 &&
                      std::abs(volume_ratio - 1.0) <= 0.05 && round_trip;
    return {pass, fmt("%zu triangles, watertight+oriented %s, area/4pi r^2 = %.4f, volume/(4/3 pi r^3) = %.4f, "
                      "STL round trip %s",
                      mesh.triangles.size(), closed ? "yes" : "no", area_ratio, volume_ratio,
                      round_trip ? "bit-exact" : "DIFFERS")};
}

int cli_run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
    return code;
}

// Criterion 5 through the command line, returning every analysis CSV, distance-map block and mesh.
std::map<std::string, std::string> cli_pipeline_outputs(const std::string& threads) {
    testing::TempDir tmp("cellmetry-accept8");
    const auto cell = synthetic(tmp.path());
    const std::string project = cell.root.string();
    if (cli_run({"--threads", threads, "analyze", "--project", project}) != 0) return {};
    if (cli_run({"--threads", threads, "export-meshes", "--project", project}) != 0) return {};
    std::map<std::string, std::string> out = directory_bytes(cell.root / "analysis", ".csv");
    for (auto& [k, v] : directory_bytes(cell.root / "export", ".stl")) out["export/" + k] = std::move(v);
    for (const auto& entry : fs::recursive_directory_iterator(cell.root)) {
        const std::string rel = fs::relative(entry.path(), cell.root).string();
        if (entry.is_regular_file() && rel.rfind("distance_map.", 0) == 0 && entry.path().filename() != "attributes.json") {
            out[rel] = testing::read_bytes(entry.path());
        }
    }
    return out;
}

Verdict thread_determinism() {
    const auto masks = edt_masks(200);
    auto edt_bytes = [&] {
        std::string out;
        for (const auto& m : masks) {
            const auto d = squared_distance_transform(m);
            out.append(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(std::uint32_t));
        }
        return out;
    };
    auto mesh_bytes = [] { return encode_stl(to_stl_triangles(marching_cubes(criterion_ball(), 1.0))); };

    set_thread_count(1);
    const std::string edt1 = edt_bytes(), mesh1 = mesh_bytes();
    set_thread_count(8);
    const std::string edt8 = edt_bytes(), mesh8 = mesh_bytes();
    set_thread_count(0);
    const auto pipe1 = cli_pipeline_outputs("1");
    const auto pipe8 = cli_pipeline_outputs("8");
    set_thread_count(0);

    const bool edt_same = edt1 == edt8, mesh_same = mesh1 == mesh8, pipe_same = !pipe1.empty() && pipe1 == pipe8;
    return {edt_same && mesh_same && pipe_same,
            fmt("threads 1 vs 8: EDT (200 masks) %s, pipeline via CLI (%zu files) %s, ball mesh %s",
                edt_same ? "identical" : "DIFFERS", pipe1.size(), pipe_same ? "identical" : "DIFFERS",
                mesh_same ? "identical" : "DIFFERS")};
}

Verdict baseline_soundness() {
    testing::TempDir tmp("cellmetry-accept9");
    const auto cell = synthetic(tmp.path());
    Project p = Project::open(cell.root);
    run_analysis(p, AnalysisConfig{});
    BaselineConfig config;
    config.samples = 50;
    config.seed = 2024;
    config.exclude = {"nucleus"};
    const BaselineResult a = baseline_distances(p, "granules", "nucleus", config);
    const std::string bytes_a = testing::read_bytes(a.csv);
    const BaselineResult b = baseline_distances(p, "granules", "nucleus", config);
    const bool identical = testing::read_bytes(b.csv) == bytes_a;

    const Extent& e = cell.boundary.extent();
    std::size_t outside = 0;
    for (const auto& v : a.positions) {
        const std::size_t i = e.index(static_cast<std::size_t>(v.x), static_cast<std::size_t>(v.y), static_cast<std::size_t>(v.z));
        if (!cell.boundary.is_foreground(i) || cell.nucleus.is_foreground(i)) ++outside;
    }
    const CsvTable table = read_csv(a.csv);
    std::vector<double> observed, random;
    double printed = -1.0;
    for (const auto& row : table.rows) {
        if (row[0] == "observed") observed.push_back(*parse_number(row[1]));
        if (row[0] == "random") random.push_back(*parse_number(row[1]));
        if (row[0] == "ks_d") printed = *parse_number(row[1]);
    }
    const double oracle = testing::ks_oracle(observed, random);
    const double diff = std::max(std::abs(a.ks_d - oracle), std::abs(printed - oracle));
    const bool pass = identical && outside == 0 && a.positions.size() == 1000 && diff <= 1e-9;
    return {pass, fmt("seeded CSV %s across runs, %zu positions with %zu outside boundary minus nucleus, "
                      "KS D = %.6f vs oracle %.6f (|diff| %.1e)",
                      identical ? "byte-identical" : "DIFFERS", a.positions.size(), outside, a.ks_d, oracle, diff)};
}

Verdict memory_contract() {
    testing::TempDir tmp("cellmetry-accept10");
    const auto start = Clock::now();
    const auto cell = synthetic(tmp.path(), 256);
    const std::size_t rss_after_build = peak_rss_bytes();

    Project p = Project::open(cell.root);
    AnalysisConfig tiny;
    tiny.memory_budget_bytes = 64ull << 20;
    bool refused = false;
    std::string refusal;
    try {
        run_analysis(p, tiny);
    } catch (const Error& e) {
        refused = e.code() == ErrorCode::OutOfMemoryBudget;
        refusal = to_string(e.code());
    }
    const std::size_t rss_after_tiny = peak_rss_bytes();
    const std::size_t growth = rss_after_tiny > rss_after_build ? rss_after_tiny - rss_after_build : 0;

    AnalysisConfig ample;
    ample.memory_budget_bytes = 2 * kGiB;
    bool completed = false;
    std::size_t tracked_peak = 0;
    std::string error;
    try {
        const auto result = run_analysis(p, ample);
        completed = true;
        tracked_peak = result.peak_bytes;
    } catch (const Error& e) {
        error = std::string(to_string(e.code())) + ": " + e.what();
    }
    const double s = seconds_since(start);
    const bool pass = refused && growth < (64ull << 20) && completed && tracked_peak <= 2 * kGiB;
    return {pass, fmt("256^3: 2 GiB budget %s (tracked peak %zu MiB), 64 MiB budget %s (resident growth %zu MiB), %.1f s%s%s",
                      completed ? "completed" : "FAILED", tracked_peak >> 20,
                      refused ? "raised OutOfMemoryBudget" : (refusal.empty() ? "did not raise" : refusal.c_str()),
                      growth >> 20, s, error.empty() ? "" : "; ", error.c_str())};
}

}  // namespace
}  // namespace cellmetry

int main(int argc, char** argv) {
    using namespace cellmetry;
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"EDT exactness", edt_exactness},
        {"scale factors", scale_factors},
        {"filament reconstruction", filament_reconstruction},
        {"length and tortuosity", filament_metrics},
        {"end-to-end pipeline", pipeline},
        {"connectivity partition", connectivity_partition},
        {"mesh quality", mesh_quality},
        {"thread determinism", thread_determinism},
        {"baseline soundness", baseline_soundness},
        {"memory contract", memory_contract},
    };
    int only = 0;
    if (argc == 3 && std::string(argv[1]) == "--only") only = std::stoi(argv[2]);
    if (argc != 1 && (only < 1 || only > static_cast<int>(criteria.size()))) {
        std::fprintf(stderr, "usage: %s [--only N]  (N in 1..%zu)\n", argv[0], criteria.size());
        return 2;
    }

    ScopedWarningCapture quiet;
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only != 0 && static_cast<int>(i + 1) != only) continue;
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        std::printf("criterion %zu %s: %s: %s\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first, v.detail.c_str());
        std::fflush(stdout);
        if (!v.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
