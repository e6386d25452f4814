#include "cellmetry_cli/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "cellmetry/analysis.hpp"
#include "cellmetry/baseline.hpp"
#include "cellmetry/connectivity.hpp"
#include "cellmetry/diagnostics.hpp"
#include "cellmetry/error.hpp"
#include "cellmetry/geometry.hpp"
#include "cellmetry/ingest.hpp"
#include "cellmetry/parallel.hpp"
#include "cellmetry/report.hpp"
#include "cellmetry/skeleton.hpp"
#include "cellmetry/store.hpp"

namespace cellmetry::cli {
namespace {

constexpr const char* kBudgetEnv = "CELLMETRY_MEM_BUDGET_GB";

struct ScaleFlags {
    double x = 1.0, y = 1.0, z = 1.0;
    std::vector<double> input_pixel_um;

    void attach(CLI::App* cmd) {
        auto* sx = cmd->add_option("--scale-x", x, "Scale factor along x")->check(CLI::PositiveNumber);
        auto* sy = cmd->add_option("--scale-y", y, "Scale factor along y")->check(CLI::PositiveNumber);
        auto* sz = cmd->add_option("--scale-z", z, "Scale factor along z")->check(CLI::PositiveNumber);
        cmd->add_option("--input-pixel-size-um", input_pixel_um,
                        "Input voxel size x,y,z in µm; derives the scale from the project pixel size")
            ->expected(3)
            ->delimiter(',')
            ->check(CLI::PositiveNumber)
            ->excludes(sx)
            ->excludes(sy)
            ->excludes(sz);
    }

    ScaleSpec resolve(double project_pixel_um) const {
        if (input_pixel_um.size() == 3) {
            return scale_for_pixel_size({input_pixel_um[0], input_pixel_um[1], input_pixel_um[2]}, project_pixel_um);
        }
        return ScaleSpec{x, y, z};
    }
};

std::size_t memory_budget(std::optional<double> flag_gb) {
    double gb = 0.0;
    if (flag_gb) {
        gb = *flag_gb;
    } else if (const char* env = std::getenv(kBudgetEnv); env != nullptr && *env != '\0') {
        const auto v = parse_number(env);
        if (!v || !(*v > 0.0)) throw Error(ErrorCode::InvalidMeta, std::string(kBudgetEnv) + " must be a positive number");
        gb = *v;
    } else {
        return kDefaultMemoryBudget;
    }
    return static_cast<std::size_t>(gb * static_cast<double>(kGiB));
}

// Routes library diagnostics to the invocation's error stream for its lifetime.
class DiagnosticsToStream {
public:
    explicit DiagnosticsToStream(std::ostream& err) {
        set_warning_sink([&err](std::string_view m) { err << "WARNING " << m << '\n'; });
        set_progress_sink([&err](std::string_view m) { err << m << '\n'; });
    }
    ~DiagnosticsToStream() {
        set_warning_sink(nullptr);
        set_progress_sink(nullptr);
    }
    DiagnosticsToStream(const DiagnosticsToStream&) = delete;
    DiagnosticsToStream& operator=(const DiagnosticsToStream&) = delete;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spatial analysis of segmented volume EM cells", "cellmetry"};
    app.require_subcommand(1, 1);
    unsigned threads = 0;
    app.add_option("--threads", threads, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);

    std::filesystem::path project_path;
    auto project_option = [&](CLI::App* cmd) {
        cmd->add_option("--project", project_path, "Project directory (NAME.n5)")->required();
    };

    // create
    auto* create = app.add_subcommand("create", "Create an empty project");
    std::filesystem::path parent;
    std::string name;
    double pixel_to_um = 0.0;
    create->add_option("--parent", parent, "Directory that will contain NAME.n5")->required();
    create->add_option("--name", name, "Project name")->required();
    create->add_option("--pixel-to-um", pixel_to_um, "Isotropic voxel size in µm")->required();

    // add
    auto* add = app.add_subcommand("add", "Import a TIFF stack as a cell component");
    project_option(add);
    std::filesystem::path input;
    std::string kind_text, id, color_text;
    ScaleFlags add_scale;
    add->add_option("--input", input, "Multi-page TIFF")->required()->check(CLI::ExistingFile);
    add->add_option("--kind", kind_text, "raw | mask | labels | boundary")
        ->required()
        ->check(CLI::IsMember({"raw", "mask", "labels", "boundary"}));
    add->add_option("--id", id, "Dataset id")->required();
    add->add_option("--color", color_text, "Display colour RRGGBB[AA]");
    add_scale.attach(add);

    // import-filaments
    auto* filaments = app.add_subcommand("import-filaments", "Import a skeleton XML as filaments");
    project_option(filaments);
    std::filesystem::path xml;
    std::string filament_name = "filaments";
    std::string filament_color = "FFFF00FF";
    std::optional<std::int64_t> z_offset;
    double radius_um = kDefaultFilamentRadiusUm;
    ScaleFlags filament_scale;
    filaments->add_option("--input", xml, "Skeleton XML")->required()->check(CLI::ExistingFile);
    filaments->add_option("--name", filament_name, "Dataset id of the filament labelmap");
    filaments->add_option("--color", filament_color, "Display colour RRGGBB[AA]");
    filaments->add_option("--z-offset", z_offset, "z offset in voxels (default: from the file's z extent)");
    filaments->add_option("--radius-um", radius_um, "Rasterization radius in µm")->check(CLI::PositiveNumber);
    filament_scale.attach(filaments);

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Distance maps and per-label connectivity tables");
    project_option(analyze);
    AnalysisConfig config;
    std::optional<double> budget_gb;
    analyze->add_option("--connected-threshold-um", config.connected_threshold_um, "Label connectivity threshold")
        ->check(CLI::PositiveNumber);
    analyze->add_option("--filament-end-threshold-um", config.filament_end_threshold_um,
                        "Filament end connectivity threshold")
        ->check(CLI::PositiveNumber);
    analyze->add_flag("--skip-existing-distance-maps", config.skip_existing_distance_maps,
                      "Reuse distance maps that are present and not stale");
    analyze->add_option("--memory-budget-gb", budget_gb, "Memory ceiling in GiB (overrides " + std::string(kBudgetEnv) + ")")
        ->check(CLI::PositiveNumber);

    // export-connectivity
    auto* connectivity = app.add_subcommand("export-connectivity", "Mask of labels connected to a target");
    project_option(connectivity);
    std::string labelmap, target;
    bool inverted = false;
    connectivity->add_option("--labelmap", labelmap, "Labelmap id")->required();
    connectivity->add_option("--target", target, "Target component id")->required();
    connectivity->add_flag("--inverted", inverted, "Export labels that are not connected");

    // export-meshes
    auto* meshes = app.add_subcommand("export-meshes", "Marching-cubes STL export");
    project_option(meshes);
    std::string include, exclude;
    bool split_labels = false;
    meshes->add_option("--include", include, "Comma-separated substrings; a component must contain one");
    meshes->add_option("--exclude", exclude, "Comma-separated substrings; a component must contain none");
    meshes->add_flag("--split-labels", split_labels, "One STL per label instead of one per labelmap");

    // baseline
    auto* baseline = app.add_subcommand("baseline", "Observed vs random distance distributions");
    project_option(baseline);
    BaselineConfig baseline_config;
    std::string baseline_exclude;
    baseline->add_option("--labelmap", labelmap, "Labelmap id")->required();
    baseline->add_option("--target", target, "Target component id")->required();
    baseline->add_option("--samples", baseline_config.samples, "Random positions per observed label")
        ->check(CLI::PositiveNumber);
    baseline->add_option("--seed", baseline_config.seed, "Random seed");
    baseline->add_option("--exclude", baseline_exclude, "Comma-separated dataset ids off limits for placement");

    // report
    auto* report = app.add_subcommand("report", "summary.json and SVG plots from the analysis tables");
    project_option(report);
    std::optional<std::filesystem::path> output;
    HistogramSpec spec;
    std::vector<double> range;
    report->add_option("--output", output, "Plot directory (default: PROJECT/analysis/plots)");
    report->add_option("--bins", spec.bins, "Histogram bins")->check(CLI::PositiveNumber);
    report->add_option("--range", range, "Histogram range lo,hi in µm (default: 0,max)")->expected(2)->delimiter(',');

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n' << app.help();
        return 2;
    }
    if (range.size() == 2) {
        if (!(range[1] > range[0])) {
            err << "usage error: --range needs lo < hi\n" << app.help();
            return 2;
        }
        spec.range = std::pair{range[0], range[1]};
    }

    DiagnosticsToStream diagnostics(err);
    set_thread_count(threads);
    try {
        if (*create) {
            const Project p = Project::create(parent, name, pixel_to_um);
            out << p.root().string() << '\n';
        } else if (*add) {
            Project p = Project::open(project_path);
            ComponentSpec c;
            c.path = input;
            c.kind = parse_dataset_kind(kind_text);
            c.id = id;
            if (!color_text.empty()) c.color = parse_rgba(color_text);
            c.scale = add_scale.resolve(p.meta().pixel_to_um);
            out << add_component(p, c) << '\n';
        } else if (*filaments) {
            Project p = Project::open(project_path);
            FilamentImportSpec f;
            f.scale = filament_scale.resolve(p.meta().pixel_to_um);
            f.z_offset = z_offset;
            f.radius_um = radius_um;
            const auto imported =
                import_filaments(p, parse_skeleton_xml(xml), f, filament_name, parse_rgba(filament_color));
            out << imported.dataset_id << ' ' << imported.filaments.size() << " filaments\n";
        } else if (*analyze) {
            Project p = Project::open(project_path);
            config.memory_budget_bytes = memory_budget(budget_gb);
            const auto result = run_analysis(p, config);
            out << "computed " << result.maps_computed.size() << " reused " << result.maps_reused.size()
                << " distance maps\n";
            for (const auto& f : result.csv_files) out << f.string() << '\n';
        } else if (*connectivity) {
            const Project p = Project::open(project_path);
            out << export_connectivity(p, labelmap, target, inverted).string() << '\n';
        } else if (*meshes) {
            Project p = Project::open(project_path);
            const auto result = export_meshes(p, {split_selection(include), split_selection(exclude), split_labels});
            for (const auto& f : result.stl_files) out << f.string() << '\n';
        } else if (*baseline) {
            Project p = Project::open(project_path);
            baseline_config.exclude = split_selection(baseline_exclude);
            const auto result = baseline_distances(p, labelmap, target, baseline_config);
            out << result.csv.string() << '\n';
        } else if (*report) {
            const Project p = Project::open(project_path);
            const auto result = write_report(p, output.value_or(p.analysis_dir() / "plots"), spec);
            out << result.summary.string() << '\n';
            for (const auto& f : result.plots) out << f.string() << '\n';
        }
    } catch (const Error& e) {
        err << "ERROR " << to_string(e.code()) << ": " << e.what() << '\n';
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "ERROR " << to_string(ErrorCode::Io) << ": " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace cellmetry::cli
