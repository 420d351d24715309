// SPDX-License-Identifier: Apache-2.0
#include "gsd/cli/commands.hpp"

#include "gsd/noising.hpp"
#include "gsd/optimizer.hpp"
#include "gsd/ply.hpp"
#include "gsd/raster_io.hpp"
#include "gsd/scenes.hpp"
#include "gsd/warping.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace gsd::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Small maps are also written as CSV for inspection.
constexpr std::size_t kCsvMaxValues = 4096;

std::ostream& log(const CommandContext& ctx) {
    static std::ostringstream sink;
    return ctx.log ? *ctx.log : sink;
}

void prepare_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create output directory '" + dir.string() + "'");
    }
}

void write_text(const fs::path& path, const std::string& text) { write_file_atomic(path, text); }

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

class Manifest {
public:
    Manifest(const CommandContext& ctx, std::string command) : dir_(ctx.out_dir) {
        doc_["command"] = std::move(command);
        doc_["seed"] = ctx.config.seed;
        doc_["config"] = json::parse(dump_config(ctx.config));
        doc_["files"] = json::array();
    }

    void add(const std::string& name, const std::string& kind) {
        doc_["files"].push_back({{"path", name}, {"kind", kind}});
    }

    json& doc() { return doc_; }

    void write() const { write_json(dir_ / "manifest.json", doc_); }

private:
    fs::path dir_;
    json doc_;
};

PointCloud scene_or_config_error(const RunConfig& config) {
    try {
        return config.load_scene();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config key 'scene': ") + e.what());
    }
}

std::string csv_row(std::initializer_list<std::string> cells) {
    std::string out;
    for (const auto& c : cells) {
        if (!out.empty()) out += ',';
        out += c;
    }
    return out + "\n";
}

std::string fmt(double v) { return format_double(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

// ---------------------------------------------------------------- gen-noise

}  // namespace

int gen_noise(const CommandContext& ctx) {
    const RunConfig& config = ctx.config;
    prepare_dir(ctx.out_dir);
    const PointCloud cloud = scene_or_config_error(config);
    const std::vector<Camera> cameras = config.cameras();
    const ConsistentNoiseSampler sampler(cloud, cameras, config.resolved_noising());

    Rng rng(config.seed);
    const std::vector<NoiseMap2D> maps = sampler.sample(rng);

    Manifest manifest(ctx, "gen-noise");
    for (std::size_t i = 0; i < maps.size(); ++i) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "noise_%03zu", i);
        const std::string base(stem);
        write_raster_f32(ctx.out_dir / (base + ".bin"), maps[i]);
        manifest.add(base + ".bin", "noise_map");
        write_json(ctx.out_dir / (base + ".json"),
                   {{"height", maps[i].height},
                    {"width", maps[i].width},
                    {"channels", maps[i].channels},
                    {"seed", config.seed},
                    {"pose_id", i},
                    {"azimuth_deg", config.camera.azimuth_deg[i]},
                    {"elevation_deg", config.camera.elevation_deg},
                    {"dtype", "float32"},
                    {"byte_order", "little"},
                    {"layout", "row-major, channels innermost"}});
        manifest.add(base + ".json", "sidecar");
        if (maps[i].values.size() <= kCsvMaxValues) {
            write_text(ctx.out_dir / (base + ".csv"), raster_csv(maps[i]));
            manifest.add(base + ".csv", "noise_map_csv");
        }
        log(ctx) << "pose " << i << ": wrote " << base << ".bin\n";
    }
    manifest.doc()["lattice_points"] = sampler.background().lattice_size();
    manifest.write();
    return kExitOk;
}

// -------------------------------------------------------------------- stats

namespace {

struct Expectation {
    std::optional<bool> normal;
    std::optional<bool> crossview;
};

// Predicates each strategy must satisfy under --assert.
Expectation expected_verdict(NoiseStrategy s) {
    switch (s) {
        case NoiseStrategy::random: return {true, false};
        case NoiseStrategy::bilinear_warp: return {false, std::nullopt};
        case NoiseStrategy::nearest_warp: return {};
        case NoiseStrategy::consistent_3d: return {true, true};
    }
    return {};
}

// Long format: one row per strategy and metric.
std::string stats_csv(const std::vector<StatsReport>& reports) {
    std::string out = csv_row({"strategy", "metric", "value"});
    for (const auto& r : reports) {
        const auto v = verdict(r);
        const std::string name(to_string(r.strategy));
        const std::pair<const char*, std::string> metrics[] = {
            {"num_samples", std::to_string(r.num_samples)},
            {"value_count", std::to_string(r.value_count)},
            {"mean", fmt(r.moments.mean)},
            {"variance", fmt(r.moments.variance)},
            {"skewness", fmt(r.moments.skewness)},
            {"excess_kurtosis", fmt(r.moments.excess_kurtosis)},
            {"ks_statistic", fmt(r.ks.statistic)},
            {"ks_p_value", fmt(r.ks.p_value)},
            {"ks_pass_rate", fmt(r.ks_pass_rate)},
            {"duplicate_rate", fmt(r.duplicate_rate)},
            {"max_offdiag_correlation", fmt(max_offdiag_correlation(r.patch_covariance))},
            {"corr_corresponding", fmt(r.cross.corresponding)},
            {"corr_non_corresponding", fmt(r.cross.non_corresponding)},
            {"pass_normal", fmt(v.normal)},
            {"pass_crossview", fmt(v.crossview)},
        };
        for (const auto& [metric, value] : metrics) out += csv_row({name, metric, value});
    }
    return out;
}

std::string stats_summary(const std::vector<StatsReport>& reports) {
    std::ostringstream s;
    for (const auto& r : reports) {
        const auto v = verdict(r);
        s << "[" << to_string(r.strategy) << "]\n"
          << "  samples            " << r.num_samples << "\n"
          << "  values             " << r.value_count << "\n"
          << "  mean               " << fmt(r.moments.mean) << "\n"
          << "  variance           " << fmt(r.moments.variance) << "\n"
          << "  excess_kurtosis    " << fmt(r.moments.excess_kurtosis) << "\n"
          << "  ks_p_value         " << fmt(r.ks.p_value) << "\n"
          << "  duplicate_rate     " << fmt(r.duplicate_rate) << "\n"
          << "  patch              " << r.patch.x << "," << r.patch.y << " size "
          << r.patch.size << "\n"
          << "  max_offdiag_corr   " << fmt(max_offdiag_correlation(r.patch_covariance)) << "\n"
          << "  corr_corresponding " << fmt(r.cross.corresponding) << "\n"
          << "  corr_non_corresp   " << fmt(r.cross.non_corresponding) << "\n"
          << "  checks             mean=" << fmt(v.mean_ok) << " variance=" << fmt(v.variance_ok)
          << " kurtosis=" << fmt(v.kurtosis_ok) << " ks=" << fmt(v.ks_ok)
          << " duplicates=" << fmt(v.duplicates_ok) << " covariance=" << fmt(v.covariance_ok)
          << "\n"
          << "  PASS_normal        " << fmt(v.normal) << "\n"
          << "  PASS_crossview     " << fmt(v.crossview) << "\n";
    }
    return s.str();
}

}  // namespace

int stats(const CommandContext& ctx, const StatsOptions& options) {
    const RunConfig& config = ctx.config;
    prepare_dir(ctx.out_dir);
    const auto& a = config.analysis;
    const auto& cam = config.camera;
    const double az = cam.azimuth_deg.front();

    AnalysisSetup setup;
    setup.cloud = scene_or_config_error(config);
    setup.intrinsics = cam.intrinsics;
    setup.pose_i = sample_hemisphere_pose(deg_to_rad(az), deg_to_rad(cam.elevation_deg),
                                          cam.radius, cam.target);
    setup.pose_j = sample_hemisphere_pose(deg_to_rad(az + a.separation_deg),
                                          deg_to_rad(cam.elevation_deg), cam.radius, cam.target);
    setup.params = config.resolved_noising();
    setup.occlusion_delta = a.occlusion_delta;

    AnalysisOptions opts;
    opts.patch_size = a.patch_size;
    opts.patch_x = a.patch_x;
    opts.patch_y = a.patch_y;

    const auto strategies = options.strategies.empty() ? config.strategies() : options.strategies;
    Rng rng(config.seed);
    const auto reports = strategy_comparison(setup, strategies, a.num_samples, rng, opts);

    Manifest manifest(ctx, "stats");
    write_text(ctx.out_dir / "stats.csv", stats_csv(reports));
    manifest.add("stats.csv", "table");
    write_text(ctx.out_dir / "summary.txt", stats_summary(reports));
    manifest.add("summary.txt", "summary");
    for (const auto& r : reports) {
        const std::string base = "covariance_" + std::string(to_string(r.strategy));
        write_matrix_f32(ctx.out_dir / (base + ".bin"), r.patch_covariance);
        manifest.add(base + ".bin", "covariance");
        write_json(ctx.out_dir / (base + ".json"),
                   {{"rows", r.patch_covariance.rows()},
                    {"cols", r.patch_covariance.cols()},
                    {"patch_x", r.patch.x},
                    {"patch_y", r.patch.y},
                    {"patch_size", r.patch.size},
                    {"channel", 0},
                    {"seed", config.seed},
                    {"dtype", "float32"},
                    {"byte_order", "little"},
                    {"layout", "row-major"}});
        manifest.add(base + ".json", "sidecar");
    }
    manifest.write();

    bool ok = true;
    for (const auto& r : reports) {
        const auto v = verdict(r);
        log(ctx) << to_string(r.strategy) << ": PASS_normal=" << fmt(v.normal)
                 << " PASS_crossview=" << fmt(v.crossview) << "\n";
        if (ctx.assert_mode) {
            const auto e = expected_verdict(r.strategy);
            if (e.normal && *e.normal != v.normal) {
                log(ctx) << "assertion failed: " << to_string(r.strategy) << " PASS_normal expected "
                         << fmt(*e.normal) << "\n";
                ok = false;
            }
            if (e.crossview && *e.crossview != v.crossview) {
                log(ctx) << "assertion failed: " << to_string(r.strategy)
                         << " PASS_crossview expected " << fmt(*e.crossview) << "\n";
                ok = false;
            }
        }
        if (options.assert_crossview && !v.crossview) {
            log(ctx) << "assertion failed: " << to_string(r.strategy)
                     << " is not cross-view consistent\n";
            ok = false;
        }
    }
    return ok ? kExitOk : kExitAssert;
}

// --------------------------------------------------------------- warp-check

namespace {

struct WarpCheckRow {
    std::string name;
    std::size_t count = 0;
    double max_error = 0.0;
    double mean_error = 0.0;
    double tolerance = 0.0;

    bool pass() const { return count > 0 && max_error <= tolerance; }
};

void accumulate(WarpCheckRow& row, double err) {
    row.max_error = std::max(row.max_error, err);
    row.mean_error += err;
    ++row.count;
}

void finish(WarpCheckRow& row) {
    if (row.count) row.mean_error /= static_cast<double>(row.count);
}

Vec2 pixel_center(const WarpField& w, std::size_t p) {
    return {static_cast<double>(p % w.width), static_cast<double>(p / w.width)};
}

}  // namespace

int warp_check(const CommandContext& ctx) {
    const RunConfig& config = ctx.config;
    prepare_dir(ctx.out_dir);
    const auto& cam = config.camera;
    const auto& k = cam.intrinsics;
    const auto& wc = config.warp_check;
    const double splat = config.noising.splat_radius;
    const double az = cam.azimuth_deg.front();
    const double el = deg_to_rad(cam.elevation_deg);
    const CameraPose pose_i = sample_hemisphere_pose(deg_to_rad(az), el, cam.radius, cam.target);
    const CameraPose pose_j =
        sample_hemisphere_pose(deg_to_rad(az + wc.separation_deg), el, cam.radius, cam.target);
    const PointCloud cloud = scene_or_config_error(config);

    std::vector<WarpCheckRow> rows;

    {  // Same pose on both sides: every valid pixel maps onto itself.
        WarpCheckRow row{"identity", 0, 0.0, 0.0, 1e-6};
        const DepthMap depth = render_depth(cloud, k, pose_i, splat);
        const WarpField w = compute_warp(depth, pose_i, pose_i, k);
        for (std::size_t p = 0; p < w.pixel_count(); ++p) {
            if (w.is_valid(p)) accumulate(row, (w.targets[p] - pixel_center(w, p)).norm());
        }
        finish(row);
        rows.push_back(row);
    }

    {  // Fronto-parallel plane: the depth warp must equal the plane homography.
        WarpCheckRow row{"plane_homography", 0, 0.0, 0.0, 1e-4};
        const PointCloud plane = make_plane_scene();
        const CameraPose pi = sample_hemisphere_pose(0.0, 0.0, wc.plane_distance, Vec3::Zero());
        const CameraPose pj = sample_hemisphere_pose(deg_to_rad(wc.separation_deg), 0.0,
                                                     wc.plane_distance, Vec3::Zero());
        const DepthMap depth = render_depth(plane, k, pi, splat);
        const WarpField w = compute_warp(depth, pi, pj, k);
        const Mat3 h = plane_homography(k, pi, pj, Vec3::UnitZ(), 0.0);
        for (std::size_t p = 0; p < w.pixel_count(); ++p) {
            if (!w.is_valid(p)) continue;
            const Vec3 q = h * pixel_center(w, p).homogeneous();
            accumulate(row, (w.targets[p] - q.hnormalized()).norm());
        }
        finish(row);
        rows.push_back(row);
    }

    {  // i -> j -> i on unoccluded pixels returns within a pixel.
        WarpCheckRow row{"round_trip", 0, 0.0, 0.0, 1.0};
        const DepthMap depth_i = render_depth(cloud, k, pose_i, splat);
        const DepthMap depth_j = render_depth(cloud, k, pose_j, splat);
        const WarpField wij = compute_warp(depth_i, pose_i, pose_j, k);
        const WarpField wji = compute_warp(depth_j, pose_j, pose_i, k);
        const OcclusionMask mask = occlusion_mask(wij, depth_j, wc.occlusion_delta);
        for (std::size_t p = 0; p < wij.pixel_count(); ++p) {
            if (!mask.weights[p]) continue;
            const int qx = nearest_pixel(wij.targets[p].x());
            const int qy = nearest_pixel(wij.targets[p].y());
            const std::size_t q = static_cast<std::size_t>(qy) * k.width + qx;
            if (!wji.is_valid(q)) continue;
            accumulate(row, (wji.targets[q] - pixel_center(wij, p)).norm());
        }
        finish(row);
        rows.push_back(row);
    }

    std::string csv =
        csv_row({"check", "count", "max_error_px", "mean_error_px", "tolerance_px", "pass"});
    bool ok = true;
    for (const auto& r : rows) {
        csv += csv_row({r.name, std::to_string(r.count), fmt(r.max_error), fmt(r.mean_error),
                        fmt(r.tolerance), fmt(r.pass())});
        log(ctx) << r.name << ": max " << fmt(r.max_error) << " px over " << r.count
                 << " pixels, " << (r.pass() ? "PASS" : "FAIL") << "\n";
        ok = ok && r.pass();
    }
    Manifest manifest(ctx, "warp-check");
    write_text(ctx.out_dir / "warp_check.csv", csv);
    manifest.add("warp_check.csv", "table");
    manifest.write();
    return (ctx.assert_mode && !ok) ? kExitAssert : kExitOk;
}

// ----------------------------------------------------------------- optimize

namespace {

std::string trace_csv(const std::vector<TraceRow>& trace, int views, bool wall_time) {
    std::string out = "iteration,sigma,learning_rate";
    for (int v = 0; v < views; ++v) out += ",loss_view_" + std::to_string(v);
    out += ",mean_loss,l_sim,sds_grad_norm,depth_grad_norm";
    if (wall_time) out += ",wall_ms";
    out += "\n";
    for (const auto& r : trace) {
        out += std::to_string(r.iteration) + "," + fmt(r.sigma) + "," + fmt(r.learning_rate);
        for (double l : r.view_loss) out += "," + fmt(l);
        out += "," + fmt(r.mean_loss) + "," + fmt(r.l_sim) + "," + fmt(r.sds_grad_norm) + "," +
               fmt(r.depth_grad_norm);
        if (wall_time) out += "," + fmt(r.wall_ms);
        out += "\n";
    }
    return out;
}

void write_checkpoint(const fs::path& path, const ColorPointCloud& rep) {
    std::vector<std::vector<double>> cols(7);
    for (std::size_t i = 0; i < rep.size(); ++i) {
        for (int a = 0; a < 3; ++a) cols[a].push_back(rep.positions[i][a]);
        for (int c = 0; c < 3; ++c) cols[3 + c].push_back(rep.colors[i][c]);
        cols[6].push_back(rep.opacity[i]);
    }
    fs::path tmp = path;
    tmp += ".tmp";
    try {
        write_ply_vertices(tmp, {"x", "y", "z", "red", "green", "blue", "opacity"}, cols);
    } catch (const std::exception& e) {
        throw IoError(e.what());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
}

}  // namespace

int optimize(const CommandContext& ctx, const OptimizeOptions& options) {
    const RunConfig& config = ctx.config;
    const auto& o = config.optimizer;
    prepare_dir(ctx.out_dir);

    const PointCloud cloud = (!config.scene.ply && config.scene.builtin == "sphere")
                                 ? make_sphere_scene(o.points, config.scene.radius)
                                 : scene_or_config_error(config);
    ToyProblemSpec spec;
    spec.views = o.views;
    spec.radius = o.radius;
    spec.elevation_deg = o.elevation_deg;
    spec.neighbor_offset_deg = o.neighbor_offset_deg;
    const ToyProblem problem = make_toy_problem(cloud, config.camera.intrinsics, spec);
    const OptimizerSettings settings = config.optimizer_settings();

    Manifest manifest(ctx, "optimize");
    std::vector<TraceRow> trace;
    Rng rng(config.seed);
    OptimizationResult result;
    try {
        result = run_optimization(problem, settings, rng, [&](const TraceRow& row) {
            trace.push_back(row);
            if (row.iteration % 50 == 0) {
                log(ctx) << "iteration " << row.iteration << ": loss " << fmt(row.mean_loss) << "\n";
            }
        });
    } catch (const NumericalDivergence&) {
        write_text(ctx.out_dir / "trace.csv", trace_csv(trace, o.views, options.wall_time));
        manifest.add("trace.csv", "trace");
        manifest.doc()["diverged"] = true;
        manifest.write();
        throw;
    }

    write_text(ctx.out_dir / "trace.csv", trace_csv(result.trace, o.views, options.wall_time));
    manifest.add("trace.csv", "trace");
    write_checkpoint(ctx.out_dir / "final.ply", result.final_rep);
    manifest.add("final.ply", "checkpoint");
    write_json(ctx.out_dir / "summary.json",
               {{"strategy", o.strategy},
                {"iterations", o.iterations},
                {"initial_loss", result.initial_loss},
                {"final_loss", result.final_loss},
                {"loss_threshold", o.loss_threshold},
                {"iterations_to_threshold", result.iterations_to_threshold
                                                ? json(*result.iterations_to_threshold)
                                                : json(nullptr)}});
    manifest.add("summary.json", "summary");
    manifest.write();

    log(ctx) << "final loss " << fmt(result.final_loss) << "\n";
    if (ctx.assert_mode && !result.iterations_to_threshold) {
        log(ctx) << "assertion failed: loss never reached " << fmt(o.loss_threshold) << "\n";
        return kExitAssert;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------- CLI

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Geometry-aware score distillation toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_path;
    bool assert_mode = false;
    std::vector<std::string> strategy_names;
    bool assert_crossview = false;
    bool wall_time = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--seed", seed, "Override the config seed");
        sub->add_option("--out", out_path, "Output directory (else $GSD_OUT_DIR, else config)");
        sub->add_flag("--assert", assert_mode, "Exit 4 when the command's checks fail");
    };
    CLI::App* gen = app.add_subcommand("gen-noise", "Render one consistent noise map per pose");
    CLI::App* st = app.add_subcommand("stats", "Compare noising strategies statistically");
    CLI::App* wc = app.add_subcommand("warp-check", "Check depth warps against exact oracles");
    CLI::App* opt = app.add_subcommand("optimize", "Run the closed-loop toy optimisation");
    for (auto* sub : {gen, st, wc, opt}) add_common(sub);
    st->add_option("--strategy", strategy_names, "Strategy to evaluate (repeatable)");
    st->add_flag("--assert-crossview", assert_crossview,
                 "Exit 4 unless every strategy is cross-view consistent");
    opt->add_flag("--wall-time", wall_time, "Add a wall-clock column to the trace");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        CommandContext ctx;
        ctx.config = config_path.empty() ? parse_config("{}") : load_config(config_path);
        if (seed) ctx.config.seed = *seed;
        ctx.assert_mode = assert_mode;
        ctx.log = &out;
        if (!out_path.empty()) {
            ctx.out_dir = out_path;
        } else if (const char* env = std::getenv("GSD_OUT_DIR"); env && *env) {
            ctx.out_dir = env;
        } else {
            ctx.out_dir = ctx.config.output_dir;
        }

        if (*gen) return gen_noise(ctx);
        if (*st) {
            StatsOptions so;
            for (const auto& name : strategy_names) {
                try {
                    so.strategies.push_back(parse_strategy(name));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(std::string("--strategy: ") + e.what());
                }
            }
            so.assert_crossview = assert_crossview;
            return stats(ctx, so);
        }
        if (*wc) return warp_check(ctx);
        return optimize(ctx, OptimizeOptions{wall_time});
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CoverageError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        err << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NumericalDivergence& e) {
        err << "numerical divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace gsd::cli
