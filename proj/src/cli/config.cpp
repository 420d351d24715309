// SPDX-License-Identifier: Apache-2.0
#include "gsd/cli/config.hpp"

#include "gsd/ply.hpp"
#include "gsd/scenes.hpp"

#include <json.hpp>

#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <type_traits>

namespace gsd::cli {
namespace {

using json = nlohmann::json;

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

[[noreturn]] void type_error(const std::string& key, const char* expected) {
    throw ConfigError("config key '" + key + "': expected " + expected);
}

void read_value(const json& v, const std::string& key, double& out) {
    if (!v.is_number()) type_error(key, "a number");
    out = v.get<double>();
}

void read_value(const json& v, const std::string& key, int& out) {
    if (!v.is_number_integer()) type_error(key, "an integer");
    const auto x = v.get<std::int64_t>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        type_error(key, "an integer in range");
    }
    out = static_cast<int>(x);
}

void read_value(const json& v, const std::string& key, std::uint64_t& out) {
    if (v.is_number_unsigned()) {
        out = v.get<std::uint64_t>();
        return;
    }
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
        out = static_cast<std::uint64_t>(v.get<std::int64_t>());
        return;
    }
    type_error(key, "a non-negative integer");
}

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "size_t keys read as uint64");

void read_value(const json& v, const std::string& key, bool& out) {
    if (!v.is_boolean()) type_error(key, "true or false");
    out = v.get<bool>();
}

void read_value(const json& v, const std::string& key, std::string& out) {
    if (!v.is_string()) type_error(key, "a string");
    out = v.get<std::string>();
}

void read_value(const json& v, const std::string& key, Vec3& out) {
    if (!v.is_array() || v.size() != 3) type_error(key, "an array of 3 numbers");
    for (int i = 0; i < 3; ++i) {
        if (!v[i].is_number()) type_error(key, "an array of 3 numbers");
        out[i] = v[i].get<double>();
    }
}

template <class T>
void read_value(const json& v, const std::string& key, std::vector<T>& out) {
    if (!v.is_array()) type_error(key, "an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
        T x{};
        read_value(v[i], key + "[" + std::to_string(i) + "]", x);
        out.push_back(std::move(x));
    }
}

template <class T>
void read_value(const json& v, const std::string& key, std::optional<T>& out) {
    if (v.is_null()) {
        out.reset();
        return;
    }
    T x{};
    read_value(v, key, x);
    out = std::move(x);
}

// Reads known keys of one object and rejects the rest when finished.
class Section {
public:
    Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) type_error(path_.empty() ? "<root>" : path_, "an object");
    }

    template <class T>
    Section& get(const std::string& key, T& out) {
        known_.insert(key);
        if (auto it = obj_.find(key); it != obj_.end()) read_value(*it, join(path_, key), out);
        return *this;
    }

    // A number is accepted as a one-element list.
    Section& get_list_or_scalar(const std::string& key, std::vector<double>& out) {
        known_.insert(key);
        if (auto it = obj_.find(key); it != obj_.end()) {
            if (it->is_number()) {
                out = {it->get<double>()};
            } else {
                read_value(*it, join(path_, key), out);
            }
        }
        return *this;
    }

    const json* child(const std::string& key) {
        known_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (!known_.count(it.key())) {
                throw ConfigError("unknown config key '" + join(path_, it.key()) + "'");
            }
        }
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> known_;
};

template <class Fn>
void section(Section& parent, const std::string& name, Fn&& fn) {
    if (const json* j = parent.child(name)) {
        Section s(*j, name);
        fn(s);
        s.finish();
    }
}

template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
    int line = 1;
    int col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

// Runs a library validator and re-throws its message under the key prefix.
template <class Fn>
void checked(const std::string& key, Fn&& fn) {
    try {
        fn();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
    }
}

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError("config key '" + key + "': " + what);
}

}  // namespace

NoisingParams RunConfig::resolved_noising() const {
    NoisingParams p = noising;
    p.seed = noising_seed.value_or(seed);
    return p;
}

PointCloud RunConfig::load_scene() const {
    if (scene.ply) return read_ply_points(*scene.ply);
    if (scene.builtin == "sphere") return make_sphere_scene(scene.points, scene.radius);
    return builtin_scene(scene.builtin);
}

std::vector<Camera> RunConfig::cameras() const {
    std::vector<Camera> out;
    for (double az : camera.azimuth_deg) {
        out.push_back({camera.intrinsics,
                       sample_hemisphere_pose(deg_to_rad(az), deg_to_rad(camera.elevation_deg),
                                              camera.radius, camera.target)});
    }
    return out;
}

NoiseSchedule RunConfig::noise_schedule() const {
    return NoiseSchedule::log_uniform(schedule.sigma_min, schedule.sigma_max, schedule.levels);
}

OptimizerSettings RunConfig::optimizer_settings() const {
    OptimizerSettings s;
    s.iterations = optimizer.iterations;
    s.learning_rate = optimizer.learning_rate;
    s.final_learning_rate = optimizer.final_learning_rate;
    s.lambda_sim = optimizer.lambda_sim;
    s.mode = parse_noising_mode(optimizer.strategy);
    s.loss_threshold = optimizer.loss_threshold;
    s.prior_std = optimizer.prior_std;
    s.occlusion_delta = optimizer.occlusion_delta;
    s.depth_step = optimizer.depth_step;
    s.hold_field_fixed = optimizer.hold_field_fixed;
    s.schedule = noise_schedule();
    s.render.splat_radius = noising.splat_radius;
    s.noising = resolved_noising();
    return s;
}

std::vector<NoiseStrategy> RunConfig::strategies() const {
    std::vector<NoiseStrategy> out;
    for (const auto& name : analysis.strategies) out.push_back(parse_strategy(name));
    return out;
}

RunConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte);
        throw ConfigError("config syntax error at line " + std::to_string(line) + ", column " +
                          std::to_string(col) + ": " + e.what());
    }

    RunConfig c;
    Section top(root, "");
    top.get("output_dir", c.output_dir).get("seed", c.seed);

    section(top, "scene", [&](Section& s) {
        s.get("builtin", c.scene.builtin)
            .get("ply", c.scene.ply)
            .get("points", c.scene.points)
            .get("radius", c.scene.radius);
    });
    section(top, "camera", [&](Section& s) {
        auto& k = c.camera.intrinsics;
        s.get("fx", k.fx).get("fy", k.fy).get("cx", k.cx).get("cy", k.cy);
        s.get("width", k.width).get("height", k.height);
        s.get_list_or_scalar("azimuth_deg", c.camera.azimuth_deg);
        s.get("elevation_deg", c.camera.elevation_deg)
            .get("radius", c.camera.radius)
            .get("target", c.camera.target);
    });
    section(top, "noising", [&](Section& s) {
        auto& n = c.noising;
        s.get("upsample_n", n.upsample_n)
            .get("upsample_std", n.upsample_std)
            .get("depth_tolerance", n.depth_tolerance)
            .get("sphere_radius_factor", n.sphere_radius_factor)
            .get("sphere_points", n.sphere_points)
            .get("background_density", n.background_density)
            .get("splat_radius", n.splat_radius)
            .get("channels", n.channels)
            .get("seed", c.noising_seed);
    });
    section(top, "schedule", [&](Section& s) {
        s.get("sigma_min", c.schedule.sigma_min)
            .get("sigma_max", c.schedule.sigma_max)
            .get("levels", c.schedule.levels);
    });
    section(top, "optimizer", [&](Section& s) {
        auto& o = c.optimizer;
        s.get("iterations", o.iterations)
            .get("learning_rate", o.learning_rate)
            .get("final_learning_rate", o.final_learning_rate)
            .get("lambda_sim", o.lambda_sim)
            .get("strategy", o.strategy)
            .get("loss_threshold", o.loss_threshold)
            .get("views", o.views)
            .get("neighbor_offset_deg", o.neighbor_offset_deg)
            .get("elevation_deg", o.elevation_deg)
            .get("radius", o.radius)
            .get("points", o.points)
            .get("prior_std", o.prior_std)
            .get("occlusion_delta", o.occlusion_delta)
            .get("depth_step", o.depth_step)
            .get("hold_field_fixed", o.hold_field_fixed);
    });
    section(top, "analysis", [&](Section& s) {
        auto& a = c.analysis;
        s.get("num_samples", a.num_samples)
            .get("patch_size", a.patch_size)
            .get("patch_x", a.patch_x)
            .get("patch_y", a.patch_y)
            .get("separation_deg", a.separation_deg)
            .get("occlusion_delta", a.occlusion_delta)
            .get("strategies", a.strategies);
    });
    section(top, "warp_check", [&](Section& s) {
        s.get("separation_deg", c.warp_check.separation_deg)
            .get("plane_distance", c.warp_check.plane_distance)
            .get("occlusion_delta", c.warp_check.occlusion_delta);
    });
    top.finish();

    validate_config(c);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const RunConfig& c) {
    const auto& k = c.camera.intrinsics;
    const auto& n = c.noising;
    const auto& o = c.optimizer;
    const auto& a = c.analysis;
    json j;
    j["output_dir"] = c.output_dir;
    j["seed"] = c.seed;
    j["scene"] = {{"builtin", c.scene.builtin},
                  {"ply", opt(c.scene.ply)},
                  {"points", c.scene.points},
                  {"radius", c.scene.radius}};
    j["camera"] = {{"fx", k.fx},
                   {"fy", k.fy},
                   {"cx", k.cx},
                   {"cy", k.cy},
                   {"width", k.width},
                   {"height", k.height},
                   {"azimuth_deg", c.camera.azimuth_deg},
                   {"elevation_deg", c.camera.elevation_deg},
                   {"radius", c.camera.radius},
                   {"target", {c.camera.target.x(), c.camera.target.y(), c.camera.target.z()}}};
    j["noising"] = {{"upsample_n", n.upsample_n},
                    {"upsample_std", opt(n.upsample_std)},
                    {"depth_tolerance", opt(n.depth_tolerance)},
                    {"sphere_radius_factor", n.sphere_radius_factor},
                    {"sphere_points", opt(n.sphere_points)},
                    {"background_density", n.background_density},
                    {"splat_radius", n.splat_radius},
                    {"channels", n.channels},
                    {"seed", opt(c.noising_seed)}};
    j["schedule"] = {{"sigma_min", c.schedule.sigma_min},
                     {"sigma_max", c.schedule.sigma_max},
                     {"levels", c.schedule.levels}};
    j["optimizer"] = {{"iterations", o.iterations},
                      {"learning_rate", o.learning_rate},
                      {"final_learning_rate", o.final_learning_rate},
                      {"lambda_sim", o.lambda_sim},
                      {"strategy", o.strategy},
                      {"loss_threshold", o.loss_threshold},
                      {"views", o.views},
                      {"neighbor_offset_deg", o.neighbor_offset_deg},
                      {"elevation_deg", o.elevation_deg},
                      {"radius", o.radius},
                      {"points", o.points},
                      {"prior_std", o.prior_std},
                      {"occlusion_delta", o.occlusion_delta},
                      {"depth_step", o.depth_step},
                      {"hold_field_fixed", o.hold_field_fixed}};
    j["analysis"] = {{"num_samples", a.num_samples},
                     {"patch_size", a.patch_size},
                     {"patch_x", opt(a.patch_x)},
                     {"patch_y", opt(a.patch_y)},
                     {"separation_deg", a.separation_deg},
                     {"occlusion_delta", a.occlusion_delta},
                     {"strategies", a.strategies}};
    j["warp_check"] = {{"separation_deg", c.warp_check.separation_deg},
                       {"plane_distance", c.warp_check.plane_distance},
                       {"occlusion_delta", c.warp_check.occlusion_delta}};
    return j.dump(2) + "\n";
}

void validate_config(const RunConfig& c) {
    if (c.scene.ply) {
        std::error_code ec;
        require(std::filesystem::is_regular_file(*c.scene.ply, ec), "scene.ply",
                "file '" + *c.scene.ply + "' does not exist");
    } else {
        require(c.scene.builtin == "sphere" || c.scene.builtin == "plane" ||
                    c.scene.builtin == "occluder",
                "scene.builtin", "must be one of sphere, plane, occluder");
    }
    require(c.scene.points > 0, "scene.points", "must be > 0");
    require(c.scene.radius > 0.0, "scene.radius", "must be > 0");

    checked("camera", [&] { c.camera.intrinsics.validate(); });
    require(!c.camera.azimuth_deg.empty(), "camera.azimuth_deg", "needs at least one pose");
    require(c.camera.radius > 0.0, "camera.radius", "must be > 0");
    require(c.camera.elevation_deg >= 0.0 && c.camera.elevation_deg < 90.0,
            "camera.elevation_deg", "must be within [0, 90)");

    checked("noising", [&] { c.noising.validate(); });
    checked("schedule", [&] { c.noise_schedule().validate(); });

    const auto& o = c.optimizer;
    require(o.strategy == "consistent" || o.strategy == "iid", "optimizer.strategy",
            "must be consistent or iid");
    require(o.views >= 2 && o.views % 2 == 0, "optimizer.views", "must be even and >= 2");
    require(o.points > 0, "optimizer.points", "must be > 0");
    require(o.radius > 0.0, "optimizer.radius", "must be > 0");
    require(o.elevation_deg >= 0.0 && o.elevation_deg < 90.0, "optimizer.elevation_deg",
            "must be within [0, 90)");
    require(o.neighbor_offset_deg > 0.0 && o.neighbor_offset_deg <= 30.0,
            "optimizer.neighbor_offset_deg", "must be within (0, 30]");
    checked("optimizer", [&] { c.optimizer_settings().validate(); });

    const auto& a = c.analysis;
    require(a.num_samples >= 100, "analysis.num_samples", "must be >= 100");
    require(a.patch_size >= 2, "analysis.patch_size", "must be >= 2");
    const auto& k = c.camera.intrinsics;
    require(a.patch_size <= k.width && a.patch_size <= k.height, "analysis.patch_size",
            "must fit in the image");
    if (a.patch_x) {
        require(*a.patch_x >= 0 && *a.patch_x + a.patch_size <= k.width, "analysis.patch_x",
                "patch must lie inside the image");
    }
    if (a.patch_y) {
        require(*a.patch_y >= 0 && *a.patch_y + a.patch_size <= k.height, "analysis.patch_y",
                "patch must lie inside the image");
    }
    require(a.separation_deg > 0.0 && a.separation_deg <= 30.0, "analysis.separation_deg",
            "must be within (0, 30]");
    require(a.occlusion_delta > 0.0, "analysis.occlusion_delta", "must be > 0");
    require(!a.strategies.empty(), "analysis.strategies", "needs at least one strategy");
    for (std::size_t i = 0; i < a.strategies.size(); ++i) {
        checked("analysis.strategies[" + std::to_string(i) + "]",
                [&] { parse_strategy(a.strategies[i]); });
    }

    const auto& w = c.warp_check;
    require(w.separation_deg > 0.0 && w.separation_deg <= 30.0, "warp_check.separation_deg",
            "must be within (0, 30]");
    require(w.plane_distance > 0.0, "warp_check.plane_distance", "must be > 0");
    require(w.occlusion_delta > 0.0, "warp_check.occlusion_delta", "must be > 0");
}

}  // namespace gsd::cli
