// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: a JSON document whose every key is optional and whose
// unknown keys are rejected. Serialising a loaded config writes every field,
// so load -> save -> load is a fixed point.
#pragma once

#include "gsd/analysis.hpp"
#include "gsd/geometry.hpp"
#include "gsd/noising.hpp"
#include "gsd/optimizer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsd::cli {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SceneConfig {
    std::string builtin = "sphere";      // sphere | plane | occluder
    std::optional<std::string> ply;      // overrides builtin
    std::size_t points = 10000;          // sphere only
    double radius = 1.0;                 // sphere only
};

struct CameraConfig {
    CameraIntrinsics intrinsics;
    std::vector<double> azimuth_deg{0.0};  // one pose per entry
    double elevation_deg = 15.0;
    double radius = 3.0;
    Vec3 target = Vec3::Zero();
};

struct ScheduleConfig {
    double sigma_min = 0.1;
    double sigma_max = 2.0;
    int levels = 1000;
};

struct OptimizerConfig {
    int iterations = 200;
    double learning_rate = 1.0;
    double final_learning_rate = 0.1;
    double lambda_sim = 1.0;
    std::string strategy = "consistent";
    double loss_threshold = 0.1;
    int views = 8;
    double neighbor_offset_deg = 5.0;
    double elevation_deg = 15.0;
    double radius = 3.0;
    std::size_t points = 500;
    double prior_std = 1.0;
    double occlusion_delta = 0.05;
    double depth_step = 1e-3;
    bool hold_field_fixed = false;
};

struct AnalysisConfig {
    int num_samples = 5000;
    int patch_size = 8;
    std::optional<int> patch_x;
    std::optional<int> patch_y;
    double separation_deg = 5.0;
    double occlusion_delta = 0.05;
    std::vector<std::string> strategies{"random", "bilinear_warp", "nearest_warp", "consistent_3d"};
};

struct WarpCheckConfig {
    double separation_deg = 5.0;
    double plane_distance = 3.0;
    double occlusion_delta = 0.05;
};

struct RunConfig {
    SceneConfig scene;
    CameraConfig camera;
    NoisingParams noising;
    std::optional<std::uint64_t> noising_seed;  // null: use the run seed
    ScheduleConfig schedule;
    OptimizerConfig optimizer;
    AnalysisConfig analysis;
    WarpCheckConfig warp_check;
    std::string output_dir = "gsd_out";
    std::uint64_t seed = 0;

    /// Noising parameters with the seed resolved.
    NoisingParams resolved_noising() const;
    PointCloud load_scene() const;
    std::vector<Camera> cameras() const;
    NoiseSchedule noise_schedule() const;
    OptimizerSettings optimizer_settings() const;
    std::vector<NoiseStrategy> strategies() const;
};

/// Throws ConfigError naming the offending key (or line for syntax errors).
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Pretty-printed JSON with every field present.
std::string dump_config(const RunConfig& config);
/// Range and reference checks; throws ConfigError naming the key.
void validate_config(const RunConfig& config);

}  // namespace gsd::cli
