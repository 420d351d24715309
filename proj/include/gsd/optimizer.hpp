// SPDX-License-Identifier: Apache-2.0
//
// Closed-loop toy optimisation: per-point colors of a fixed point cloud are
// driven by SDS updates from the analytic denoiser whose targets are renders
// of known ground-truth colors. Views come in anchor/neighbour pairs a few
// degrees apart; the gradient consistency loss is evaluated on each pair.
#pragma once

#include "gsd/noising.hpp"
#include "gsd/score.hpp"

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gsd {

enum class NoisingMode { consistent, iid };

std::string_view to_string(NoisingMode m);
NoisingMode parse_noising_mode(std::string_view name);

struct NumericalDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ToyProblemSpec {
    int views = 8;  // even: views/2 anchors, each with one neighbour
    double radius = 3.0;
    double elevation_deg = 15.0;
    double neighbor_offset_deg = 5.0;
    Vec3 initial_color = Vec3::Constant(0.5);
};

struct ToyProblem {
    ColorPointCloud initial;
    std::vector<Vec3> target_colors;
    std::vector<Camera> cameras;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (anchor, neighbour)
};

/// Smooth ground-truth colors in [0.15, 0.85] derived from positions.
std::vector<Vec3> target_palette(const PointCloud& cloud);

ToyProblem make_toy_problem(const PointCloud& cloud, const CameraIntrinsics& intrinsics,
                            const ToyProblemSpec& spec = {});

struct OptimizerSettings {
    int iterations = 200;
    double learning_rate = 1.0;
    /// Step size decays geometrically to this value at the last iteration.
    double final_learning_rate = 0.1;
    double lambda_sim = 1.0;
    NoisingMode mode = NoisingMode::consistent;
    double loss_threshold = 0.1;
    double prior_std = 1.0;
    double occlusion_delta = 0.05;
    double depth_step = 1e-3;
    bool hold_field_fixed = false;
    NoiseSchedule schedule = NoiseSchedule::log_uniform();
    RenderSettings render;
    /// Used for consistent noising; channels are forced to 3.
    NoisingParams noising;

    void validate() const;
};

struct TraceRow {
    int iteration = 0;
    double sigma = 0.0;
    double learning_rate = 0.0;
    std::vector<double> view_loss;  // mean |z - z*| over covered pixels and channels
    double mean_loss = 0.0;
    double l_sim = 0.0;
    double sds_grad_norm = 0.0;
    double depth_grad_norm = 0.0;  // lambda_sim * ||dL_sim/d depth||
    double wall_ms = 0.0;
};

struct OptimizationResult {
    ColorPointCloud final_rep;
    std::vector<TraceRow> trace;
    /// First iteration whose mean loss is at or below the threshold.
    std::optional<int> iterations_to_threshold;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

/// Mean absolute difference over covered pixels and all channels.
double color_error(const Image& z, const Image& target);

/// Colors move along the SDS gradient with a per-point step normalised by
/// the point's total render weight over all views. Positions never change:
/// the consistency loss and its depth gradient are reported but have no
/// parameter to act on. Throws NumericalDivergence on a non-finite loss.
OptimizationResult run_optimization(const ToyProblem& problem, const OptimizerSettings& settings,
                                    Rng& rng,
                                    const std::function<void(const TraceRow&)>& on_iteration = {});

}  // namespace gsd
