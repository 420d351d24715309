// SPDX-License-Identifier: Apache-2.0
#include "gsd/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <memory>

namespace gsd {

std::string_view to_string(NoisingMode m) {
    return m == NoisingMode::consistent ? "consistent" : "iid";
}

NoisingMode parse_noising_mode(std::string_view name) {
    if (name == "consistent") return NoisingMode::consistent;
    if (name == "iid") return NoisingMode::iid;
    throw std::invalid_argument("unknown noising strategy: " + std::string(name));
}

std::vector<Vec3> target_palette(const PointCloud& cloud) {
    std::vector<Vec3> out;
    out.reserve(cloud.size());
    for (const Vec3& p : cloud.positions) {
        out.emplace_back(0.5 + 0.35 * std::sin(2.1 * p.x() + 0.3),
                         0.5 + 0.35 * std::sin(1.7 * p.y() + 1.1),
                         0.5 + 0.35 * std::sin(2.5 * p.z() + 2.0));
    }
    return out;
}

ToyProblem make_toy_problem(const PointCloud& cloud, const CameraIntrinsics& k,
                            const ToyProblemSpec& spec) {
    if (cloud.empty()) throw std::invalid_argument("toy problem: empty cloud");
    if (spec.views < 2 || spec.views % 2 != 0) {
        throw std::invalid_argument("toy problem: views must be even and >= 2");
    }
    k.validate();
    ToyProblem tp;
    tp.initial = make_color_cloud(cloud, spec.initial_color);
    tp.target_colors = target_palette(cloud);
    const Vec3 target = scene_bounds(cloud).center;
    const int anchors = spec.views / 2;
    const double el = deg_to_rad(spec.elevation_deg);
    for (int a = 0; a < anchors; ++a) {
        const double az = 2.0 * M_PI * a / anchors;
        tp.cameras.push_back({k, sample_hemisphere_pose(az, el, spec.radius, target)});
        tp.cameras.push_back(
            {k, sample_hemisphere_pose(az + deg_to_rad(spec.neighbor_offset_deg), el, spec.radius, target)});
        tp.pairs.emplace_back(2 * a, 2 * a + 1);
    }
    return tp;
}

void OptimizerSettings::validate() const {
    if (iterations < 0) throw std::invalid_argument("optimizer: iterations must be >= 0");
    if (!(learning_rate > 0.0) || !(final_learning_rate > 0.0)) {
        throw std::invalid_argument("optimizer: learning rates must be > 0");
    }
    if (!(lambda_sim >= 0.0)) throw std::invalid_argument("optimizer: lambda_sim must be >= 0");
    if (!(loss_threshold > 0.0)) throw std::invalid_argument("optimizer: loss_threshold must be > 0");
    if (!(prior_std > 0.0)) throw std::invalid_argument("optimizer: prior_std must be > 0");
    if (!(occlusion_delta > 0.0)) throw std::invalid_argument("optimizer: occlusion_delta must be > 0");
    if (!(depth_step > 0.0)) throw std::invalid_argument("optimizer: depth_step must be > 0");
    schedule.validate();
}

double color_error(const Image& z, const Image& target) {
    require_same_shape(z, target, "color_error");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < z.pixel_count(); ++p) {
        if (!z.covered(p)) continue;
        const auto a = z.px(p);
        const auto b = target.px(p);
        for (std::size_t c = 0; c < a.size(); ++c) sum += std::abs(a[c] - b[c]);
        n += a.size();
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

OptimizationResult run_optimization(const ToyProblem& problem, const OptimizerSettings& settings,
                                    Rng& rng, const std::function<void(const TraceRow&)>& on_iteration) {
    settings.validate();
    problem.initial.validate();
    if (problem.cameras.empty()) throw std::invalid_argument("optimizer: no cameras");
    const std::size_t views = problem.cameras.size();
    const CameraIntrinsics& k0 = problem.cameras.front().intrinsics;

    // Geometry is fixed, so render weights and depth are computed once.
    std::vector<ColorRender> renders;
    std::vector<Image> targets;
    for (const Camera& cam : problem.cameras) {
        renders.push_back(render_color(problem.initial, cam.intrinsics, cam.pose, settings.render));
        targets.push_back(shade(renders.back().weights, problem.target_colors, cam.intrinsics.height,
                                cam.intrinsics.width));
    }
    const AnalyticGaussianDenoiser denoiser(targets, settings.prior_std);

    std::vector<double> preconditioner(problem.initial.size(), 0.0);
    for (const ColorRender& r : renders) {
        for (std::size_t j = 0; j < r.weights.points.size(); ++j) {
            preconditioner[r.weights.points[j]] += r.weights.weights[j];
        }
    }

    std::unique_ptr<NoiseSource> noise;
    if (settings.mode == NoisingMode::consistent) {
        NoisingParams np = settings.noising;
        np.channels = 3;
        noise = std::make_unique<ConsistentNoiseSource>(problem.initial.geometry(), problem.cameras, np,
                                                        settings.hold_field_fixed);
    } else {
        noise = std::make_unique<IidNoiseSource>(views, k0.height, k0.width, 3);
    }

    OptimizationResult result;
    result.final_rep = problem.initial;
    std::vector<Vec3>& colors = result.final_rep.colors;

    auto losses = [&](std::vector<double>& per_view) {
        per_view.resize(views);
        double mean = 0.0;
        for (std::size_t v = 0; v < views; ++v) {
            renders[v].image = shade(renders[v].weights, colors, renders[v].image.height,
                                     renders[v].image.width);
            per_view[v] = color_error(renders[v].image, targets[v]);
            mean += per_view[v];
        }
        return mean / static_cast<double>(views);
    };
    std::vector<double> scratch;
    result.initial_loss = losses(scratch);
    result.final_loss = result.initial_loss;

    // Separate streams so every noising mode sees the same sigma sequence.
    Rng schedule_rng(rng.next_key());
    Rng noise_rng(rng.next_key());
    const auto t0 = std::chrono::steady_clock::now();
    for (int it = 1; it <= settings.iterations; ++it) {
        TraceRow row;
        row.iteration = it;
        const double frac = settings.iterations > 1 ? (it - 1.0) / (settings.iterations - 1.0) : 0.0;
        row.learning_rate =
            settings.learning_rate * std::pow(settings.final_learning_rate / settings.learning_rate, frac);
        row.sigma = settings.schedule.sample(schedule_rng);

        const SdsStep step = sds_gradient(renders, colors.size(), row.sigma, denoiser, noise->draw(noise_rng));
        double gnorm2 = 0.0;
        for (std::size_t i = 0; i < colors.size(); ++i) {
            gnorm2 += step.color_gradient[i].squaredNorm();
            if (preconditioner[i] > 0.0) colors[i] += row.learning_rate * step.color_gradient[i] / preconditioner[i];
        }
        row.sds_grad_norm = std::sqrt(gnorm2);

        double depth2 = 0.0;
        for (const auto& [a, b] : problem.pairs) {
            const Camera& ca = problem.cameras[a];
            const Camera& cb = problem.cameras[b];
            const WarpField w = compute_warp(renders[a].depth, ca.pose, cb.pose, ca.intrinsics);
            const OcclusionMask mask = occlusion_mask(w, renders[b].depth, settings.occlusion_delta);
            const GradientMap warped = inverse_warp(step.gradients[b], w);
            row.l_sim += consistency_loss(step.gradients[a], warped, mask);
            if (settings.lambda_sim > 0.0) {
                const auto dg = consistency_loss_depth_gradient(step.gradients[a], step.gradients[b],
                                                                renders[a].depth, ca.pose, cb.pose,
                                                                ca.intrinsics, mask, settings.depth_step);
                for (double d : dg) depth2 += d * d;
            }
        }
        row.depth_grad_norm = settings.lambda_sim * std::sqrt(depth2);

        row.mean_loss = losses(row.view_loss);
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (!std::isfinite(row.mean_loss) || !std::isfinite(row.l_sim)) {
            throw NumericalDivergence("non-finite loss at iteration " + std::to_string(it));
        }
        if (!result.iterations_to_threshold && row.mean_loss <= settings.loss_threshold) {
            result.iterations_to_threshold = it;
        }
        result.final_loss = row.mean_loss;
        if (on_iteration) on_iteration(row);
        result.trace.push_back(std::move(row));
    }
    return result;
}

}  // namespace gsd
