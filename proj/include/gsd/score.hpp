// SPDX-License-Identifier: Apache-2.0
//
// Score-distillation machinery: denoisers, gradient maps, perturb-and-average
// scores, the SDS parameter gradient for a colored point cloud, and the
// correspondence-aware gradient consistency loss.
#pragma once

#include "gsd/geometry.hpp"
#include "gsd/noising.hpp"
#include "gsd/raster.hpp"
#include "gsd/rng.hpp"
#include "gsd/warping.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gsd {

struct NoiseSchedule {
    std::vector<double> sigmas;

    /// `levels` noise levels spaced uniformly in log(sigma) over [lo, hi].
    static NoiseSchedule log_uniform(double lo = 0.1, double hi = 2.0, int levels = 1000);

    void validate() const;
    /// Uniform timestep, returns its sigma.
    double sample(Rng& rng) const;
};

class Denoiser {
public:
    virtual ~Denoiser() = default;

    /// D(noisy; sigma) for the given view. Output has the input's shape.
    virtual Image denoise(const Image& noisy, double sigma, std::size_t view) const = 0;

    /// Opaque prompt/context; unused by the built-in denoisers.
    std::string conditioning;
};

/// D(x; sigma) = x + sigma^2 (z* - x) / (s^2 + sigma^2), the optimal denoiser
/// for the image prior N(z*, s^2 I).
class AnalyticGaussianDenoiser final : public Denoiser {
public:
    AnalyticGaussianDenoiser(std::vector<Image> targets, double prior_std);

    Image denoise(const Image& noisy, double sigma, std::size_t view) const override;

    /// (z* - z) / (s^2 + sigma^2): the expected gradient map for clean z.
    GradientMap expected_gradient(const Image& z, double sigma, std::size_t view) const;

    const Image& target(std::size_t view) const { return targets_.at(view); }
    double prior_std() const { return prior_std_; }

private:
    std::vector<Image> targets_;
    double prior_std_;
};

class IdentityDenoiser final : public Denoiser {
public:
    Image denoise(const Image& noisy, double, std::size_t) const override { return noisy; }
};

/// g = (D(z + sigma n; sigma) - (z + sigma n)) / sigma^2. Coverage follows z.
GradientMap gradient_map(const Image& z, const NoiseMap2D& noise, double sigma,
                         const Denoiser& denoiser, std::size_t view = 0);

struct PaasEstimate {
    GradientMap mean;
    GradientMap standard_error;
    int samples = 0;
};

/// Monte-Carlo mean of gradient_map over i.i.d. standard-normal noise.
PaasEstimate paas_score(const Image& z, double sigma, const Denoiser& denoiser, int num_samples,
                        Rng& rng, std::size_t view = 0);

/// Toy optimizable representation: fixed positions, RGB colors, opacities.
struct ColorPointCloud {
    std::vector<Vec3> positions;
    std::vector<Vec3> colors;
    std::vector<double> opacity;

    std::size_t size() const { return positions.size(); }
    void validate() const;
    PointCloud geometry() const { return PointCloud{positions}; }
};

ColorPointCloud make_color_cloud(const PointCloud& cloud, const Vec3& color, double opacity = 1.0);

struct RenderSettings {
    double splat_radius = 1.0;
    /// A point contributes to a pixel when its depth is within this distance
    /// of the z-buffer depth there.
    double depth_tolerance = 0.05;
};

/// Pixel -> (point, weight) lists; weights of a covered pixel sum to one.
struct RenderWeights {
    std::vector<std::uint32_t> offsets;  // pixel_count + 1
    std::vector<std::uint32_t> points;
    std::vector<double> weights;

    std::size_t pixel_count() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

struct ColorRender {
    Image image;
    DepthMap depth;
    RenderWeights weights;
};

/// z(p) = opacity-weighted average of the colors of points passing the depth
/// test at p. Linear in colors; dz(p)/dcolor_k is the stored weight.
ColorRender render_color(const ColorPointCloud& rep, const CameraIntrinsics& intrinsics,
                         const CameraPose& pose, const RenderSettings& settings = {});

/// Re-shade an existing render with new colors (geometry unchanged).
Image shade(const RenderWeights& weights, const std::vector<Vec3>& colors, int height, int width);

/// Source of per-view noise maps for one SDS step.
class NoiseSource {
public:
    virtual ~NoiseSource() = default;
    virtual std::vector<NoiseMap2D> draw(Rng& rng) = 0;
};

class IidNoiseSource final : public NoiseSource {
public:
    IidNoiseSource(std::size_t views, int height, int width, int channels)
        : views_(views), height_(height), width_(width), channels_(channels) {}
    std::vector<NoiseMap2D> draw(Rng& rng) override;

private:
    std::size_t views_;
    int height_, width_, channels_;
};

class ZeroNoiseSource final : public NoiseSource {
public:
    ZeroNoiseSource(std::size_t views, int height, int width, int channels)
        : views_(views), height_(height), width_(width), channels_(channels) {}
    std::vector<NoiseMap2D> draw(Rng&) override;

private:
    std::size_t views_;
    int height_, width_, channels_;
};

/// One shared 3D field per draw, rendered into every view. With
/// `hold_fixed` the first field is reused for all later draws.
class ConsistentNoiseSource final : public NoiseSource {
public:
    ConsistentNoiseSource(PointCloud cloud, std::vector<Camera> cameras, NoisingParams params,
                          bool hold_fixed = false);
    std::vector<NoiseMap2D> draw(Rng& rng) override;

    const ConsistentNoiseSampler& sampler() const { return sampler_; }

private:
    ConsistentNoiseSampler sampler_;
    bool hold_fixed_;
    std::optional<ConsistentNoiseSampler::Field> held_;
};

struct SdsStep {
    double sigma = 0.0;
    /// sum_views sum_p g(p) dz(p)/dcolor. Points toward higher prior
    /// density, so an update adds it.
    std::vector<Vec3> color_gradient;
    std::vector<GradientMap> gradients;
    std::vector<NoiseMap2D> noises;
};

/// Deterministic core of an SDS step for given renders, sigma and noise.
/// The denoiser is not differentiated; g acts as a fixed residual.
SdsStep sds_gradient(const std::vector<ColorRender>& renders, std::size_t point_count,
                     double sigma, const Denoiser& denoiser, std::vector<NoiseMap2D> noises);

/// Samples sigma from the schedule and noise from `noise`, renders every
/// camera and returns the summed parameter gradient.
SdsStep sds_step(const ColorPointCloud& rep, const std::vector<Camera>& cameras,
                 const NoiseSchedule& schedule, const Denoiser& denoiser, NoiseSource& noise,
                 Rng& rng, const RenderSettings& settings = {});

inline constexpr double kCosineNormEpsilon = 1e-8;

/// 1 - cos(a, b), or 0 when either vector is shorter than kCosineNormEpsilon.
double cosine_dissimilarity(std::span<const double> a, std::span<const double> b);

/// sum_p mask(p) * (1 - cos(g_i(p), g_j_warped(p))).
double consistency_loss(const GradientMap& g_i, const GradientMap& g_j_warped,
                        const OcclusionMask& mask);

/// The consistency loss as a function of view i's depth: g_j is bilinearly
/// sampled at targets reprojected with `depth_i`. Mask and gradient maps are
/// held fixed.
double consistency_loss_at_depth(const GradientMap& g_i, const GradientMap& g_j,
                                 const DepthMap& depth_i, const CameraPose& pose_i,
                                 const CameraPose& pose_j, const CameraIntrinsics& intrinsics,
                                 const OcclusionMask& mask);

/// Central finite differences of consistency_loss_at_depth with respect to
/// every valid depth pixel; zero elsewhere. Throws if h <= 0.
std::vector<double> consistency_loss_depth_gradient(const GradientMap& g_i, const GradientMap& g_j,
                                                    const DepthMap& depth_i,
                                                    const CameraPose& pose_i,
                                                    const CameraPose& pose_j,
                                                    const CameraIntrinsics& intrinsics,
                                                    const OcclusionMask& mask, double h);

/// Sum over neighbours j of gradient maps at view i computed with neighbour
/// noise warped onto view i (nearest sampling, warp from depth_i).
GradientMap multiview_warped_sds(const Image& z_i, const DepthMap& depth_i,
                                 const CameraIntrinsics& intrinsics, const CameraPose& pose_i,
                                 const std::vector<CameraPose>& neighbor_poses,
                                 const std::vector<NoiseMap2D>& neighbor_noises, double sigma,
                                 const Denoiser& denoiser, std::size_t view = 0);

}  // namespace gsd
