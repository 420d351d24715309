// SPDX-License-Identifier: Apache-2.0
//
// 3D-consistent noise maps. A standard-normal noise field lives on the scene's
// point cloud; every point is replaced by N children whose values are
// conditioned on the parent, the children are projected into a view and the
// values landing in one pixel are summed and divided by sqrt(count). Views that
// share a field receive correlated noise at corresponding pixels while each map
// stays i.i.d. standard normal.
//
// Randomness: a field is identified by a 64-bit key drawn from the caller's
// Rng. Parent values and children of point k come from a stream keyed by
// (key, k), so any subset of points can be generated independently and two
// views built from the same key see the same field.
#pragma once

#include "gsd/geometry.hpp"
#include "gsd/raster.hpp"
#include "gsd/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace gsd {

struct NoisingParams {
    int upsample_n = 9;
    /// Child scatter std (world units). Default: half the median
    /// nearest-neighbour distance of the cloud.
    std::optional<double> upsample_std;
    /// Default: 3 * upsample_std.
    std::optional<double> depth_tolerance;
    double sphere_radius_factor = 4.0;
    /// Background lattice size. Default: derived from the cameras so every
    /// pixel expects at least `background_density` children.
    std::optional<std::size_t> sphere_points;
    double background_density = 32.0;
    double splat_radius = 1.0;
    int channels = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct CoverageError : std::runtime_error {
    CoverageError(const std::string& what, std::size_t uncovered_pixels)
        : std::runtime_error(what), uncovered(uncovered_pixels) {}
    std::size_t uncovered;
};

/// Per-point C-channel standard-normal values.
struct NoiseField3D {
    std::uint64_t key = 0;
    int channels = 1;
    std::vector<double> values;  // point-major

    std::size_t size() const { return channels > 0 ? values.size() / channels : 0; }
    std::span<const double> value(std::size_t k) const {
        return {values.data() + k * channels, static_cast<std::size_t>(channels)};
    }
};

struct UpsampledNoiseField {
    int factor = 1;
    int channels = 1;
    std::vector<std::uint32_t> parent_index;
    std::vector<Vec3> positions;
    std::vector<double> values;  // child-major, `channels` per child

    std::size_t size() const { return positions.size(); }
    std::span<const double> value(std::size_t i) const {
        return {values.data() + i * channels, static_cast<std::size_t>(channels)};
    }
};

double median_nearest_neighbor_distance(const PointCloud& cloud);

NoiseField3D sample_noise_field(const PointCloud& cloud, int channels, Rng& rng);

/// For each parent and channel: N standard-normal draws, their sample mean
/// removed, plus parent/sqrt(N). Children are marginally standard normal and
/// (1/sqrt(N)) * sum(children) equals the parent. Child positions are the
/// parent plus isotropic Gaussian scatter of std `spatial_std`.
UpsampledNoiseField conditional_upsample(const NoiseField3D& field, const PointCloud& cloud,
                                         int factor, double spatial_std);

/// Pixel receiving each child, or -1 when the child is out of frustum or
/// further than `depth_tolerance` from the rendered depth at its pixel.
std::vector<std::int32_t> integral_assignment(const UpsampledNoiseField& field,
                                              const CameraIntrinsics& intrinsics,
                                              const CameraPose& pose, const DepthMap& depth,
                                              double depth_tolerance);

/// n(p) = sum of the children assigned to p divided by sqrt(their count).
/// Pixels without children stay zero and uncovered.
NoiseMap2D discrete_noise_integral(const UpsampledNoiseField& field,
                                   const CameraIntrinsics& intrinsics, const CameraPose& pose,
                                   const DepthMap& depth, double depth_tolerance);

/// Output takes the foreground where it is covered, the background elsewhere.
/// Throws if a pixel is covered by neither.
NoiseMap2D composite_noise(const NoiseMap2D& foreground, const NoiseMap2D& background);

/// Child values of a background sphere for one field key, generated per
/// lattice point on first use. Values depend only on (key, lattice index),
/// never on the order in which lattice points are touched.
class BackgroundField {
public:
    std::uint64_t key() const { return key_; }
    int channels() const { return channels_; }

private:
    friend class BackgroundSphere;
    std::uint64_t key_ = 0;
    int channels_ = 1;
    mutable std::vector<double> values_;
    mutable std::vector<std::uint8_t> ready_;
};

/// Fibonacci lattice sphere around the scene that supplies noise for pixels
/// the foreground does not cover. Only lattice points near some camera's
/// frustum are kept; children are filtered per camera to the hemisphere facing
/// away from it so the sphere never occludes itself.
///
/// Child positions are drawn once at construction from `params.seed`, so the
/// child-to-pixel assignment is fixed and checked for full coverage up front;
/// each field redraws only the child values.
class BackgroundSphere {
public:
    /// Throws CoverageError if a pixel of some camera receives no child.
    BackgroundSphere(const SceneBounds& scene, const NoisingParams& params,
                     std::span<const Camera> cameras);

    const Vec3& center() const { return center_; }
    double radius() const { return radius_; }
    std::size_t lattice_size() const { return lattice_size_; }
    std::size_t active_size() const { return indices_.size(); }
    double upsample_std() const { return upsample_std_; }
    std::size_t child_count(std::size_t camera, std::size_t pixel) const {
        const auto& pc = per_camera_.at(camera);
        return pc.offsets[pixel + 1] - pc.offsets[pixel];
    }

    BackgroundField field(std::uint64_t key, int channels) const;
    /// Every child of every active lattice point, values drawn for `key`.
    UpsampledNoiseField sample(std::uint64_t key, int channels) const;

    /// Any camera; throws CoverageError if a pixel receives no child.
    NoiseMap2D integrate(const UpsampledNoiseField& field, const Camera& camera) const;

    /// For the construction-time camera with this index. With a non-empty
    /// `needed` mask only those pixels are computed; the rest stay uncovered.
    NoiseMap2D integrate(const BackgroundField& field, std::size_t camera,
                         std::span<const std::uint8_t> needed = {}) const;

private:
    struct PixelChildren {
        std::vector<std::uint32_t> offsets;
        std::vector<std::uint32_t> children;
    };

    void generate(const BackgroundField& field, std::size_t local) const;

    Vec3 center_;
    double radius_ = 0.0;
    std::size_t lattice_size_ = 0;
    double upsample_std_ = 0.0;
    int factor_ = 1;
    std::vector<std::uint32_t> indices_;
    std::vector<Vec3> positions_;
    std::vector<Vec3> children_;
    std::vector<Camera> cameras_;
    std::vector<PixelChildren> per_camera_;
};

/// Expected number of upsampled background points per pixel is proportional to
/// the sphere area a pixel sees; returns the smallest such area over all
/// pixels of all cameras (world units squared).
double min_background_pixel_area(const Vec3& center, double radius, std::span<const Camera> cameras);

/// The full pipeline for a fixed cloud and camera set. Depth maps and the
/// background lattice are computed once; each call to sample_field draws a
/// new field that all cameras share.
class ConsistentNoiseSampler {
public:
    struct Field {
        std::uint64_t key = 0;
        UpsampledNoiseField foreground;
        BackgroundField background;
    };

    ConsistentNoiseSampler(PointCloud cloud, std::vector<Camera> cameras, NoisingParams params);

    Field sample_field(std::uint64_t key) const;
    Field sample_field(Rng& rng) const { return sample_field(rng.next_key()); }

    NoiseMap2D foreground_map(const Field& field, std::size_t camera) const;
    NoiseMap2D background_map(const Field& field, std::size_t camera) const;
    NoiseMap2D render(const Field& field, std::size_t camera) const;

    /// One new field, one composited map per camera.
    std::vector<NoiseMap2D> sample(Rng& rng) const;

    const PointCloud& cloud() const { return cloud_; }
    const std::vector<Camera>& cameras() const { return cameras_; }
    const NoisingParams& params() const { return params_; }
    const DepthMap& depth(std::size_t camera) const { return depths_.at(camera); }
    const BackgroundSphere& background() const { return background_; }
    double upsample_std() const { return upsample_std_; }
    double depth_tolerance() const { return depth_tolerance_; }

private:
    PointCloud cloud_;
    std::vector<Camera> cameras_;
    NoisingParams params_;
    double upsample_std_ = 0.0;
    double depth_tolerance_ = 0.0;
    std::vector<DepthMap> depths_;
    BackgroundSphere background_;
};

/// Background noise for a single view.
NoiseMap2D spherical_background_noise(const SceneBounds& scene, const NoisingParams& params,
                                      const CameraIntrinsics& intrinsics, const CameraPose& pose,
                                      Rng& rng);

/// render_depth -> noise field -> upsample -> integral -> background -> composite.
NoiseMap2D consistent_noise_map(const PointCloud& cloud, const CameraIntrinsics& intrinsics,
                                const CameraPose& pose, const NoisingParams& params, Rng& rng);

/// I.i.d. standard-normal map with full coverage.
NoiseMap2D iid_noise_map(int height, int width, int channels, Rng& rng);

}  // namespace gsd
