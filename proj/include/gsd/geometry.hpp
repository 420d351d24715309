// SPDX-License-Identifier: Apache-2.0
//
// Pinhole cameras, hemisphere poses, point projection and z-buffered point
// depth rendering.
//
// Pixel convention: pixel index (x, y) is centred on the continuous image
// coordinate (x, y). A continuous coordinate u falls into pixel
// floor(u + 0.5) (nearest, ties rounded up).
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace gsd {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct CameraIntrinsics {
    double fx = 80.0;
    double fy = 80.0;
    double cx = 31.5;
    double cy = 31.5;
    int width = 64;
    int height = 64;

    /// Throws std::invalid_argument when an invariant is violated.
    void validate() const;

    Mat3 matrix() const;
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    bool operator==(const CameraIntrinsics&) const = default;
};

/// World-to-camera rigid transform: x_cam = rotation * x_world + translation.
/// Camera frame: +x right, +y down, +z along the optical axis.
struct CameraPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    void validate() const;

    Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
    Vec3 to_world(const Vec3& cam) const { return rotation.transpose() * (cam - translation); }
    Vec3 center() const { return -rotation.transpose() * translation; }
    /// Optical axis in world coordinates.
    Vec3 forward() const { return rotation.row(2).transpose(); }

    static CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up);
};

struct Camera {
    CameraIntrinsics intrinsics;
    CameraPose pose;
};

struct PointCloud {
    std::vector<Vec3> positions;

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }
};

struct SceneBounds {
    Vec3 center = Vec3::Zero();
    double radius = 0.0;
};

/// Bounding-box centre and the largest distance from it to any point.
SceneBounds scene_bounds(const PointCloud& cloud);

inline int nearest_pixel(double coord) { return static_cast<int>(std::floor(coord + 0.5)); }

struct Projection {
    Vec2 pixel;
    double depth = 0.0;

    int x() const { return nearest_pixel(pixel.x()); }
    int y() const { return nearest_pixel(pixel.y()); }
};

/// Returns nullopt when the point is behind the camera or its nearest pixel
/// lies outside the image.
std::optional<Projection> project(const Vec3& point, const CameraIntrinsics& intrinsics,
                                  const CameraPose& pose);

/// Inverse of project for a known camera-space depth.
Vec3 unproject(const Vec2& pixel, double depth, const CameraIntrinsics& intrinsics,
               const CameraPose& pose);

class DepthMap {
public:
    static constexpr double kInvalid = -1.0;

    DepthMap() = default;
    DepthMap(int width, int height);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return values_.size(); }
    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

    bool valid(std::size_t p) const { return valid_[p] != 0; }
    bool valid(int x, int y) const { return valid(index(x, y)); }
    double at(std::size_t p) const { return values_[p]; }
    double at(int x, int y) const { return values_[index(x, y)]; }

    /// Depth must be positive and finite.
    void set(std::size_t p, double depth);
    void invalidate(std::size_t p);

    std::span<const double> values() const { return values_; }
    std::span<const std::uint8_t> validity() const { return valid_; }
    std::size_t valid_count() const;

    bool matches(const CameraIntrinsics& k) const { return width_ == k.width && height_ == k.height; }

    bool operator==(const DepthMap&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> values_;
    std::vector<std::uint8_t> valid_;
};

/// Integer pixel offsets (dx, dy) with dx^2 + dy^2 <= radius^2.
std::vector<Eigen::Vector2i> disc_offsets(double radius);

/// Z-buffer over projected points; each point covers the disc of
/// `splat_radius` pixels around its nearest pixel. Smaller depth wins, the
/// earlier point wins an exact tie. Throws on an empty cloud.
DepthMap render_depth(const PointCloud& cloud, const CameraIntrinsics& intrinsics,
                      const CameraPose& pose, double splat_radius = 1.0);

/// Camera on the sphere of `radius` around `target` looking at it, world up +Y.
/// Position: target + radius * (cos(el) sin(az), sin(el), cos(el) cos(az)).
CameraPose sample_hemisphere_pose(double azimuth, double elevation, double radius,
                                  const Vec3& target);

inline double deg_to_rad(double deg) { return deg * M_PI / 180.0; }

}  // namespace gsd
