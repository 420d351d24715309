// SPDX-License-Identifier: Apache-2.0
#include "gsd/geometry.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace gsd {

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw std::invalid_argument("intrinsics: focal lengths must be positive");
    }
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("intrinsics: image size must be positive");
    }
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
        throw std::invalid_argument("intrinsics: principal point outside the image");
    }
}

Mat3 CameraIntrinsics::matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
}

void CameraPose::validate() const {
    const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
    if (err.cwiseAbs().maxCoeff() >= 1e-9) {
        throw std::invalid_argument("pose: rotation is not orthonormal");
    }
    if (rotation.determinant() <= 0.0) {
        throw std::invalid_argument("pose: rotation has negative determinant");
    }
    if (!translation.allFinite()) {
        throw std::invalid_argument("pose: translation is not finite");
    }
}

CameraPose CameraPose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    Vec3 forward = target - eye;
    const double dist = forward.norm();
    if (!(dist > 1e-12)) {
        throw std::invalid_argument("look_at: camera position coincides with target");
    }
    forward /= dist;
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-9) {
        throw std::invalid_argument("look_at: up vector parallel to viewing direction");
    }
    right.normalize();
    const Vec3 down = forward.cross(right);

    CameraPose pose;
    pose.rotation.row(0) = right.transpose();
    pose.rotation.row(1) = down.transpose();
    pose.rotation.row(2) = forward.transpose();
    pose.translation = -pose.rotation * eye;
    return pose;
}

SceneBounds scene_bounds(const PointCloud& cloud) {
    if (cloud.empty()) {
        throw std::invalid_argument("scene_bounds: empty point cloud");
    }
    Vec3 lo = cloud.positions.front();
    Vec3 hi = lo;
    for (const auto& p : cloud.positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    SceneBounds b;
    b.center = 0.5 * (lo + hi);
    for (const auto& p : cloud.positions) {
        b.radius = std::max(b.radius, (p - b.center).norm());
    }
    return b;
}

std::optional<Projection> project(const Vec3& point, const CameraIntrinsics& k,
                                  const CameraPose& pose) {
    const Vec3 c = pose.to_camera(point);
    if (!(c.z() > 0.0)) return std::nullopt;
    Projection out;
    out.pixel = {k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy};
    out.depth = c.z();
    const int x = out.x();
    const int y = out.y();
    if (x < 0 || y < 0 || x >= k.width || y >= k.height) return std::nullopt;
    return out;
}

Vec3 unproject(const Vec2& pixel, double depth, const CameraIntrinsics& k,
               const CameraPose& pose) {
    const Vec3 cam{(pixel.x() - k.cx) / k.fx * depth, (pixel.y() - k.cy) / k.fy * depth, depth};
    return pose.to_world(cam);
}

DepthMap::DepthMap(int width, int height)
    : width_(width), height_(height),
      values_(static_cast<std::size_t>(width) * height, kInvalid),
      valid_(static_cast<std::size_t>(width) * height, 0) {
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("DepthMap: dimensions must be positive");
    }
}

void DepthMap::set(std::size_t p, double depth) {
    if (!(depth > 0.0) || !std::isfinite(depth)) {
        throw std::invalid_argument("DepthMap: depth must be positive and finite");
    }
    values_[p] = depth;
    valid_[p] = 1;
}

void DepthMap::invalidate(std::size_t p) {
    values_[p] = kInvalid;
    valid_[p] = 0;
}

std::size_t DepthMap::valid_count() const {
    std::size_t n = 0;
    for (auto v : valid_) n += v;
    return n;
}

std::vector<Eigen::Vector2i> disc_offsets(double radius) {
    std::vector<Eigen::Vector2i> out;
    const int r = static_cast<int>(std::floor(radius));
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            if (dx * dx + dy * dy <= radius * radius) out.emplace_back(dx, dy);
        }
    }
    return out;
}

DepthMap render_depth(const PointCloud& cloud, const CameraIntrinsics& k, const CameraPose& pose,
                      double splat_radius) {
    if (cloud.empty()) throw std::invalid_argument("render_depth: empty point cloud");
    if (!(splat_radius >= 0.0)) throw std::invalid_argument("render_depth: negative splat radius");

    DepthMap depth(k.width, k.height);
    std::vector<double> zbuf(k.pixel_count(), std::numeric_limits<double>::infinity());
    const auto offsets = disc_offsets(splat_radius);
    for (const auto& p : cloud.positions) {
        const auto proj = project(p, k, pose);
        if (!proj) continue;
        const int px = proj->x();
        const int py = proj->y();
        for (const auto& o : offsets) {
            const int x = px + o.x();
            const int y = py + o.y();
            if (x < 0 || y < 0 || x >= k.width || y >= k.height) continue;
            auto& z = zbuf[depth.index(x, y)];
            if (proj->depth < z) z = proj->depth;
        }
    }
    for (std::size_t i = 0; i < zbuf.size(); ++i) {
        if (std::isfinite(zbuf[i])) depth.set(i, zbuf[i]);
    }
    return depth;
}

CameraPose sample_hemisphere_pose(double azimuth, double elevation, double radius,
                                  const Vec3& target) {
    if (!(radius > 0.0)) throw std::invalid_argument("hemisphere pose: radius must be positive");
    if (!(elevation >= 0.0 && elevation <= M_PI / 2 + 1e-12)) {
        throw std::invalid_argument("hemisphere pose: elevation outside [0, pi/2]");
    }
    const Vec3 dir{std::cos(elevation) * std::sin(azimuth), std::sin(elevation),
                   std::cos(elevation) * std::cos(azimuth)};
    const Vec3 eye = target + radius * dir;
    const Vec3 forward = (target - eye).normalized();
    Vec3 up = Vec3::UnitY();
    if (forward.cross(up).norm() < 1e-6) {
        // Looking straight down: image up points away from the azimuth direction.
        up = -Vec3{std::sin(azimuth), 0.0, std::cos(azimuth)};
    }
    return CameraPose::look_at(eye, target, up);
}

}  // namespace gsd
