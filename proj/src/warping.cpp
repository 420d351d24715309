// SPDX-License-Identifier: Apache-2.0
#include "gsd/warping.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gsd {

std::size_t WarpField::valid_count() const {
    std::size_t n = 0;
    for (auto v : valid) n += v;
    return n;
}

WarpField compute_warp(const DepthMap& depth_i, const CameraPose& pose_i, const CameraPose& pose_j,
                       const CameraIntrinsics& k) {
    if (!depth_i.matches(k)) throw std::invalid_argument("compute_warp: depth/intrinsics mismatch");
    WarpField w;
    w.width = k.width;
    w.height = k.height;
    const std::size_t n = k.pixel_count();
    w.targets.assign(n, Vec2::Zero());
    w.reprojected_depth.assign(n, 0.0);
    w.valid.assign(n, 0);

    // Relative transform i -> j in camera coordinates.
    const Mat3 rel_r = pose_j.rotation * pose_i.rotation.transpose();
    const Vec3 rel_t = pose_j.translation - rel_r * pose_i.translation;

    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            const std::size_t p = depth_i.index(x, y);
            if (!depth_i.valid(p)) continue;
            const double d = depth_i.at(p);
            const Vec3 cam_i{(x - k.cx) / k.fx * d, (y - k.cy) / k.fy * d, d};
            const Vec3 cam_j = rel_r * cam_i + rel_t;
            if (!(cam_j.z() > 0.0)) continue;
            const Vec2 t{k.fx * cam_j.x() / cam_j.z() + k.cx, k.fy * cam_j.y() / cam_j.z() + k.cy};
            const int tx = nearest_pixel(t.x());
            const int ty = nearest_pixel(t.y());
            if (tx < 0 || ty < 0 || tx >= k.width || ty >= k.height) continue;
            w.targets[p] = t;
            w.reprojected_depth[p] = cam_j.z();
            w.valid[p] = 1;
        }
    }
    return w;
}

Mat3 plane_homography(const CameraIntrinsics& intrinsics, const CameraPose& pose_i,
                      const CameraPose& pose_j, const Vec3& normal, double offset) {
    // In camera i the plane is n_i . X = d_i; X_j = (R + t n_i^T / d_i) X_i.
    const Vec3 n_i = pose_i.rotation * normal;
    const double d_i = offset + n_i.dot(pose_i.translation);
    if (std::abs(d_i) < 1e-12) throw std::invalid_argument("plane_homography: plane contains camera i");
    const Mat3 r = pose_j.rotation * pose_i.rotation.transpose();
    const Vec3 t = pose_j.translation - r * pose_i.translation;
    const Mat3 k = intrinsics.matrix();
    return k * (r + t * n_i.transpose() / d_i) * k.inverse();
}

WarpField identity_warp(int width, int height) {
    WarpField w;
    w.width = width;
    w.height = height;
    const std::size_t n = static_cast<std::size_t>(width) * height;
    w.targets.resize(n);
    w.reprojected_depth.assign(n, 1.0);
    w.valid.assign(n, 1);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) w.targets[static_cast<std::size_t>(y) * width + x] = {x, y};
    }
    return w;
}

void inverse_warp_nearest(const Raster& source, const WarpField& warp, Raster& out) {
    if (out.width != warp.width || out.height != warp.height || out.channels != source.channels) {
        throw std::invalid_argument("inverse_warp: output shape mismatch");
    }
    std::fill(out.values.begin(), out.values.end(), 0.0);
    std::fill(out.coverage.begin(), out.coverage.end(), 0);
    for (std::size_t p = 0; p < warp.pixel_count(); ++p) {
        if (!warp.is_valid(p)) continue;
        const int sx = nearest_pixel(warp.targets[p].x());
        const int sy = nearest_pixel(warp.targets[p].y());
        if (!source.in_bounds(sx, sy)) continue;
        const std::size_t q = source.pixel(sx, sy);
        if (!source.covered(q)) continue;
        const auto src = source.px(q);
        std::copy(src.begin(), src.end(), out.px(p).begin());
        out.coverage[p] = 1;
    }
}

void sample_bilinear(const Raster& source, const Vec2& at, std::span<double> out) {
    const double fx = std::floor(at.x());
    const double fy = std::floor(at.y());
    const double ax = at.x() - fx;
    const double ay = at.y() - fy;
    auto clamp_x = [&](double v) { return std::clamp(static_cast<int>(v), 0, source.width - 1); };
    auto clamp_y = [&](double v) { return std::clamp(static_cast<int>(v), 0, source.height - 1); };
    const int x0 = clamp_x(fx);
    const int x1 = clamp_x(fx + 1);
    const int y0 = clamp_y(fy);
    const int y1 = clamp_y(fy + 1);
    const double w00 = (1 - ax) * (1 - ay);
    const double w10 = ax * (1 - ay);
    const double w01 = (1 - ax) * ay;
    const double w11 = ax * ay;
    for (int c = 0; c < source.channels; ++c) {
        out[c] = w00 * source.at(x0, y0, c) + w10 * source.at(x1, y0, c) +
                 w01 * source.at(x0, y1, c) + w11 * source.at(x1, y1, c);
    }
}

void inverse_warp_bilinear(const Raster& source, const WarpField& warp, Raster& out) {
    if (out.width != warp.width || out.height != warp.height || out.channels != source.channels) {
        throw std::invalid_argument("inverse_warp: output shape mismatch");
    }
    std::fill(out.values.begin(), out.values.end(), 0.0);
    std::fill(out.coverage.begin(), out.coverage.end(), 0);
    for (std::size_t p = 0; p < warp.pixel_count(); ++p) {
        if (!warp.is_valid(p)) continue;
        const int sx = nearest_pixel(warp.targets[p].x());
        const int sy = nearest_pixel(warp.targets[p].y());
        if (!source.in_bounds(sx, sy) || !source.covered(source.pixel(sx, sy))) continue;
        sample_bilinear(source, warp.targets[p], out.px(p));
        out.coverage[p] = 1;
    }
}

std::size_t OcclusionMask::count() const {
    std::size_t n = 0;
    for (auto v : weights) n += v;
    return n;
}

OcclusionMask occlusion_mask(const WarpField& warp, const DepthMap& depth_j, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("occlusion_mask: delta must be > 0");
    if (depth_j.width() != warp.width || depth_j.height() != warp.height) {
        throw std::invalid_argument("occlusion_mask: dimension mismatch");
    }
    OcclusionMask mask;
    mask.width = warp.width;
    mask.height = warp.height;
    mask.weights.assign(warp.pixel_count(), 0);
    for (std::size_t p = 0; p < warp.pixel_count(); ++p) {
        if (!warp.is_valid(p)) continue;
        const int tx = nearest_pixel(warp.targets[p].x());
        const int ty = nearest_pixel(warp.targets[p].y());
        const std::size_t q = depth_j.index(tx, ty);
        if (!depth_j.valid(q)) continue;
        const double dj = depth_j.at(q);
        if (std::abs(warp.reprojected_depth[p] - dj) <= delta * dj) mask.weights[p] = 1;
    }
    return mask;
}

}  // namespace gsd
