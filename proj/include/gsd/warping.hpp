// SPDX-License-Identifier: Apache-2.0
//
// Depth-based correspondence between two views sharing one set of
// intrinsics. A warp field computed from view i's depth maps every pixel of
// view i to a location in view j; inverse warping then pulls view-j data back
// onto view i's grid.
#pragma once

#include "gsd/geometry.hpp"
#include "gsd/raster.hpp"

#include <cstdint>
#include <vector>

namespace gsd {

struct WarpField {
    int width = 0;
    int height = 0;
    std::vector<Vec2> targets;             // continuous pixel coordinates in the source view
    std::vector<double> reprojected_depth;  // camera-space depth in the source view
    std::vector<std::uint8_t> valid;

    std::size_t pixel_count() const { return valid.size(); }
    bool is_valid(std::size_t p) const { return valid[p] != 0; }
    std::size_t valid_count() const;
};

/// Unprojects every valid pixel of `depth_i`, moves it into view j and
/// reprojects it. Invalid where depth is missing, behind view j, or where the
/// nearest target pixel falls outside the image.
WarpField compute_warp(const DepthMap& depth_i, const CameraPose& pose_i, const CameraPose& pose_j,
                       const CameraIntrinsics& intrinsics);

/// Pixel homography from view i to view j induced by the world plane
/// normal . X = offset. Throws when the plane passes through camera i.
Mat3 plane_homography(const CameraIntrinsics& intrinsics, const CameraPose& pose_i,
                      const CameraPose& pose_j, const Vec3& normal, double offset);

/// Warp that maps every pixel to itself (all valid, reprojected depth 1).
WarpField identity_warp(int width, int height);

void inverse_warp_nearest(const Raster& source, const WarpField& warp, Raster& out);
void inverse_warp_bilinear(const Raster& source, const WarpField& warp, Raster& out);

/// Bilinear sample at a continuous coordinate, neighbours clamped to the image.
void sample_bilinear(const Raster& source, const Vec2& at, std::span<double> out);

/// Nearest sampling: out(p) = source(round(target(p))); invalid pixels are
/// zero and uncovered. The same target is used for every channel.
template <RasterType Map>
Map inverse_warp(const Map& source, const WarpField& warp) {
    Map out(warp.height, warp.width, source.channels);
    inverse_warp_nearest(source, warp, out);
    return out;
}

/// Bilinear variant; used on the differentiable loss path and for the
/// bilinear-warp noise baseline.
template <RasterType Map>
Map inverse_warp_smooth(const Map& source, const WarpField& warp) {
    Map out(warp.height, warp.width, source.channels);
    inverse_warp_bilinear(source, warp, out);
    return out;
}

struct OcclusionMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> weights;

    std::size_t pixel_count() const { return weights.size(); }
    std::size_t count() const;
    bool operator==(const OcclusionMask&) const = default;
};

/// weight(p) = 1 iff the warp is valid at p, depth_j is valid at the target
/// pixel and |reprojected_depth - depth_j| <= delta * depth_j.
OcclusionMask occlusion_mask(const WarpField& warp, const DepthMap& depth_j, double delta = 0.05);

}  // namespace gsd
