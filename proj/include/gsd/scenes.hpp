// SPDX-License-Identifier: Apache-2.0
//
// Built-in synthetic scenes. All of them face +Z, so a hemisphere camera at
// azimuth 0 and elevation 0 sees them head-on.
#pragma once

#include "gsd/geometry.hpp"

#include <string>

namespace gsd {

/// Fibonacci lattice on a sphere; near-uniform spacing, deterministic.
PointCloud fibonacci_sphere(std::size_t count, const Vec3& center, double radius);

PointCloud make_sphere_scene(std::size_t count = 10000, double radius = 1.0);

/// Square grid on the plane z = `z`, spanning [-half_extent, half_extent]^2.
PointCloud make_plane_scene(double half_extent = 1.5, double spacing = 0.02, double z = 0.0);

struct OccluderSceneSpec {
    double plane_half_extent = 3.0;
    double plane_spacing = 0.012;
    double occluder_half_size = 0.35;
    double occluder_z = 1.25;
    double occluder_spacing = 0.006;
};

/// Background plane at z = 0 with a small square occluder in front of it.
PointCloud make_occluder_scene(const OccluderSceneSpec& spec = {});

/// "sphere", "plane" or "occluder"; throws std::invalid_argument otherwise.
PointCloud builtin_scene(const std::string& name);

}  // namespace gsd
