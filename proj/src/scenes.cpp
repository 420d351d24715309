// SPDX-License-Identifier: Apache-2.0
#include "gsd/scenes.hpp"

#include <cmath>
#include <stdexcept>

namespace gsd {

PointCloud fibonacci_sphere(std::size_t count, const Vec3& center, double radius) {
    PointCloud cloud;
    cloud.positions.reserve(count);
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < count; ++i) {
        const double y = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
        const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
        const double phi = golden * static_cast<double>(i);
        cloud.positions.push_back(center + radius * Vec3{r * std::cos(phi), y, r * std::sin(phi)});
    }
    return cloud;
}

PointCloud make_sphere_scene(std::size_t count, double radius) {
    return fibonacci_sphere(count, Vec3::Zero(), radius);
}

namespace {

void add_square(PointCloud& cloud, double half, double spacing, double z) {
    const int n = static_cast<int>(std::floor(2.0 * half / spacing + 1e-9));
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) {
            cloud.positions.emplace_back(-half + i * spacing, -half + j * spacing, z);
        }
    }
}

}  // namespace

PointCloud make_plane_scene(double half_extent, double spacing, double z) {
    if (!(spacing > 0.0) || !(half_extent > 0.0)) {
        throw std::invalid_argument("plane scene: extent and spacing must be positive");
    }
    PointCloud cloud;
    add_square(cloud, half_extent, spacing, z);
    return cloud;
}

PointCloud make_occluder_scene(const OccluderSceneSpec& spec) {
    PointCloud cloud;
    add_square(cloud, spec.plane_half_extent, spec.plane_spacing, 0.0);
    add_square(cloud, spec.occluder_half_size, spec.occluder_spacing, spec.occluder_z);
    return cloud;
}

PointCloud builtin_scene(const std::string& name) {
    if (name == "sphere") return make_sphere_scene();
    if (name == "plane") return make_plane_scene();
    if (name == "occluder") return make_occluder_scene();
    throw std::invalid_argument("unknown built-in scene '" + name + "'");
}

}  // namespace gsd
