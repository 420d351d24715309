// SPDX-License-Identifier: Apache-2.0
#include "gsd/noising.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace gsd {

namespace {

// Stream domains; keep distinct so no two uses of a key share a stream.
constexpr std::uint64_t kForegroundParent = 1;
constexpr std::uint64_t kForegroundChild = 2;
constexpr std::uint64_t kBackgroundParent = 3;
constexpr std::uint64_t kBackgroundChild = 4;
constexpr std::uint64_t kBackgroundScatter = 5;

void parent_values(std::uint64_t key, std::uint64_t domain, std::uint32_t id, int channels,
                   double* out) {
    KeyedNormalStream s(key, domain, id);
    for (int c = 0; c < channels; ++c) out[c] = s();
}

// Children of one parent: `factor` positions, then `factor` values per
// channel, all from the stream (key, domain, id). Values are child-major.
void upsample_into(std::uint64_t key, std::uint64_t domain, std::uint32_t id, const Vec3& parent,
                   const double* parent_value, int channels, int factor, double spatial_std,
                   Vec3* positions, double* values) {
    KeyedNormalStream s(key, domain, id);
    for (int i = 0; i < factor; ++i) {
        const double dx = s();
        const double dy = s();
        const double dz = s();
        positions[i] = parent + spatial_std * Vec3{dx, dy, dz};
    }
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(factor));
    for (int c = 0; c < channels; ++c) {
        double mean = 0.0;
        for (int i = 0; i < factor; ++i) {
            const double v = s();
            values[i * channels + c] = v;
            mean += v;
        }
        mean /= factor;
        const double shift = parent_value[c] * inv_sqrt_n;
        for (int i = 0; i < factor; ++i) values[i * channels + c] += shift - mean;
    }
}

// Values only: `factor` draws per channel, sample mean removed, parent/sqrt(N)
// added. Child-major.
void upsample_values(std::uint64_t key, std::uint64_t domain, std::uint32_t id,
                     const double* parent_value, int channels, int factor, double* values) {
    KeyedNormalStream s(key, domain, id);
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(factor));
    for (int c = 0; c < channels; ++c) {
        double mean = 0.0;
        for (int i = 0; i < factor; ++i) {
            const double v = s();
            values[i * channels + c] = v;
            mean += v;
        }
        mean /= factor;
        const double shift = parent_value[c] * inv_sqrt_n;
        for (int i = 0; i < factor; ++i) values[i * channels + c] += shift - mean;
    }
}

void upsample_parent(std::uint64_t key, std::uint64_t domain, std::uint32_t id, const Vec3& parent,
                     std::span<const double> parent_value, int factor, double spatial_std,
                     UpsampledNoiseField& out) {
    const std::size_t base = out.positions.size();
    const int channels = out.channels;
    out.positions.resize(base + factor);
    out.parent_index.resize(base + factor, id);
    out.values.resize((base + factor) * channels);
    upsample_into(key, domain, id, parent, parent_value.data(), channels, factor, spatial_std,
                  out.positions.data() + base, out.values.data() + base * channels);
}

NoiseField3D field_for_key(std::size_t count, int channels, std::uint64_t key) {
    NoiseField3D field;
    field.key = key;
    field.channels = channels;
    field.values.resize(count * channels);
    for (std::size_t k = 0; k < count; ++k) {
        parent_values(key, kForegroundParent, static_cast<std::uint32_t>(k), channels,
                      field.values.data() + k * channels);
    }
    return field;
}

NoiseMap2D integrate_assigned(const UpsampledNoiseField& field, std::span<const std::int32_t> assignment,
                     int height, int width) {
    NoiseMap2D map(height, width, field.channels);
    std::vector<std::uint32_t> counts(map.pixel_count(), 0);
    for (std::size_t i = 0; i < field.size(); ++i) {
        const auto p = assignment[i];
        if (p < 0) continue;
        ++counts[p];
        auto dst = map.px(static_cast<std::size_t>(p));
        const auto v = field.value(i);
        for (int c = 0; c < field.channels; ++c) dst[c] += v[c];
    }
    for (std::size_t p = 0; p < counts.size(); ++p) {
        if (counts[p] == 0) continue;
        map.coverage[p] = 1;
        const double scale = 1.0 / std::sqrt(static_cast<double>(counts[p]));
        for (auto& v : map.px(p)) v *= scale;
    }
    return map;
}

}  // namespace

void NoisingParams::validate() const {
    if (upsample_n < 1) throw std::invalid_argument("noising: upsample_n must be >= 1");
    if (upsample_std && !(*upsample_std >= 0.0)) {
        throw std::invalid_argument("noising: upsample_std must be >= 0");
    }
    if (depth_tolerance && !(*depth_tolerance > 0.0)) {
        throw std::invalid_argument("noising: depth_tolerance must be > 0");
    }
    if (!(sphere_radius_factor > 1.0)) {
        throw std::invalid_argument("noising: sphere_radius_factor must be > 1");
    }
    if (sphere_points && *sphere_points == 0) {
        throw std::invalid_argument("noising: sphere_points must be positive");
    }
    if (!(background_density > 0.0)) {
        throw std::invalid_argument("noising: background_density must be > 0");
    }
    if (!(splat_radius >= 0.0)) throw std::invalid_argument("noising: splat_radius must be >= 0");
    if (channels < 1) throw std::invalid_argument("noising: channels must be >= 1");
}

double median_nearest_neighbor_distance(const PointCloud& cloud) {
    const std::size_t n = cloud.size();
    if (n < 2) return 0.0;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const auto& pts = cloud.positions;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pts[a].x() < pts[b].x(); });
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& p = pts[order[i]];
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = pts[order[j]].x() - p.x();
            if (dx * dx >= b) break;
            b = std::min(b, (pts[order[j]] - p).squaredNorm());
        }
        for (std::size_t j = i; j-- > 0;) {
            const double dx = p.x() - pts[order[j]].x();
            if (dx * dx >= b) break;
            b = std::min(b, (pts[order[j]] - p).squaredNorm());
        }
        best[i] = b;
    }
    std::nth_element(best.begin(), best.begin() + n / 2, best.end());
    return std::sqrt(best[n / 2]);
}

NoiseField3D sample_noise_field(const PointCloud& cloud, int channels, Rng& rng) {
    if (cloud.empty()) throw std::invalid_argument("sample_noise_field: empty point cloud");
    if (channels < 1) throw std::invalid_argument("sample_noise_field: channels must be >= 1");
    return field_for_key(cloud.size(), channels, rng.next_key());
}

UpsampledNoiseField conditional_upsample(const NoiseField3D& field, const PointCloud& cloud,
                                         int factor, double spatial_std) {
    if (factor < 1) throw std::invalid_argument("conditional_upsample: factor must be >= 1");
    if (!(spatial_std >= 0.0)) throw std::invalid_argument("conditional_upsample: negative std");
    if (field.size() != cloud.size()) {
        throw std::invalid_argument("conditional_upsample: field does not match cloud");
    }
    UpsampledNoiseField out;
    out.factor = factor;
    out.channels = field.channels;
    out.positions.reserve(cloud.size() * factor);
    out.parent_index.reserve(cloud.size() * factor);
    out.values.reserve(cloud.size() * factor * field.channels);
    for (std::size_t k = 0; k < cloud.size(); ++k) {
        upsample_parent(field.key, kForegroundChild, static_cast<std::uint32_t>(k), cloud.positions[k],
                        field.value(k), factor, spatial_std, out);
    }
    return out;
}

std::vector<std::int32_t> integral_assignment(const UpsampledNoiseField& field,
                                              const CameraIntrinsics& k, const CameraPose& pose,
                                              const DepthMap& depth, double depth_tolerance) {
    if (!depth.matches(k)) throw std::invalid_argument("discrete_noise_integral: depth size mismatch");
    if (!(depth_tolerance > 0.0)) {
        throw std::invalid_argument("discrete_noise_integral: depth tolerance must be > 0");
    }
    std::vector<std::int32_t> out(field.size(), -1);
    for (std::size_t i = 0; i < field.size(); ++i) {
        const auto proj = project(field.positions[i], k, pose);
        if (!proj) continue;
        const std::size_t p = depth.index(proj->x(), proj->y());
        if (!depth.valid(p)) continue;
        if (std::abs(proj->depth - depth.at(p)) > depth_tolerance) continue;
        out[i] = static_cast<std::int32_t>(p);
    }
    return out;
}

NoiseMap2D discrete_noise_integral(const UpsampledNoiseField& field, const CameraIntrinsics& k,
                                   const CameraPose& pose, const DepthMap& depth,
                                   double depth_tolerance) {
    const auto assignment = integral_assignment(field, k, pose, depth, depth_tolerance);
    return integrate_assigned(field, assignment, k.height, k.width);
}

NoiseMap2D composite_noise(const NoiseMap2D& foreground, const NoiseMap2D& background) {
    require_same_shape(foreground, background, "composite_noise");
    NoiseMap2D out = background;
    for (std::size_t p = 0; p < out.pixel_count(); ++p) {
        if (!foreground.covered(p)) {
            if (!background.covered(p)) {
                throw std::invalid_argument("composite_noise: pixel covered by neither map");
            }
            continue;
        }
        out.coverage[p] = 1;
        const auto src = foreground.px(p);
        std::copy(src.begin(), src.end(), out.px(p).begin());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Background sphere

double min_background_pixel_area(const Vec3& center, double radius, std::span<const Camera> cameras) {
    double min_area = std::numeric_limits<double>::infinity();
    std::size_t unreachable = 0;
    for (const auto& cam : cameras) {
        const auto& k = cam.intrinsics;
        const Vec3 eye = cam.pose.center();
        const Vec3 oc = eye - center;
        for (int y = 0; y < k.height; ++y) {
            for (int x = 0; x < k.width; ++x) {
                const Vec3 dir_cam{(x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0};
                const double cos_axis = 1.0 / dir_cam.norm();
                const Vec3 d = (cam.pose.rotation.transpose() * dir_cam).normalized();
                const double b = d.dot(oc);
                const double c = oc.squaredNorm() - radius * radius;
                const double disc = b * b - c;
                if (disc < 0.0) {
                    ++unreachable;
                    continue;
                }
                const double s = -b + std::sqrt(disc);
                const Vec3 hit = eye + s * d;
                if (s <= 0.0 || (hit - center).dot(oc) > 0.0) {
                    ++unreachable;
                    continue;
                }
                const double cos_inc = std::abs(d.dot((hit - center) / radius));
                const double solid_angle = cos_axis * cos_axis * cos_axis / (k.fx * k.fy);
                min_area = std::min(min_area, solid_angle * s * s / std::max(cos_inc, 1e-6));
            }
        }
    }
    if (unreachable > 0) {
        throw CoverageError("background sphere: " + std::to_string(unreachable) +
                                " pixels see no back-facing sphere surface",
                            unreachable);
    }
    return min_area;
}

BackgroundSphere::BackgroundSphere(const SceneBounds& scene, const NoisingParams& params,
                                   std::span<const Camera> cameras) {
    params.validate();
    if (cameras.empty()) throw std::invalid_argument("background sphere: no cameras");
    center_ = scene.center;
    radius_ = params.sphere_radius_factor * std::max(scene.radius, 1e-6);
    factor_ = params.upsample_n;
    const double area = 4.0 * M_PI * radius_ * radius_;
    if (params.sphere_points) {
        lattice_size_ = *params.sphere_points;
    } else {
        const double pixel_area = min_background_pixel_area(center_, radius_, cameras);
        lattice_size_ = static_cast<std::size_t>(
            std::ceil(params.background_density * area / (params.upsample_n * pixel_area)));
    }
    if (lattice_size_ > std::numeric_limits<std::uint32_t>::max()) {
        throw std::invalid_argument("background sphere: lattice too large");
    }
    upsample_std_ = 0.5 * std::sqrt(area / static_cast<double>(lattice_size_));

    // Lattice points whose children could land in some frustum. Scatter
    // beyond 8 stds is treated as impossible.
    const double reach = 8.0 * upsample_std_;
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    const double n = static_cast<double>(lattice_size_);
    for (std::size_t i = 0; i < lattice_size_; ++i) {
        const double y = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
        const double phi = golden * static_cast<double>(i);
        const Vec3 p = center_ + radius_ * Vec3{r * std::cos(phi), y, r * std::sin(phi)};
        for (const auto& cam : cameras) {
            const Vec3 oc = cam.pose.center() - center_;
            if ((p - center_).dot(oc) > reach * oc.norm()) continue;
            const Vec3 c = cam.pose.to_camera(p);
            if (c.z() <= reach) continue;
            const auto& k = cam.intrinsics;
            const double margin = reach * std::max(k.fx, k.fy) / (c.z() - reach) + 1.0;
            const double u = k.fx * c.x() / c.z() + k.cx;
            const double v = k.fy * c.y() / c.z() + k.cy;
            if (u < -margin || v < -margin || u > k.width - 1 + margin || v > k.height - 1 + margin) {
                continue;
            }
            indices_.push_back(static_cast<std::uint32_t>(i));
            positions_.push_back(p);
            break;
        }
    }

    // Child scatter is drawn once per sphere; fields only redraw values.
    const std::uint64_t scatter_key = mix_key(params.seed, kBackgroundScatter);
    children_.resize(indices_.size() * factor_);
    for (std::size_t a = 0; a < indices_.size(); ++a) {
        KeyedNormalStream s(scatter_key, kBackgroundScatter, indices_[a]);
        for (int c = 0; c < factor_; ++c) {
            const double dx = s();
            const double dy = s();
            const double dz = s();
            children_[a * factor_ + c] = positions_[a] + upsample_std_ * Vec3{dx, dy, dz};
        }
    }

    std::size_t uncovered = 0;
    for (const auto& cam : cameras) {
        const auto& k = cam.intrinsics;
        const Vec3 oc = cam.pose.center() - center_;
        std::vector<std::pair<std::uint32_t, std::uint32_t>> hits;  // (pixel, child)
        for (std::size_t i = 0; i < children_.size(); ++i) {
            if ((children_[i] - center_).dot(oc) > 0.0) continue;
            const auto proj = project(children_[i], k, cam.pose);
            if (!proj) continue;
            hits.emplace_back(static_cast<std::uint32_t>(proj->y() * k.width + proj->x()),
                              static_cast<std::uint32_t>(i));
        }
        std::stable_sort(hits.begin(), hits.end(),
                         [](const auto& x, const auto& y) { return x.first < y.first; });
        PixelChildren pc;
        pc.offsets.assign(k.pixel_count() + 1, 0);
        pc.children.reserve(hits.size());
        std::size_t e = 0;
        for (std::size_t px = 0; px < k.pixel_count(); ++px) {
            pc.offsets[px] = static_cast<std::uint32_t>(pc.children.size());
            while (e < hits.size() && hits[e].first == px) pc.children.push_back(hits[e++].second);
            uncovered += pc.children.size() == pc.offsets[px];
        }
        pc.offsets[k.pixel_count()] = static_cast<std::uint32_t>(pc.children.size());
        per_camera_.push_back(std::move(pc));
    }
    cameras_.assign(cameras.begin(), cameras.end());
    if (uncovered > 0) {
        throw CoverageError("background sphere too sparse: " + std::to_string(uncovered) +
                                " uncovered pixels",
                            uncovered);
    }
}

void BackgroundSphere::generate(const BackgroundField& f, std::size_t local) const {
    double parent[16];
    std::vector<double> wide;
    double* pv = parent;
    if (f.channels_ > 16) {
        wide.resize(static_cast<std::size_t>(f.channels_));
        pv = wide.data();
    }
    parent_values(f.key_, kBackgroundParent, indices_[local], f.channels_, pv);
    upsample_values(f.key_, kBackgroundChild, indices_[local], pv, f.channels_, factor_,
                    &f.values_[local * factor_ * f.channels_]);
    f.ready_[local] = 1;
}

BackgroundField BackgroundSphere::field(std::uint64_t key, int channels) const {
    if (channels < 1) throw std::invalid_argument("background field: channels must be >= 1");
    BackgroundField f;
    f.key_ = key;
    f.channels_ = channels;
    f.values_.resize(children_.size() * channels);
    f.ready_.assign(indices_.size(), 0);
    return f;
}

UpsampledNoiseField BackgroundSphere::sample(std::uint64_t key, int channels) const {
    const BackgroundField f = field(key, channels);
    for (std::size_t a = 0; a < indices_.size(); ++a) generate(f, a);
    UpsampledNoiseField out;
    out.factor = factor_;
    out.channels = channels;
    out.positions = children_;
    out.values = f.values_;
    out.parent_index.resize(children_.size());
    for (std::size_t i = 0; i < children_.size(); ++i) out.parent_index[i] = indices_[i / factor_];
    return out;
}

NoiseMap2D BackgroundSphere::integrate(const UpsampledNoiseField& field, const Camera& camera) const {
    const auto& k = camera.intrinsics;
    const Vec3 oc = camera.pose.center() - center_;
    std::vector<std::int32_t> assignment(field.size(), -1);
    for (std::size_t i = 0; i < field.size(); ++i) {
        if ((field.positions[i] - center_).dot(oc) > 0.0) continue;
        const auto proj = project(field.positions[i], k, camera.pose);
        if (proj) assignment[i] = proj->y() * k.width + proj->x();
    }
    auto map = integrate_assigned(field, assignment, k.height, k.width);
    const std::size_t uncovered = map.pixel_count() - map.covered_count();
    if (uncovered > 0) {
        throw CoverageError("background sphere too sparse: " + std::to_string(uncovered) +
                                " uncovered pixels",
                            uncovered);
    }
    return map;
}

NoiseMap2D BackgroundSphere::integrate(const BackgroundField& field, std::size_t camera,
                                       std::span<const std::uint8_t> needed) const {
    const auto& k = cameras_.at(camera).intrinsics;
    const PixelChildren& pc = per_camera_[camera];
    if (!needed.empty() && needed.size() != k.pixel_count()) {
        throw std::invalid_argument("background integrate: mask size mismatch");
    }
    if (field.ready_.size() != indices_.size()) {
        throw std::invalid_argument("background integrate: field belongs to another sphere");
    }
    const int channels = field.channels_;
    NoiseMap2D map(k.height, k.width, channels);
    for (std::size_t p = 0; p < k.pixel_count(); ++p) {
        if (!needed.empty() && !needed[p]) continue;
        const std::uint32_t b = pc.offsets[p], e = pc.offsets[p + 1];
        auto dst = map.px(p);
        for (std::uint32_t j = b; j < e; ++j) {
            const std::size_t child = pc.children[j];
            const std::size_t parent = child / factor_;
            if (!field.ready_[parent]) generate(field, parent);
            for (int c = 0; c < channels; ++c) dst[c] += field.values_[child * channels + c];
        }
        const double scale = 1.0 / std::sqrt(static_cast<double>(e - b));
        for (auto& v : dst) v *= scale;
        map.coverage[p] = 1;
    }
    return map;
}

// ---------------------------------------------------------------------------
// Full pipeline

namespace {

double resolve_upsample_std(const PointCloud& cloud, const NoisingParams& params) {
    if (params.upsample_std) return *params.upsample_std;
    return 0.5 * median_nearest_neighbor_distance(cloud);
}

double resolve_depth_tolerance(double upsample_std, const NoisingParams& params) {
    const double tau = params.depth_tolerance ? *params.depth_tolerance : 3.0 * upsample_std;
    if (!(tau > 0.0)) throw std::invalid_argument("noising: depth tolerance resolves to zero");
    return tau;
}

}  // namespace

ConsistentNoiseSampler::ConsistentNoiseSampler(PointCloud cloud, std::vector<Camera> cameras,
                                               NoisingParams params)
    : cloud_(std::move(cloud)),
      cameras_(std::move(cameras)),
      params_(params),
      upsample_std_(resolve_upsample_std(cloud_, params_)),
      depth_tolerance_(resolve_depth_tolerance(upsample_std_, params_)),
      background_(scene_bounds(cloud_), params_, cameras_) {
    for (const auto& cam : cameras_) {
        cam.intrinsics.validate();
        cam.pose.validate();
        depths_.push_back(render_depth(cloud_, cam.intrinsics, cam.pose, params_.splat_radius));
    }
}

ConsistentNoiseSampler::Field ConsistentNoiseSampler::sample_field(std::uint64_t key) const {
    Field f;
    f.key = key;
    const auto parents = field_for_key(cloud_.size(), params_.channels, key);
    f.foreground = conditional_upsample(parents, cloud_, params_.upsample_n, upsample_std_);
    f.background = background_.field(key, params_.channels);
    return f;
}

NoiseMap2D ConsistentNoiseSampler::foreground_map(const Field& field, std::size_t camera) const {
    const auto& cam = cameras_.at(camera);
    return discrete_noise_integral(field.foreground, cam.intrinsics, cam.pose, depths_[camera],
                                   depth_tolerance_);
}

NoiseMap2D ConsistentNoiseSampler::background_map(const Field& field, std::size_t camera) const {
    return background_.integrate(field.background, camera);
}

NoiseMap2D ConsistentNoiseSampler::render(const Field& field, std::size_t camera) const {
    const NoiseMap2D fg = foreground_map(field, camera);
    std::vector<std::uint8_t> needed(fg.pixel_count());
    for (std::size_t p = 0; p < needed.size(); ++p) needed[p] = !fg.covered(p);
    return composite_noise(fg, background_.integrate(field.background, camera, needed));
}

std::vector<NoiseMap2D> ConsistentNoiseSampler::sample(Rng& rng) const {
    const auto field = sample_field(rng);
    std::vector<NoiseMap2D> maps;
    maps.reserve(cameras_.size());
    for (std::size_t i = 0; i < cameras_.size(); ++i) maps.push_back(render(field, i));
    return maps;
}

NoiseMap2D spherical_background_noise(const SceneBounds& scene, const NoisingParams& params,
                                      const CameraIntrinsics& intrinsics, const CameraPose& pose,
                                      Rng& rng) {
    const Camera cam{intrinsics, pose};
    const BackgroundSphere sphere(scene, params, std::span<const Camera>(&cam, 1));
    return sphere.integrate(sphere.field(rng.next_key(), params.channels), 0);
}

NoiseMap2D consistent_noise_map(const PointCloud& cloud, const CameraIntrinsics& intrinsics,
                                const CameraPose& pose, const NoisingParams& params, Rng& rng) {
    const ConsistentNoiseSampler sampler(cloud, {Camera{intrinsics, pose}}, params);
    return sampler.sample(rng).front();
}

NoiseMap2D iid_noise_map(int height, int width, int channels, Rng& rng) {
    NoiseMap2D map(height, width, channels, true);
    for (auto& v : map.values) v = rng.normal();
    return map;
}

}  // namespace gsd
