// SPDX-License-Identifier: Apache-2.0
#include "gsd/score.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gsd {

NoiseSchedule NoiseSchedule::log_uniform(double lo, double hi, int levels) {
    if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi)) {
        throw std::invalid_argument("noise schedule: need 0 < sigma_min <= sigma_max");
    }
    if (levels < 1) throw std::invalid_argument("noise schedule: levels must be >= 1");
    NoiseSchedule s;
    s.sigmas.resize(static_cast<std::size_t>(levels));
    const double a = std::log(lo);
    const double b = std::log(hi);
    for (int i = 0; i < levels; ++i) {
        const double t = levels == 1 ? 0.0 : static_cast<double>(i) / (levels - 1);
        s.sigmas[static_cast<std::size_t>(i)] = std::exp(a + t * (b - a));
    }
    return s;
}

void NoiseSchedule::validate() const {
    if (sigmas.empty()) throw std::invalid_argument("noise schedule is empty");
    for (double s : sigmas) {
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw std::invalid_argument("noise schedule: sigmas must be positive and finite");
        }
    }
}

double NoiseSchedule::sample(Rng& rng) const {
    validate();
    return sigmas[rng.index(sigmas.size())];
}

AnalyticGaussianDenoiser::AnalyticGaussianDenoiser(std::vector<Image> targets, double prior_std)
    : targets_(std::move(targets)), prior_std_(prior_std) {
    if (!(prior_std > 0.0) || !std::isfinite(prior_std)) {
        throw std::invalid_argument("analytic denoiser: prior_std must be positive");
    }
}

Image AnalyticGaussianDenoiser::denoise(const Image& noisy, double sigma, std::size_t view) const {
    const Image& t = target(view);
    require_same_shape(noisy, t, "analytic denoiser");
    const double s2 = prior_std_ * prior_std_;
    const double gain = sigma * sigma / (s2 + sigma * sigma);
    Image out = noisy;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] += gain * (t.values[i] - noisy.values[i]);
    }
    return out;
}

GradientMap AnalyticGaussianDenoiser::expected_gradient(const Image& z, double sigma,
                                                        std::size_t view) const {
    const Image& t = target(view);
    require_same_shape(z, t, "analytic denoiser");
    GradientMap g(z.height, z.width, z.channels);
    g.coverage = z.coverage;
    const double inv = 1.0 / (prior_std_ * prior_std_ + sigma * sigma);
    for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = (t.values[i] - z.values[i]) * inv;
    return g;
}

GradientMap gradient_map(const Image& z, const NoiseMap2D& noise, double sigma,
                         const Denoiser& denoiser, std::size_t view) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("gradient_map: sigma must be positive");
    }
    require_same_shape(z, noise, "gradient_map");
    Image noisy = z;
    for (std::size_t i = 0; i < noisy.values.size(); ++i) noisy.values[i] += sigma * noise.values[i];
    const Image denoised = denoiser.denoise(noisy, sigma, view);
    require_same_shape(denoised, z, "gradient_map: denoiser output");
    GradientMap g(z.height, z.width, z.channels);
    g.coverage = z.coverage;
    const double inv = 1.0 / (sigma * sigma);
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        g.values[i] = (denoised.values[i] - noisy.values[i]) * inv;
    }
    return g;
}

PaasEstimate paas_score(const Image& z, double sigma, const Denoiser& denoiser, int num_samples,
                        Rng& rng, std::size_t view) {
    if (num_samples < 1) throw std::invalid_argument("paas_score: need at least one sample");
    PaasEstimate est{GradientMap(z.height, z.width, z.channels),
                     GradientMap(z.height, z.width, z.channels), num_samples};
    est.mean.coverage = z.coverage;
    est.standard_error.coverage = z.coverage;
    std::vector<double> m2(z.values.size(), 0.0);
    for (int s = 1; s <= num_samples; ++s) {
        const NoiseMap2D n = iid_noise_map(z.height, z.width, z.channels, rng);
        const GradientMap g = gradient_map(z, n, sigma, denoiser, view);
        for (std::size_t i = 0; i < g.values.size(); ++i) {
            const double d = g.values[i] - est.mean.values[i];
            est.mean.values[i] += d / s;
            m2[i] += d * (g.values[i] - est.mean.values[i]);
        }
    }
    for (std::size_t i = 0; i < m2.size(); ++i) {
        est.standard_error.values[i] =
            num_samples > 1 ? std::sqrt(m2[i] / (num_samples - 1) / num_samples) : 0.0;
    }
    return est;
}

void ColorPointCloud::validate() const {
    if (positions.empty()) throw std::invalid_argument("color cloud is empty");
    if (colors.size() != positions.size() || opacity.size() != positions.size()) {
        throw std::invalid_argument("color cloud: attribute count mismatch");
    }
    for (std::size_t k = 0; k < size(); ++k) {
        if (!positions[k].allFinite() || !colors[k].allFinite()) {
            throw std::invalid_argument("color cloud: non-finite attribute");
        }
        if (!(opacity[k] >= 0.0) || !std::isfinite(opacity[k])) {
            throw std::invalid_argument("color cloud: opacity must be finite and >= 0");
        }
    }
}

ColorPointCloud make_color_cloud(const PointCloud& cloud, const Vec3& color, double opacity) {
    ColorPointCloud rep;
    rep.positions = cloud.positions;
    rep.colors.assign(cloud.size(), color);
    rep.opacity.assign(cloud.size(), opacity);
    return rep;
}

ColorRender render_color(const ColorPointCloud& rep, const CameraIntrinsics& k,
                         const CameraPose& pose, const RenderSettings& settings) {
    rep.validate();
    if (!(settings.depth_tolerance >= 0.0)) {
        throw std::invalid_argument("render_color: depth_tolerance must be >= 0");
    }
    ColorRender out{Image(k.height, k.width, 3),
                    render_depth(rep.geometry(), k, pose, settings.splat_radius), {}};
    const auto offsets = disc_offsets(settings.splat_radius);

    struct Entry {
        std::uint32_t pixel, point;
        double alpha;
    };
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < rep.size(); ++i) {
        if (rep.opacity[i] <= 0.0) continue;
        const auto proj = project(rep.positions[i], k, pose);
        if (!proj) continue;
        for (const auto& o : offsets) {
            const int x = proj->x() + o.x();
            const int y = proj->y() + o.y();
            if (x < 0 || y < 0 || x >= k.width || y >= k.height) continue;
            const std::size_t p = out.depth.index(x, y);
            if (!out.depth.valid(p)) continue;
            if (proj->depth - out.depth.at(p) > settings.depth_tolerance) continue;
            entries.push_back({static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(i),
                               rep.opacity[i]});
        }
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.pixel < b.pixel; });

    RenderWeights& w = out.weights;
    w.offsets.assign(k.pixel_count() + 1, 0);
    w.points.reserve(entries.size());
    w.weights.reserve(entries.size());
    std::size_t e = 0;
    for (std::size_t p = 0; p < k.pixel_count(); ++p) {
        w.offsets[p] = static_cast<std::uint32_t>(w.points.size());
        const std::size_t begin = e;
        double total = 0.0;
        while (e < entries.size() && entries[e].pixel == p) total += entries[e++].alpha;
        for (std::size_t j = begin; j < e; ++j) {
            w.points.push_back(entries[j].point);
            w.weights.push_back(entries[j].alpha / total);
        }
    }
    w.offsets[k.pixel_count()] = static_cast<std::uint32_t>(w.points.size());
    out.image = shade(w, rep.colors, k.height, k.width);
    return out;
}

Image shade(const RenderWeights& w, const std::vector<Vec3>& colors, int height, int width) {
    Image img(height, width, 3);
    if (w.pixel_count() != img.pixel_count()) throw std::invalid_argument("shade: size mismatch");
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        const std::uint32_t b = w.offsets[p], e = w.offsets[p + 1];
        if (b == e) continue;
        Vec3 c = Vec3::Zero();
        for (std::uint32_t j = b; j < e; ++j) c += w.weights[j] * colors.at(w.points[j]);
        auto px = img.px(p);
        px[0] = c.x();
        px[1] = c.y();
        px[2] = c.z();
        img.coverage[p] = 1;
    }
    return img;
}

std::vector<NoiseMap2D> IidNoiseSource::draw(Rng& rng) {
    std::vector<NoiseMap2D> maps;
    maps.reserve(views_);
    for (std::size_t v = 0; v < views_; ++v) maps.push_back(iid_noise_map(height_, width_, channels_, rng));
    return maps;
}

std::vector<NoiseMap2D> ZeroNoiseSource::draw(Rng&) {
    return std::vector<NoiseMap2D>(views_, NoiseMap2D(height_, width_, channels_, true));
}

ConsistentNoiseSource::ConsistentNoiseSource(PointCloud cloud, std::vector<Camera> cameras,
                                             NoisingParams params, bool hold_fixed)
    : sampler_(std::move(cloud), std::move(cameras), std::move(params)), hold_fixed_(hold_fixed) {}

std::vector<NoiseMap2D> ConsistentNoiseSource::draw(Rng& rng) {
    ConsistentNoiseSampler::Field fresh;
    const ConsistentNoiseSampler::Field* field = nullptr;
    if (hold_fixed_) {
        if (!held_) held_ = sampler_.sample_field(rng);
        field = &*held_;
    } else {
        fresh = sampler_.sample_field(rng);
        field = &fresh;
    }
    std::vector<NoiseMap2D> maps;
    maps.reserve(sampler_.cameras().size());
    for (std::size_t c = 0; c < sampler_.cameras().size(); ++c) maps.push_back(sampler_.render(*field, c));
    return maps;
}

SdsStep sds_gradient(const std::vector<ColorRender>& renders, std::size_t point_count, double sigma,
                     const Denoiser& denoiser, std::vector<NoiseMap2D> noises) {
    if (noises.size() != renders.size()) {
        throw std::invalid_argument("sds: one noise map per view required");
    }
    SdsStep step;
    step.sigma = sigma;
    step.color_gradient.assign(point_count, Vec3::Zero());
    step.gradients.reserve(renders.size());
    for (std::size_t v = 0; v < renders.size(); ++v) {
        const ColorRender& r = renders[v];
        GradientMap g = gradient_map(r.image, noises[v], sigma, denoiser, v);
        const RenderWeights& w = r.weights;
        for (std::size_t p = 0; p < w.pixel_count(); ++p) {
            const auto gp = g.px(p);
            const Vec3 gv{gp[0], gp[1], gp[2]};
            for (std::uint32_t j = w.offsets[p]; j < w.offsets[p + 1]; ++j) {
                if (w.points[j] >= point_count) throw std::out_of_range("sds: point index");
                step.color_gradient[w.points[j]] += w.weights[j] * gv;
            }
        }
        step.gradients.push_back(std::move(g));
    }
    step.noises = std::move(noises);
    return step;
}

SdsStep sds_step(const ColorPointCloud& rep, const std::vector<Camera>& cameras,
                 const NoiseSchedule& schedule, const Denoiser& denoiser, NoiseSource& noise,
                 Rng& rng, const RenderSettings& settings) {
    const double sigma = schedule.sample(rng);
    std::vector<NoiseMap2D> maps = noise.draw(rng);
    std::vector<ColorRender> renders;
    renders.reserve(cameras.size());
    for (const Camera& c : cameras) renders.push_back(render_color(rep, c.intrinsics, c.pose, settings));
    return sds_gradient(renders, rep.size(), sigma, denoiser, std::move(maps));
}

double cosine_dissimilarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine: length mismatch");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (std::sqrt(aa) < kCosineNormEpsilon || std::sqrt(bb) < kCosineNormEpsilon) return 0.0;
    // sqrt(x * x) == x in round-to-nearest, so identical vectors give exactly 0.
    return std::clamp(1.0 - ab / std::sqrt(aa * bb), 0.0, 2.0);
}

double consistency_loss(const GradientMap& g_i, const GradientMap& g_j_warped,
                        const OcclusionMask& mask) {
    require_same_shape(g_i, g_j_warped, "consistency_loss");
    if (mask.width != g_i.width || mask.height != g_i.height) {
        throw std::invalid_argument("consistency_loss: mask dimension mismatch");
    }
    double loss = 0.0;
    for (std::size_t p = 0; p < mask.pixel_count(); ++p) {
        if (mask.weights[p]) loss += cosine_dissimilarity(g_i.px(p), g_j_warped.px(p));
    }
    return loss;
}

namespace {

struct PixelTerm {
    const GradientMap& g_i;
    const GradientMap& g_j;
    const CameraIntrinsics& k;
    Mat3 rel_r;
    Vec3 rel_t;
    mutable std::vector<double> buf;

    double operator()(int x, int y, double d) const {
        const Vec3 cam_i{(x - k.cx) / k.fx * d, (y - k.cy) / k.fy * d, d};
        const Vec3 cam_j = rel_r * cam_i + rel_t;
        if (!(cam_j.z() > 0.0)) return 0.0;
        const Vec2 t{k.fx * cam_j.x() / cam_j.z() + k.cx, k.fy * cam_j.y() / cam_j.z() + k.cy};
        if (!g_j.in_bounds(nearest_pixel(t.x()), nearest_pixel(t.y()))) return 0.0;
        buf.resize(static_cast<std::size_t>(g_j.channels));
        sample_bilinear(g_j, t, buf);
        return cosine_dissimilarity(g_i.px(g_i.pixel(x, y)), buf);
    }
};

PixelTerm make_term(const GradientMap& g_i, const GradientMap& g_j, const DepthMap& depth_i,
                    const CameraPose& pose_i, const CameraPose& pose_j, const CameraIntrinsics& k,
                    const OcclusionMask& mask) {
    require_same_shape(g_i, g_j, "consistency loss");
    if (!depth_i.matches(k) || g_i.width != k.width || g_i.height != k.height ||
        mask.width != k.width || mask.height != k.height) {
        throw std::invalid_argument("consistency loss: dimension mismatch");
    }
    const Mat3 rel_r = pose_j.rotation * pose_i.rotation.transpose();
    return PixelTerm{g_i, g_j, k, rel_r, pose_j.translation - rel_r * pose_i.translation, {}};
}

}  // namespace

double consistency_loss_at_depth(const GradientMap& g_i, const GradientMap& g_j,
                                 const DepthMap& depth_i, const CameraPose& pose_i,
                                 const CameraPose& pose_j, const CameraIntrinsics& k,
                                 const OcclusionMask& mask) {
    const PixelTerm term = make_term(g_i, g_j, depth_i, pose_i, pose_j, k, mask);
    double loss = 0.0;
    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            const std::size_t p = depth_i.index(x, y);
            if (mask.weights[p] && depth_i.valid(p)) loss += term(x, y, depth_i.at(p));
        }
    }
    return loss;
}

std::vector<double> consistency_loss_depth_gradient(const GradientMap& g_i, const GradientMap& g_j,
                                                    const DepthMap& depth_i,
                                                    const CameraPose& pose_i,
                                                    const CameraPose& pose_j,
                                                    const CameraIntrinsics& k,
                                                    const OcclusionMask& mask, double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("depth gradient: h must be > 0");
    const PixelTerm term = make_term(g_i, g_j, depth_i, pose_i, pose_j, k, mask);
    std::vector<double> grad(depth_i.pixel_count(), 0.0);
    // Each pixel's term depends only on its own depth.
    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            const std::size_t p = depth_i.index(x, y);
            if (!mask.weights[p] || !depth_i.valid(p)) continue;
            const double d = depth_i.at(p);
            if (d - h > 0.0) {
                grad[p] = (term(x, y, d + h) - term(x, y, d - h)) / (2.0 * h);
            } else {
                grad[p] = (term(x, y, d + h) - term(x, y, d)) / h;
            }
        }
    }
    return grad;
}

GradientMap multiview_warped_sds(const Image& z_i, const DepthMap& depth_i,
                                 const CameraIntrinsics& k, const CameraPose& pose_i,
                                 const std::vector<CameraPose>& neighbor_poses,
                                 const std::vector<NoiseMap2D>& neighbor_noises, double sigma,
                                 const Denoiser& denoiser, std::size_t view) {
    if (neighbor_poses.size() != neighbor_noises.size()) {
        throw std::invalid_argument("multiview_warped_sds: one noise map per neighbour required");
    }
    GradientMap total(z_i.height, z_i.width, z_i.channels);
    total.coverage = z_i.coverage;
    for (std::size_t j = 0; j < neighbor_poses.size(); ++j) {
        const WarpField w = compute_warp(depth_i, pose_i, neighbor_poses[j], k);
        const NoiseMap2D warped = inverse_warp(neighbor_noises[j], w);
        const GradientMap g = gradient_map(z_i, warped, sigma, denoiser, view);
        for (std::size_t i = 0; i < total.values.size(); ++i) total.values[i] += g.values[i];
    }
    return total;
}

}  // namespace gsd
