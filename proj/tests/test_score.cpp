// SPDX-License-Identifier: Apache-2.0
#include "gsd/scenes.hpp"
#include "gsd/score.hpp"
#include "gsd/warping.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gsd;

namespace {

const CameraIntrinsics kK{};

CameraPose orbit(double az_deg) {
    return sample_hemisphere_pose(deg_to_rad(az_deg), deg_to_rad(15.0), 3.0, Vec3::Zero());
}

Image filled(int h, int w, double v) {
    Image img(h, w, 3, true);
    std::fill(img.values.begin(), img.values.end(), v);
    return img;
}

GradientMap pattern(int h, int w, double phase) {
    GradientMap g(h, w, 3, true);
    for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = std::sin(0.37 * i + phase) + 0.1;
    return g;
}

OcclusionMask full_mask(int h, int w) {
    return {w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w, 1)};
}

}  // namespace

TEST(Schedule, LogUniformEndpointsAndSpacing) {
    const NoiseSchedule s = NoiseSchedule::log_uniform(0.1, 2.0, 5);
    ASSERT_EQ(s.sigmas.size(), 5u);
    EXPECT_NEAR(s.sigmas.front(), 0.1, 1e-12);
    EXPECT_NEAR(s.sigmas.back(), 2.0, 1e-12);
    for (int i = 1; i < 4; ++i) {
        EXPECT_NEAR(s.sigmas[i] * s.sigmas[i], s.sigmas[i - 1] * s.sigmas[i + 1], 1e-12);
    }
}

TEST(Schedule, SampleStaysOnSchedule) {
    const NoiseSchedule s = NoiseSchedule::log_uniform(0.1, 2.0, 10);
    Rng rng(2);
    for (int i = 0; i < 100; ++i) {
        const double sigma = s.sample(rng);
        EXPECT_NE(std::find(s.sigmas.begin(), s.sigmas.end(), sigma), s.sigmas.end());
    }
}

TEST(Schedule, InvalidArguments) {
    EXPECT_THROW(NoiseSchedule::log_uniform(0.0, 1.0), std::invalid_argument);
    EXPECT_THROW(NoiseSchedule::log_uniform(2.0, 1.0), std::invalid_argument);
    EXPECT_THROW(NoiseSchedule::log_uniform(0.1, 1.0, 0), std::invalid_argument);
    EXPECT_THROW(NoiseSchedule{}.validate(), std::invalid_argument);
}

TEST(Denoiser, AnalyticFormula) {
    const Image target = filled(2, 2, 0.8);
    const AnalyticGaussianDenoiser d({target}, 0.5);
    const Image x = filled(2, 2, 0.2);
    const double sigma = 1.5;
    const Image out = d.denoise(x, sigma, 0);
    const double expected = 0.2 + sigma * sigma * (0.8 - 0.2) / (0.25 + sigma * sigma);
    for (double v : out.values) EXPECT_NEAR(v, expected, 1e-14);
    EXPECT_THROW(AnalyticGaussianDenoiser({target}, 0.0), std::invalid_argument);
}

TEST(Denoiser, GradientWithZeroNoiseIsExpectedGradient) {
    const Image target = filled(3, 3, 0.9);
    const AnalyticGaussianDenoiser d({target}, 1.0);
    const Image z = filled(3, 3, 0.1);
    NoiseMap2D zero(3, 3, 3, true);
    const GradientMap g = gradient_map(z, zero, 0.7, d);
    const GradientMap e = d.expected_gradient(z, 0.7, 0);
    for (std::size_t i = 0; i < g.values.size(); ++i) EXPECT_NEAR(g.values[i], e.values[i], 1e-12);
    EXPECT_NEAR(e.values[0], 0.8 / (1.0 + 0.49), 1e-12);
    EXPECT_THROW(gradient_map(z, zero, 0.0, d), std::invalid_argument);
}

TEST(Denoiser, IdentityDenoiserGivesZeroGradient) {
    const Image z = filled(2, 2, 0.3);
    Rng rng(1);
    NoiseMap2D n(2, 2, 3, true);
    for (double& v : n.values) v = rng.normal();
    const GradientMap g = gradient_map(z, n, 0.5, IdentityDenoiser{});
    for (double v : g.values) EXPECT_EQ(v, 0.0);
}

TEST(Paas, MatchesClosedForm) {
    Rng rng(11);
    Image z(4, 4, 3, true);
    Image t(4, 4, 3, true);
    for (double& v : z.values) v = rng.uniform();
    for (double& v : t.values) v = rng.uniform();
    const AnalyticGaussianDenoiser d({t}, 0.8);
    const PaasEstimate est = paas_score(z, 0.6, d, 1000, rng);
    const GradientMap cf = d.expected_gradient(z, 0.6, 0);
    EXPECT_EQ(est.samples, 1000);
    for (std::size_t i = 0; i < cf.values.size(); ++i) {
        EXPECT_LE(std::abs(est.mean.values[i] - cf.values[i]), 4.0 * est.standard_error.values[i]);
    }
    EXPECT_THROW(paas_score(z, 0.6, d, 0, rng), std::invalid_argument);
}

TEST(Render, WeightsNormalisedAndLinear) {
    const PointCloud geometry = make_sphere_scene(300);
    ColorPointCloud rep = make_color_cloud(geometry, Vec3(0.2, 0.4, 0.6));
    Rng rng(3);
    for (auto& c : rep.colors) c = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
    const ColorRender r = render_color(rep, kK, orbit(0));
    for (std::size_t p = 0; p < r.weights.pixel_count(); ++p) {
        double sum = 0.0;
        for (auto j = r.weights.offsets[p]; j < r.weights.offsets[p + 1]; ++j) sum += r.weights.weights[j];
        if (r.image.covered(p)) {
            EXPECT_NEAR(sum, 1.0, 1e-12);
        } else {
            EXPECT_EQ(sum, 0.0);
        }
    }
    const Image reshaded = shade(r.weights, rep.colors, kK.height, kK.width);
    for (std::size_t i = 0; i < reshaded.values.size(); ++i) {
        EXPECT_NEAR(reshaded.values[i], r.image.values[i], 1e-12);
    }
}

TEST(Render, ConstantColorRendersConstant) {
    const ColorPointCloud rep = make_color_cloud(make_sphere_scene(2000), Vec3(0.25, 0.5, 0.75));
    const ColorRender r = render_color(rep, kK, orbit(30));
    ASSERT_GT(r.image.covered_count(), 0u);
    for (std::size_t p = 0; p < r.image.pixel_count(); ++p) {
        if (!r.image.covered(p)) continue;
        EXPECT_NEAR(r.image.px(p)[1], 0.5, 1e-12);
    }
}

TEST(Render, InvalidCloudThrows) {
    ColorPointCloud rep = make_color_cloud(make_sphere_scene(10), Vec3::Zero());
    rep.opacity.pop_back();
    EXPECT_THROW(rep.validate(), std::invalid_argument);
    EXPECT_THROW(render_color(ColorPointCloud{}, kK, orbit(0)), std::invalid_argument);
}

TEST(Sds, GradientMatchesFiniteDifferenceOfSurrogate) {
    const ColorPointCloud rep = make_color_cloud(make_sphere_scene(50), Vec3::Constant(0.4));
    const std::vector<Camera> cams{{kK, orbit(0)}};
    const ColorRender r = render_color(rep, kK, cams[0].pose);
    Image target = r.image;
    for (double& v : target.values) v = 0.9;
    const AnalyticGaussianDenoiser d({target}, 1.0);
    Rng rng(4);
    NoiseMap2D noise(kK.height, kK.width, 3, true);
    for (double& v : noise.values) v = rng.normal();
    const double sigma = 0.5;
    const SdsStep step = sds_gradient({r}, rep.size(), sigma, d, {noise});

    Image anchor = r.image;
    for (std::size_t i = 0; i < anchor.values.size(); ++i) {
        anchor.values[i] -= sigma * sigma * step.gradients[0].values[i];
    }
    const auto surrogate = [&](const std::vector<Vec3>& colors) {
        const Image z = shade(r.weights, colors, kK.height, kK.width);
        double s = 0.0;
        for (std::size_t i = 0; i < z.values.size(); ++i) {
            s += 0.5 * (z.values[i] - anchor.values[i]) * (z.values[i] - anchor.values[i]);
        }
        return s;
    };
    for (std::size_t k = 0; k < rep.size(); k += 7) {
        auto plus = rep.colors;
        auto minus = rep.colors;
        plus[k][0] += 1e-4;
        minus[k][0] -= 1e-4;
        const double fd = (surrogate(plus) - surrogate(minus)) / 2e-4;
        EXPECT_NEAR(fd, sigma * sigma * step.color_gradient[k][0],
                    1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST(Sds, ZeroNoiseAtTargetGivesZeroGradient) {
    const ColorPointCloud rep = make_color_cloud(make_sphere_scene(200), Vec3::Constant(0.3));
    const std::vector<Camera> cams{{kK, orbit(0)}};
    const ColorRender r = render_color(rep, kK, cams[0].pose);
    const AnalyticGaussianDenoiser d({r.image}, 1.0);
    ZeroNoiseSource zero(1, kK.height, kK.width, 3);
    Rng rng(1);
    const SdsStep step = sds_step(rep, cams, NoiseSchedule::log_uniform(), d, zero, rng);
    for (const Vec3& g : step.color_gradient) EXPECT_LT(g.norm(), 1e-12);
}

TEST(Sds, NoiseCountMismatchThrows) {
    const ColorPointCloud rep = make_color_cloud(make_sphere_scene(20), Vec3::Constant(0.3));
    const ColorRender r = render_color(rep, kK, orbit(0));
    const AnalyticGaussianDenoiser d({r.image}, 1.0);
    EXPECT_THROW(sds_gradient({r}, rep.size(), 0.5, d, {}), std::invalid_argument);
}

TEST(ConsistencyLoss, IdenticalAntipodalAndScale) {
    const GradientMap g = pattern(8, 8, 0.0);
    const OcclusionMask all = full_mask(8, 8);
    EXPECT_EQ(consistency_loss(g, g, all), 0.0);
    GradientMap neg = g;
    for (double& v : neg.values) v = -v;
    EXPECT_NEAR(consistency_loss(g, neg, all), 2.0 * 64, 1e-9);

    const GradientMap other = pattern(8, 8, 1.1);
    GradientMap a = g;
    GradientMap b = other;
    for (double& v : a.values) v *= 5.0;
    for (double& v : b.values) v *= 1e-3;
    EXPECT_NEAR(consistency_loss(a, b, all), consistency_loss(g, other, all), 1e-10);
}

TEST(ConsistencyLoss, MaskedPixelsAndZeroVectorsContributeNothing) {
    const GradientMap g = pattern(4, 4, 0.0);
    GradientMap neg = g;
    for (double& v : neg.values) v = -v;
    OcclusionMask half = full_mask(4, 4);
    for (std::size_t p = 0; p < 8; ++p) half.weights[p] = 0;
    EXPECT_NEAR(consistency_loss(g, neg, half), 16.0, 1e-9);

    const std::vector<double> zero{0, 0, 0};
    const std::vector<double> v{1, 2, 3};
    EXPECT_EQ(cosine_dissimilarity(zero, v), 0.0);
    EXPECT_THROW(consistency_loss(g, neg, full_mask(5, 4)), std::invalid_argument);
}

TEST(ConsistencyLoss, DepthGradientRejectsNonPositiveStep) {
    const PointCloud cloud = make_sphere_scene();
    const DepthMap d = render_depth(cloud, kK, orbit(0));
    const GradientMap g = pattern(kK.height, kK.width, 0.0);
    const OcclusionMask m = full_mask(kK.height, kK.width);
    EXPECT_THROW(consistency_loss_depth_gradient(g, g, d, orbit(0), orbit(5), kK, m, 0.0),
                 std::invalid_argument);
}

TEST(ConsistencyLoss, DepthGradientZeroOffValidPixels) {
    const PointCloud cloud = make_sphere_scene();
    const CameraPose pi = orbit(0);
    const CameraPose pj = orbit(5);
    const DepthMap di = render_depth(cloud, kK, pi);
    const OcclusionMask m = occlusion_mask(compute_warp(di, pi, pj, kK), render_depth(cloud, kK, pj));
    const auto grad = consistency_loss_depth_gradient(pattern(kK.height, kK.width, 0.1),
                                                      pattern(kK.height, kK.width, 0.7), di, pi,
                                                      pj, kK, m, 1e-3);
    ASSERT_EQ(grad.size(), kK.pixel_count());
    for (std::size_t p = 0; p < grad.size(); ++p) {
        if (!di.valid(p)) {
            EXPECT_EQ(grad[p], 0.0);
        }
    }
}

TEST(MultiviewSds, SameViewNeighbourReproducesGradientMap) {
    const ColorPointCloud rep = make_color_cloud(make_sphere_scene(), Vec3::Constant(0.3));
    const CameraPose pose = orbit(0);
    const ColorRender r = render_color(rep, kK, pose);
    Image target = r.image;
    for (double& v : target.values) v = 0.7;
    const AnalyticGaussianDenoiser d({target}, 1.0);
    Rng rng(9);
    NoiseMap2D n(kK.height, kK.width, 3, true);
    for (double& v : n.values) v = rng.normal();
    const GradientMap direct = gradient_map(r.image, n, 0.5, d);
    const GradientMap warped = multiview_warped_sds(r.image, r.depth, kK, pose, {pose}, {n}, 0.5, d);
    for (std::size_t p = 0; p < direct.pixel_count(); ++p) {
        if (!r.depth.valid(p)) continue;
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(warped.px(p)[c], direct.px(p)[c], 1e-12);
    }
    EXPECT_THROW(multiview_warped_sds(r.image, r.depth, kK, pose, {pose}, {}, 0.5, d),
                 std::invalid_argument);
}
