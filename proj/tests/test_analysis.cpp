// SPDX-License-Identifier: Apache-2.0
#include "gsd/analysis.hpp"
#include "gsd/scenes.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gsd;

namespace {

AnalysisSetup pair_setup(double separation_deg) {
    AnalysisSetup s;
    s.cloud = make_sphere_scene();
    s.pose_i = sample_hemisphere_pose(0.0, deg_to_rad(15.0), 3.0, Vec3::Zero());
    s.pose_j = sample_hemisphere_pose(deg_to_rad(separation_deg), deg_to_rad(15.0), 3.0, Vec3::Zero());
    return s;
}

}  // namespace

TEST(Strategy, NamesRoundTrip) {
    for (NoiseStrategy s : all_strategies()) EXPECT_EQ(parse_strategy(to_string(s)), s);
    EXPECT_THROW(parse_strategy("gaussian"), std::invalid_argument);
}

TEST(Analysis, PoseAngle) {
    const AnalysisSetup s = pair_setup(5.0);
    EXPECT_NEAR(pose_angle(s.pose_i, s.pose_j) * 180.0 / M_PI, 5.0, 0.5);
    EXPECT_NEAR(pose_angle(s.pose_i, s.pose_i), 0.0, 1e-7);
}

TEST(Analysis, IdenticalPosesConsistentCorrelationIsOne) {
    const AnalysisSetup s = pair_setup(0.0);
    const StrategySampler sampler(s, NoiseStrategy::consistent_3d);
    Rng rng(3);
    const CrossCorrelation c = cross_covariance(s, sampler, 100, rng);
    EXPECT_NEAR(c.corresponding, 1.0, 1e-6);
    EXPECT_LT(std::abs(c.non_corresponding), 4.0 / std::sqrt(100.0 * c.pairs) + 0.05);
}

TEST(Analysis, RandomHasNoCrossViewCorrelation) {
    const AnalysisSetup s = pair_setup(5.0);
    const StrategySampler sampler(s, NoiseStrategy::random);
    Rng rng(4);
    const CrossCorrelation c = cross_covariance(s, sampler, 200, rng);
    EXPECT_LT(std::abs(c.corresponding), 4.0 / std::sqrt(200.0));
    EXPECT_LT(std::abs(c.non_corresponding), 4.0 / std::sqrt(200.0));
}

TEST(Analysis, RandomPatchCovarianceIsIdentityLike) {
    const AnalysisSetup s = pair_setup(5.0);
    const StrategySampler sampler(s, NoiseStrategy::random);
    Rng rng(5);
    const int n = 2000;
    const Eigen::MatrixXd cov = covariance_diag(sampler, centered_patch(s.intrinsics, 4), n, rng);
    ASSERT_EQ(cov.rows(), 16);
    for (Eigen::Index i = 0; i < cov.rows(); ++i) {
        EXPECT_NEAR(cov(i, i), 1.0, 4.0 * std::sqrt(2.0 / n));
    }
    // Bonferroni over 120 pairs at two-sided 1%.
    EXPECT_LT(max_offdiag_correlation(cov), 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST(Analysis, BilinearWarpLosesVariance) {
    const AnalysisSetup s = pair_setup(5.0);
    const StrategySampler sampler(s, NoiseStrategy::bilinear_warp);
    Rng rng(6);
    const Eigen::MatrixXd cov = covariance_diag(sampler, centered_patch(s.intrinsics, 8), 300, rng);
    EXPECT_LT(cov.diagonal().minCoeff(), 0.9);
    EXPECT_GT(max_offdiag_correlation(cov), 0.1);
}

TEST(Analysis, NearestWarpDuplicatesValues) {
    const AnalysisSetup s = pair_setup(5.0);
    const StrategySampler sampler(s, NoiseStrategy::nearest_warp);
    Rng rng(7);
    const StatsReport r = normality_report(s, sampler, 100, rng);
    EXPECT_GT(r.duplicate_rate, 0.0);
    EXPECT_FALSE(pass_normal(r));
}

TEST(Analysis, ComparisonVerdictMatrix) {
    const AnalysisSetup s = pair_setup(5.0);
    Rng rng(8);
    const auto reports = strategy_comparison(s, all_strategies(), 150, rng);
    ASSERT_EQ(reports.size(), 4u);
    for (const auto& r : reports) {
        switch (r.strategy) {
            case NoiseStrategy::random:
                EXPECT_TRUE(pass_normal(r));
                EXPECT_FALSE(pass_crossview(r));
                break;
            case NoiseStrategy::bilinear_warp:
                EXPECT_FALSE(pass_normal(r));
                break;
            case NoiseStrategy::nearest_warp:
                break;
            case NoiseStrategy::consistent_3d:
                EXPECT_TRUE(pass_normal(r));
                EXPECT_TRUE(pass_crossview(r));
                break;
        }
    }
}

TEST(Analysis, SubsetRowsAreIndependentOfOtherStrategies) {
    const AnalysisSetup s = pair_setup(5.0);
    Rng a(9);
    Rng b(9);
    const auto one = strategy_comparison(s, {NoiseStrategy::random}, 100, a);
    const auto two =
        strategy_comparison(s, {NoiseStrategy::bilinear_warp, NoiseStrategy::random}, 100, b);
    ASSERT_EQ(one.size(), 1u);
    ASSERT_EQ(two.size(), 2u);
    EXPECT_EQ(one[0].strategy, NoiseStrategy::random);
    EXPECT_EQ(one[0].moments.mean, two[1].moments.mean);
    EXPECT_EQ(one[0].patch_covariance, two[1].patch_covariance);
}

TEST(Analysis, ReportsAreDeterministic) {
    const AnalysisSetup s = pair_setup(5.0);
    const StrategySampler sampler(s, NoiseStrategy::consistent_3d);
    Rng a(10);
    Rng b(10);
    const StatsReport r1 = normality_report(s, sampler, 100, a);
    const StatsReport r2 = normality_report(s, sampler, 100, b);
    EXPECT_EQ(r1.moments.mean, r2.moments.mean);
    EXPECT_EQ(r1.cross.corresponding, r2.cross.corresponding);
    EXPECT_EQ(r1.patch_covariance, r2.patch_covariance);
}

TEST(Analysis, PreconditionErrors) {
    const AnalysisSetup s = pair_setup(5.0);
    const StrategySampler sampler(s, NoiseStrategy::random);
    Rng rng(1);
    EXPECT_THROW(covariance_diag(sampler, centered_patch(s.intrinsics, 8), 99, rng),
                 std::invalid_argument);
    EXPECT_THROW(covariance_diag(sampler, PatchRegion{60, 60, 8}, 100, rng), std::invalid_argument);

    const AnalysisSetup far = pair_setup(45.0);
    const StrategySampler far_sampler(far, NoiseStrategy::random);
    EXPECT_THROW(cross_covariance(far, far_sampler, 100, rng), std::invalid_argument);
}
