// SPDX-License-Identifier: Apache-2.0
//
// Statistical diagnostics comparing noising strategies on a pair of views:
// pooled distribution moments, KS against N(0, 1), patch covariance within a
// view, and correlation at corresponding versus non-corresponding pixels
// across the two views.
#pragma once

#include "gsd/geometry.hpp"
#include "gsd/noising.hpp"
#include "gsd/stats.hpp"
#include "gsd/warping.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gsd {

enum class NoiseStrategy { random, bilinear_warp, nearest_warp, consistent_3d };

std::string_view to_string(NoiseStrategy s);
/// Throws std::invalid_argument on an unknown name.
NoiseStrategy parse_strategy(std::string_view name);
std::vector<NoiseStrategy> all_strategies();

struct PatchRegion {
    int x = 0;
    int y = 0;
    int size = 8;
};

/// Patch of `size` centred in the image.
PatchRegion centered_patch(const CameraIntrinsics& intrinsics, int size);

/// Scene and view pair shared by every strategy. View i is analysed; view j is
/// its neighbour.
struct AnalysisSetup {
    PointCloud cloud;
    CameraIntrinsics intrinsics;
    CameraPose pose_i;
    CameraPose pose_j;
    NoisingParams params;
    double occlusion_delta = 0.05;
};

/// Relative rotation angle between two poses, radians.
double pose_angle(const CameraPose& a, const CameraPose& b);

/// Draws (n_i, n_j) pairs for one strategy.
///  random: independent i.i.d. maps.
///  consistent_3d: one 3D field rendered into both views.
///  *_warp: i.i.d. n_j, and n_i = n_j inverse-warped onto view i with the warp
///  from view i's depth; pixels without a valid warp get fresh i.i.d. values.
class StrategySampler {
public:
    StrategySampler(const AnalysisSetup& setup, NoiseStrategy strategy);

    std::pair<NoiseMap2D, NoiseMap2D> sample(Rng& rng) const;

    NoiseStrategy strategy() const { return strategy_; }
    const WarpField& warp() const { return warp_; }
    const OcclusionMask& mask() const { return mask_; }
    const DepthMap& depth_i() const { return depth_i_; }
    const DepthMap& depth_j() const { return depth_j_; }

private:
    NoiseStrategy strategy_;
    CameraIntrinsics intrinsics_;
    int channels_;
    DepthMap depth_i_;
    DepthMap depth_j_;
    WarpField warp_;
    OcclusionMask mask_;
    std::optional<ConsistentNoiseSampler> consistent_;
};

struct CrossCorrelation {
    double corresponding = 0.0;
    double non_corresponding = 0.0;
    std::size_t pairs = 0;  // masked pixel pairs per sample
};

struct StatsReport {
    NoiseStrategy strategy = NoiseStrategy::random;
    int num_samples = 0;
    std::size_t value_count = 0;
    Moments moments;
    KsResult ks;                 // pooled, first ks_cap values
    double ks_pass_rate = 0.0;   // fraction of single maps with p >= ks_alpha
    PatchRegion patch;
    Eigen::MatrixXd patch_covariance;  // channel 0
    CrossCorrelation cross;
    double duplicate_rate = 0.0;  // values equal to another value in the same map
};

struct AnalysisOptions {
    int patch_size = 8;
    std::optional<int> patch_x;
    std::optional<int> patch_y;
    std::size_t ks_cap = std::size_t{1} << 20;
    double ks_alpha = 0.01;
};

/// Empirical covariance of the patch values (channel 0) of view i.
/// Throws on num_samples < 100 or a patch outside the image.
Eigen::MatrixXd covariance_diag(const StrategySampler& sampler, const PatchRegion& patch,
                                int num_samples, Rng& rng);

/// Throws on num_samples < 100, poses more than 30 degrees apart, or no
/// masked correspondences.
CrossCorrelation cross_covariance(const AnalysisSetup& setup, const StrategySampler& sampler,
                                  int num_samples, Rng& rng);

StatsReport normality_report(const AnalysisSetup& setup, const StrategySampler& sampler,
                             int num_samples, Rng& rng, const AnalysisOptions& options = {});

/// One report per requested strategy, in the order given. A single key is
/// drawn from `rng` and each strategy derives its own stream from it, so a
/// row does not depend on which other strategies were requested.
std::vector<StatsReport> strategy_comparison(const AnalysisSetup& setup,
                                             const std::vector<NoiseStrategy>& strategies,
                                             int num_samples, Rng& rng,
                                             const AnalysisOptions& options = {});

/// Estimator-derived bounds; see pass_normal.
struct VerdictDetail {
    bool mean_ok = false;
    bool variance_ok = false;
    bool kurtosis_ok = false;
    bool ks_ok = false;
    bool duplicates_ok = false;
    bool covariance_ok = false;
    bool normal = false;
    bool crossview = false;
};

/// normal: |mean| <= 4/sqrt(M), |var - 1| <= 4 sqrt(2/M),
/// |excess kurtosis| <= 4 sqrt(24/M) over M pooled values; pooled KS p >= 0.01;
/// no duplicated values; patch diagonal within 1 +- 4 sqrt(2/S) and every
/// off-diagonal correlation within a Bonferroni-corrected two-sided 1% bound.
/// crossview: corresponding correlation > 0.3 and > 10x |non-corresponding|.
VerdictDetail verdict(const StatsReport& report);
bool pass_normal(const StatsReport& report);
bool pass_crossview(const StatsReport& report);

/// Largest |correlation| among off-diagonal entries of a covariance matrix.
double max_offdiag_correlation(const Eigen::MatrixXd& cov);

}  // namespace gsd
