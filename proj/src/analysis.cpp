// SPDX-License-Identifier: Apache-2.0
#include "gsd/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace gsd {

namespace {

constexpr std::array<std::pair<NoiseStrategy, std::string_view>, 4> kNames{{
    {NoiseStrategy::random, "random"},
    {NoiseStrategy::bilinear_warp, "bilinear_warp"},
    {NoiseStrategy::nearest_warp, "nearest_warp"},
    {NoiseStrategy::consistent_3d, "consistent_3d"},
}};

constexpr int kMinSamples = 100;
constexpr double kMaxPoseAngleDeg = 30.0;

void require_samples(int n) {
    if (n < kMinSamples) throw std::invalid_argument("analysis: num_samples must be >= 100");
}

void require_patch(const PatchRegion& r, const CameraIntrinsics& k) {
    if (r.size < 1 || r.x < 0 || r.y < 0 || r.x + r.size > k.width || r.y + r.size > k.height) {
        throw std::invalid_argument("analysis: patch lies outside the image");
    }
}

struct Correspondences {
    std::vector<std::pair<std::size_t, std::size_t>> matched;  // (pixel in i, pixel in j)
    std::vector<std::size_t> decoy;                            // non-corresponding pixel in j
};

Correspondences correspondences(const StrategySampler& s, const CameraIntrinsics& k, Rng& rng) {
    Correspondences c;
    const WarpField& w = s.warp();
    for (std::size_t p = 0; p < w.pixel_count(); ++p) {
        if (!s.mask().weights[p]) continue;
        const int tx = nearest_pixel(w.targets[p].x());
        const int ty = nearest_pixel(w.targets[p].y());
        c.matched.emplace_back(p, static_cast<std::size_t>(ty) * k.width + tx);
    }
    if (c.matched.empty()) throw std::runtime_error("analysis: no valid correspondences");

    // Shuffled partners, at least 2 px away from the true correspondence.
    std::vector<std::size_t> order(c.matched.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng.engine());
    c.decoy.resize(c.matched.size());
    for (std::size_t i = 0; i < c.matched.size(); ++i) {
        const std::size_t q = c.matched[i].second;
        const long qx = static_cast<long>(q % k.width), qy = static_cast<long>(q / k.width);
        std::size_t chosen = c.matched[order[i]].second;
        for (std::size_t step = 0; step < order.size(); ++step) {
            const std::size_t cand = c.matched[order[(i + step) % order.size()]].second;
            const long dx = static_cast<long>(cand % k.width) - qx;
            const long dy = static_cast<long>(cand / k.width) - qy;
            chosen = cand;
            if (dx * dx + dy * dy > 4) break;
        }
        c.decoy[i] = chosen;
    }
    return c;
}

struct PairSums {
    long double a = 0, b = 0, ab = 0, aa = 0, bb = 0;
    std::size_t n = 0;

    void add(double x, double y) {
        a += x;
        b += y;
        ab += static_cast<long double>(x) * y;
        aa += static_cast<long double>(x) * x;
        bb += static_cast<long double>(y) * y;
        ++n;
    }
    double correlation() const {
        if (n < 2) return 0.0;
        const long double cov = ab - a * b / n;
        const long double va = aa - a * a / n;
        const long double vb = bb - b * b / n;
        if (va <= 0 || vb <= 0) return 0.0;
        return static_cast<double>(cov / std::sqrt(va * vb));
    }
};

std::size_t duplicate_count(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t dups = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const bool left = i > 0 && v[i - 1] == v[i];
        const bool right = i + 1 < v.size() && v[i + 1] == v[i];
        dups += left || right;
    }
    return dups;
}

struct Wants {
    bool distribution = true;
    bool patch = true;
    bool cross = true;
};

StatsReport run(const AnalysisSetup& setup, const StrategySampler& sampler, int num_samples,
                Rng& rng, const AnalysisOptions& opt, Wants wants) {
    require_samples(num_samples);
    const CameraIntrinsics& k = setup.intrinsics;
    StatsReport r;
    r.strategy = sampler.strategy();
    r.num_samples = num_samples;
    r.patch = centered_patch(k, opt.patch_size);
    if (opt.patch_x) r.patch.x = *opt.patch_x;
    if (opt.patch_y) r.patch.y = *opt.patch_y;
    if (wants.patch) require_patch(r.patch, k);

    Correspondences corr;
    if (wants.cross) {
        if (pose_angle(setup.pose_i, setup.pose_j) > deg_to_rad(kMaxPoseAngleDeg) + 1e-12) {
            throw std::invalid_argument("analysis: poses must be within 30 degrees");
        }
        corr = correspondences(sampler, k, rng);
    }

    const int channels = setup.params.channels;
    const std::size_t patch_dim = static_cast<std::size_t>(r.patch.size) * r.patch.size;
    Eigen::MatrixXd patch_rows;
    if (wants.patch) patch_rows.resize(num_samples, static_cast<Eigen::Index>(patch_dim));

    long double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    std::vector<double> ks_pool;
    std::size_t ks_passed = 0, dups = 0;
    PairSums matched, decoy;

    for (int s = 0; s < num_samples; ++s) {
        const auto [ni, nj] = sampler.sample(rng);
        if (wants.distribution) {
            for (double x : ni.values) {
                const long double lx = x;
                s1 += lx;
                s2 += lx * lx;
                s3 += lx * lx * lx;
                s4 += lx * lx * lx * lx;
                if (ks_pool.size() < opt.ks_cap) ks_pool.push_back(x);
            }
            r.value_count += ni.values.size();
            ks_passed += ks_test_normal(ni.values).p_value >= opt.ks_alpha;
            dups += duplicate_count(ni.values);
        }
        if (wants.patch) {
            for (int py = 0; py < r.patch.size; ++py) {
                for (int px = 0; px < r.patch.size; ++px) {
                    patch_rows(s, py * r.patch.size + px) = ni.at(r.patch.x + px, r.patch.y + py, 0);
                }
            }
        }
        if (wants.cross) {
            for (std::size_t m = 0; m < corr.matched.size(); ++m) {
                const auto [p, q] = corr.matched[m];
                for (int c = 0; c < channels; ++c) {
                    matched.add(ni.values[p * channels + c], nj.values[q * channels + c]);
                    decoy.add(ni.values[p * channels + c], nj.values[corr.decoy[m] * channels + c]);
                }
            }
        }
    }

    if (wants.distribution) {
        const long double n = static_cast<long double>(r.value_count);
        const long double mean = s1 / n;
        const long double m2 = s2 / n - mean * mean;
        const long double m3 = s3 / n - 3 * mean * s2 / n + 2 * mean * mean * mean;
        const long double m4 =
            s4 / n - 4 * mean * s3 / n + 6 * mean * mean * s2 / n - 3 * mean * mean * mean * mean;
        r.moments.count = r.value_count;
        r.moments.mean = static_cast<double>(mean);
        r.moments.variance = static_cast<double>(m2 * n / (n - 1));
        if (m2 > 0) {
            r.moments.skewness = static_cast<double>(m3 / std::pow(m2, 1.5L));
            r.moments.excess_kurtosis = static_cast<double>(m4 / (m2 * m2) - 3);
        }
        r.ks = ks_test_normal(std::move(ks_pool));
        r.ks_pass_rate = static_cast<double>(ks_passed) / num_samples;
        r.duplicate_rate = static_cast<double>(dups) / static_cast<double>(r.value_count);
    }
    if (wants.patch) r.patch_covariance = sample_covariance(patch_rows);
    if (wants.cross) {
        r.cross.corresponding = matched.correlation();
        r.cross.non_corresponding = decoy.correlation();
        r.cross.pairs = corr.matched.size();
    }
    return r;
}

}  // namespace

std::string_view to_string(NoiseStrategy s) {
    for (const auto& [v, name] : kNames) {
        if (v == s) return name;
    }
    throw std::invalid_argument("unknown noise strategy");
}

NoiseStrategy parse_strategy(std::string_view name) {
    for (const auto& [v, n] : kNames) {
        if (n == name) return v;
    }
    throw std::invalid_argument("unknown noise strategy: " + std::string(name));
}

std::vector<NoiseStrategy> all_strategies() {
    std::vector<NoiseStrategy> out;
    for (const auto& entry : kNames) out.push_back(entry.first);
    return out;
}

PatchRegion centered_patch(const CameraIntrinsics& k, int size) {
    return {(k.width - size) / 2, (k.height - size) / 2, size};
}

double pose_angle(const CameraPose& a, const CameraPose& b) {
    const Mat3 rel = b.rotation * a.rotation.transpose();
    return std::acos(std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0));
}

StrategySampler::StrategySampler(const AnalysisSetup& setup, NoiseStrategy strategy)
    : strategy_(strategy), intrinsics_(setup.intrinsics), channels_(setup.params.channels) {
    setup.params.validate();
    const double splat = setup.params.splat_radius;
    depth_i_ = render_depth(setup.cloud, intrinsics_, setup.pose_i, splat);
    depth_j_ = render_depth(setup.cloud, intrinsics_, setup.pose_j, splat);
    warp_ = compute_warp(depth_i_, setup.pose_i, setup.pose_j, intrinsics_);
    mask_ = occlusion_mask(warp_, depth_j_, setup.occlusion_delta);
    if (strategy == NoiseStrategy::consistent_3d) {
        consistent_.emplace(setup.cloud,
                            std::vector<Camera>{{intrinsics_, setup.pose_i}, {intrinsics_, setup.pose_j}},
                            setup.params);
    }
}

std::pair<NoiseMap2D, NoiseMap2D> StrategySampler::sample(Rng& rng) const {
    const int h = intrinsics_.height, w = intrinsics_.width;
    switch (strategy_) {
        case NoiseStrategy::random: {
            NoiseMap2D a = iid_noise_map(h, w, channels_, rng);
            NoiseMap2D b = iid_noise_map(h, w, channels_, rng);
            return {std::move(a), std::move(b)};
        }
        case NoiseStrategy::consistent_3d: {
            const auto field = consistent_->sample_field(rng);
            return {consistent_->render(field, 0), consistent_->render(field, 1)};
        }
        case NoiseStrategy::bilinear_warp:
        case NoiseStrategy::nearest_warp: {
            NoiseMap2D nj = iid_noise_map(h, w, channels_, rng);
            NoiseMap2D ni = strategy_ == NoiseStrategy::bilinear_warp ? inverse_warp_smooth(nj, warp_)
                                                                      : inverse_warp(nj, warp_);
            for (std::size_t p = 0; p < ni.pixel_count(); ++p) {
                if (ni.covered(p)) continue;
                for (double& v : ni.px(p)) v = rng.normal();
                ni.coverage[p] = 1;
            }
            return {std::move(ni), std::move(nj)};
        }
    }
    throw std::logic_error("unreachable noise strategy");
}

Eigen::MatrixXd covariance_diag(const StrategySampler& sampler, const PatchRegion& patch,
                                int num_samples, Rng& rng) {
    require_samples(num_samples);
    AnalysisSetup dummy;
    dummy.intrinsics.width = sampler.depth_i().width();
    dummy.intrinsics.height = sampler.depth_i().height();
    require_patch(patch, dummy.intrinsics);
    AnalysisOptions opt;
    opt.patch_size = patch.size;
    opt.patch_x = patch.x;
    opt.patch_y = patch.y;
    return run(dummy, sampler, num_samples, rng, opt, {false, true, false}).patch_covariance;
}

CrossCorrelation cross_covariance(const AnalysisSetup& setup, const StrategySampler& sampler,
                                  int num_samples, Rng& rng) {
    return run(setup, sampler, num_samples, rng, {}, {false, false, true}).cross;
}

StatsReport normality_report(const AnalysisSetup& setup, const StrategySampler& sampler,
                             int num_samples, Rng& rng, const AnalysisOptions& options) {
    return run(setup, sampler, num_samples, rng, options, {});
}

std::vector<StatsReport> strategy_comparison(const AnalysisSetup& setup,
                                             const std::vector<NoiseStrategy>& strategies,
                                             int num_samples, Rng& rng,
                                             const AnalysisOptions& options) {
    require_samples(num_samples);
    const std::uint64_t base = rng.next_key();
    std::vector<StatsReport> out;
    for (NoiseStrategy s : strategies) {
        Rng sub(mix_key(base, static_cast<std::uint64_t>(s) + 1));
        const StrategySampler sampler(setup, s);
        out.push_back(normality_report(setup, sampler, num_samples, sub, options));
    }
    return out;
}

double max_offdiag_correlation(const Eigen::MatrixXd& cov) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < cov.rows(); ++i) {
        for (Eigen::Index j = 0; j < cov.cols(); ++j) {
            if (i == j) continue;
            const double denom = std::sqrt(cov(i, i) * cov(j, j));
            if (denom > 0.0) worst = std::max(worst, std::abs(cov(i, j) / denom));
        }
    }
    return worst;
}

VerdictDetail verdict(const StatsReport& r) {
    VerdictDetail v;
    const double m = static_cast<double>(r.value_count);
    if (m > 1) {
        v.mean_ok = std::abs(r.moments.mean) <= 4.0 / std::sqrt(m);
        v.variance_ok = std::abs(r.moments.variance - 1.0) <= 4.0 * std::sqrt(2.0 / m);
        v.kurtosis_ok = std::abs(r.moments.excess_kurtosis) <= 4.0 * std::sqrt(24.0 / m);
        v.ks_ok = r.ks.p_value >= 0.01;
        v.duplicates_ok = r.duplicate_rate == 0.0;
    }
    const Eigen::MatrixXd& cov = r.patch_covariance;
    if (cov.rows() > 1 && r.num_samples > 1) {
        const double s = r.num_samples;
        const double pairs = cov.rows() * (cov.rows() - 1) / 2.0;
        const double z = normal_quantile(1.0 - 0.01 / (2.0 * pairs));
        bool ok = max_offdiag_correlation(cov) <= z / std::sqrt(s);
        for (Eigen::Index i = 0; i < cov.rows(); ++i) {
            ok = ok && std::abs(cov(i, i) - 1.0) <= 4.0 * std::sqrt(2.0 / s);
        }
        v.covariance_ok = ok;
    }
    v.normal = v.mean_ok && v.variance_ok && v.kurtosis_ok && v.ks_ok && v.duplicates_ok &&
               v.covariance_ok;
    v.crossview = r.cross.pairs > 0 && r.cross.corresponding > 0.3 &&
                  r.cross.corresponding > 10.0 * std::abs(r.cross.non_corresponding);
    return v;
}

bool pass_normal(const StatsReport& r) { return verdict(r).normal; }
bool pass_crossview(const StatsReport& r) { return verdict(r).crossview; }

}  // namespace gsd
