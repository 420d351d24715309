// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace gsd {

struct Moments {
    std::size_t count = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
};

/// Throws on fewer than two samples.
Moments compute_moments(std::span<const double> xs);

double normal_cdf(double x);
/// Inverse of normal_cdf on (0, 1).
double normal_quantile(double p);

struct KsResult {
    std::size_t n = 0;
    double statistic = 0.0;
    double p_value = 0.0;
};

/// One-sample Kolmogorov-Smirnov test against N(0, 1).
KsResult ks_test_normal(std::vector<double> sample);

/// P(K > lambda) for the Kolmogorov distribution.
double kolmogorov_survival(double lambda);

double pearson_correlation(std::span<const double> a, std::span<const double> b);

/// Unbiased covariance of `samples` (rows are observations).
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& samples);

}  // namespace gsd
