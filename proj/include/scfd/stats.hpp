// Dimension reduction, centroid estimation, Mahalanobis distance and the
// significance-level cutoff.
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "scfd/trace_model.hpp"

namespace scfd {

struct DimReduction {
    std::vector<std::size_t> kept;    // variable coordinates, ascending
    std::vector<std::size_t> merged;  // zero-variance coordinates, ascending
    std::int64_t residual_expected = 0;

    std::size_t input_dim() const { return kept.size() + merged.size(); }
    std::size_t reduced_dim() const { return kept.size(); }
    bool operator==(const DimReduction&) const = default;
};

struct Reduced {
    Eigen::VectorXd x;
    std::int64_t residual_sum = 0;
};

DimReduction fit_reduction(const TrainingSet& ts);
Reduced apply_reduction(const DimReduction& r, const Scfd& x);
/// N x D' matrix of reduced rows.
Eigen::MatrixXd reduce_all(const DimReduction& r, const TrainingSet& ts);

struct ClusterCentroid {
    Eigen::VectorXd mean;
    Eigen::MatrixXd inv_cov;  // (Sigma + lambda I)^-1
    std::size_t member_count = 0;
};

constexpr double kDefaultRidge = 1e-6;

/// Rows of `rows` are observations. lambda = ridge * (trace(Sigma)/D' + 1).
ClusterCentroid estimate_centroid(const Eigen::MatrixXd& rows, double ridge = kDefaultRidge);
/// Weighted form: observation i stands for weights[i] identical rows, so the
/// result equals the unweighted estimate over the expanded rows.
ClusterCentroid estimate_centroid(const Eigen::MatrixXd& rows, const Eigen::VectorXd& weights, double ridge);

/// Counts multiply-adds spent in distance evaluation.
struct OpCounter {
    std::uint64_t madds = 0;
};

/// sqrt(d' A d) with d = x - mean, in D'^2 + D' multiply-adds.
double mahalanobis(const ClusterCentroid& c, const Eigen::VectorXd& x, OpCounter* ops = nullptr);

struct Cutoff {
    double p0 = 0.05;
    double theta = 0.0;
    bool operator==(const Cutoff&) const = default;
};

/// Scale constant in the cutoff formula theta = erfinv(1 - p0) / kCutoffScale.
constexpr double kCutoffScale = 0.707107;

Cutoff compute_cutoff(double p0);

namespace math {
double erf(double x);
double erfc(double x);
/// log(erfc(x)) without underflow for large x; a continued fraction above 3.
double log_erfc(double x);
/// Solves erfc(x) = q for q in (0, 2).
double erfc_inv(double q);
/// erf^-1(y) for y in (-1, 1).
double erf_inv(double y);
}  // namespace math

}  // namespace scfd
