#include "scfd/stats.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace scfd {

DimReduction fit_reduction(const TrainingSet& ts) {
    if (ts.rows.empty()) throw Error(Errc::EmptyInput, "training set has no rows");
    const std::size_t D = ts.alphabet.size();
    DimReduction r;
    for (std::size_t d = 0; d < D; ++d) {
        const std::int64_t v0 = ts.rows.front().counts.at(d);
        bool constant = true;
        for (const auto& row : ts.rows)
            if (row.counts.at(d) != v0) {
                constant = false;
                break;
            }
        if (constant) {
            r.merged.push_back(d);
            r.residual_expected += v0;
        } else {
            r.kept.push_back(d);
        }
    }
    return r;
}

Reduced apply_reduction(const DimReduction& r, const Scfd& x) {
    if (x.counts.size() != r.input_dim())
        throw Error(Errc::DimensionMismatch, "SCFD has " + std::to_string(x.counts.size()) + " coordinates, reduction expects " +
                                                 std::to_string(r.input_dim()));
    Reduced out;
    out.x.resize(static_cast<Eigen::Index>(r.kept.size()));
    for (std::size_t j = 0; j < r.kept.size(); ++j) out.x[static_cast<Eigen::Index>(j)] = static_cast<double>(x.counts[r.kept[j]]);
    for (auto m : r.merged) out.residual_sum += x.counts[m];
    return out;
}

Eigen::MatrixXd reduce_all(const DimReduction& r, const TrainingSet& ts) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(ts.rows.size()), static_cast<Eigen::Index>(r.reduced_dim()));
    for (std::size_t i = 0; i < ts.rows.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = apply_reduction(r, ts.rows[i]).x.transpose();
    return X;
}

ClusterCentroid estimate_centroid(const Eigen::MatrixXd& rows, double ridge) {
    return estimate_centroid(rows, Eigen::VectorXd::Ones(rows.rows()), ridge);
}

ClusterCentroid estimate_centroid(const Eigen::MatrixXd& rows, const Eigen::VectorXd& weights, double ridge) {
    if (rows.rows() == 0) throw Error(Errc::InsufficientData, "centroid of an empty row set");
    if (weights.size() != rows.rows()) throw Error(Errc::DimensionMismatch, "weight count differs from row count");
    if (!(ridge >= 0)) throw Error(Errc::OutOfRange, "ridge must be nonnegative");
    const Eigen::Index D = rows.cols();
    const double W = weights.sum();

    ClusterCentroid c;
    c.member_count = static_cast<std::size_t>(std::llround(W));
    c.mean = (rows.transpose() * weights) / W;

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(D, D);
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        const Eigen::VectorXd d = rows.row(i).transpose() - c.mean;
        cov.noalias() += weights[i] * d * d.transpose();
    }
    cov /= std::max(W - 1.0, 1.0);

    if (D == 0) {
        c.inv_cov.resize(0, 0);
        return c;
    }
    const double lambda = ridge * (cov.trace() / static_cast<double>(D) + 1.0);
    cov.diagonal().array() += lambda;

    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw Error(Errc::SingularCovariance, "covariance is not positive definite");
    Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(D, D));
    if (!inv.allFinite()) throw Error(Errc::SingularCovariance, "covariance inverse is not finite");
    c.inv_cov = 0.5 * (inv + inv.transpose());
    return c;
}

double mahalanobis(const ClusterCentroid& c, const Eigen::VectorXd& x, OpCounter* ops) {
    const Eigen::Index D = c.mean.size();
    if (x.size() != D) throw Error(Errc::DimensionMismatch, "query has dimension " + std::to_string(x.size()));
    const double* A = c.inv_cov.data();  // column-major; symmetric, so A(i,j) == A[i*D+j]
    double q = 0.0;
    for (Eigen::Index i = 0; i < D; ++i) {
        const double* col = A + i * D;
        double t = 0.0;
        for (Eigen::Index j = 0; j < D; ++j) t += col[j] * (x[j] - c.mean[j]);
        q += (x[i] - c.mean[i]) * t;
    }
    if (ops) ops->madds += static_cast<std::uint64_t>(D * D + D);
    return std::sqrt(std::max(q, 0.0));
}

namespace math {

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;
constexpr double kTailLimit = 3.0;

// erfc(x) * sqrt(pi) * exp(x^2) = 1/(x + (1/2)/(x + (2/2)/(x + (3/2)/(x + ...)))), evaluated backward.
double erfc_cf(double x) {
    double t = x;
    for (int n = 120; n >= 1; --n) t = x + (0.5 * n) / t;
    return 1.0 / t;
}

// Initial guess from a rational approximation of the standard normal quantile.
double normal_quantile_guess(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01,  -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - p_low) return -normal_quantile_guess(1.0 - p);
    const double q = p - 0.5, r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double erf(double x) { return std::erf(x); }

double erfc(double x) { return std::erfc(x); }

double log_erfc(double x) {
    if (x < kTailLimit) return std::log(std::erfc(x));
    return -x * x - std::log(kSqrtPi) + std::log(erfc_cf(x));
}

double erfc_inv(double q) {
    if (!(q > 0.0 && q < 2.0)) {
        if (q == 0.0) return std::numeric_limits<double>::infinity();
        if (q == 2.0) return -std::numeric_limits<double>::infinity();
        return std::numeric_limits<double>::quiet_NaN();
    }
    if (q > 1.0) return -erfc_inv(2.0 - q);
    if (q == 1.0) return 0.0;
    // erfc(x) = 2 Phi(-x sqrt 2), so x = -Phi^-1(q/2) / sqrt 2.
    double x = -normal_quantile_guess(0.5 * q) / std::numbers::sqrt2;
    const double target = std::log(q);
    for (int it = 0; it < 60; ++it) {
        const double le = log_erfc(x);
        // d/dx log erfc(x) = -2/sqrt(pi) * exp(-x^2) / erfc(x)
        const double slope = -2.0 / kSqrtPi * std::exp(-x * x - le);
        const double dx = (le - target) / slope;
        x -= dx;
        if (std::abs(dx) <= 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    return x;
}

double erf_inv(double y) {
    if (!(y > -1.0 && y < 1.0)) {
        if (y == 1.0) return std::numeric_limits<double>::infinity();
        if (y == -1.0) return -std::numeric_limits<double>::infinity();
        return std::numeric_limits<double>::quiet_NaN();
    }
    return erfc_inv(1.0 - y);
}

}  // namespace math

Cutoff compute_cutoff(double p0) {
    if (!(p0 > 0.0 && p0 <= 1.0)) throw Error(Errc::OutOfRange, "p0 must lie in (0, 1]");
    // erf^-1(1 - p0) == erfc^-1(p0), and the latter keeps full precision for small p0.
    return Cutoff{p0, p0 == 1.0 ? 0.0 : math::erfc_inv(p0) / kCutoffScale};
}

}  // namespace scfd
