/**
 * @file clustering.hpp
 * @brief k-means under per-cluster Mahalanobis metrics, and the incremental
 *        global k-means driver.
 */
#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "scfd/stats.hpp"

namespace scfd {

struct GkmConfig {
    int max_k = 10;
    double bound_td = 1000.0;
    double ridge = kDefaultRidge;
    int max_iters = 100;
    int candidate_stride = 1;
    int threads = 1;  ///< seed trials evaluated concurrently; results do not depend on it

    bool operator==(const GkmConfig&) const = default;
};

struct ClusterSet {
    std::vector<ClusterCentroid> centroids;
    std::vector<std::size_t> assignments;  ///< one per input row
    double total_distance = 0.0;
    bool converged = true;

    /// global_kmeans only: best total distance after each k (index 0 is k=1),
    /// and the seed row chosen at each k >= 2.
    std::vector<double> td_history;
    std::vector<long> seed_history;
};

/// Closest centroid and its distance; ties go to the lowest index.
std::pair<std::size_t, double> assign_closest(const std::vector<ClusterCentroid>& centroids, const Eigen::VectorXd& x,
                                              OpCounter* ops = nullptr);

/// Rows of X are observations. Alternates assignment and re-estimation until
/// the assignment repeats or cfg.max_iters passes; empty clusters are dropped.
ClusterSet kmeans_refine(const Eigen::MatrixXd& X, std::vector<ClusterCentroid> initial, const GkmConfig& cfg);

/**
 * Incremental global k-means. Starting from one cluster over all rows, each
 * round seeds a new cluster at every candidate row (every
 * cfg.candidate_stride-th), refines, and keeps the trial with the lowest
 * total distance seen so far, the single-cluster start included. New seeds
 * carry the global inverse covariance. Stops once the current total distance
 * is at most cfg.bound_td, k exceeds cfg.max_k, or a round improves on
 * nothing, so the total distance never grows with k.
 *
 * Identical rows are collapsed into weighted rows first; this is exact, since
 * identical rows are always co-assigned and identical seeds give identical
 * trials.
 */
ClusterSet global_kmeans(const Eigen::MatrixXd& X, const GkmConfig& cfg);

/// Sum over rows of the distance to the assigned centroid, from scratch.
double total_distance(const Eigen::MatrixXd& X, const ClusterSet& cs);

}  // namespace scfd
