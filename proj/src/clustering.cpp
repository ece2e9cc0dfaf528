#include "scfd/clustering.hpp"

#include <limits>
#include <map>

#include "scfd/parallel.hpp"

namespace scfd {

namespace {

struct WeightedRows {
    Eigen::MatrixXd U;                   // unique rows, first-occurrence order
    Eigen::VectorXd w;                   // multiplicities
    std::vector<std::size_t> unique_of;  // input row -> unique row
};

WeightedRows compress(const Eigen::MatrixXd& X) {
    WeightedRows out;
    std::map<std::vector<double>, std::size_t> seen;
    std::vector<std::size_t> firsts;
    std::vector<double> counts;
    out.unique_of.resize(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        std::vector<double> key(static_cast<std::size_t>(X.cols()));
        for (Eigen::Index j = 0; j < X.cols(); ++j) key[static_cast<std::size_t>(j)] = X(i, j);
        auto [it, inserted] = seen.emplace(std::move(key), firsts.size());
        if (inserted) {
            firsts.push_back(static_cast<std::size_t>(i));
            counts.push_back(0.0);
        }
        counts[it->second] += 1.0;
        out.unique_of[static_cast<std::size_t>(i)] = it->second;
    }
    out.U.resize(static_cast<Eigen::Index>(firsts.size()), X.cols());
    out.w.resize(static_cast<Eigen::Index>(firsts.size()));
    for (std::size_t u = 0; u < firsts.size(); ++u) {
        out.U.row(static_cast<Eigen::Index>(u)) = X.row(static_cast<Eigen::Index>(firsts[u]));
        out.w[static_cast<Eigen::Index>(u)] = counts[u];
    }
    return out;
}

struct Trial {
    std::vector<ClusterCentroid> centroids;
    std::vector<std::size_t> assign;  // over unique rows
    double td = 0.0;
    bool converged = true;
};

std::vector<std::size_t> assign_all(const Eigen::MatrixXd& U, const std::vector<ClusterCentroid>& cents,
                                    std::vector<double>* dist = nullptr) {
    std::vector<std::size_t> a(static_cast<std::size_t>(U.rows()));
    if (dist) dist->resize(a.size());
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
        auto [idx, d] = assign_closest(cents, U.row(i).transpose());
        a[static_cast<std::size_t>(i)] = idx;
        if (dist) (*dist)[static_cast<std::size_t>(i)] = d;
    }
    return a;
}

// Drops clusters with no members, renumbering `a` in place; returns old->new index map.
std::vector<long> compact(std::vector<std::size_t>& a, std::size_t k) {
    std::vector<char> used(k, 0);
    for (auto j : a) used[j] = 1;
    std::vector<long> remap(k, -1);
    long next = 0;
    for (std::size_t j = 0; j < k; ++j)
        if (used[j]) remap[j] = next++;
    for (auto& j : a) j = static_cast<std::size_t>(remap[j]);
    return remap;
}

std::vector<ClusterCentroid> reestimate(const WeightedRows& W, const std::vector<std::size_t>& a, std::size_t k,
                                        double ridge) {
    std::vector<std::vector<Eigen::Index>> members(k);
    for (std::size_t i = 0; i < a.size(); ++i) members[a[i]].push_back(static_cast<Eigen::Index>(i));
    std::vector<ClusterCentroid> out;
    out.reserve(k);
    for (const auto& m : members) {
        Eigen::MatrixXd rows(static_cast<Eigen::Index>(m.size()), W.U.cols());
        Eigen::VectorXd w(static_cast<Eigen::Index>(m.size()));
        for (std::size_t r = 0; r < m.size(); ++r) {
            rows.row(static_cast<Eigen::Index>(r)) = W.U.row(m[r]);
            w[static_cast<Eigen::Index>(r)] = W.w[m[r]];
        }
        out.push_back(estimate_centroid(rows, w, ridge));
    }
    return out;
}

Trial kmeans_weighted(const WeightedRows& W, std::vector<ClusterCentroid> cents, double ridge, int max_iters) {
    Trial t;
    t.converged = false;
    std::vector<std::size_t> prev;
    for (int it = 0; it < max_iters; ++it) {
        auto a = assign_all(W.U, cents);
        if (a == prev) {
            t.converged = true;
            break;
        }
        compact(a, cents.size());
        std::size_t k = 0;
        for (auto j : a) k = std::max(k, j + 1);
        cents = reestimate(W, a, k, ridge);
        prev = std::move(a);
    }
    std::vector<double> dist;
    t.assign = assign_all(W.U, cents, &dist);
    auto remap = compact(t.assign, cents.size());
    for (std::size_t j = 0; j < cents.size(); ++j)
        if (remap[j] >= 0) t.centroids.push_back(std::move(cents[j]));
    for (std::size_t i = 0; i < dist.size(); ++i) t.td += W.w[static_cast<Eigen::Index>(i)] * dist[i];
    return t;
}

ClusterSet expand(const WeightedRows& W, Trial&& t) {
    ClusterSet cs;
    cs.centroids = std::move(t.centroids);
    cs.total_distance = t.td;
    cs.converged = t.converged;
    cs.assignments.resize(W.unique_of.size());
    for (std::size_t i = 0; i < W.unique_of.size(); ++i) cs.assignments[i] = t.assign[W.unique_of[i]];
    return cs;
}

}  // namespace

std::pair<std::size_t, double> assign_closest(const std::vector<ClusterCentroid>& centroids, const Eigen::VectorXd& x,
                                              OpCounter* ops) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centroids.size(); ++j) {
        const double d = mahalanobis(centroids[j], x, ops);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return {best, best_d};
}

ClusterSet kmeans_refine(const Eigen::MatrixXd& X, std::vector<ClusterCentroid> initial, const GkmConfig& cfg) {
    if (initial.empty()) throw Error(Errc::InsufficientData, "k-means needs at least one initial centroid");
    const auto W = compress(X);
    return expand(W, kmeans_weighted(W, std::move(initial), cfg.ridge, cfg.max_iters));
}

ClusterSet global_kmeans(const Eigen::MatrixXd& X, const GkmConfig& cfg) {
    if (X.rows() == 0) throw Error(Errc::EmptyInput, "global k-means on an empty matrix");
    const auto W = compress(X);
    const ClusterCentroid glob = estimate_centroid(W.U, W.w, cfg.ridge);

    Trial cur = kmeans_weighted(W, {glob}, cfg.ridge, 0);
    cur.converged = true;
    std::vector<double> hist{cur.td};
    std::vector<long> seeds;

    const std::size_t stride = static_cast<std::size_t>(std::max(cfg.candidate_stride, 1));
    std::vector<std::size_t> cand_row, cand_unique;
    {
        std::vector<char> tried(static_cast<std::size_t>(W.U.rows()), 0);
        for (std::size_t n = 0; n < W.unique_of.size(); n += stride) {
            const auto u = W.unique_of[n];
            if (tried[u]) continue;  // same seed value as an earlier, lower-index trial
            tried[u] = 1;
            cand_row.push_back(n);
            cand_unique.push_back(u);
        }
    }

    double min_td = cur.td;
    Trial best = cur;
    for (int k = 2; k <= cfg.max_k && cur.td > cfg.bound_td; ++k) {
        std::vector<Trial> trials(cand_row.size());
        parallel_for(cand_row.size(), cfg.threads, [&](std::size_t i) {
            auto init = cur.centroids;
            ClusterCentroid seed;
            seed.mean = W.U.row(static_cast<Eigen::Index>(cand_unique[i])).transpose();
            seed.inv_cov = glob.inv_cov;
            seed.member_count = 1;
            init.push_back(std::move(seed));
            trials[i] = kmeans_weighted(W, std::move(init), cfg.ridge, cfg.max_iters);
        });
        long chosen = -1;
        for (std::size_t i = 0; i < trials.size(); ++i)
            if (trials[i].td < min_td) {
                min_td = trials[i].td;
                best = std::move(trials[i]);
                chosen = static_cast<long>(cand_row[i]);
            }
        if (chosen < 0) break;  // the next round would repeat these trials
        cur = best;
        hist.push_back(cur.td);
        seeds.push_back(chosen);
    }

    ClusterSet cs = expand(W, std::move(cur));
    cs.td_history = std::move(hist);
    cs.seed_history = std::move(seeds);
    return cs;
}

double total_distance(const Eigen::MatrixXd& X, const ClusterSet& cs) {
    if (cs.assignments.size() != static_cast<std::size_t>(X.rows()))
        throw Error(Errc::DimensionMismatch, "assignment count differs from row count");
    double td = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        td += mahalanobis(cs.centroids.at(cs.assignments[static_cast<std::size_t>(i)]), X.row(i).transpose());
    return td;
}

}  // namespace scfd
