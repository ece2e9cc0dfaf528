/**
 * @file oracles.hpp
 * @brief Straightforward reference implementations used to cross-check the
 *        library: clustering without row compression or threads, and
 *        sequence-model probabilities by direct n-gram counting.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

struct Centroid {
    Eigen::VectorXd mean;
    Eigen::MatrixXd inv;
};

inline Centroid estimate(const std::vector<Eigen::VectorXd>& pts, double ridge) {
    const auto d = pts.front().size();
    Centroid c;
    c.mean = Eigen::VectorXd::Zero(d);
    for (const auto& p : pts) c.mean += p;
    c.mean /= static_cast<double>(pts.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (const auto& p : pts)
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) cov(i, j) += (p[i] - c.mean[i]) * (p[j] - c.mean[j]);
    cov /= std::max<double>(static_cast<double>(pts.size()) - 1.0, 1.0);
    const double lambda = ridge * (cov.trace() / static_cast<double>(d) + 1.0);
    c.inv = (cov + lambda * Eigen::MatrixXd::Identity(d, d)).fullPivLu().inverse();
    return c;
}

inline double dist(const Centroid& c, const Eigen::VectorXd& x) {
    double q = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        for (Eigen::Index j = 0; j < x.size(); ++j) q += (x[i] - c.mean[i]) * c.inv(i, j) * (x[j] - c.mean[j]);
    return std::sqrt(std::max(q, 0.0));
}

struct State {
    std::vector<Centroid> cents;
    std::vector<std::size_t> assign;
    double td = 0.0;
};

inline std::vector<std::size_t> assign_all(const std::vector<Eigen::VectorXd>& X, const std::vector<Centroid>& C,
                                           std::vector<double>* d = nullptr) {
    std::vector<std::size_t> a(X.size());
    if (d) d->assign(X.size(), 0.0);
    for (std::size_t n = 0; n < X.size(); ++n) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < C.size(); ++j) {
            const double v = dist(C[j], X[n]);
            if (v < best) {
                best = v;
                a[n] = j;
            }
        }
        if (d) (*d)[n] = best;
    }
    return a;
}

// Relabels to 0..k'-1 in index order, removing unused labels; returns the kept labels.
inline std::vector<std::size_t> relabel(std::vector<std::size_t>& a, std::size_t k) {
    std::vector<std::size_t> kept;
    std::vector<long> map(k, -1);
    for (std::size_t j = 0; j < k; ++j)
        for (auto v : a)
            if (v == j) {
                map[j] = static_cast<long>(kept.size());
                kept.push_back(j);
                break;
            }
    for (auto& v : a) v = static_cast<std::size_t>(map[v]);
    return kept;
}

inline State kmeans(const std::vector<Eigen::VectorXd>& X, std::vector<Centroid> C, double ridge, int max_iters) {
    std::vector<std::size_t> prev;
    for (int it = 0; it < max_iters; ++it) {
        auto a = assign_all(X, C);
        if (a == prev) break;
        const auto kept = relabel(a, C.size());
        C.clear();
        for (std::size_t j = 0; j < kept.size(); ++j) {
            std::vector<Eigen::VectorXd> m;
            for (std::size_t n = 0; n < X.size(); ++n)
                if (a[n] == j) m.push_back(X[n]);
            C.push_back(estimate(m, ridge));
        }
        prev = a;
    }
    State s;
    std::vector<double> d;
    s.assign = assign_all(X, C, &d);
    for (auto j : relabel(s.assign, C.size())) s.cents.push_back(C[j]);
    for (double v : d) s.td += v;
    return s;
}

/// Best total distance after each k (index 0 is k=1), trying every row as the
/// next seed from the current best state, in the order of the incremental
/// algorithm. Ends early when a round finds nothing below the best so far.
inline std::vector<double> global_kmeans_history(const std::vector<Eigen::VectorXd>& X, int max_k, double bound,
                                                 double ridge, int max_iters) {
    const Centroid glob = estimate(X, ridge);
    State cur = kmeans(X, {glob}, ridge, 0);
    std::vector<double> hist{cur.td};
    double min_td = cur.td;
    State best = cur;
    for (int k = 2; k <= max_k && cur.td > bound; ++k) {
        bool improved = false;
        for (const auto& seed : X) {
            auto init = cur.cents;
            init.push_back({seed, glob.inv});
            State t = kmeans(X, init, ridge, max_iters);
            if (t.td < min_td) {
                min_td = t.td;
                best = t;
                improved = true;
            }
        }
        if (!improved) break;
        cur = best;
        hist.push_back(cur.td);
    }
    return hist;
}

/// Lowest total distance reachable at depth k over every sequence of seed rows.
inline double best_over_seed_sequences(const std::vector<Eigen::VectorXd>& X, int k, double ridge, int max_iters) {
    const Centroid glob = estimate(X, ridge);
    double best = std::numeric_limits<double>::infinity();
    auto rec = [&](auto&& self, const std::vector<Centroid>& C, int left) -> void {
        for (const auto& seed : X) {
            auto init = C;
            init.push_back({seed, glob.inv});
            State t = kmeans(X, init, ridge, max_iters);
            if (left == 1) best = std::min(best, t.td);
            else self(self, t.cents, left - 1);
        }
    };
    if (k == 1) return kmeans(X, {glob}, ridge, 0).td;
    rec(rec, {glob}, k - 1);
    return best;
}

/// P(sym | longest context of length <= depth, within one sequence, seen in training).
inline std::vector<double> ngram_scores(const std::vector<std::vector<std::string>>& train,
                                        const std::vector<std::string>& test, int depth) {
    auto count_context = [&](const std::vector<std::string>& ctx, const std::string* next) {
        std::uint64_t c = 0;
        for (const auto& t : train)
            for (std::size_t i = ctx.size(); i < t.size(); ++i) {
                bool match = true;
                for (std::size_t l = 0; l < ctx.size() && match; ++l) match = t[i - ctx.size() + l] == ctx[l];
                if (match && (!next || t[i] == *next)) ++c;
            }
        return c;
    };
    std::vector<double> out;
    for (std::size_t i = 0; i < test.size(); ++i) {
        double p = 0.0;
        const std::size_t lmax = std::min<std::size_t>(static_cast<std::size_t>(depth), i);
        for (std::size_t l = lmax + 1; l-- > 0;) {
            const std::vector<std::string> ctx(test.begin() + static_cast<long>(i - l), test.begin() + static_cast<long>(i));
            const auto total = count_context(ctx, nullptr);
            if (total == 0) continue;
            p = static_cast<double>(count_context(ctx, &test[i])) / static_cast<double>(total);
            break;
        }
        out.push_back(p);
    }
    return out;
}

}  // namespace oracle
