#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "prefrank/core.hpp"

namespace prefrank {

struct TruthItem {
    ItemIndex item;
    double rating;
};

namespace detail {

inline void check_ranking(std::span<const Rank> ranks, std::span<const TruthItem> truth) {
    for (const TruthItem& t : truth)
        if (t.item >= ranks.size()) throw IndexOutOfRangeError("item", t.item, ranks.size());
}

/// Test items sorted by predicted rank, most preferred first.
inline std::vector<TruthItem> by_prediction(std::span<const Rank> ranks,
                                            std::span<const TruthItem> truth) {
    std::vector<TruthItem> order(truth.begin(), truth.end());
    std::sort(order.begin(), order.end(), [&](const TruthItem& a, const TruthItem& b) {
        return ranks[a.item] > ranks[b.item];
    });
    return order;
}

}  // namespace detail

/// Kendall tau over test-item pairs with distinct true ratings:
/// (concordant - discordant) / total. Tied-truth pairs are skipped.
inline double kendall_tau(std::span<const Rank> ranks, std::span<const TruthItem> truth) {
    detail::check_ranking(ranks, truth);
    std::int64_t concordant = 0, discordant = 0, total = 0;
    for (std::size_t a = 0; a < truth.size(); ++a) {
        for (std::size_t b = a + 1; b < truth.size(); ++b) {
            const double dr = truth[a].rating - truth[b].rating;
            if (dr == 0.0) continue;
            ++total;
            const double ds = static_cast<double>(ranks[truth[a].item]) -
                              static_cast<double>(ranks[truth[b].item]);
            if (dr * ds > 0.0) ++concordant;
            else ++discordant;
        }
    }
    if (total == 0) throw InsufficientPairsError(truth.size());
    return static_cast<double>(concordant - discordant) / static_cast<double>(total);
}

/// Spearman rho: Pearson correlation of within-test-set prediction ranks
/// against tie-averaged true-rating ranks.
inline double spearman_rho(std::span<const Rank> ranks, std::span<const TruthItem> truth) {
    detail::check_ranking(ranks, truth);
    const std::size_t n = truth.size();
    if (n < 2) throw InsufficientPairsError(n);

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    // prediction ranks 1..n (no ties: ranks restricted to distinct items)
    std::vector<double> pred(n);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return ranks[truth[a].item] < ranks[truth[b].item];
    });
    for (std::size_t pos = 0; pos < n; ++pos) pred[order[pos]] = static_cast<double>(pos + 1);

    // truth ranks with average ranks on ties
    std::vector<double> tr(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return truth[a].rating < truth[b].rating;
    });
    for (std::size_t pos = 0; pos < n;) {
        std::size_t end = pos;
        while (end < n && truth[order[end]].rating == truth[order[pos]].rating) ++end;
        const double avg = (static_cast<double>(pos + 1) + static_cast<double>(end)) / 2.0;
        for (std::size_t t = pos; t < end; ++t) tr[order[t]] = avg;
        pos = end;
    }

    const double mp = std::accumulate(pred.begin(), pred.end(), 0.0) / static_cast<double>(n);
    const double mt = std::accumulate(tr.begin(), tr.end(), 0.0) / static_cast<double>(n);
    double cov = 0.0, vp = 0.0, vt = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        cov += (pred[t] - mp) * (tr[t] - mt);
        vp += (pred[t] - mp) * (pred[t] - mp);
        vt += (tr[t] - mt) * (tr[t] - mt);
    }
    if (vt == 0.0) throw ConstantTruthError();
    return cov / std::sqrt(vp * vt);
}

/// NDCG over the top-k predicted test items, gain = raw rating, discount
/// 1/log2(position + 1), normalized by the ideal ordering of the same items.
inline double ndcg_at_k(std::span<const Rank> ranks, std::span<const TruthItem> truth,
                        std::size_t k) {
    if (truth.empty()) throw InsufficientItemsError(0, 1);
    detail::check_ranking(ranks, truth);

    const std::size_t depth = std::min(k, truth.size());
    const std::vector<TruthItem> predicted = detail::by_prediction(ranks, truth);
    std::vector<double> ideal_gains;
    ideal_gains.reserve(truth.size());
    for (const TruthItem& t : truth) ideal_gains.push_back(t.rating);
    std::sort(ideal_gains.begin(), ideal_gains.end(), std::greater<>());

    double dcg = 0.0, idcg = 0.0;
    for (std::size_t pos = 0; pos < depth; ++pos) {
        const double discount = 1.0 / std::log2(static_cast<double>(pos) + 2.0);
        dcg += predicted[pos].rating * discount;
        idcg += ideal_gains[pos] * discount;
    }
    if (idcg == 0.0) return dcg == 0.0 ? 1.0 : 0.0;
    return dcg / idcg;
}

/// Fraction of the top-k predicted test items whose true rating reaches the
/// relevance threshold (the paper deems quantized rating 5 relevant).
inline double precision_at_k(std::span<const Rank> ranks, std::span<const TruthItem> truth,
                             std::size_t k, double relevance_threshold = 5.0) {
    if (truth.size() < k) throw InsufficientItemsError(truth.size(), k);
    detail::check_ranking(ranks, truth);
    const std::vector<TruthItem> predicted = detail::by_prediction(ranks, truth);
    std::size_t relevant = 0;
    for (std::size_t pos = 0; pos < k; ++pos)
        if (predicted[pos].rating >= relevance_threshold) ++relevant;
    return k == 0 ? 0.0 : static_cast<double>(relevant) / static_cast<double>(k);
}

/// dis_eps(sigma, H): pairwise disagreements with the true ratings, counting
/// only pairs whose latent utilities are more than eps apart. Needs the full
/// synthetic F and H.
inline std::uint64_t dis_eps(const RankingCollection& sigma, const DenseMatrix& f_values,
                             const DenseMatrix& h_values, double eps) {
    if (f_values.n_items() != sigma.n_items() || f_values.n_users() != sigma.n_users() ||
        h_values.n_items() != sigma.n_items() || h_values.n_users() != sigma.n_users())
        throw ShapeMismatchError("dis_eps needs F, H, and sigma with identical shapes");

    const std::size_t n_items = sigma.n_items();
    std::uint64_t count = 0;
    for (UserIndex u = 0; u < sigma.n_users(); ++u) {
        const auto f = f_values.user_column(u);
        const auto h = h_values.user_column(u);
        const auto ranks = sigma.user_ranking(u);
        for (ItemIndex i = 0; i < n_items; ++i) {
            for (ItemIndex j = i + 1; j < n_items; ++j) {
                if (std::abs(f[i] - f[j]) <= eps) continue;
                const double dh = h[i] - h[j];
                const double ds = static_cast<double>(ranks[i]) - static_cast<double>(ranks[j]);
                if (dh * ds < 0.0) ++count;
            }
        }
    }
    return count;
}

/// dis-hat(sigma, H): disagreements with the observed rating pairs only.
inline std::uint64_t dis_hat(const RankingCollection& sigma, const SparseRatingMatrix& m) {
    if (m.n_items() != sigma.n_items() || m.n_users() != sigma.n_users())
        throw ShapeMismatchError("dis_hat needs sigma shaped like the matrix");
    std::uint64_t count = 0;
    for (UserIndex u = 0; u < m.n_users(); ++u) {
        const auto items = m.rated_items(u);
        const auto values = m.user_ratings(u);
        const auto ranks = sigma.user_ranking(u);
        for (std::size_t a = 0; a < items.size(); ++a) {
            for (std::size_t b = a + 1; b < items.size(); ++b) {
                const double dh = values[a] - values[b];
                const double ds = static_cast<double>(ranks[items[a]]) -
                                  static_cast<double>(ranks[items[b]]);
                if (dh * ds < 0.0) ++count;
            }
        }
    }
    return count;
}

struct ConsistencyViolation {
    ItemIndex i;
    ItemIndex j;
    UserIndex u;
    UserIndex v;

    friend bool operator==(const ConsistencyViolation&, const ConsistencyViolation&) = default;
};

namespace detail {

template <class PairInT>
std::vector<ConsistencyViolation> consistency_scan(const RankingCollection& sigma,
                                                   std::span<const double> user_features,
                                                   std::size_t feat_dim, double eps,
                                                   PairInT&& in_t) {
    const std::size_t n_users = sigma.n_users();
    const std::size_t n_items = sigma.n_items();
    if (user_features.size() != n_users * feat_dim)
        throw ShapeMismatchError("user feature buffer does not match n_users * feat_dim");

    std::vector<ConsistencyViolation> out;
    for (UserIndex u = 0; u < n_users; ++u) {
        const double* yu = user_features.data() + static_cast<std::size_t>(u) * feat_dim;
        const auto ru = sigma.user_ranking(u);
        for (UserIndex v = u + 1; v < n_users; ++v) {
            const double* yv = user_features.data() + static_cast<std::size_t>(v) * feat_dim;
            double d2 = 0.0;
            for (std::size_t t = 0; t < feat_dim; ++t) {
                const double d = yu[t] - yv[t];
                d2 += d * d;
            }
            if (std::sqrt(d2) > eps) continue;
            const auto rv = sigma.user_ranking(v);
            for (ItemIndex i = 0; i < n_items; ++i) {
                for (ItemIndex j = i + 1; j < n_items; ++j) {
                    if (!in_t(i, j, u) || !in_t(i, j, v)) continue;
                    const bool u_prefers_i = ru[i] > ru[j];
                    const bool v_prefers_i = rv[i] > rv[j];
                    if (u_prefers_i != v_prefers_i) out.push_back({i, j, u, v});
                }
            }
        }
    }
    return out;
}

}  // namespace detail

/// All quadruples (i, j, u, v) with d(y_u, y_v) <= eps on which the two users
/// order the pair differently; empty exactly when sigma is eps-consistent.
/// Reported once per unordered pair (i < j, u < v).
inline std::vector<ConsistencyViolation> eps_consistency_violations(
    const RankingCollection& sigma, std::span<const double> user_features, std::size_t feat_dim,
    double eps) {
    return detail::consistency_scan(sigma, user_features, feat_dim, eps,
                                    [](ItemIndex, ItemIndex, UserIndex) { return true; });
}

/// Restriction to T = {(i, j, u) : |F_iu - F_ju| > gap_eps and H_iu != H_ju};
/// both users' triples must lie in T for a pair to be eligible.
inline std::vector<ConsistencyViolation> eps_consistency_violations(
    const RankingCollection& sigma, std::span<const double> user_features, std::size_t feat_dim,
    double eps, const DenseMatrix& f_values, const DenseMatrix& h_values, double gap_eps) {
    if (f_values.n_items() != sigma.n_items() || f_values.n_users() != sigma.n_users() ||
        h_values.n_items() != sigma.n_items() || h_values.n_users() != sigma.n_users())
        throw ShapeMismatchError("T restriction needs F and H shaped like sigma");
    return detail::consistency_scan(
        sigma, user_features, feat_dim, eps, [&](ItemIndex i, ItemIndex j, UserIndex u) {
            return std::abs(f_values.at(i, u) - f_values.at(j, u)) > gap_eps &&
                   h_values.at(i, u) != h_values.at(j, u);
        });
}

struct PerUserMetric {
    std::vector<std::pair<UserIndex, double>> values;
    double mean = 0.0;
    double stddev = 0.0;

    void finalize() {
        if (values.empty()) {
            mean = stddev = 0.0;
            return;
        }
        double s = 0.0;
        for (const auto& [u, x] : values) s += x;
        mean = s / static_cast<double>(values.size());
        double v = 0.0;
        for (const auto& [u, x] : values) v += (x - mean) * (x - mean);
        stddev = std::sqrt(v / static_cast<double>(values.size()));
    }
};

/// Macro-averaged ranking metrics over one test split. Users enter each
/// metric only when it is defined for them (enough items, a distinct-rating
/// pair, non-constant truth).
struct MetricReport {
    std::size_t k = 5;
    double relevance_threshold = 5.0;
    std::size_t users_evaluated = 0;  // users holding at least one test item
    PerUserMetric kendall_tau;
    PerUserMetric spearman_rho;
    PerUserMetric ndcg;
    PerUserMetric precision;

    nlohmann::json to_json() const;
};

inline MetricReport compute_metric_report(const RankingCollection& sigma,
                                          const SparseRatingMatrix& test, std::size_t k,
                                          double relevance_threshold = 5.0) {
    if (test.n_items() != sigma.n_items() || test.n_users() != sigma.n_users())
        throw ShapeMismatchError("test matrix must be shaped like sigma");
    MetricReport report;
    report.k = k;
    report.relevance_threshold = relevance_threshold;

    for (UserIndex u = 0; u < test.n_users(); ++u) {
        const auto items = test.rated_items(u);
        if (items.empty()) continue;
        ++report.users_evaluated;
        const auto values = test.user_ratings(u);
        std::vector<TruthItem> truth(items.size());
        for (std::size_t t = 0; t < items.size(); ++t) truth[t] = {items[t], values[t]};
        const auto ranks = sigma.user_ranking(u);

        bool has_distinct = false;
        bool constant = true;
        for (std::size_t t = 1; t < truth.size(); ++t) {
            if (truth[t].rating != truth[0].rating) {
                has_distinct = true;
                constant = false;
                break;
            }
        }
        if (truth.size() >= 2 && has_distinct)
            report.kendall_tau.values.emplace_back(u, kendall_tau(ranks, truth));
        if (truth.size() >= 2 && !constant)
            report.spearman_rho.values.emplace_back(u, spearman_rho(ranks, truth));
        report.ndcg.values.emplace_back(u, ndcg_at_k(ranks, truth, k));
        if (truth.size() >= k)
            report.precision.values.emplace_back(
                u, precision_at_k(ranks, truth, k, relevance_threshold));
    }
    report.kendall_tau.finalize();
    report.spearman_rho.finalize();
    report.ndcg.finalize();
    report.precision.finalize();
    return report;
}

}  // namespace prefrank
