#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "prefrank/core.hpp"

namespace prefrank {

enum class AgreementMode {
    nonoverlapping,  // consecutive disjoint pairs from the sorted common-item list
    all_pairs,       // every pair of commonly rated items
};

/// R_{u,v} together with the number of item pairs it was computed over.
/// value * pair_count is the integer count of agreeing pairs; pair_count = 0
/// forces value = 0.
struct AgreementStat {
    double value = 0.0;
    std::uint64_t pair_count = 0;
    AgreementMode mode = AgreementMode::nonoverlapping;
};

/// N(u, v): ascending intersection of the two users' rated-item sets.
inline std::vector<ItemIndex> common_items(const SparseRatingMatrix& m, UserIndex u, UserIndex v) {
    if (u == v) throw SameUserError(u);
    auto a = m.rated_items(u);
    auto b = m.rated_items(v);
    std::vector<ItemIndex> out;
    out.reserve(std::min(a.size(), b.size()));
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

/// I(u, v) selection: (common[0], common[1]), (common[2], common[3]), ...;
/// a trailing odd element is dropped. Input must be sorted ascending.
inline std::vector<std::pair<ItemIndex, ItemIndex>> nonoverlap_pairs(
    std::span<const ItemIndex> common) {
    std::vector<std::pair<ItemIndex, ItemIndex>> out;
    out.reserve(common.size() / 2);
    for (std::size_t l = 0; l + 1 < common.size(); l += 2)
        out.emplace_back(common[l], common[l + 1]);
    return out;
}

namespace detail {

/// Strictly discordant pairs between two aligned value vectors: #{s < t :
/// (a_s - a_t)(b_s - b_t) < 0}. Pairs tied in either vector do not count.
/// O(n log n): sort by (a asc, b asc), then strict inversions of the b
/// sequence are exactly the discordant pairs (ties in a are b-sorted, so
/// contribute none).
inline std::uint64_t count_discordant(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    std::vector<std::uint32_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
    std::sort(order.begin(), order.end(), [&](std::uint32_t x, std::uint32_t y) {
        if (a[x] != a[y]) return a[x] < a[y];
        return b[x] < b[y];
    });

    std::vector<double> seq(n), tmp(n);
    for (std::size_t i = 0; i < n; ++i) seq[i] = b[order[i]];

    std::uint64_t inversions = 0;
    // bottom-up merge counting strict descents across halves
    for (std::size_t width = 1; width < n; width *= 2) {
        for (std::size_t lo = 0; lo + width < n; lo += 2 * width) {
            const std::size_t mid = lo + width;
            const std::size_t hi = std::min(lo + 2 * width, n);
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (seq[j] < seq[i]) {
                    inversions += mid - i;
                    tmp[k++] = seq[j++];
                } else {
                    tmp[k++] = seq[i++];
                }
            }
            while (i < mid) tmp[k++] = seq[i++];
            while (j < hi) tmp[k++] = seq[j++];
            std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo),
                      tmp.begin() + static_cast<std::ptrdiff_t>(hi),
                      seq.begin() + static_cast<std::ptrdiff_t>(lo));
        }
    }
    return inversions;
}

/// Agreement statistic over two aligned rating vectors (the ratings of users
/// u and v on their common items, ascending item order).
inline AgreementStat agreement_from_vectors(std::span<const double> hu, std::span<const double> hv,
                                            AgreementMode mode) {
    AgreementStat stat;
    stat.mode = mode;
    const std::size_t n = hu.size();
    if (mode == AgreementMode::nonoverlapping) {
        std::uint64_t agreements = 0;
        std::uint64_t pairs = 0;
        for (std::size_t l = 0; l + 1 < n; l += 2) {
            ++pairs;
            if ((hu[l] - hu[l + 1]) * (hv[l] - hv[l + 1]) >= 0.0) ++agreements;
        }
        stat.pair_count = pairs;
        stat.value = pairs == 0 ? 0.0 : static_cast<double>(agreements) / static_cast<double>(pairs);
    } else {
        const std::uint64_t pairs = n < 2 ? 0 : static_cast<std::uint64_t>(n) * (n - 1) / 2;
        stat.pair_count = pairs;
        if (pairs == 0) {
            stat.value = 0.0;
        } else {
            const std::uint64_t discordant = count_discordant(hu, hv);
            stat.value = static_cast<double>(pairs - discordant) / static_cast<double>(pairs);
        }
    }
    return stat;
}

}  // namespace detail

/// R_{u,v}: fraction of selected common-item pairs on which the two users
/// order the items the same way (ties count as agreement). 0 when there are
/// no pairs.
inline AgreementStat agreement_stat(const SparseRatingMatrix& m, UserIndex u, UserIndex v,
                                    AgreementMode mode) {
    const std::vector<ItemIndex> common = common_items(m, u, v);
    std::vector<double> hu, hv;
    hu.reserve(common.size());
    hv.reserve(common.size());
    for (ItemIndex l : common) {
        hu.push_back(*m.rating(l, u));
        hv.push_back(*m.rating(l, v));
    }
    return detail::agreement_from_vectors(hu, hv, mode);
}

/// W_u^{i,j}(beta): users v != u with at least beta commonly rated items with
/// u that have rated both i and j. Ascending user order.
inline std::vector<UserIndex> neighbor_set(const SparseRatingMatrix& m, UserIndex u, ItemIndex i,
                                           ItemIndex j, std::uint32_t beta) {
    if (i == j) throw SameItemError(i);
    auto raters_i = m.users_of_item(i);
    auto raters_j = m.users_of_item(j);
    std::vector<UserIndex> both;
    both.reserve(std::min(raters_i.size(), raters_j.size()));
    std::set_intersection(raters_i.begin(), raters_i.end(), raters_j.begin(), raters_j.end(),
                          std::back_inserter(both));

    auto items_u = m.rated_items(u);
    std::vector<UserIndex> out;
    for (UserIndex v : both) {
        if (v == u) continue;
        auto items_v = m.rated_items(v);
        // count |N(u) ∩ N(v)| with early exit once beta is reached
        std::size_t a = 0, b = 0, shared = 0;
        while (a < items_u.size() && b < items_v.size() && shared < beta) {
            if (items_u[a] < items_v[b]) ++a;
            else if (items_v[b] < items_u[a]) ++b;
            else { ++shared; ++a; ++b; }
        }
        if (shared >= beta) out.push_back(v);
    }
    return out;
}

}  // namespace prefrank
