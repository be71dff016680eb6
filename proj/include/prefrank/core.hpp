#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "prefrank/errors.hpp"

#include <nlohmann/json_fwd.hpp>

namespace prefrank {

using ItemIndex = std::uint32_t;
using UserIndex = std::uint32_t;
using Rank = std::uint32_t;

struct RatingTriple {
    ItemIndex item;
    UserIndex user;
    double rating;

    friend bool operator==(const RatingTriple&, const RatingTriple&) = default;
};

/// Partially observed item-user rating matrix. Immutable after construction;
/// indexed both by user (ascending item ids per user) and by item (ascending
/// user ids per item) so neighbor queries stay linear in list sizes.
class SparseRatingMatrix {
public:
    SparseRatingMatrix() = default;

    static SparseRatingMatrix build(std::size_t n_items, std::size_t n_users,
                                    std::span<const RatingTriple> triples) {
        SparseRatingMatrix m;
        m.n_items_ = n_items;
        m.n_users_ = n_users;

        std::vector<RatingTriple> sorted(triples.begin(), triples.end());
        for (const auto& t : sorted) {
            if (t.item >= n_items) throw IndexOutOfRangeError("item", t.item, n_items);
            if (t.user >= n_users) throw IndexOutOfRangeError("user", t.user, n_users);
        }
        std::sort(sorted.begin(), sorted.end(), [](const RatingTriple& a, const RatingTriple& b) {
            return a.user != b.user ? a.user < b.user : a.item < b.item;
        });
        for (std::size_t i = 1; i < sorted.size(); ++i) {
            if (sorted[i].user == sorted[i - 1].user && sorted[i].item == sorted[i - 1].item)
                throw DuplicateEntryError(sorted[i].item, sorted[i].user);
        }

        m.user_offsets_.assign(n_users + 1, 0);
        m.user_items_.reserve(sorted.size());
        m.user_values_.reserve(sorted.size());
        for (const auto& t : sorted) {
            ++m.user_offsets_[t.user + 1];
            m.user_items_.push_back(t.item);
            m.user_values_.push_back(t.rating);
        }
        for (std::size_t u = 0; u < n_users; ++u) m.user_offsets_[u + 1] += m.user_offsets_[u];

        // item-major view
        std::sort(sorted.begin(), sorted.end(), [](const RatingTriple& a, const RatingTriple& b) {
            return a.item != b.item ? a.item < b.item : a.user < b.user;
        });
        m.item_offsets_.assign(n_items + 1, 0);
        m.item_users_.reserve(sorted.size());
        m.item_values_.reserve(sorted.size());
        for (const auto& t : sorted) {
            ++m.item_offsets_[t.item + 1];
            m.item_users_.push_back(t.user);
            m.item_values_.push_back(t.rating);
        }
        for (std::size_t i = 0; i < n_items; ++i) m.item_offsets_[i + 1] += m.item_offsets_[i];
        return m;
    }

    std::size_t n_items() const { return n_items_; }
    std::size_t n_users() const { return n_users_; }
    std::size_t entry_count() const { return user_items_.size(); }

    /// N(u): item ids rated by u, strictly ascending.
    std::span<const ItemIndex> rated_items(UserIndex u) const {
        check_user(u);
        return {user_items_.data() + user_offsets_[u], user_offsets_[u + 1] - user_offsets_[u]};
    }

    /// Ratings aligned with rated_items(u).
    std::span<const double> user_ratings(UserIndex u) const {
        check_user(u);
        return {user_values_.data() + user_offsets_[u], user_offsets_[u + 1] - user_offsets_[u]};
    }

    /// Users that rated item i, strictly ascending.
    std::span<const UserIndex> users_of_item(ItemIndex i) const {
        check_item(i);
        return {item_users_.data() + item_offsets_[i], item_offsets_[i + 1] - item_offsets_[i]};
    }

    std::span<const double> item_ratings(ItemIndex i) const {
        check_item(i);
        return {item_values_.data() + item_offsets_[i], item_offsets_[i + 1] - item_offsets_[i]};
    }

    bool has(ItemIndex i, UserIndex u) const { return rating(i, u).has_value(); }

    std::optional<double> rating(ItemIndex i, UserIndex u) const {
        check_item(i);
        auto items = rated_items(u);
        auto it = std::lower_bound(items.begin(), items.end(), i);
        if (it == items.end() || *it != i) return std::nullopt;
        return user_ratings(u)[static_cast<std::size_t>(it - items.begin())];
    }

    /// All entries as triples, sorted by (user, item). Canonical order for
    /// serialization and comparisons.
    std::vector<RatingTriple> triples() const {
        std::vector<RatingTriple> out;
        out.reserve(entry_count());
        for (UserIndex u = 0; u < n_users_; ++u) {
            auto items = rated_items(u);
            auto values = user_ratings(u);
            for (std::size_t k = 0; k < items.size(); ++k)
                out.push_back({items[k], u, values[k]});
        }
        return out;
    }

    friend bool operator==(const SparseRatingMatrix& a, const SparseRatingMatrix& b) {
        return a.n_items_ == b.n_items_ && a.n_users_ == b.n_users_ &&
               a.user_offsets_ == b.user_offsets_ && a.user_items_ == b.user_items_ &&
               a.user_values_ == b.user_values_;
    }

    nlohmann::json to_json() const;
    static SparseRatingMatrix from_json(const nlohmann::json& j);

private:
    void check_user(UserIndex u) const {
        if (u >= n_users_) throw IndexOutOfRangeError("user", u, n_users_);
    }
    void check_item(ItemIndex i) const {
        if (i >= n_items_) throw IndexOutOfRangeError("item", i, n_items_);
    }

    std::size_t n_items_ = 0;
    std::size_t n_users_ = 0;
    std::vector<std::size_t> user_offsets_;
    std::vector<ItemIndex> user_items_;
    std::vector<double> user_values_;
    std::vector<std::size_t> item_offsets_;
    std::vector<UserIndex> item_users_;
    std::vector<double> item_values_;
};

/// Convenience wrapper matching the natural call shape build_matrix(triples).
inline SparseRatingMatrix build_matrix(std::size_t n_items, std::size_t n_users,
                                       std::span<const RatingTriple> triples) {
    return SparseRatingMatrix::build(n_items, n_users, triples);
}

/// One user's pairwise preferences: an n×n binary table, diagonal ignored.
/// set_pair keeps the two orientations consistent, so a fully populated
/// matrix is antisymmetric by construction.
class PreferenceMatrix {
public:
    explicit PreferenceMatrix(std::size_t n_items)
        : n_items_(n_items), bits_(n_items * n_items, 0) {}

    std::size_t n_items() const { return n_items_; }

    /// Record that item i is preferred to item j (or the reverse).
    void set_pair(ItemIndex i, ItemIndex j, bool i_over_j) {
        check(i);
        check(j);
        if (i == j) throw SameItemError(i);
        bits_[idx(i, j)] = i_over_j ? 1 : 0;
        bits_[idx(j, i)] = i_over_j ? 0 : 1;
    }

    bool prefers(ItemIndex i, ItemIndex j) const {
        check(i);
        check(j);
        return bits_[idx(i, j)] != 0;
    }

    /// True when every off-diagonal pair is populated consistently
    /// (A[i][j] + A[j][i] = 1).
    bool antisymmetric() const {
        for (ItemIndex i = 0; i < n_items_; ++i)
            for (ItemIndex j = i + 1; j < n_items_; ++j)
                if (bits_[idx(i, j)] + bits_[idx(j, i)] != 1) return false;
        return true;
    }

    /// First offending pair, if any.
    std::optional<std::pair<ItemIndex, ItemIndex>> antisymmetry_violation() const {
        for (ItemIndex i = 0; i < n_items_; ++i)
            for (ItemIndex j = i + 1; j < n_items_; ++j)
                if (bits_[idx(i, j)] + bits_[idx(j, i)] != 1) return std::make_pair(i, j);
        return std::nullopt;
    }

private:
    std::size_t idx(ItemIndex i, ItemIndex j) const {
        return static_cast<std::size_t>(i) * n_items_ + j;
    }
    void check(ItemIndex i) const {
        if (i >= n_items_) throw IndexOutOfRangeError("item", i, n_items_);
    }

    std::size_t n_items_;
    std::vector<std::uint8_t> bits_;
};

/// One permutation per user; rank values live in [1, n_items] and larger rank
/// means more preferred.
class RankingCollection {
public:
    RankingCollection() = default;
    RankingCollection(std::size_t n_items, std::size_t n_users)
        : n_items_(n_items), n_users_(n_users), ranks_(n_items * n_users, 0) {}

    std::size_t n_items() const { return n_items_; }
    std::size_t n_users() const { return n_users_; }

    Rank rank(ItemIndex i, UserIndex u) const {
        check(i, u);
        return ranks_[static_cast<std::size_t>(u) * n_items_ + i];
    }

    std::span<const Rank> user_ranking(UserIndex u) const {
        if (u >= n_users_) throw IndexOutOfRangeError("user", u, n_users_);
        return {ranks_.data() + static_cast<std::size_t>(u) * n_items_, n_items_};
    }

    /// Install a full ranking for one user; rejects non-permutations.
    void set_user_ranking(UserIndex u, std::span<const Rank> ranks) {
        if (u >= n_users_) throw IndexOutOfRangeError("user", u, n_users_);
        if (ranks.size() != n_items_) throw NotPermutationError(u);
        std::vector<bool> seen(n_items_ + 1, false);
        for (Rank r : ranks) {
            if (r < 1 || r > n_items_ || seen[r]) throw NotPermutationError(u);
            seen[r] = true;
        }
        std::copy(ranks.begin(), ranks.end(),
                  ranks_.begin() + static_cast<std::ptrdiff_t>(u * n_items_));
    }

    friend bool operator==(const RankingCollection&, const RankingCollection&) = default;

    nlohmann::json to_json() const;
    static RankingCollection from_json(const nlohmann::json& j);

private:
    void check(ItemIndex i, UserIndex u) const {
        if (i >= n_items_) throw IndexOutOfRangeError("item", i, n_items_);
        if (u >= n_users_) throw IndexOutOfRangeError("user", u, n_users_);
    }

    std::size_t n_items_ = 0;
    std::size_t n_users_ = 0;
    std::vector<Rank> ranks_;
};

/// Dense item×user matrix of reals, stored user-major so per-user columns are
/// contiguous. Used for the synthetic F and H tensors.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t n_items, std::size_t n_users, double fill = 0.0)
        : n_items_(n_items), n_users_(n_users), values_(n_items * n_users, fill) {}

    std::size_t n_items() const { return n_items_; }
    std::size_t n_users() const { return n_users_; }

    double at(ItemIndex i, UserIndex u) const {
        return values_[static_cast<std::size_t>(u) * n_items_ + i];
    }
    double& at(ItemIndex i, UserIndex u) {
        return values_[static_cast<std::size_t>(u) * n_items_ + i];
    }

    std::span<const double> user_column(UserIndex u) const {
        return {values_.data() + static_cast<std::size_t>(u) * n_items_, n_items_};
    }

    std::span<const double> flat() const { return values_; }
    std::span<double> flat() { return values_; }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t n_items_ = 0;
    std::size_t n_users_ = 0;
    std::vector<double> values_;
};

}  // namespace prefrank
