#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "prefrank/agreement.hpp"
#include "prefrank/core.hpp"
#include "prefrank/parallel.hpp"
#include "prefrank/rng.hpp"

namespace prefrank {

enum class VoteWeighting {
    uniform,             // MR: plain majority vote
    agreement_weighted,  // MRW: votes weighted by R_{u,v}
};

struct RankerConfig {
    std::uint32_t beta = 2;
    std::uint32_t k = 1;
    VoteWeighting weighting = VoteWeighting::uniform;
    AgreementMode agreement_mode = AgreementMode::all_pairs;
    std::uint64_t seed = 0;

    void validate() const {
        if (beta < 2) throw InvalidConfigError("beta must be >= 2");
        if (k < 1) throw InvalidConfigError("k must be >= 1");
    }
};

/// Outcome of one Pairwise-Rank vote. decision = 1 means item i is predicted
/// preferred to item j.
struct VoteOutcome {
    int decision = 0;
    bool was_coin_flip = false;
    double vote_sum = 0.0;
};

namespace detail {

struct Voter {
    double r;   // R_{u,v} of the voting user
    double hi;  // voter's rating of item i
    double hj;  // voter's rating of item j
};

/// Majority vote over an ordered voter list; ties and empty lists fall to a
/// coin addressed by (seed, u, i, j) so outcomes are reproducible regardless
/// of evaluation order.
inline VoteOutcome tally_votes(std::span<const Voter> voters, VoteWeighting weighting,
                               std::uint64_t seed, UserIndex u, ItemIndex i, ItemIndex j) {
    VoteOutcome out;
    double sum = 0.0;
    for (const Voter& v : voters) {
        const int p = v.hi > v.hj ? 1 : (v.hi < v.hj ? -1 : 0);
        const double w = weighting == VoteWeighting::uniform ? 1.0 : v.r;
        sum += w * static_cast<double>(p);
    }
    out.vote_sum = sum;
    if (voters.empty() || sum == 0.0) {
        out.was_coin_flip = true;
        out.decision = rng::keyed_coin(seed, u, i, j) ? 1 : 0;
    } else {
        out.decision = sum > 0.0 ? 1 : 0;
    }
    return out;
}

}  // namespace detail

/// Pairwise-Rank: predict whether user u prefers item i to item j from the
/// top-k most agreeing qualified neighbors. Caller contract: (i,u) and (j,u)
/// are unobserved or tied in the observed matrix.
inline VoteOutcome pairwise_rank(const SparseRatingMatrix& m, UserIndex u, ItemIndex i,
                                 ItemIndex j, const RankerConfig& cfg) {
    if (i == j) throw SameItemError(i);
    cfg.validate();

    const std::vector<UserIndex> w = neighbor_set(m, u, i, j, cfg.beta);
    std::vector<std::pair<double, UserIndex>> scored;  // (R, v)
    scored.reserve(w.size());
    for (UserIndex v : w)
        scored.emplace_back(agreement_stat(m, u, v, cfg.agreement_mode).value, v);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    if (scored.size() > cfg.k) scored.resize(cfg.k);

    std::vector<detail::Voter> voters;
    voters.reserve(scored.size());
    for (const auto& [r, v] : scored)
        voters.push_back({r, *m.rating(i, v), *m.rating(j, v)});
    return detail::tally_votes(voters, cfg.weighting, cfg.seed, u, i, j);
}

/// Copeland ranking: score each item by the number of items it beats, then
/// rank in decreasing score order. Ties go to the lower item index (which
/// receives the higher rank value). Rank values are 1..n, larger = preferred.
inline std::vector<Rank> copeland(const PreferenceMatrix& a) {
    if (auto bad = a.antisymmetry_violation())
        throw MalformedPreferenceMatrixError(bad->first, bad->second);
    const std::size_t n = a.n_items();
    std::vector<std::uint32_t> score(n, 0);
    for (ItemIndex j = 0; j < n; ++j)
        for (ItemIndex i = 0; i < n; ++i)
            if (i != j && a.prefers(j, i)) ++score[j];

    std::vector<ItemIndex> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](ItemIndex x, ItemIndex y) {
        if (score[x] != score[y]) return score[x] > score[y];
        return x < y;
    });
    std::vector<Rank> ranks(n, 0);
    for (std::size_t pos = 0; pos < n; ++pos)
        ranks[order[pos]] = static_cast<Rank>(n - pos);
    return ranks;
}

namespace detail {

/// Per-user engine shared by multi_rank. Precomputes, for a fixed user u,
/// the qualified candidate list sorted by (R desc, user asc); pair votes then
/// walk that list taking the first k raters of both items, which equals
/// sorting W_u^{i,j} and truncating.
class UserVotePlan {
public:
    UserVotePlan(const SparseRatingMatrix& m, UserIndex u, const RankerConfig& cfg,
                 std::span<const std::uint64_t> rated_mask, std::size_t mask_words)
        : m_(m), u_(u), cfg_(cfg), rated_mask_(rated_mask), mask_words_(mask_words) {
        const std::size_t n_users = m.n_users();
        const auto items_u = m.rated_items(u);
        const auto values_u = m.user_ratings(u);

        // common-item counts against every other user, via the item index
        std::vector<std::uint32_t> n_common(n_users, 0);
        for (ItemIndex l : items_u)
            for (UserIndex v : m.users_of_item(l))
                if (v != u) ++n_common[v];

        std::vector<std::uint32_t> slot(n_users, kNoSlot);
        for (UserIndex v = 0; v < n_users; ++v) {
            if (n_common[v] >= cfg.beta) {
                slot[v] = static_cast<std::uint32_t>(cand_.size());
                cand_.push_back(v);
            }
        }

        // gather aligned (h_u, h_v) value lists over common items, ascending
        // item order, for the qualified candidates only
        std::vector<std::size_t> offsets(cand_.size() + 1, 0);
        for (std::size_t c = 0; c < cand_.size(); ++c) offsets[c + 1] = offsets[c] + n_common[cand_[c]];
        std::vector<double> hu(offsets.back()), hv(offsets.back());
        std::vector<std::size_t> fill(offsets.begin(), offsets.end() - 1);
        for (std::size_t idx = 0; idx < items_u.size(); ++idx) {
            const ItemIndex l = items_u[idx];
            const double val_u = values_u[idx];
            const auto raters = m.users_of_item(l);
            const auto vals = m.item_ratings(l);
            for (std::size_t t = 0; t < raters.size(); ++t) {
                const UserIndex v = raters[t];
                if (v == u || slot[v] == kNoSlot) continue;
                const std::size_t pos = fill[slot[v]]++;
                hu[pos] = val_u;
                hv[pos] = vals[t];
            }
        }

        r_.resize(cand_.size());
        for (std::size_t c = 0; c < cand_.size(); ++c) {
            const std::span<const double> su(hu.data() + offsets[c], offsets[c + 1] - offsets[c]);
            const std::span<const double> sv(hv.data() + offsets[c], offsets[c + 1] - offsets[c]);
            r_[c] = agreement_from_vectors(su, sv, cfg.agreement_mode).value;
        }

        std::vector<std::uint32_t> by_r(cand_.size());
        std::iota(by_r.begin(), by_r.end(), 0);
        std::sort(by_r.begin(), by_r.end(), [&](std::uint32_t x, std::uint32_t y) {
            if (r_[x] != r_[y]) return r_[x] > r_[y];
            return cand_[x] < cand_[y];
        });
        std::vector<UserIndex> cand_sorted(cand_.size());
        std::vector<double> r_sorted(cand_.size());
        for (std::size_t pos = 0; pos < by_r.size(); ++pos) {
            cand_sorted[pos] = cand_[by_r[pos]];
            r_sorted[pos] = r_[by_r[pos]];
        }
        cand_ = std::move(cand_sorted);
        r_ = std::move(r_sorted);
    }

    VoteOutcome vote(ItemIndex i, ItemIndex j) const {
        std::vector<Voter> voters;
        voters.reserve(cfg_.k);
        for (std::size_t c = 0; c < cand_.size() && voters.size() < cfg_.k; ++c) {
            const UserIndex v = cand_[c];
            if (!rated(v, i) || !rated(v, j)) continue;
            voters.push_back({r_[c], *m_.rating(i, v), *m_.rating(j, v)});
        }
        return tally_votes(voters, cfg_.weighting, cfg_.seed, u_, i, j);
    }

private:
    static constexpr std::uint32_t kNoSlot = ~0u;

    bool rated(UserIndex v, ItemIndex i) const {
        const std::uint64_t word = rated_mask_[v * mask_words_ + i / 64];
        return (word >> (i % 64)) & 1u;
    }

    const SparseRatingMatrix& m_;
    UserIndex u_;
    const RankerConfig& cfg_;
    std::span<const std::uint64_t> rated_mask_;
    std::size_t mask_words_;
    std::vector<UserIndex> cand_;
    std::vector<double> r_;
};

inline std::vector<std::uint64_t> build_rated_mask(const SparseRatingMatrix& m,
                                                   std::size_t& mask_words_out) {
    const std::size_t words = (m.n_items() + 63) / 64;
    mask_words_out = words;
    std::vector<std::uint64_t> mask(words * m.n_users(), 0);
    for (UserIndex u = 0; u < m.n_users(); ++u)
        for (ItemIndex i : m.rated_items(u))
            mask[u * words + i / 64] |= 1ULL << (i % 64);
    return mask;
}

}  // namespace detail

/// Multi-Rank: fill each user's pairwise preference matrix from observed
/// distinct ratings where possible and Pairwise-Rank votes everywhere else,
/// then Copeland-rank each user. Deterministic for a fixed (matrix, config),
/// independent of thread count.
inline RankingCollection multi_rank(const SparseRatingMatrix& m, const RankerConfig& cfg,
                                    unsigned n_threads = 1) {
    cfg.validate();
    const std::size_t n_items = m.n_items();
    const std::size_t n_users = m.n_users();
    RankingCollection out(n_items, n_users);
    if (n_items == 0 || n_users == 0) return out;

    std::size_t mask_words = 0;
    const std::vector<std::uint64_t> rated_mask = detail::build_rated_mask(m, mask_words);

    std::vector<std::vector<Rank>> results(n_users);
    parallel_for(n_users, n_threads, [&](std::size_t uu) {
        const UserIndex u = static_cast<UserIndex>(uu);
        const detail::UserVotePlan plan(m, u, cfg, rated_mask, mask_words);

        // dense view of u's observed row
        std::vector<double> value_of(n_items, 0.0);
        std::vector<std::uint8_t> has(n_items, 0);
        {
            const auto items = m.rated_items(u);
            const auto values = m.user_ratings(u);
            for (std::size_t t = 0; t < items.size(); ++t) {
                value_of[items[t]] = values[t];
                has[items[t]] = 1;
            }
        }

        PreferenceMatrix a(n_items);
        for (ItemIndex i = 0; i < n_items; ++i) {
            for (ItemIndex j = i + 1; j < n_items; ++j) {
                if (has[i] && has[j] && value_of[i] != value_of[j]) {
                    a.set_pair(i, j, value_of[i] > value_of[j]);
                } else {
                    a.set_pair(i, j, plan.vote(i, j).decision == 1);
                }
            }
        }
        results[u] = copeland(a);
    });

    for (UserIndex u = 0; u < n_users; ++u) out.set_user_ranking(u, results[u]);
    return out;
}

/// Empirical observation rate |Omega| / (n_items * n_users).
inline double observed_density(const SparseRatingMatrix& m) {
    const double cells = static_cast<double>(m.n_items()) * static_cast<double>(m.n_users());
    return cells == 0.0 ? 0.0 : static_cast<double>(m.entry_count()) / cells;
}

/// beta = p̂² n₁ / 2 rounded up to the next usable integer count.
inline std::uint32_t theorem_beta(const SparseRatingMatrix& m) {
    const double p_hat = observed_density(m);
    const double raw = p_hat * p_hat * static_cast<double>(m.n_items()) / 2.0;
    const double up = std::ceil(raw - 1e-12);
    return static_cast<std::uint32_t>(std::max(2.0, up));
}

/// Continuous-ratings preset: k = 1, beta = p̂² n₁ / 2.
inline RankerConfig continuous_preset(const SparseRatingMatrix& m, std::uint64_t seed,
                                      AgreementMode mode = AgreementMode::nonoverlapping) {
    RankerConfig cfg;
    cfg.beta = theorem_beta(m);
    cfg.k = 1;
    cfg.weighting = VoteWeighting::uniform;
    cfg.agreement_mode = mode;
    cfg.seed = seed;
    return cfg;
}

/// Discrete-ratings preset: k = ⌈n₂^0.3⌉, beta = p̂² n₁ / 2.
inline RankerConfig discrete_preset(const SparseRatingMatrix& m, std::uint64_t seed,
                                    AgreementMode mode = AgreementMode::nonoverlapping) {
    RankerConfig cfg = continuous_preset(m, seed, mode);
    cfg.k = static_cast<std::uint32_t>(
        std::max(1.0, std::ceil(std::pow(static_cast<double>(m.n_users()), 0.3) - 1e-12)));
    return cfg;
}

}  // namespace prefrank
