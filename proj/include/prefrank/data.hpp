#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "prefrank/core.hpp"
#include "prefrank/rng.hpp"

namespace prefrank {

enum class RatingsFormat {
    movielens_dat,  // uid::mid::rating::timestamp
    csv_triples,    // user,item,rating
};

/// Parsed ratings with original ids preserved; indices are dense, assigned in
/// first-appearance order.
struct RawRatings {
    std::vector<std::string> user_ids;  // dense user index -> original id
    std::vector<std::string> item_ids;  // dense item index -> original id
    std::vector<RatingTriple> triples;

    std::size_t n_users() const { return user_ids.size(); }
    std::size_t n_items() const { return item_ids.size(); }

    SparseRatingMatrix matrix() const {
        return SparseRatingMatrix::build(n_items(), n_users(), triples);
    }
};

namespace detail {

inline double parse_double(std::string_view field, std::size_t line) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw ParseError(line, "bad numeric field '" + std::string(field) + "'");
    return value;
}

class IdInterner {
public:
    UserIndex intern(std::string_view id) {
        auto [it, inserted] = index_.try_emplace(std::string(id), ids_.size());
        if (inserted) ids_.emplace_back(id);
        return static_cast<UserIndex>(it->second);
    }
    std::vector<std::string> take() { return std::move(ids_); }

private:
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::string> ids_;
};

inline std::vector<std::string_view> split_fields(std::string_view text, std::string_view sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = text.find(sep, pos);
        if (next == std::string_view::npos) {
            out.push_back(text.substr(pos));
            return out;
        }
        out.push_back(text.substr(pos, next - pos));
        pos = next + sep.size();
    }
}

}  // namespace detail

/// Read a ratings file into triples, interning the original ids. Blank lines
/// are skipped; anything else malformed raises ParseError with its line.
inline RawRatings parse_ratings(const std::string& path, RatingsFormat format) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open ratings file " + path);

    detail::IdInterner users, items;
    RawRatings raw;
    std::string line;
    std::size_t line_no = 0;
    const std::string_view sep = format == RatingsFormat::movielens_dat ? "::" : ",";
    const std::size_t want = format == RatingsFormat::movielens_dat ? 4 : 3;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_fields(line, sep);
        if (fields.size() != want)
            throw ParseError(line_no, "expected " + std::to_string(want) + " fields, got " +
                                          std::to_string(fields.size()));
        const UserIndex u = users.intern(fields[0]);
        const ItemIndex i = items.intern(fields[1]);
        const double rating = detail::parse_double(fields[2], line_no);
        raw.triples.push_back({i, u, rating});
    }
    if (raw.triples.empty()) throw EmptyFileError(path);
    raw.user_ids = users.take();
    raw.item_ids = items.take();
    return raw;
}

/// Keep the top_items most-rated items (count ties broken by lower id), then
/// uniformly sample n_users among users with at least min_user_ratings of
/// those items. Indices are re-densified; id maps follow along.
inline RawRatings popularity_filter(const RawRatings& raw, std::size_t top_items,
                                    std::size_t n_users, std::size_t min_user_ratings,
                                    std::uint64_t seed) {
    if (top_items == 0 || n_users == 0) throw InvalidConfigError("popularity filter needs positive counts");

    std::vector<std::size_t> item_count(raw.n_items(), 0);
    for (const auto& t : raw.triples) ++item_count[t.item];
    std::vector<ItemIndex> items(raw.n_items());
    std::iota(items.begin(), items.end(), 0);
    std::sort(items.begin(), items.end(), [&](ItemIndex a, ItemIndex b) {
        if (item_count[a] != item_count[b]) return item_count[a] > item_count[b];
        return a < b;
    });
    if (items.size() > top_items) items.resize(top_items);
    std::sort(items.begin(), items.end());

    std::vector<std::uint32_t> item_map(raw.n_items(), ~0u);
    for (std::size_t k = 0; k < items.size(); ++k) item_map[items[k]] = static_cast<std::uint32_t>(k);

    std::vector<std::size_t> user_kept_count(raw.n_users(), 0);
    for (const auto& t : raw.triples)
        if (item_map[t.item] != ~0u) ++user_kept_count[t.user];
    std::vector<UserIndex> qualified;
    for (UserIndex u = 0; u < raw.n_users(); ++u)
        if (user_kept_count[u] >= min_user_ratings) qualified.push_back(u);
    if (qualified.size() < n_users)
        throw NotEnoughQualifyingUsersError(qualified.size(), n_users);

    rng::Xoshiro256 stream(rng::derive_seed(seed, 0x706f70ULL));  // "pop"
    rng::shuffle(stream, qualified);
    qualified.resize(n_users);
    std::sort(qualified.begin(), qualified.end());

    std::vector<std::uint32_t> user_map(raw.n_users(), ~0u);
    for (std::size_t k = 0; k < qualified.size(); ++k) user_map[qualified[k]] = static_cast<std::uint32_t>(k);

    RawRatings out;
    out.item_ids.reserve(items.size());
    for (ItemIndex i : items) out.item_ids.push_back(raw.item_ids[i]);
    out.user_ids.reserve(qualified.size());
    for (UserIndex u : qualified) out.user_ids.push_back(raw.user_ids[u]);
    for (const auto& t : raw.triples)
        if (item_map[t.item] != ~0u && user_map[t.user] != ~0u)
            out.triples.push_back({item_map[t.item], user_map[t.user], t.rating});
    return out;
}

/// 40/15/45 resampling protocol with per-user activity thresholds.
struct SplitSpec {
    double train_frac = 0.40;
    double val_frac = 0.15;
    double test_frac = 0.45;
    std::uint32_t min_train_ratings = 0;
    std::uint32_t min_val_ratings = 0;
    std::uint32_t min_test_ratings = 0;
    std::uint32_t n_resamples = 5;
    std::uint64_t seed = 0;

    void validate() const {
        if (train_frac < 0 || val_frac < 0 || test_frac < 0)
            throw InvalidConfigError("split fractions must be nonnegative");
        if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
            throw InvalidConfigError("split fractions must sum to 1");
        if (n_resamples == 0) throw InvalidConfigError("need at least one resample");
    }
};

inline SplitSpec netflix_split_spec(std::uint64_t seed) {
    SplitSpec spec;
    spec.min_train_ratings = 50;
    spec.min_val_ratings = 10;
    spec.min_test_ratings = 10;
    spec.seed = seed;
    return spec;
}

inline SplitSpec movielens_split_spec(std::uint64_t seed) {
    SplitSpec spec;
    spec.min_train_ratings = 100;
    spec.min_val_ratings = 50;
    spec.min_test_ratings = 50;
    spec.seed = seed;
    return spec;
}

struct ResampleSplit {
    SparseRatingMatrix train;
    SparseRatingMatrix val;
    SparseRatingMatrix test;
    // manifest: indices into the input triple list, ascending per part
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> val_indices;
    std::vector<std::size_t> test_indices;
};

/// Shuffle the triples n_resamples times and cut floor(0.40 n) train,
/// floor(0.15 n) val, remainder test; then drop every user failing an
/// activity threshold in any part, removing them from all three.
inline std::vector<ResampleSplit> resample_split(std::span<const RatingTriple> triples,
                                                 std::size_t n_items, std::size_t n_users,
                                                 const SplitSpec& spec) {
    spec.validate();
    const std::size_t n = triples.size();
    std::vector<ResampleSplit> out;
    out.reserve(spec.n_resamples);

    for (std::uint32_t r = 0; r < spec.n_resamples; ++r) {
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        rng::Xoshiro256 stream(rng::mix_key(spec.seed, {0x73706c6974ULL /* "split" */, r}));
        rng::shuffle(stream, perm);

        // floor with a tiny guard: 0.15 * 100 lands at 14.999... in binary
        const std::size_t n_train =
            static_cast<std::size_t>(spec.train_frac * static_cast<double>(n) + 1e-9);
        const std::size_t n_val =
            static_cast<std::size_t>(spec.val_frac * static_cast<double>(n) + 1e-9);

        std::array<std::vector<std::size_t>, 3> parts;
        parts[0].assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
        parts[1].assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                        perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
        parts[2].assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());

        std::array<std::vector<std::uint32_t>, 3> per_user;
        for (auto& counts : per_user) counts.assign(n_users, 0);
        for (int part = 0; part < 3; ++part)
            for (std::size_t idx : parts[part]) ++per_user[part][triples[idx].user];

        std::vector<std::uint8_t> dropped(n_users, 0);
        for (UserIndex u = 0; u < n_users; ++u) {
            if (per_user[0][u] < spec.min_train_ratings || per_user[1][u] < spec.min_val_ratings ||
                per_user[2][u] < spec.min_test_ratings)
                dropped[u] = 1;
        }

        ResampleSplit split;
        std::array<std::vector<std::size_t>*, 3> manifest = {&split.train_indices,
                                                             &split.val_indices,
                                                             &split.test_indices};
        for (int part = 0; part < 3; ++part) {
            for (std::size_t idx : parts[part])
                if (!dropped[triples[idx].user]) manifest[part]->push_back(idx);
            std::sort(manifest[part]->begin(), manifest[part]->end());
        }

        auto build_part = [&](const std::vector<std::size_t>& indices) {
            std::vector<RatingTriple> selected;
            selected.reserve(indices.size());
            for (std::size_t idx : indices) selected.push_back(triples[idx]);
            return SparseRatingMatrix::build(n_items, n_users, selected);
        };
        split.train = build_part(split.train_indices);
        split.val = build_part(split.val_indices);
        split.test = build_part(split.test_indices);
        out.push_back(std::move(split));
    }
    return out;
}

/// Rebuild one resample from its manifest indices, bit-exactly.
inline ResampleSplit split_from_indices(std::span<const RatingTriple> triples, std::size_t n_items,
                                        std::size_t n_users, std::vector<std::size_t> train_idx,
                                        std::vector<std::size_t> val_idx,
                                        std::vector<std::size_t> test_idx) {
    ResampleSplit split;
    auto build_part = [&](const std::vector<std::size_t>& indices) {
        std::vector<RatingTriple> selected;
        selected.reserve(indices.size());
        for (std::size_t idx : indices) {
            if (idx >= triples.size()) throw IndexOutOfRangeError("triple", idx, triples.size());
            selected.push_back(triples[idx]);
        }
        return SparseRatingMatrix::build(n_items, n_users, selected);
    };
    split.train = build_part(train_idx);
    split.val = build_part(val_idx);
    split.test = build_part(test_idx);
    split.train_indices = std::move(train_idx);
    split.val_indices = std::move(val_idx);
    split.test_indices = std::move(test_idx);
    return split;
}

/// The paper's quantization: rating <= 3 becomes 1, anything else becomes 5.
inline double quantize_rating(double r) { return r <= 3.0 ? 1.0 : 5.0; }

inline std::vector<RatingTriple> quantize(std::span<const RatingTriple> triples) {
    std::vector<RatingTriple> out(triples.begin(), triples.end());
    for (auto& t : out) t.rating = quantize_rating(t.rating);
    return out;
}

inline SparseRatingMatrix quantize(const SparseRatingMatrix& m) {
    return SparseRatingMatrix::build(m.n_items(), m.n_users(), quantize(m.triples()));
}

/// Per-user random rating-scale change r -> a*r - b with a in a_choices and
/// b uniform in {0, ..., a-1}. Draws are keyed by (seed, user), so a user
/// receives the same (a, b) in every split.
struct MonotoneTransformSpec {
    std::vector<std::uint32_t> a_choices{1, 2, 10, 20};
    std::uint64_t seed = 0;

    std::pair<std::uint32_t, std::uint32_t> draw(UserIndex u) const {
        if (a_choices.empty()) throw InvalidConfigError("monotone transform needs a_choices");
        for (std::uint32_t a : a_choices)
            if (a == 0) throw InvalidConfigError("monotone transform slopes must be positive");
        rng::Xoshiro256 stream(rng::mix_key(seed, {0x6d6f6e6fULL /* "mono" */, u}));
        const std::uint32_t a =
            a_choices[static_cast<std::size_t>(rng::uniform_below(stream, a_choices.size()))];
        const std::uint32_t b = static_cast<std::uint32_t>(rng::uniform_below(stream, a));
        return {a, b};
    }
};

inline std::vector<RatingTriple> random_monotone_transform(std::span<const RatingTriple> triples,
                                                           const MonotoneTransformSpec& spec) {
    std::vector<RatingTriple> out(triples.begin(), triples.end());
    std::vector<std::pair<std::uint32_t, std::uint32_t>> cache;
    for (auto& t : out) {
        if (t.user >= cache.size()) cache.resize(t.user + 1, {0, 0});
        if (cache[t.user].first == 0) cache[t.user] = spec.draw(t.user);
        const auto [a, b] = cache[t.user];
        t.rating = static_cast<double>(a) * t.rating - static_cast<double>(b);
    }
    return out;
}

inline SparseRatingMatrix random_monotone_transform(const SparseRatingMatrix& m,
                                                    const MonotoneTransformSpec& spec) {
    return SparseRatingMatrix::build(m.n_items(), m.n_users(),
                                     random_monotone_transform(m.triples(), spec));
}

}  // namespace prefrank
