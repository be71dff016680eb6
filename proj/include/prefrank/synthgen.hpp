#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "prefrank/core.hpp"
#include "prefrank/rng.hpp"

namespace prefrank {

enum class Geometry {
    unit_ball_distance,  // features uniform on the unit ball, f = ||x-y||/2
    finite_points,       // features uniform over explicit point lists
    inner_product,       // f = x^t y, realized through the distance lift
};

enum class GFamily {
    identity,
    random_increasing,  // per-user random strictly increasing piecewise-linear map
    step_thresholds,    // per-user random thresholds quantizing into L levels
};

struct LatentModelConfig {
    std::size_t n_items = 0;
    std::size_t n_users = 0;
    std::size_t dim = 2;
    Geometry geometry = Geometry::unit_ball_distance;
    GFamily g_family = GFamily::identity;
    double p = 1.0;  // per-entry observation probability
    std::uint64_t seed = 0;

    // step_thresholds family
    std::uint32_t rating_levels = 5;  // L
    double utility_bound = 2.0;       // N, requires |f| <= N

    // finite_points geometry; user_points defaults to item_points when empty
    std::vector<std::vector<double>> item_points;
    std::vector<std::vector<double>> user_points;

    void validate() const {
        if (n_items == 0 || n_users == 0) throw InvalidConfigError("model needs n_items > 0 and n_users > 0");
        if (dim == 0) throw InvalidConfigError("latent dimension must be positive");
        if (!(p > 0.0 && p <= 1.0)) throw InvalidConfigError("observation probability p must be in (0, 1]");
        if (g_family == GFamily::step_thresholds) {
            if (rating_levels < 2) throw InvalidConfigError("step family needs at least 2 rating levels");
            if (!(utility_bound > 0.0)) throw InvalidConfigError("utility bound N must be positive");
        }
        if (geometry == Geometry::finite_points) {
            if (item_points.empty()) throw InvalidConfigError("finite_points geometry needs item_points");
            for (const auto& pt : item_points)
                if (pt.size() != dim) throw InvalidConfigError("item point dimension mismatch");
            for (const auto& pt : user_points)
                if (pt.size() != dim) throw InvalidConfigError("user point dimension mismatch");
        }
    }

    friend bool operator==(const LatentModelConfig&, const LatentModelConfig&) = default;
};

/// Strictly increasing piecewise-linear map, used as a random per-user g.
/// Slopes are log-uniform, so the map is far from Lipschitz-controlled.
class PiecewiseIncreasing {
public:
    std::vector<double> xs;  // ascending breakpoints
    std::vector<double> ys;  // strictly ascending values at breakpoints

    template <class Rng>
    static PiecewiseIncreasing sample(Rng& rng, double lo, double hi, std::size_t interior = 8) {
        PiecewiseIncreasing g;
        g.xs.reserve(interior + 2);
        g.xs.push_back(lo);
        for (std::size_t t = 0; t < interior; ++t) g.xs.push_back(rng::uniform_range(rng, lo, hi));
        g.xs.push_back(hi);
        std::sort(g.xs.begin(), g.xs.end());
        g.ys.resize(g.xs.size());
        g.ys[0] = 0.0;
        for (std::size_t t = 1; t < g.xs.size(); ++t) {
            const double slope = std::exp(rng::uniform_range(rng, -2.0, 2.0));
            g.ys[t] = g.ys[t - 1] + slope * std::max(g.xs[t] - g.xs[t - 1], 1e-12);
        }
        return g;
    }

    double operator()(double z) const {
        if (xs.size() < 2) return z;
        std::size_t hi = std::upper_bound(xs.begin(), xs.end(), z) - xs.begin();
        if (hi == 0) hi = 1;
        if (hi == xs.size()) hi = xs.size() - 1;
        const std::size_t lo = hi - 1;
        const double t = (z - xs[lo]) / (xs[hi] - xs[lo]);
        return ys[lo] + t * (ys[hi] - ys[lo]);
    }

    friend bool operator==(const PiecewiseIncreasing&, const PiecewiseIncreasing&) = default;
};

namespace detail {

template <class Rng>
std::vector<double> sample_ball_point(Rng& rng, std::size_t dim) {
    std::vector<double> x(dim);
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (auto& c : x) {
            c = rng::normal(rng);
            norm2 += c * c;
        }
    } while (norm2 == 0.0);
    const double radius = std::pow(rng::uniform_unit(rng), 1.0 / static_cast<double>(dim));
    const double scale = radius / std::sqrt(norm2);
    for (auto& c : x) c *= scale;
    return x;
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        const double d = a[t] - b[t];
        s += d * d;
    }
    return std::sqrt(s);
}

/// Step function with sorted thresholds: 1 on [-N, a_1), 2 on [a_1, a_2),
/// ..., L on [a_{L-1}, N].
inline double step_rating(double z, std::span<const double> thresholds) {
    const auto it = std::upper_bound(thresholds.begin(), thresholds.end(), z);
    return 1.0 + static_cast<double>(it - thresholds.begin());
}

template <class Rng>
std::vector<double> sample_thresholds(Rng& rng, std::uint32_t levels, double bound) {
    std::vector<double> a(levels - 1);
    for (auto& t : a) t = rng::uniform_range(rng, -bound, bound);
    std::sort(a.begin(), a.end());
    return a;
}

}  // namespace detail

/// A realized instance of the nonparametric model: latent features, the
/// per-user monotone transforms, the full F and H matrices, and the
/// Bernoulli(p) observation mask.
///
/// For distance-based geometries f is half the Euclidean distance between
/// (possibly lifted) features, which keeps f exactly 1-Lipschitz under the
/// max product metric while leaving every ordering unchanged.
struct LatentModel {
    LatentModelConfig config;
    std::size_t feat_dim = 0;
    std::vector<double> item_features;  // n_items × feat_dim
    std::vector<double> user_features;  // n_users × feat_dim
    // inner_product geometry keeps the raw d-dim features alongside the lift
    std::vector<double> raw_item_features;
    std::vector<double> raw_user_features;
    std::vector<std::vector<double>> thresholds;   // step family, per user
    std::vector<PiecewiseIncreasing> g_maps;       // random_increasing, per user
    DenseMatrix f_values;
    DenseMatrix h_values;
    std::vector<std::uint8_t> observed;  // n_items × n_users, user-major

    std::span<const double> item_feature(ItemIndex i) const {
        return {item_features.data() + static_cast<std::size_t>(i) * feat_dim, feat_dim};
    }
    std::span<const double> user_feature(UserIndex u) const {
        return {user_features.data() + static_cast<std::size_t>(u) * feat_dim, feat_dim};
    }
    double item_distance(ItemIndex i, ItemIndex j) const {
        return detail::euclidean(item_feature(i), item_feature(j));
    }
    double user_distance(UserIndex u, UserIndex v) const {
        return detail::euclidean(user_feature(u), user_feature(v));
    }

    bool is_observed(ItemIndex i, UserIndex u) const {
        return observed[static_cast<std::size_t>(u) * config.n_items + i] != 0;
    }

    double apply_g(UserIndex u, double f) const {
        switch (config.g_family) {
            case GFamily::identity: return f;
            case GFamily::random_increasing: return g_maps[u](f);
            case GFamily::step_thresholds: return detail::step_rating(f, thresholds[u]);
        }
        return f;
    }

    /// P_Omega(H) as a sparse matrix.
    SparseRatingMatrix observed_matrix() const {
        std::vector<RatingTriple> triples;
        for (UserIndex u = 0; u < config.n_users; ++u)
            for (ItemIndex i = 0; i < config.n_items; ++i)
                if (is_observed(i, u)) triples.push_back({i, u, h_values.at(i, u)});
        return SparseRatingMatrix::build(config.n_items, config.n_users, triples);
    }

    nlohmann::json to_json(bool include_tensors = false) const;
    static LatentModel from_json(const nlohmann::json& j);

    friend bool operator==(const LatentModel&, const LatentModel&) = default;
};

/// Draw a full model: features, per-user transforms, F, H, and the mask, all
/// from one sequential stream keyed by config.seed.
inline LatentModel sample_model(const LatentModelConfig& config) {
    config.validate();
    LatentModel model;
    model.config = config;
    rng::Xoshiro256 stream(rng::derive_seed(config.seed, 0x6d6f64656cULL));  // "model"

    const std::size_t d = config.dim;
    const bool lifted = config.geometry == Geometry::inner_product;
    model.feat_dim = lifted ? d + 1 : d;

    auto sample_feature = [&](const std::vector<std::vector<double>>& points) {
        if (config.geometry == Geometry::finite_points) {
            const std::size_t idx =
                static_cast<std::size_t>(rng::uniform_below(stream, points.size()));
            return points[idx];
        }
        return detail::sample_ball_point(stream, d);
    };

    const auto& user_pool = config.user_points.empty() ? config.item_points : config.user_points;

    std::vector<std::vector<double>> items_raw(config.n_items), users_raw(config.n_users);
    for (auto& x : items_raw) x = sample_feature(config.item_points);
    for (auto& y : users_raw) y = sample_feature(user_pool);

    model.item_features.reserve(config.n_items * model.feat_dim);
    model.user_features.reserve(config.n_users * model.feat_dim);
    if (lifted) {
        // distance lift with B = 1 (raw features live in the unit ball):
        // x~ = (x, sqrt(1 - |x|^2)), y~ = (-y, 0); then |x~ - y~|^2 =
        // 1 + |y|^2 + 2 x.y, strictly increasing in the inner product.
        for (const auto& x : items_raw) {
            double n2 = 0.0;
            for (double c : x) n2 += c * c;
            model.item_features.insert(model.item_features.end(), x.begin(), x.end());
            model.item_features.push_back(std::sqrt(std::max(0.0, 1.0 - n2)));
            model.raw_item_features.insert(model.raw_item_features.end(), x.begin(), x.end());
        }
        for (const auto& y : users_raw) {
            for (double c : y) model.user_features.push_back(-c);
            model.user_features.push_back(0.0);
            model.raw_user_features.insert(model.raw_user_features.end(), y.begin(), y.end());
        }
    } else {
        for (const auto& x : items_raw)
            model.item_features.insert(model.item_features.end(), x.begin(), x.end());
        for (const auto& y : users_raw)
            model.user_features.insert(model.user_features.end(), y.begin(), y.end());
    }

    if (config.g_family == GFamily::step_thresholds) {
        model.thresholds.resize(config.n_users);
        for (auto& a : model.thresholds)
            a = detail::sample_thresholds(stream, config.rating_levels, config.utility_bound);
    } else if (config.g_family == GFamily::random_increasing) {
        // domain large enough for every distance-based geometry in play
        double lo = 0.0, hi = 1.0;
        if (config.geometry == Geometry::finite_points) {
            double max_d = 0.0;
            for (const auto& a : config.item_points)
                for (const auto& b : user_pool) {
                    const double dist = detail::euclidean(a, b);
                    max_d = std::max(max_d, dist);
                }
            hi = std::max(1e-9, max_d / 2.0);
        }
        model.g_maps.resize(config.n_users);
        for (auto& g : model.g_maps) g = PiecewiseIncreasing::sample(stream, lo, hi);
    }

    model.f_values = DenseMatrix(config.n_items, config.n_users);
    model.h_values = DenseMatrix(config.n_items, config.n_users);
    for (UserIndex u = 0; u < config.n_users; ++u) {
        for (ItemIndex i = 0; i < config.n_items; ++i) {
            const double f = detail::euclidean(model.item_feature(i), model.user_feature(u)) / 2.0;
            if (config.g_family == GFamily::step_thresholds && std::abs(f) > config.utility_bound)
                throw InvalidConfigError("utility bound N is smaller than realized |f|");
            model.f_values.at(i, u) = f;
            model.h_values.at(i, u) = model.apply_g(u, f);
        }
    }

    model.observed.assign(config.n_items * config.n_users, 0);
    for (UserIndex u = 0; u < config.n_users; ++u)
        for (ItemIndex i = 0; i < config.n_items; ++i)
            if (rng::uniform_unit(stream) < config.p)
                model.observed[static_cast<std::size_t>(u) * config.n_items + i] = 1;

    return model;
}

/// Monte-Carlo estimate of rho(y_u, y_v): the probability that users u and v
/// order two random items the same way. For the step family this is the
/// discrete rho-prime, re-drawing the rating thresholds on every sample.
/// Deterministic under a seed derived from (model seed, u, v).
inline double rho_oracle(const LatentModel& model, UserIndex u, UserIndex v,
                         std::size_t n_samples) {
    if (n_samples == 0) throw InvalidConfigError("rho_oracle needs n_samples >= 1");
    const auto& config = model.config;
    rng::Xoshiro256 stream(
        rng::mix_key(config.seed, {0x72686fULL /* "rho" */, u, v, n_samples}));

    const bool discrete = config.g_family == GFamily::step_thresholds;
    std::uint64_t agree = 0;
    auto fresh_point = [&](std::vector<double>& out) {
        if (config.geometry == Geometry::finite_points) {
            out = config.item_points[static_cast<std::size_t>(
                rng::uniform_below(stream, config.item_points.size()))];
        } else {
            out = detail::sample_ball_point(stream, config.dim);
        }
    };
    auto utility_for = [&](const std::vector<double>& x, UserIndex w) {
        if (config.geometry == Geometry::inner_product) {
            const double* y = model.raw_user_features.data() +
                              static_cast<std::size_t>(w) * config.dim;
            double dot = 0.0, y2 = 0.0;
            for (std::size_t t = 0; t < config.dim; ++t) {
                dot += x[t] * y[t];
                y2 += y[t] * y[t];
            }
            return std::sqrt(std::max(0.0, 1.0 + y2 + 2.0 * dot)) / 2.0;
        }
        return detail::euclidean(x, model.user_feature(w)) / 2.0;
    };

    std::vector<double> xs, xt, thresh_u, thresh_v;
    for (std::size_t t = 0; t < n_samples; ++t) {
        fresh_point(xs);
        fresh_point(xt);
        double hu_s, hu_t, hv_s, hv_t;
        if (discrete) {
            thresh_u = detail::sample_thresholds(stream, config.rating_levels, config.utility_bound);
            if (u == v) {
                thresh_v = thresh_u;
            } else {
                thresh_v =
                    detail::sample_thresholds(stream, config.rating_levels, config.utility_bound);
            }
            hu_s = detail::step_rating(utility_for(xs, u), thresh_u);
            hu_t = detail::step_rating(utility_for(xt, u), thresh_u);
            hv_s = detail::step_rating(utility_for(xs, v), thresh_v);
            hv_t = detail::step_rating(utility_for(xt, v), thresh_v);
        } else {
            hu_s = model.apply_g(u, utility_for(xs, u));
            hu_t = model.apply_g(u, utility_for(xt, u));
            hv_s = model.apply_g(v, utility_for(xs, v));
            hv_t = model.apply_g(v, utility_for(xt, v));
        }
        if ((hu_s - hu_t) * (hv_s - hv_t) >= 0.0) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(n_samples);
}

/// The Proposition-1 fixture: two functions on [0,1] within eps in sup norm
/// whose pairwise orderings are opposite almost everywhere.
struct CounterexamplePair {
    std::function<double(double)> f;
    std::function<double(double)> g;
    double eps = 0.0;
};

inline CounterexamplePair counterexample_pair(double eps) {
    if (!(eps > 0.0)) throw InvalidConfigError("counterexample needs eps > 0");
    CounterexamplePair pair;
    pair.eps = eps;
    pair.f = [eps](double z) { return z <= 0.5 ? eps * z : eps * (1.0 - z); };
    pair.g = [eps](double z) { return z <= 0.5 ? -eps * z : eps * (z - 1.0); };
    return pair;
}

/// Monte-Carlo fraction of uniform pairs (x, x') in [0,1]^2 on which two
/// scalar functions order the points the same way (ties count as agreement).
inline double mc_pair_agreement(const std::function<double(double)>& f1,
                                const std::function<double(double)>& f2, std::size_t n_samples,
                                std::uint64_t seed) {
    rng::Xoshiro256 stream(rng::derive_seed(seed, 0x70616972ULL));  // "pair"
    std::uint64_t agree = 0;
    for (std::size_t t = 0; t < n_samples; ++t) {
        const double x = rng::uniform_unit(stream);
        const double y = rng::uniform_unit(stream);
        if ((f1(x) - f1(y)) * (f2(x) - f2(y)) >= 0.0) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(n_samples);
}

/// Append one coordinate so inner-product order becomes distance order:
/// x~_i = (x_i, gamma_i) with |x~_i| = B = max_i |x_i|, y~_u = (-y_u, 0).
/// Then |x~_i - y~_u|^2 - |x~_j - y~_u|^2 = x_i.y_u - x_j.y_u.
inline std::pair<std::vector<std::vector<double>>, std::vector<std::vector<double>>>
lift_inner_product(const std::vector<std::vector<double>>& items,
                   const std::vector<std::vector<double>>& users) {
    if (items.empty()) throw InvalidConfigError("lift needs at least one item vector");
    double b2 = 0.0;
    for (const auto& x : items) {
        double n2 = 0.0;
        for (double c : x) n2 += c * c;
        b2 = std::max(b2, n2);
    }
    std::vector<std::vector<double>> lifted_items;
    lifted_items.reserve(items.size());
    for (const auto& x : items) {
        double n2 = 0.0;
        for (double c : x) n2 += c * c;
        auto lifted = x;
        lifted.push_back(std::sqrt(std::max(0.0, b2 - n2)));
        lifted_items.push_back(std::move(lifted));
    }
    std::vector<std::vector<double>> lifted_users;
    lifted_users.reserve(users.size());
    for (const auto& y : users) {
        std::vector<double> lifted;
        lifted.reserve(y.size() + 1);
        for (double c : y) lifted.push_back(-c);
        lifted.push_back(0.0);
        lifted_users.push_back(std::move(lifted));
    }
    return {std::move(lifted_items), std::move(lifted_users)};
}

struct LipschitzAudit {
    double max_excess = 0.0;  // max over samples of |dF| - max(dX, dY)
    std::size_t pairs_checked = 0;
};

/// Spot-check the model's 1-Lipschitz contract on random index pairs.
inline LipschitzAudit audit_lipschitz(const LatentModel& model, std::size_t n_pairs,
                                      std::uint64_t seed) {
    rng::Xoshiro256 stream(rng::derive_seed(seed, 0x6c6970ULL));  // "lip"
    LipschitzAudit audit;
    audit.pairs_checked = n_pairs;
    const auto& config = model.config;
    for (std::size_t t = 0; t < n_pairs; ++t) {
        const auto i = static_cast<ItemIndex>(rng::uniform_below(stream, config.n_items));
        const auto j = static_cast<ItemIndex>(rng::uniform_below(stream, config.n_items));
        const auto u = static_cast<UserIndex>(rng::uniform_below(stream, config.n_users));
        const auto v = static_cast<UserIndex>(rng::uniform_below(stream, config.n_users));
        const double df = std::abs(model.f_values.at(i, u) - model.f_values.at(j, v));
        const double bound = std::max(model.item_distance(i, j), model.user_distance(u, v));
        audit.max_excess = std::max(audit.max_excess, df - bound);
    }
    return audit;
}

/// Quantile of |f_i - f_j| over user columns; used to pick the separation
/// eps for consistency sweeps. Exact for small models, seeded subsample for
/// large ones (deterministic either way).
inline double f_gap_quantile(const LatentModel& model, double quantile) {
    if (!(quantile >= 0.0 && quantile <= 1.0)) throw InvalidConfigError("quantile must be in [0, 1]");
    const std::size_t n_items = model.config.n_items;
    const std::size_t n_users = model.config.n_users;
    const std::size_t pairs_per_user = n_items * (n_items - 1) / 2;
    const std::size_t total = pairs_per_user * n_users;

    std::vector<double> gaps;
    constexpr std::size_t kCap = 2'000'000;
    if (total <= kCap) {
        gaps.reserve(total);
        for (UserIndex u = 0; u < n_users; ++u) {
            const auto column = model.f_values.user_column(u);
            for (ItemIndex i = 0; i < n_items; ++i)
                for (ItemIndex j = i + 1; j < n_items; ++j)
                    gaps.push_back(std::abs(column[i] - column[j]));
        }
    } else {
        rng::Xoshiro256 stream(rng::derive_seed(model.config.seed, 0x676170ULL));  // "gap"
        gaps.reserve(kCap);
        for (std::size_t t = 0; t < kCap; ++t) {
            const auto u = static_cast<UserIndex>(rng::uniform_below(stream, n_users));
            auto i = static_cast<ItemIndex>(rng::uniform_below(stream, n_items));
            auto j = static_cast<ItemIndex>(rng::uniform_below(stream, n_items));
            while (i == j) j = static_cast<ItemIndex>(rng::uniform_below(stream, n_items));
            gaps.push_back(std::abs(model.f_values.at(i, u) - model.f_values.at(j, u)));
        }
    }
    if (gaps.empty()) return 0.0;
    const std::size_t idx = std::min(gaps.size() - 1,
                                     static_cast<std::size_t>(quantile * static_cast<double>(gaps.size())));
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(idx), gaps.end());
    return gaps[idx];
}

}  // namespace prefrank
