#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefrank/agreement.hpp"
#include "prefrank/core.hpp"
#include "prefrank/data.hpp"
#include "prefrank/eval.hpp"
#include "prefrank/ranker.hpp"
#include "prefrank/synthgen.hpp"

namespace prefrank {

// ---- enum names ----------------------------------------------------------

inline std::string to_string(AgreementMode mode) {
    return mode == AgreementMode::nonoverlapping ? "nonoverlapping" : "all_pairs";
}
inline std::string to_string(VoteWeighting w) {
    return w == VoteWeighting::uniform ? "uniform" : "agreement_weighted";
}
inline std::string to_string(Geometry g) {
    switch (g) {
        case Geometry::unit_ball_distance: return "unit_ball_distance";
        case Geometry::finite_points: return "finite_points";
        case Geometry::inner_product: return "inner_product";
    }
    return "unit_ball_distance";
}
inline std::string to_string(GFamily g) {
    switch (g) {
        case GFamily::identity: return "identity";
        case GFamily::random_increasing: return "random_increasing";
        case GFamily::step_thresholds: return "step_thresholds";
    }
    return "identity";
}
inline std::string to_string(RatingsFormat f) {
    return f == RatingsFormat::movielens_dat ? "movielens_dat" : "csv_triples";
}

inline AgreementMode agreement_mode_from_string(const std::string& s) {
    if (s == "nonoverlapping") return AgreementMode::nonoverlapping;
    if (s == "all_pairs") return AgreementMode::all_pairs;
    throw InvalidConfigError("unknown agreement mode '" + s + "'");
}
inline VoteWeighting weighting_from_string(const std::string& s) {
    if (s == "uniform") return VoteWeighting::uniform;
    if (s == "agreement_weighted") return VoteWeighting::agreement_weighted;
    throw InvalidConfigError("unknown vote weighting '" + s + "'");
}
inline Geometry geometry_from_string(const std::string& s) {
    if (s == "unit_ball_distance") return Geometry::unit_ball_distance;
    if (s == "finite_points") return Geometry::finite_points;
    if (s == "inner_product") return Geometry::inner_product;
    throw InvalidConfigError("unknown geometry '" + s + "'");
}
inline GFamily g_family_from_string(const std::string& s) {
    if (s == "identity") return GFamily::identity;
    if (s == "random_increasing") return GFamily::random_increasing;
    if (s == "step_thresholds") return GFamily::step_thresholds;
    throw InvalidConfigError("unknown g family '" + s + "'");
}
inline RatingsFormat ratings_format_from_string(const std::string& s) {
    if (s == "movielens_dat") return RatingsFormat::movielens_dat;
    if (s == "csv_triples") return RatingsFormat::csv_triples;
    throw InvalidConfigError("unknown ratings format '" + s + "'");
}

// ---- core types ----------------------------------------------------------

inline nlohmann::json SparseRatingMatrix::to_json() const {
    nlohmann::json j;
    j["type"] = "sparse_rating_matrix";
    j["n_items"] = n_items();
    j["n_users"] = n_users();
    nlohmann::json entries = nlohmann::json::array();
    for (const RatingTriple& t : triples())
        entries.push_back(nlohmann::json::array({t.item, t.user, t.rating}));
    j["entries"] = std::move(entries);
    return j;
}

inline SparseRatingMatrix SparseRatingMatrix::from_json(const nlohmann::json& j) {
    std::vector<RatingTriple> triples;
    for (const auto& e : j.at("entries"))
        triples.push_back({e.at(0).get<ItemIndex>(), e.at(1).get<UserIndex>(), e.at(2).get<double>()});
    return SparseRatingMatrix::build(j.at("n_items").get<std::size_t>(),
                                     j.at("n_users").get<std::size_t>(), triples);
}

inline nlohmann::json RankingCollection::to_json() const {
    nlohmann::json j;
    j["type"] = "ranking_collection";
    j["n_items"] = n_items();
    j["n_users"] = n_users();
    nlohmann::json rows = nlohmann::json::array();
    for (UserIndex u = 0; u < n_users(); ++u) {
        const auto r = user_ranking(u);
        rows.push_back(std::vector<Rank>(r.begin(), r.end()));
    }
    j["ranks"] = std::move(rows);
    return j;
}

inline RankingCollection RankingCollection::from_json(const nlohmann::json& j) {
    RankingCollection out(j.at("n_items").get<std::size_t>(), j.at("n_users").get<std::size_t>());
    const auto& rows = j.at("ranks");
    if (rows.size() != out.n_users()) throw ShapeMismatchError("ranking rows != n_users");
    for (UserIndex u = 0; u < out.n_users(); ++u) {
        const auto row = rows.at(u).get<std::vector<Rank>>();
        out.set_user_ranking(u, row);
    }
    return out;
}

// ---- synthgen ------------------------------------------------------------

inline nlohmann::json config_to_json(const LatentModelConfig& c) {
    nlohmann::json j;
    j["n_items"] = c.n_items;
    j["n_users"] = c.n_users;
    j["dim"] = c.dim;
    j["geometry"] = to_string(c.geometry);
    j["g_family"] = to_string(c.g_family);
    j["p"] = c.p;
    j["seed"] = c.seed;
    if (c.g_family == GFamily::step_thresholds) {
        j["rating_levels"] = c.rating_levels;
        j["utility_bound"] = c.utility_bound;
    }
    if (c.geometry == Geometry::finite_points) {
        j["item_points"] = c.item_points;
        if (!c.user_points.empty()) j["user_points"] = c.user_points;
    }
    return j;
}

inline LatentModelConfig config_from_json(const nlohmann::json& j) {
    LatentModelConfig c;
    c.n_items = j.at("n_items").get<std::size_t>();
    c.n_users = j.at("n_users").get<std::size_t>();
    c.dim = j.value("dim", std::size_t{2});
    c.geometry = geometry_from_string(j.value("geometry", std::string("unit_ball_distance")));
    c.g_family = g_family_from_string(j.value("g_family", std::string("identity")));
    c.p = j.value("p", 1.0);
    c.seed = j.value("seed", std::uint64_t{0});
    c.rating_levels = j.value("rating_levels", std::uint32_t{5});
    c.utility_bound = j.value("utility_bound", 2.0);
    if (j.contains("item_points")) c.item_points = j.at("item_points").get<std::vector<std::vector<double>>>();
    if (j.contains("user_points")) c.user_points = j.at("user_points").get<std::vector<std::vector<double>>>();
    return c;
}

inline nlohmann::json LatentModel::to_json(bool include_tensors) const {
    nlohmann::json j;
    j["type"] = "latent_model";
    j["config"] = config_to_json(config);
    if (include_tensors) {
        nlohmann::json t;
        t["feat_dim"] = feat_dim;
        t["item_features"] = item_features;
        t["user_features"] = user_features;
        if (!raw_item_features.empty()) t["raw_item_features"] = raw_item_features;
        if (!raw_user_features.empty()) t["raw_user_features"] = raw_user_features;
        if (!thresholds.empty()) t["thresholds"] = thresholds;
        if (!g_maps.empty()) {
            nlohmann::json maps = nlohmann::json::array();
            for (const auto& g : g_maps) maps.push_back({{"xs", g.xs}, {"ys", g.ys}});
            t["g_maps"] = std::move(maps);
        }
        t["f"] = std::vector<double>(f_values.flat().begin(), f_values.flat().end());
        t["h"] = std::vector<double>(h_values.flat().begin(), h_values.flat().end());
        t["observed"] = observed;
        j["tensors"] = std::move(t);
    }
    return j;
}

inline LatentModel LatentModel::from_json(const nlohmann::json& j) {
    const LatentModelConfig config = config_from_json(j.at("config"));
    if (!j.contains("tensors")) return sample_model(config);

    LatentModel m;
    m.config = config;
    const auto& t = j.at("tensors");
    m.feat_dim = t.at("feat_dim").get<std::size_t>();
    m.item_features = t.at("item_features").get<std::vector<double>>();
    m.user_features = t.at("user_features").get<std::vector<double>>();
    if (t.contains("raw_item_features"))
        m.raw_item_features = t.at("raw_item_features").get<std::vector<double>>();
    if (t.contains("raw_user_features"))
        m.raw_user_features = t.at("raw_user_features").get<std::vector<double>>();
    if (t.contains("thresholds"))
        m.thresholds = t.at("thresholds").get<std::vector<std::vector<double>>>();
    if (t.contains("g_maps")) {
        for (const auto& g : t.at("g_maps")) {
            PiecewiseIncreasing map;
            map.xs = g.at("xs").get<std::vector<double>>();
            map.ys = g.at("ys").get<std::vector<double>>();
            m.g_maps.push_back(std::move(map));
        }
    }
    const auto f_flat = t.at("f").get<std::vector<double>>();
    const auto h_flat = t.at("h").get<std::vector<double>>();
    if (f_flat.size() != config.n_items * config.n_users || f_flat.size() != h_flat.size())
        throw ShapeMismatchError("model tensor size mismatch");
    m.f_values = DenseMatrix(config.n_items, config.n_users);
    m.h_values = DenseMatrix(config.n_items, config.n_users);
    std::copy(f_flat.begin(), f_flat.end(), m.f_values.flat().begin());
    std::copy(h_flat.begin(), h_flat.end(), m.h_values.flat().begin());
    m.observed = t.at("observed").get<std::vector<std::uint8_t>>();
    if (m.observed.size() != config.n_items * config.n_users)
        throw ShapeMismatchError("model mask size mismatch");
    return m;
}

// ---- eval ----------------------------------------------------------------

inline nlohmann::json MetricReport::to_json() const {
    auto metric_json = [](const PerUserMetric& m) {
        nlohmann::json j;
        j["mean"] = m.mean;
        j["stddev"] = m.stddev;
        j["n_users"] = m.values.size();
        nlohmann::json per_user = nlohmann::json::array();
        for (const auto& [u, value] : m.values)
            per_user.push_back(nlohmann::json::array({u, value}));
        j["per_user"] = std::move(per_user);
        return j;
    };
    nlohmann::json j;
    j["k"] = k;
    j["relevance_threshold"] = relevance_threshold;
    j["users_evaluated"] = users_evaluated;
    j["kendall_tau"] = metric_json(kendall_tau);
    j["spearman_rho"] = metric_json(spearman_rho);
    j["ndcg_at_k"] = metric_json(ndcg);
    j["precision_at_k"] = metric_json(precision);
    return j;
}

// ---- split manifests -----------------------------------------------------

inline nlohmann::json split_manifest_to_json(const std::vector<ResampleSplit>& splits) {
    nlohmann::json j;
    j["type"] = "split_manifest";
    nlohmann::json resamples = nlohmann::json::array();
    for (const auto& s : splits) {
        nlohmann::json r;
        r["train"] = s.train_indices;
        r["val"] = s.val_indices;
        r["test"] = s.test_indices;
        resamples.push_back(std::move(r));
    }
    j["resamples"] = std::move(resamples);
    return j;
}

inline std::vector<ResampleSplit> split_manifest_from_json(const nlohmann::json& j,
                                                           std::span<const RatingTriple> triples,
                                                           std::size_t n_items,
                                                           std::size_t n_users) {
    std::vector<ResampleSplit> out;
    for (const auto& r : j.at("resamples")) {
        out.push_back(split_from_indices(triples, n_items, n_users,
                                         r.at("train").get<std::vector<std::size_t>>(),
                                         r.at("val").get<std::vector<std::size_t>>(),
                                         r.at("test").get<std::vector<std::size_t>>()));
    }
    return out;
}

}  // namespace prefrank
