#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "prefrank/data.hpp"
#include "prefrank/eval.hpp"
#include "prefrank/json_io.hpp"
#include "prefrank/ranker.hpp"
#include "prefrank/synthgen.hpp"

namespace prefrank {

enum class ExperimentMode { synth_consistency, real_pipeline, grid_search };

inline std::string to_string(ExperimentMode m) {
    switch (m) {
        case ExperimentMode::synth_consistency: return "synth_consistency";
        case ExperimentMode::real_pipeline: return "real_pipeline";
        case ExperimentMode::grid_search: return "grid_search";
    }
    return "synth_consistency";
}

inline ExperimentMode experiment_mode_from_string(const std::string& s) {
    if (s == "synth_consistency") return ExperimentMode::synth_consistency;
    if (s == "real_pipeline") return ExperimentMode::real_pipeline;
    if (s == "grid_search") return ExperimentMode::grid_search;
    throw InvalidConfigError("unknown experiment mode '" + s + "'");
}

/// Observation probability rule for synthetic sweeps: fixed value or the
/// theorem-style max(n1^-e, n2^-e).
struct PRule {
    enum class Kind { fixed, max_power } kind = Kind::fixed;
    double value = 1.0;     // fixed
    double exponent = 0.3;  // max_power

    double resolve(std::size_t n_items, std::size_t n_users) const {
        if (kind == Kind::fixed) return value;
        const double p = std::max(std::pow(static_cast<double>(n_items), -exponent),
                                  std::pow(static_cast<double>(n_users), -exponent));
        return std::min(1.0, p);
    }
};

/// Separation eps for dis_2eps: explicit values or a per-model quantile of
/// the |f_i - f_j| gap distribution.
struct EpsRule {
    enum class Kind { fixed, f_gap_quantile } kind = Kind::f_gap_quantile;
    std::vector<double> values;  // fixed
    double quantile = 0.8;       // f_gap_quantile

    std::size_t slots() const { return kind == Kind::fixed ? values.size() : 1; }

    double resolve(const LatentModel& model, std::size_t slot) const {
        if (kind == Kind::fixed) return values.at(slot);
        return f_gap_quantile(model, quantile);
    }
};

struct KRule {
    enum class Kind { theorem_continuous, theorem_discrete, fixed } kind = Kind::theorem_continuous;
    std::uint32_t value = 1;  // fixed
};

struct SynthSweepConfig {
    std::size_t n_items = 100;
    std::vector<std::size_t> n_users_sweep{200, 800, 3200};
    std::size_t dim = 2;
    Geometry geometry = Geometry::unit_ball_distance;
    GFamily g_family = GFamily::identity;
    std::uint32_t rating_levels = 5;
    double utility_bound = 2.0;
    PRule p_rule{PRule::Kind::max_power, 1.0, 0.3};
    EpsRule eps_rule;
    KRule k_rule;
    std::uint32_t n_seeds = 5;
    AgreementMode agreement_mode = AgreementMode::nonoverlapping;

    void validate() const {
        if (n_items < 2) throw InvalidConfigError("synth sweep needs n_items >= 2");
        if (n_users_sweep.empty()) throw InvalidConfigError("synth sweep needs at least one n_users");
        if (n_seeds == 0) throw InvalidConfigError("synth sweep needs n_seeds >= 1");
        if (eps_rule.kind == EpsRule::Kind::fixed && eps_rule.values.empty())
            throw InvalidConfigError("fixed eps rule needs values");
    }
};

struct GridConfig {
    std::vector<std::uint32_t> beta{5, 6, 7, 8, 9, 10, 11, 12};
    std::vector<std::uint32_t> k{7, 9, 11, 13, 15, 17, 19, 21, 23, 25, 27, 29, 31};
    std::vector<VoteWeighting> weighting{VoteWeighting::uniform, VoteWeighting::agreement_weighted};
    AgreementMode agreement_mode = AgreementMode::all_pairs;

    void validate() const {
        if (beta.empty() || k.empty() || weighting.empty())
            throw InvalidConfigError("grid lists must be nonempty");
        for (std::uint32_t b : beta)
            if (b < 2) throw InvalidConfigError("grid beta values must be >= 2");
        for (std::uint32_t kk : k)
            if (kk < 1) throw InvalidConfigError("grid k values must be >= 1");
    }
};

struct PopularityConfig {
    std::size_t top_items = 2000;
    std::size_t n_users = 4000;
    std::size_t min_user_ratings = 100;
};

struct DataConfig {
    std::string path;
    RatingsFormat format = RatingsFormat::csv_triples;
    std::optional<PopularityConfig> popularity;
    SplitSpec split;
    bool quantize = false;
    bool monotone_transform = false;
};

struct MetricConfig {
    std::size_t k = 5;
    double relevance_threshold = 5.0;
};

enum class SelectionMetric { kendall_tau, ndcg_at_k };

inline std::string to_string(SelectionMetric m) {
    return m == SelectionMetric::kendall_tau ? "kendall_tau" : "ndcg_at_k";
}
inline SelectionMetric selection_metric_from_string(const std::string& s) {
    if (s == "kendall_tau") return SelectionMetric::kendall_tau;
    if (s == "ndcg_at_k") return SelectionMetric::ndcg_at_k;
    throw InvalidConfigError("unknown selection metric '" + s + "'");
}

struct ExperimentConfig {
    ExperimentMode mode = ExperimentMode::synth_consistency;
    std::uint64_t seed = 0;
    std::string name = "experiment";
    std::string output = "out";
    SynthSweepConfig synth;
    DataConfig data;
    GridConfig grid;
    SelectionMetric selection_metric = SelectionMetric::kendall_tau;
    MetricConfig metrics;

    void validate() const {
        if (mode == ExperimentMode::synth_consistency) {
            synth.validate();
        } else {
            if (data.path.empty()) throw InvalidConfigError("data mode needs a dataset path");
            data.split.validate();
            grid.validate();
        }
    }
};

// ---- config JSON ----------------------------------------------------------

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["mode"] = to_string(c.mode);
    j["seed"] = c.seed;
    j["name"] = c.name;
    j["output"] = c.output;
    if (c.mode == ExperimentMode::synth_consistency) {
        nlohmann::json s;
        s["n_items"] = c.synth.n_items;
        s["n_users_sweep"] = c.synth.n_users_sweep;
        s["dim"] = c.synth.dim;
        s["geometry"] = to_string(c.synth.geometry);
        s["g_family"] = to_string(c.synth.g_family);
        s["rating_levels"] = c.synth.rating_levels;
        s["utility_bound"] = c.synth.utility_bound;
        s["p_rule"] = c.synth.p_rule.kind == PRule::Kind::fixed
                          ? nlohmann::json{{"type", "fixed"}, {"value", c.synth.p_rule.value}}
                          : nlohmann::json{{"type", "max_power"}, {"exponent", c.synth.p_rule.exponent}};
        s["eps_rule"] = c.synth.eps_rule.kind == EpsRule::Kind::fixed
                            ? nlohmann::json{{"type", "fixed"}, {"values", c.synth.eps_rule.values}}
                            : nlohmann::json{{"type", "f_gap_quantile"},
                                             {"quantile", c.synth.eps_rule.quantile}};
        switch (c.synth.k_rule.kind) {
            case KRule::Kind::theorem_continuous: s["k_rule"] = {{"type", "theorem_continuous"}}; break;
            case KRule::Kind::theorem_discrete: s["k_rule"] = {{"type", "theorem_discrete"}}; break;
            case KRule::Kind::fixed: s["k_rule"] = {{"type", "fixed"}, {"value", c.synth.k_rule.value}}; break;
        }
        s["n_seeds"] = c.synth.n_seeds;
        s["agreement_mode"] = to_string(c.synth.agreement_mode);
        j["synth"] = std::move(s);
    } else {
        nlohmann::json d;
        d["path"] = c.data.path;
        d["format"] = to_string(c.data.format);
        if (c.data.popularity) {
            d["popularity"] = {{"top_items", c.data.popularity->top_items},
                               {"n_users", c.data.popularity->n_users},
                               {"min_user_ratings", c.data.popularity->min_user_ratings}};
        }
        d["split"] = {{"train_frac", c.data.split.train_frac},
                      {"val_frac", c.data.split.val_frac},
                      {"test_frac", c.data.split.test_frac},
                      {"min_train_ratings", c.data.split.min_train_ratings},
                      {"min_val_ratings", c.data.split.min_val_ratings},
                      {"min_test_ratings", c.data.split.min_test_ratings},
                      {"n_resamples", c.data.split.n_resamples}};
        d["quantize"] = c.data.quantize;
        d["monotone_transform"] = c.data.monotone_transform;
        j["data"] = std::move(d);
        nlohmann::json g;
        g["beta"] = c.grid.beta;
        g["k"] = c.grid.k;
        nlohmann::json w = nlohmann::json::array();
        for (VoteWeighting vw : c.grid.weighting) w.push_back(to_string(vw));
        g["weighting"] = std::move(w);
        g["agreement_mode"] = to_string(c.grid.agreement_mode);
        j["grid"] = std::move(g);
        j["selection_metric"] = to_string(c.selection_metric);
        j["metrics"] = {{"k", c.metrics.k}, {"relevance_threshold", c.metrics.relevance_threshold}};
    }
    return j;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        c.mode = experiment_mode_from_string(j.at("mode").get<std::string>());
        c.seed = j.value("seed", std::uint64_t{0});
        c.name = j.value("name", std::string("experiment"));
        c.output = j.value("output", std::string("out"));
        if (c.mode == ExperimentMode::synth_consistency) {
            const auto& s = j.at("synth");
            c.synth.n_items = s.value("n_items", std::size_t{100});
            if (s.contains("n_users_sweep"))
                c.synth.n_users_sweep = s.at("n_users_sweep").get<std::vector<std::size_t>>();
            c.synth.dim = s.value("dim", std::size_t{2});
            c.synth.geometry = geometry_from_string(s.value("geometry", std::string("unit_ball_distance")));
            c.synth.g_family = g_family_from_string(s.value("g_family", std::string("identity")));
            c.synth.rating_levels = s.value("rating_levels", std::uint32_t{5});
            c.synth.utility_bound = s.value("utility_bound", 2.0);
            if (s.contains("p_rule")) {
                const auto& p = s.at("p_rule");
                const std::string type = p.at("type").get<std::string>();
                if (type == "fixed") {
                    c.synth.p_rule.kind = PRule::Kind::fixed;
                    c.synth.p_rule.value = p.at("value").get<double>();
                } else if (type == "max_power") {
                    c.synth.p_rule.kind = PRule::Kind::max_power;
                    c.synth.p_rule.exponent = p.value("exponent", 0.3);
                } else {
                    throw InvalidConfigError("unknown p_rule type '" + type + "'");
                }
            }
            if (s.contains("eps_rule")) {
                const auto& e = s.at("eps_rule");
                const std::string type = e.at("type").get<std::string>();
                if (type == "fixed") {
                    c.synth.eps_rule.kind = EpsRule::Kind::fixed;
                    c.synth.eps_rule.values = e.at("values").get<std::vector<double>>();
                } else if (type == "f_gap_quantile") {
                    c.synth.eps_rule.kind = EpsRule::Kind::f_gap_quantile;
                    c.synth.eps_rule.quantile = e.value("quantile", 0.8);
                } else {
                    throw InvalidConfigError("unknown eps_rule type '" + type + "'");
                }
            }
            if (s.contains("k_rule")) {
                const auto& k = s.at("k_rule");
                const std::string type = k.at("type").get<std::string>();
                if (type == "theorem_continuous") c.synth.k_rule.kind = KRule::Kind::theorem_continuous;
                else if (type == "theorem_discrete") c.synth.k_rule.kind = KRule::Kind::theorem_discrete;
                else if (type == "fixed") {
                    c.synth.k_rule.kind = KRule::Kind::fixed;
                    c.synth.k_rule.value = k.at("value").get<std::uint32_t>();
                } else {
                    throw InvalidConfigError("unknown k_rule type '" + type + "'");
                }
            }
            c.synth.n_seeds = s.value("n_seeds", std::uint32_t{5});
            c.synth.agreement_mode =
                agreement_mode_from_string(s.value("agreement_mode", std::string("nonoverlapping")));
        } else {
            const auto& d = j.at("data");
            c.data.path = d.at("path").get<std::string>();
            c.data.format = ratings_format_from_string(d.value("format", std::string("csv_triples")));
            if (d.contains("popularity")) {
                PopularityConfig pop;
                const auto& p = d.at("popularity");
                pop.top_items = p.value("top_items", std::size_t{2000});
                pop.n_users = p.value("n_users", std::size_t{4000});
                pop.min_user_ratings = p.value("min_user_ratings", std::size_t{100});
                c.data.popularity = pop;
            }
            if (d.contains("split")) {
                const auto& sp = d.at("split");
                c.data.split.train_frac = sp.value("train_frac", 0.40);
                c.data.split.val_frac = sp.value("val_frac", 0.15);
                c.data.split.test_frac = sp.value("test_frac", 0.45);
                c.data.split.min_train_ratings = sp.value("min_train_ratings", std::uint32_t{0});
                c.data.split.min_val_ratings = sp.value("min_val_ratings", std::uint32_t{0});
                c.data.split.min_test_ratings = sp.value("min_test_ratings", std::uint32_t{0});
                c.data.split.n_resamples = sp.value("n_resamples", std::uint32_t{5});
            }
            c.data.quantize = d.value("quantize", false);
            c.data.monotone_transform = d.value("monotone_transform", false);
            if (j.contains("grid")) {
                const auto& g = j.at("grid");
                if (g.contains("beta")) c.grid.beta = g.at("beta").get<std::vector<std::uint32_t>>();
                if (g.contains("k")) c.grid.k = g.at("k").get<std::vector<std::uint32_t>>();
                if (g.contains("weighting")) {
                    c.grid.weighting.clear();
                    for (const auto& w : g.at("weighting"))
                        c.grid.weighting.push_back(weighting_from_string(w.get<std::string>()));
                }
                c.grid.agreement_mode =
                    agreement_mode_from_string(g.value("agreement_mode", std::string("all_pairs")));
            }
            c.selection_metric =
                selection_metric_from_string(j.value("selection_metric", std::string("kendall_tau")));
            if (j.contains("metrics")) {
                c.metrics.k = j.at("metrics").value("k", std::size_t{5});
                c.metrics.relevance_threshold = j.at("metrics").value("relevance_threshold", 5.0);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidConfigError(std::string("bad experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    return experiment_config_from_json(j);
}

// ---- synthetic consistency sweep -------------------------------------------

/// Everything produced while evaluating one (n_users, seed) sweep point.
struct SynthPointArtifacts {
    LatentModel model;
    SparseRatingMatrix observed;
    RankerConfig ranker;
    RankingCollection sigma;
    std::vector<double> eps;        // one per eps slot
    std::vector<std::uint64_t> dis; // dis_2eps per slot
    std::vector<double> rate;       // dis / (n_users * C(n_items, 2))
};

inline SynthPointArtifacts run_synth_point(const SynthSweepConfig& sweep, std::size_t n_users,
                                           std::uint32_t seed_index, std::uint64_t experiment_seed,
                                           unsigned n_threads) {
    SynthPointArtifacts art;
    LatentModelConfig mc;
    mc.n_items = sweep.n_items;
    mc.n_users = n_users;
    mc.dim = sweep.dim;
    mc.geometry = sweep.geometry;
    mc.g_family = sweep.g_family;
    mc.rating_levels = sweep.rating_levels;
    mc.utility_bound = sweep.utility_bound;
    mc.p = sweep.p_rule.resolve(sweep.n_items, n_users);
    mc.seed = rng::mix_key(experiment_seed, {0x73796e7468ULL /* "synth" */, n_users, seed_index});

    art.model = sample_model(mc);
    art.observed = art.model.observed_matrix();

    switch (sweep.k_rule.kind) {
        case KRule::Kind::theorem_continuous:
            art.ranker = continuous_preset(art.observed, rng::derive_seed(mc.seed, 0x72616e6bULL),
                                           sweep.agreement_mode);
            break;
        case KRule::Kind::theorem_discrete:
            art.ranker = discrete_preset(art.observed, rng::derive_seed(mc.seed, 0x72616e6bULL),
                                         sweep.agreement_mode);
            break;
        case KRule::Kind::fixed:
            art.ranker = continuous_preset(art.observed, rng::derive_seed(mc.seed, 0x72616e6bULL),
                                           sweep.agreement_mode);
            art.ranker.k = sweep.k_rule.value;
            break;
    }

    art.sigma = multi_rank(art.observed, art.ranker, n_threads);

    const double denom = static_cast<double>(n_users) *
                         (static_cast<double>(sweep.n_items) * (static_cast<double>(sweep.n_items) - 1.0) / 2.0);
    for (std::size_t slot = 0; slot < sweep.eps_rule.slots(); ++slot) {
        const double eps = sweep.eps_rule.resolve(art.model, slot);
        const std::uint64_t dis =
            dis_eps(art.sigma, art.model.f_values, art.model.h_values, 2.0 * eps);
        art.eps.push_back(eps);
        art.dis.push_back(dis);
        art.rate.push_back(denom == 0.0 ? 0.0 : static_cast<double>(dis) / denom);
    }
    return art;
}

struct SynthSeedOutcome {
    std::uint32_t seed_index = 0;
    std::uint64_t model_seed = 0;
    double p = 0.0;
    std::uint32_t beta = 0;
    std::uint32_t k = 0;
    double eps = 0.0;
    std::uint64_t dis_2eps = 0;
    double rate = 0.0;
};

struct SynthSweepRow {
    std::size_t n_users = 0;
    std::size_t eps_slot = 0;
    std::vector<SynthSeedOutcome> per_seed;
    double mean_rate = 0.0;
    double std_rate = 0.0;
};

struct SynthResult {
    std::vector<SynthSweepRow> rows;
};

inline SynthResult run_synth_consistency(const ExperimentConfig& cfg, unsigned n_threads) {
    cfg.validate();
    if (cfg.mode != ExperimentMode::synth_consistency)
        throw InvalidConfigError("run_synth_consistency needs mode = synth_consistency");
    const SynthSweepConfig& sweep = cfg.synth;

    SynthResult result;
    for (std::size_t n_users : sweep.n_users_sweep) {
        std::vector<SynthSweepRow> rows(sweep.eps_rule.slots());
        for (std::size_t slot = 0; slot < rows.size(); ++slot) {
            rows[slot].n_users = n_users;
            rows[slot].eps_slot = slot;
        }
        for (std::uint32_t s = 0; s < sweep.n_seeds; ++s) {
            const SynthPointArtifacts art = run_synth_point(sweep, n_users, s, cfg.seed, n_threads);
            for (std::size_t slot = 0; slot < rows.size(); ++slot) {
                SynthSeedOutcome o;
                o.seed_index = s;
                o.model_seed = art.model.config.seed;
                o.p = art.model.config.p;
                o.beta = art.ranker.beta;
                o.k = art.ranker.k;
                o.eps = art.eps[slot];
                o.dis_2eps = art.dis[slot];
                o.rate = art.rate[slot];
                rows[slot].per_seed.push_back(o);
            }
        }
        for (auto& row : rows) {
            double mean = 0.0;
            for (const auto& o : row.per_seed) mean += o.rate;
            mean /= static_cast<double>(row.per_seed.size());
            double var = 0.0;
            for (const auto& o : row.per_seed) var += (o.rate - mean) * (o.rate - mean);
            row.mean_rate = mean;
            row.std_rate = std::sqrt(var / static_cast<double>(row.per_seed.size()));
            result.rows.push_back(std::move(row));
        }
    }
    return result;
}

inline nlohmann::json synth_result_to_json(const ExperimentConfig& cfg, const SynthResult& r) {
    nlohmann::json j;
    j["mode"] = "synth_consistency";
    j["config"] = experiment_config_to_json(cfg);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json x;
        x["n_users"] = row.n_users;
        x["eps_slot"] = row.eps_slot;
        x["mean_rate"] = row.mean_rate;
        x["std_rate"] = row.std_rate;
        nlohmann::json seeds = nlohmann::json::array();
        for (const auto& o : row.per_seed) {
            seeds.push_back({{"seed_index", o.seed_index},
                             {"model_seed", o.model_seed},
                             {"p", o.p},
                             {"beta", o.beta},
                             {"k", o.k},
                             {"eps", o.eps},
                             {"dis_2eps", o.dis_2eps},
                             {"rate", o.rate}});
        }
        x["per_seed"] = std::move(seeds);
        rows.push_back(std::move(x));
    }
    j["sweep"] = std::move(rows);
    return j;
}

// ---- grid search ------------------------------------------------------------

struct GridPointResult {
    std::uint32_t beta = 0;
    std::uint32_t k = 0;
    VoteWeighting weighting = VoteWeighting::uniform;
    double score = 0.0;
    std::size_t scored_users = 0;
};

struct GridSearchResult {
    std::vector<GridPointResult> table;  // canonical order: beta, k, weighting
    GridPointResult best;
    RankingCollection best_sigma;  // multi_rank of the winning point on train
};

inline double selection_score(const MetricReport& report, SelectionMetric metric) {
    return metric == SelectionMetric::kendall_tau ? report.kendall_tau.mean : report.ndcg.mean;
}

inline GridSearchResult run_grid_search(const SparseRatingMatrix& train,
                                        const SparseRatingMatrix& val, const GridConfig& grid,
                                        SelectionMetric selection, const MetricConfig& metrics,
                                        std::uint64_t seed, unsigned n_threads) {
    grid.validate();
    GridSearchResult result;
    bool have_best = false;
    for (std::uint32_t beta : grid.beta) {
        for (std::uint32_t k : grid.k) {
            for (VoteWeighting w : grid.weighting) {
                RankerConfig rc;
                rc.beta = beta;
                rc.k = k;
                rc.weighting = w;
                rc.agreement_mode = grid.agreement_mode;
                rc.seed = seed;
                const RankingCollection sigma = multi_rank(train, rc, n_threads);
                const MetricReport report =
                    compute_metric_report(sigma, val, metrics.k, metrics.relevance_threshold);
                GridPointResult point;
                point.beta = beta;
                point.k = k;
                point.weighting = w;
                point.score = selection_score(report, selection);
                point.scored_users = selection == SelectionMetric::kendall_tau
                                         ? report.kendall_tau.values.size()
                                         : report.ndcg.values.size();
                result.table.push_back(point);
                // argmax; ties prefer smaller beta, then smaller k, then the
                // earlier weighting — i.e. first in canonical order wins
                if (!have_best || point.score > result.best.score) {
                    result.best = point;
                    result.best_sigma = sigma;
                    have_best = true;
                }
            }
        }
    }
    return result;
}

inline nlohmann::json grid_result_to_json(const GridSearchResult& g) {
    nlohmann::json j;
    nlohmann::json table = nlohmann::json::array();
    for (const auto& p : g.table) {
        table.push_back({{"beta", p.beta},
                         {"k", p.k},
                         {"weighting", to_string(p.weighting)},
                         {"score", p.score},
                         {"scored_users", p.scored_users}});
    }
    j["table"] = std::move(table);
    j["best"] = {{"beta", g.best.beta},
                 {"k", g.best.k},
                 {"weighting", to_string(g.best.weighting)},
                 {"score", g.best.score}};
    return j;
}

// ---- real-data pipeline ------------------------------------------------------

struct ResampleOutcome {
    std::size_t resample_index = 0;
    GridSearchResult grid;
    MetricReport test_report;
};

struct AggregateMetric {
    double mean = 0.0;
    double stddev = 0.0;
};

struct PipelineResult {
    std::vector<ResampleOutcome> resamples;
    AggregateMetric kendall_tau, spearman_rho, ndcg, precision;
};

namespace detail {

inline AggregateMetric aggregate(const std::vector<double>& xs) {
    AggregateMetric a;
    if (xs.empty()) return a;
    for (double x : xs) a.mean += x;
    a.mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - a.mean) * (x - a.mean);
    a.stddev = std::sqrt(var / static_cast<double>(xs.size()));
    return a;
}

}  // namespace detail

/// Load + preprocess a dataset per the config: parse, optional popularity
/// filter, optional quantization. Monotone transforms happen per split.
inline RawRatings load_dataset(const DataConfig& data, std::uint64_t seed) {
    RawRatings raw = parse_ratings(data.path, data.format);
    if (data.popularity) {
        raw = popularity_filter(raw, data.popularity->top_items, data.popularity->n_users,
                                data.popularity->min_user_ratings,
                                rng::derive_seed(seed, 0x706f7075ULL));
    }
    if (data.quantize) raw.triples = quantize(raw.triples);
    return raw;
}

/// Full protocol: resample, optional per-user monotone transform of the
/// algorithm-visible splits, grid search on validation, metrics on the raw
/// test ratings, aggregated across resamples.
inline PipelineResult run_real_pipeline(const ExperimentConfig& cfg, unsigned n_threads,
                                        bool skip_grid = false) {
    cfg.validate();
    if (cfg.mode == ExperimentMode::synth_consistency)
        throw InvalidConfigError("run_real_pipeline needs a data mode");

    const RawRatings raw = load_dataset(cfg.data, cfg.seed);
    SplitSpec split = cfg.data.split;
    split.seed = rng::derive_seed(cfg.seed, 0x73706c69ULL);
    const std::vector<ResampleSplit> splits =
        resample_split(raw.triples, raw.n_items(), raw.n_users(), split);

    PipelineResult result;
    std::vector<double> taus, rhos, ndcgs, precisions;
    for (std::size_t r = 0; r < splits.size(); ++r) {
        SparseRatingMatrix train = splits[r].train;
        SparseRatingMatrix val = splits[r].val;
        const SparseRatingMatrix& test = splits[r].test;
        if (cfg.data.monotone_transform) {
            MonotoneTransformSpec mono;
            mono.seed = rng::derive_seed(cfg.seed, 0x6d6f6e6fULL);
            train = random_monotone_transform(train, mono);
            val = random_monotone_transform(val, mono);
        }

        ResampleOutcome outcome;
        outcome.resample_index = r;
        GridConfig grid = cfg.grid;
        if (skip_grid) {
            grid.beta = {cfg.grid.beta.front()};
            grid.k = {cfg.grid.k.front()};
            grid.weighting = {cfg.grid.weighting.front()};
        }
        outcome.grid = run_grid_search(train, val, grid, cfg.selection_metric, cfg.metrics,
                                       rng::mix_key(cfg.seed, {0x72616e6bULL, r}), n_threads);
        outcome.test_report = compute_metric_report(outcome.grid.best_sigma, test, cfg.metrics.k,
                                                    cfg.metrics.relevance_threshold);
        taus.push_back(outcome.test_report.kendall_tau.mean);
        rhos.push_back(outcome.test_report.spearman_rho.mean);
        ndcgs.push_back(outcome.test_report.ndcg.mean);
        precisions.push_back(outcome.test_report.precision.mean);
        result.resamples.push_back(std::move(outcome));
    }
    result.kendall_tau = detail::aggregate(taus);
    result.spearman_rho = detail::aggregate(rhos);
    result.ndcg = detail::aggregate(ndcgs);
    result.precision = detail::aggregate(precisions);
    return result;
}

inline nlohmann::json pipeline_result_to_json(const ExperimentConfig& cfg,
                                              const PipelineResult& r) {
    nlohmann::json j;
    j["mode"] = "real_pipeline";
    j["config"] = experiment_config_to_json(cfg);
    nlohmann::json resamples = nlohmann::json::array();
    for (const auto& o : r.resamples) {
        nlohmann::json x;
        x["index"] = o.resample_index;
        x["grid"] = grid_result_to_json(o.grid);
        x["test_metrics"] = o.test_report.to_json();
        resamples.push_back(std::move(x));
    }
    j["resamples"] = std::move(resamples);
    auto agg = [](const AggregateMetric& a) {
        return nlohmann::json{{"mean", a.mean}, {"stddev", a.stddev}};
    };
    j["aggregate"] = {{"kendall_tau", agg(r.kendall_tau)},
                      {"spearman_rho", agg(r.spearman_rho)},
                      {"ndcg_at_k", agg(r.ndcg)},
                      {"precision_at_k", agg(r.precision)}};
    return j;
}

// ---- report files -------------------------------------------------------------

namespace detail {

inline std::string format_double(double x) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), ptr);
}

}  // namespace detail

/// Flat CSV rows: dataset, algorithm, beta, k, metric, mean, std, seed.
inline std::string pipeline_result_to_csv(const ExperimentConfig& cfg, const PipelineResult& r) {
    std::string out = "dataset,algorithm,beta,k,metric,mean,std,seed\n";
    auto add = [&](const std::string& metric, const AggregateMetric& a) {
        // hyperparameters may differ per resample; report the modal best point
        const auto& best = r.resamples.empty() ? GridPointResult{} : r.resamples.front().grid.best;
        out += cfg.name + "," +
               (best.weighting == VoteWeighting::uniform ? "MR" : "MRW") + "," +
               std::to_string(best.beta) + "," + std::to_string(best.k) + "," + metric + "," +
               detail::format_double(a.mean) + "," + detail::format_double(a.stddev) + "," +
               std::to_string(cfg.seed) + "\n";
    };
    add("kendall_tau", r.kendall_tau);
    add("spearman_rho", r.spearman_rho);
    add("ndcg_at_k", r.ndcg);
    add("precision_at_k", r.precision);
    return out;
}

inline std::string synth_result_to_csv(const ExperimentConfig& cfg, const SynthResult& r) {
    std::string out = "dataset,algorithm,beta,k,metric,mean,std,seed\n";
    for (const auto& row : r.rows) {
        const std::uint32_t beta = row.per_seed.empty() ? 0 : row.per_seed.front().beta;
        const std::uint32_t k = row.per_seed.empty() ? 0 : row.per_seed.front().k;
        out += cfg.name + ":n2=" + std::to_string(row.n_users) + ",MR," + std::to_string(beta) +
               "," + std::to_string(k) + ",dis_2eps_rate," + detail::format_double(row.mean_rate) +
               "," + detail::format_double(row.std_rate) + "," + std::to_string(cfg.seed) + "\n";
    }
    return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

}  // namespace prefrank
