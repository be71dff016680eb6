// Acceptance suite: runs every release criterion end to end and prints one
// pass/fail line per criterion. Exits nonzero if anything fails.
//
// Usage: acceptance --cli <path-to-prefrank-binary> --configs <config-dir>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "prefrank/experiment.hpp"

using namespace prefrank;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 7;

struct Outcome {
    std::string name;
    bool pass = false;
    std::string detail;
};

std::vector<Outcome> g_outcomes;
double g_elapsed_s = 0.0;

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void record(const std::string& name, bool pass, const std::string& detail) {
    g_outcomes.push_back({name, pass, detail});
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << name << " — " << detail << std::endl;
}

template <class Fn>
void criterion(const std::string& name, Fn&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        record(name, false, std::string("exception: ") + e.what());
    }
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(4);
    os << x;
    return os.str();
}

unsigned worker_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// ---------------------------------------------------------------------------
// criteria 1 + 9 share the continuous sweep artifacts

struct SweepSummary {
    std::vector<std::size_t> n_users;
    std::vector<double> mean_rate;
    std::vector<SynthPointArtifacts> largest_runs;  // artifacts of the final n2
    double elapsed_s = 0.0;
};

SweepSummary run_sweep(GFamily g_family, KRule::Kind k_kind) {
    Timer timer;
    SynthSweepConfig sweep;
    sweep.n_items = 100;
    sweep.n_users_sweep = {200, 800, 3200};
    sweep.dim = 2;
    sweep.geometry = Geometry::unit_ball_distance;
    sweep.g_family = g_family;
    sweep.rating_levels = 5;
    sweep.utility_bound = 2.0;
    sweep.p_rule = {PRule::Kind::max_power, 1.0, 0.3};
    sweep.eps_rule.kind = EpsRule::Kind::f_gap_quantile;
    sweep.eps_rule.quantile = 0.8;
    sweep.k_rule.kind = k_kind;
    sweep.n_seeds = 5;
    sweep.agreement_mode = AgreementMode::nonoverlapping;

    SweepSummary summary;
    const unsigned threads = worker_threads();
    for (std::size_t n2 : sweep.n_users_sweep) {
        double total = 0.0;
        for (std::uint32_t s = 0; s < sweep.n_seeds; ++s) {
            SynthPointArtifacts art = run_synth_point(sweep, n2, s, kSeed, threads);
            total += art.rate[0];
            if (n2 == sweep.n_users_sweep.back()) summary.largest_runs.push_back(std::move(art));
        }
        summary.n_users.push_back(n2);
        summary.mean_rate.push_back(total / sweep.n_seeds);
    }
    summary.elapsed_s = timer.seconds();
    return summary;
}

SweepSummary g_continuous_sweep;  // kept for criterion 9

void criterion_1() {
    g_continuous_sweep = run_sweep(GFamily::identity, KRule::Kind::theorem_continuous);
    const auto& rates = g_continuous_sweep.mean_rate;
    bool nonincreasing = true;
    for (std::size_t t = 1; t < rates.size(); ++t)
        if (rates[t] > rates[t - 1]) nonincreasing = false;
    const bool final_small = rates.back() < 0.05;
    const bool in_budget = g_continuous_sweep.elapsed_s < 600.0;
    record("criterion 1: continuous consistency trend",
           nonincreasing && final_small && in_budget,
           "mean dis_2eps rates = {" + fmt(rates[0]) + ", " + fmt(rates[1]) + ", " + fmt(rates[2]) +
               "}, final < 0.05: " + (final_small ? "yes" : "no") +
               ", elapsed " + fmt(g_continuous_sweep.elapsed_s) + "s (< 600s)");
}

void criterion_2() {
    const SweepSummary sweep = run_sweep(GFamily::step_thresholds, KRule::Kind::theorem_discrete);
    const auto& rates = sweep.mean_rate;
    const bool decreases = rates.back() < rates.front();
    record("criterion 2: discrete-model consistency",
           decreases,
           "mean dis_2eps rates = {" + fmt(rates[0]) + ", " + fmt(rates[1]) + ", " + fmt(rates[2]) +
               "}, strictly lower at n2=3200 than n2=200: " + (decreases ? "yes" : "no") +
               ", elapsed " + fmt(sweep.elapsed_s) + "s");
}

void criterion_3() {
    // 500-user synthetic dataset with discrete (rating-like) values
    LatentModelConfig mc;
    mc.n_items = 60;
    mc.n_users = 500;
    mc.dim = 2;
    mc.g_family = GFamily::step_thresholds;
    mc.rating_levels = 5;
    mc.utility_bound = 2.0;
    mc.p = 0.3;
    mc.seed = rng::derive_seed(kSeed, 3);
    const auto model = sample_model(mc);
    const auto triples = model.observed_matrix().triples();

    SplitSpec split;
    split.n_resamples = 1;
    split.seed = 11;
    const auto splits = resample_split(triples, mc.n_items, mc.n_users, split);
    const auto& train = splits.front().train;
    const auto& test = splits.front().test;

    MonotoneTransformSpec mono;
    mono.seed = 123;
    const auto train_t = random_monotone_transform(train, mono);

    bool all_equal = true;
    std::string why;
    for (auto weighting : {VoteWeighting::uniform, VoteWeighting::agreement_weighted}) {
        RankerConfig cfg;
        cfg.beta = 3;
        cfg.k = 3;
        cfg.weighting = weighting;
        cfg.seed = 77;
        const auto sigma_raw = multi_rank(train, cfg, worker_threads());
        const auto sigma_t = multi_rank(train_t, cfg, worker_threads());
        if (!(sigma_raw == sigma_t)) {
            all_equal = false;
            why = "permutations diverged under " + to_string(weighting);
            break;
        }
        const auto report_raw = compute_metric_report(sigma_raw, test, 5);
        const auto report_t = compute_metric_report(sigma_t, test, 5);
        if (report_raw.to_json().dump() != report_t.to_json().dump()) {
            all_equal = false;
            why = "metric values diverged under " + to_string(weighting);
            break;
        }
    }
    record("criterion 3: monotonic-transform invariance", all_equal,
           all_equal ? "permutations and all metric values identical for MR and MRW (500 users)"
                     : why);
}

void criterion_4() {
    rng::Xoshiro256 stream(rng::derive_seed(kSeed, 4));
    std::size_t tau_checked = 0;
    bool tau_ok = true;
    for (std::size_t round = 0; round < 1000; ++round) {
        const std::size_t n_items = 2 + rng::uniform_below(stream, 29);
        std::vector<Rank> ranks(n_items);
        std::iota(ranks.begin(), ranks.end(), 1);
        rng::shuffle(stream, ranks);
        std::vector<TruthItem> truth;
        for (ItemIndex i = 0; i < n_items; ++i)
            if (rng::uniform_unit(stream) < 0.75)
                truth.push_back({i, std::floor(rng::uniform_range(stream, 1.0, 6.0))});

        std::int64_t concordant = 0, discordant = 0, total = 0;
        for (std::size_t a = 0; a < truth.size(); ++a)
            for (std::size_t b = a + 1; b < truth.size(); ++b) {
                if (truth[a].rating == truth[b].rating) continue;
                ++total;
                const bool truth_a = truth[a].rating > truth[b].rating;
                const bool pred_a = ranks[truth[a].item] > ranks[truth[b].item];
                if (truth_a == pred_a) ++concordant;
                else ++discordant;
            }
        if (total == 0) continue;
        ++tau_checked;
        const double oracle = static_cast<double>(concordant - discordant) / static_cast<double>(total);
        if (kendall_tau(ranks, truth) != oracle) {
            tau_ok = false;
            break;
        }
    }

    bool ndcg_ok = true;
    for (std::size_t round = 0; round < 1000; ++round) {
        const std::size_t n = 1 + rng::uniform_below(stream, 15);
        std::vector<TruthItem> truth;
        for (ItemIndex i = 0; i < n; ++i)
            truth.push_back({i, std::floor(rng::uniform_range(stream, 1.0, 6.0))});
        std::vector<ItemIndex> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](ItemIndex a, ItemIndex b) {
            if (truth[a].rating != truth[b].rating) return truth[a].rating > truth[b].rating;
            return a < b;
        });
        std::vector<Rank> ranks(n);
        for (std::size_t pos = 0; pos < n; ++pos) ranks[order[pos]] = static_cast<Rank>(n - pos);
        if (std::abs(ndcg_at_k(ranks, truth, 5) - 1.0) > 1e-12) {
            ndcg_ok = false;
            break;
        }
    }
    record("criterion 4: metric oracle equivalence", tau_ok && ndcg_ok,
           "kendall tau exact on " + std::to_string(tau_checked) +
               " random instances; ideal NDCG@5 = 1 within 1e-12 on 1000 instances");
}

void criterion_5() {
    rng::Xoshiro256 stream(rng::derive_seed(kSeed, 5));
    bool ok = true;
    for (std::size_t round = 0; round < 500 && ok; ++round) {
        const std::size_t n = 2 + rng::uniform_below(stream, 49);
        std::vector<Rank> truth(n);
        std::iota(truth.begin(), truth.end(), 1);
        rng::shuffle(stream, truth);
        PreferenceMatrix a(n);
        for (ItemIndex i = 0; i < n; ++i)
            for (ItemIndex j = i + 1; j < n; ++j) a.set_pair(i, j, truth[i] > truth[j]);
        ok = copeland(a) == truth;
    }
    record("criterion 5: Copeland exactness on transitive tournaments", ok,
           "500 random total orders (n <= 50) recovered exactly");
}

void criterion_6() {
    LatentModelConfig mc;
    mc.n_items = 10'000;
    mc.n_users = 10;
    mc.dim = 2;
    mc.p = 1.0;
    mc.seed = rng::derive_seed(kSeed, 6);
    const auto model = sample_model(mc);
    const auto matrix = model.observed_matrix();

    rng::Xoshiro256 stream(rng::derive_seed(kSeed, 66));
    bool ok = true;
    double worst = 0.0;
      for (int pair = 0; pair < 20; ++pair) {
        const auto u = static_cast<UserIndex>(rng::uniform_below(stream, mc.n_users));
        auto v = static_cast<UserIndex>(rng::uniform_below(stream, mc.n_users));
        while (v == u) v = static_cast<UserIndex>(rng::uniform_below(stream, mc.n_users));
        const double r = agreement_stat(matrix, u, v, AgreementMode::all_pairs).value;
        const double rho = rho_oracle(model, u, v, 1'000'000);
        worst = std::max(worst, std::abs(r - rho));
        if (std::abs(r - rho) >= 0.05) ok = false;
    }
    record("criterion 6: R concentrates around rho", ok,
           "20 user pairs, |R(10k common items) - rho(1e6 samples)| max = " + fmt(worst) +
               " (< 0.05)");
}

void criterion_7() {
    const double eps = 0.1;
    const auto pair = counterexample_pair(eps);
    double sup = 0.0;
    for (std::size_t t = 0; t <= 1'000'000; ++t) {
        const double z = static_cast<double>(t) / 1'000'000.0;
        sup = std::max(sup, std::abs(pair.f(z) - pair.g(z)));
    }
    const double agreement = mc_pair_agreement(pair.f, pair.g, 1'000'000, rng::derive_seed(kSeed, 7));
    const bool ok = sup <= eps + 1e-15 && agreement < 1e-3;
    record("criterion 7: Proposition-1 fixture", ok,
           "sup|f-g| = " + fmt(sup) + " (<= 0.1); MC agreement over 1e6 pairs = " + fmt(agreement) +
               " (< 1e-3)");
}

void criterion_8() {
    rng::Xoshiro256 stream(rng::derive_seed(kSeed, 8));
    bool ok = true;
    std::size_t triples_checked = 0;
    for (int round = 0; round < 100 && ok; ++round) {
        const std::size_t d = 1 + rng::uniform_below(stream, 5);
        const std::size_t n_items = 2 + rng::uniform_below(stream, 19);
        const std::size_t n_users = 1 + rng::uniform_below(stream, 20);
        std::vector<std::vector<double>> xs(n_items, std::vector<double>(d));
        std::vector<std::vector<double>> ys(n_users, std::vector<double>(d));
        const double scale = rng::uniform_range(stream, 0.5, 3.0);
        for (auto& x : xs)
            for (auto& c : x) c = scale * rng::normal(stream);
        for (auto& y : ys)
            for (auto& c : y) c = rng::normal(stream);
        const auto [lx, ly] = lift_inner_product(xs, ys);
        for (std::size_t u = 0; u < n_users && ok; ++u) {
            for (std::size_t i = 0; i < n_items && ok; ++i)
                for (std::size_t j = 0; j < n_items; ++j) {
                    if (i == j) continue;
                    double di = 0.0, dj = 0.0;
                    for (std::size_t t = 0; t < d; ++t) {
                        di += xs[i][t] * ys[u][t];
                        dj += xs[j][t] * ys[u][t];
                    }
                    auto sq = [&](const std::vector<double>& a, const std::vector<double>& b) {
                        double s = 0.0;
                        for (std::size_t t = 0; t < a.size(); ++t)
                            s += (a[t] - b[t]) * (a[t] - b[t]);
                        return s;
                    };
                    ++triples_checked;
                    if ((di > dj) != (sq(lx[i], ly[u]) > sq(lx[j], ly[u]))) {
                        ok = false;
                        break;
                    }
                }
        }
    }
    record("criterion 8: inner-product lift order equivalence", ok,
           std::to_string(triples_checked) + " (u, i, j) triples across 100 random models, exact");
}

void criterion_9() {
    if (g_continuous_sweep.largest_runs.empty()) {
        record("criterion 9: consistency of the learned rankings", false,
               "criterion 1 artifacts unavailable");
        return;
    }
    std::size_t exercised = 0;
    std::size_t violations_total = 0;
    for (const auto& art : g_continuous_sweep.largest_runs) {
        if (art.dis[0] != 0) continue;
        ++exercised;
        const double eps = art.eps[0];
        const auto violations = eps_consistency_violations(
            art.sigma, art.model.user_features, art.model.feat_dim, eps / 2.0,
            art.model.f_values, art.model.h_values, 2.0 * eps);
        violations_total += violations.size();
    }
    const bool ok = violations_total == 0;
    record("criterion 9: eps/2-consistency over T when dis_2eps = 0", ok,
           std::to_string(exercised) + "/" + std::to_string(g_continuous_sweep.largest_runs.size()) +
               " largest runs had dis_2eps = 0; total violations = " +
               std::to_string(violations_total));
}

// ---------------------------------------------------------------------------
// criterion 10 drives the installed CLI binary

int run_command(const std::string& command) {
    const int status = std::system(command.c_str());
    if (status == -1) return -1;
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void criterion_10(const std::string& cli) {
    const fs::path base = fs::temp_directory_path() / "prefrank_acceptance";
    fs::remove_all(base);
    fs::create_directories(base);

    // synthetic integral-rating dataset, 200 users x 40 items
    rng::Xoshiro256 stream(rng::derive_seed(kSeed, 10));
    std::string csv;
    for (UserIndex u = 0; u < 200; ++u)
        for (ItemIndex i = 0; i < 40; ++i)
            if (rng::uniform_unit(stream) < 0.5)
                csv += std::to_string(u) + "," + std::to_string(i) + "," +
                       std::to_string(1 + static_cast<int>(rng::uniform_below(stream, 5))) + "\n";
    const fs::path data_path = base / "data.csv";
    write_text_file(data_path, csv);

    nlohmann::json config = {
        {"mode", "real_pipeline"},
        {"name", "determinism"},
        {"seed", 1},
        {"data",
         {{"path", data_path.string()},
          {"format", "csv_triples"},
          {"split", {{"n_resamples", 2}}},
          {"quantize", false},
          {"monotone_transform", false}}},
        {"grid",
         {{"beta", {2, 3}},
          {"k", {1, 3}},
          {"weighting", {"uniform", "agreement_weighted"}},
          {"agreement_mode", "all_pairs"}}},
        {"metrics", {{"k", 5}, {"relevance_threshold", 5.0}}}};
    const fs::path config_path = base / "config.json";
    write_text_file(config_path, config.dump(2) + "\n");

    struct Run {
        std::string dir;
        unsigned threads;
    };
    const std::vector<Run> runs{{"t8_a", 8}, {"t8_b", 8}, {"t1_a", 1}};
    bool ok = true;
    std::string why = "3 runs (8,8,1 threads) byte-identical";
    std::vector<std::string> jsons, csvs;
    for (const auto& run : runs) {
        const fs::path out = base / run.dir;
        const std::string command = "\"" + cli + "\" run --config \"" + config_path.string() +
                                    "\" --seed 7 --threads " + std::to_string(run.threads) +
                                    " --out \"" + out.string() + "\" > \"" +
                                    (base / (run.dir + ".log")).string() + "\" 2>&1";
        const int code = run_command(command);
        if (code != 0) {
            ok = false;
            why = "cli exited with code " + std::to_string(code) + " for " + run.dir;
            break;
        }
        jsons.push_back(slurp(out / "run_report.json"));
        csvs.push_back(slurp(out / "run_report.csv"));
    }
    if (ok) {
        for (std::size_t t = 1; t < jsons.size(); ++t) {
            if (jsons[t] != jsons[0] || csvs[t] != csvs[0]) {
                ok = false;
                why = "report bytes differ between runs";
            }
        }
        if (ok && (jsons[0].empty() || csvs[0].empty())) {
            ok = false;
            why = "reports were empty";
        }
    }
    record("criterion 10: pipeline determinism across runs and thread counts", ok, why);
}

void supplemental_cli_contract(const std::string& cli, const std::string& configs_dir) {
    // exit code 2 on a config problem, 3 on a data problem
    const fs::path base = fs::temp_directory_path() / "prefrank_acceptance";
    fs::create_directories(base);
    const int missing_config =
        run_command("\"" + cli + "\" run --config /nonexistent/cfg.json > /dev/null 2>&1");

    nlohmann::json config = {{"mode", "real_pipeline"},
                             {"name", "missing"},
                             {"data", {{"path", "/nonexistent/data.csv"}, {"format", "csv_triples"}}}};
    const fs::path config_path = base / "missing_data.json";
    write_text_file(config_path, config.dump() + "\n");
    const int missing_data =
        run_command("\"" + cli + "\" run --config \"" + config_path.string() + "\" > /dev/null 2>&1");

    bool presets_ok = true;
    std::string preset_err;
    for (const char* name :
         {"thm1-continuous.json", "thm3-discrete.json", "netflix.json", "movielens-1m.json"}) {
        try {
            (void)load_experiment_config((fs::path(configs_dir) / name).string());
        } catch (const std::exception& e) {
            presets_ok = false;
            preset_err = std::string(name) + ": " + e.what();
        }
    }

    const bool ok = missing_config == 2 && missing_data == 3 && presets_ok;
    record("supplemental: cli exit codes and shipped presets", ok,
           "missing config -> " + std::to_string(missing_config) + " (want 2), missing data -> " +
               std::to_string(missing_data) + " (want 3)" +
               (presets_ok ? ", presets parse" : ", preset failed: " + preset_err));
}

}  // namespace

int main(int argc, char** argv) {
    std::string cli, configs_dir = "configs";
    for (int a = 1; a + 1 < argc; ++a) {
        const std::string flag = argv[a];
        if (flag == "--cli") cli = argv[a + 1];
        if (flag == "--configs") configs_dir = argv[a + 1];
    }

    const Timer total;
    criterion("criterion 1: continuous consistency trend", [] { criterion_1(); });
    criterion("criterion 2: discrete-model consistency", [] { criterion_2(); });
    criterion("criterion 3: monotonic-transform invariance", [] { criterion_3(); });
    criterion("criterion 4: metric oracle equivalence", [] { criterion_4(); });
    criterion("criterion 5: Copeland exactness on transitive tournaments", [] { criterion_5(); });
    criterion("criterion 6: R concentrates around rho", [] { criterion_6(); });
    criterion("criterion 7: Proposition-1 fixture", [] { criterion_7(); });
    criterion("criterion 8: inner-product lift order equivalence", [] { criterion_8(); });
    criterion("criterion 9: eps/2-consistency over T when dis_2eps = 0", [] { criterion_9(); });
    if (cli.empty()) {
        record("criterion 10: pipeline determinism across runs and thread counts", false,
               "no --cli binary supplied");
    } else {
        criterion("criterion 10: pipeline determinism", [&] { criterion_10(cli); });
        criterion("supplemental: cli contract", [&] { supplemental_cli_contract(cli, configs_dir); });
    }

    std::size_t failed = 0;
    for (const auto& o : g_outcomes)
        if (!o.pass) ++failed;
    std::cout << "----\n"
              << (g_outcomes.size() - failed) << "/" << g_outcomes.size() << " checks passed in "
              << fmt(total.seconds()) << "s" << std::endl;
    return failed == 0 ? 0 : 1;
}
