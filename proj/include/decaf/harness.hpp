#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "decaf/causal.hpp"
#include "decaf/errors.hpp"
#include "decaf/graph.hpp"
#include "decaf/inject.hpp"
#include "decaf/metrics.hpp"
#include "decaf/model.hpp"
#include "decaf/rng.hpp"
#include "decaf/synthgen.hpp"
#include "decaf/textio.hpp"
#include "decaf/train.hpp"

namespace decaf {

struct sweep_config {
    std::string axis_a = "lambda1";
    std::string axis_b = "lambda2";
    std::vector<double> values_a{0.1, 0.5, 1.0};
    std::vector<double> values_b{0.1, 0.5, 1.0};
};

struct correlate_config {
    std::size_t n_samples = 100;
    double lambda_min = 0.01;
    double lambda_max = 10.0;
};

/// One experiment: a dataset source (a saved dataset directory, or the
/// synthetic generator), an injection step, model and training settings, and
/// the trial protocol. Trial i runs with seed base_seed + i throughout.
struct experiment_config {
    std::string dataset_path;                // when set, overrides the generator
    synth_config synth;
    std::string inject_type = "structural"; // structural | contextual | none
    inject_config inject;
    model_config model;
    train_config train;
    sweep_config sweep;
    correlate_config correlate;
    std::size_t n_trials = 10;
    std::uint64_t base_seed = 0;
    std::string out_dir = "out";
    std::size_t threads = 1;
};

inline void validate_experiment_config(const experiment_config& cfg) {
    if (cfg.n_trials < 1) throw config_error("experiment: n_trials must be at least 1");
    if (cfg.inject_type != "structural" && cfg.inject_type != "contextual" &&
        cfg.inject_type != "none")
        throw config_error("experiment: inject_type must be structural, contextual, or none");
    if (cfg.threads < 1) throw config_error("experiment: threads must be at least 1");
    validate_synth_config(cfg.synth);
    validate_inject_config(cfg.inject);
    validate_train_config(cfg.train);
}

// ----- config file parsing ----------------------------------------------------

namespace detail {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& dst) {
    if (!j.contains(key)) return;
    try {
        dst = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config key '" + std::string(key) + "': " + e.what());
    }
}

inline void reject_unknown(const nlohmann::json& j, const char* where,
                           std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) {
                ok = true;
                break;
            }
        if (!ok)
            throw config_error("config: unknown key '" + key + "' in " + where);
    }
}

inline void synth_overrides(const nlohmann::json& j, synth_config& c) {
    reject_unknown(j, "synth",
                   {"n_nodes", "latent_dim", "observed_dim", "p_sensitive", "homophily",
                    "target_mean_degree", "v_scale", "freeze_cf_edges", "seed"});
    take(j, "n_nodes", c.n_nodes);
    take(j, "latent_dim", c.latent_dim);
    take(j, "observed_dim", c.observed_dim);
    take(j, "p_sensitive", c.p_sensitive);
    take(j, "homophily", c.homophily);
    take(j, "target_mean_degree", c.target_mean_degree);
    take(j, "v_scale", c.v_scale);
    take(j, "freeze_cf_edges", c.freeze_cf_edges);
    take(j, "seed", c.seed);
}

inline void inject_overrides(const nlohmann::json& j, std::string& type, inject_config& c) {
    reject_unknown(j, "inject",
                   {"type", "outlier_ratio", "group_size", "edge_drop_prob",
                    "contextual_pool_k", "seed"});
    take(j, "type", type);
    take(j, "outlier_ratio", c.outlier_ratio);
    take(j, "group_size", c.group_size);
    take(j, "edge_drop_prob", c.edge_drop_prob);
    take(j, "contextual_pool_k", c.contextual_pool_k);
    take(j, "seed", c.seed);
}

inline void model_overrides(const nlohmann::json& j, model_config& c) {
    reject_unknown(j, "model",
                   {"input_dim", "hidden_dim", "latent_dim", "split_ratio", "alpha_rec",
                    "disc_hidden", "full_dim_decoders", "score_include_sensitive"});
    take(j, "input_dim", c.input_dim);
    take(j, "hidden_dim", c.hidden_dim);
    take(j, "latent_dim", c.latent_dim);
    take(j, "split_ratio", c.split_ratio);
    take(j, "alpha_rec", c.alpha_rec);
    take(j, "disc_hidden", c.disc_hidden);
    take(j, "full_dim_decoders", c.full_dim_decoders);
    take(j, "score_include_sensitive", c.score_include_sensitive);
}

inline void train_overrides(const nlohmann::json& j, train_config& c) {
    reject_unknown(j, "train",
                   {"lambda1", "lambda2", "lambda3", "lambda4", "lr_gen", "lr_disc",
                    "epochs", "disc_steps", "contamination", "seed"});
    take(j, "lambda1", c.lambda1);
    take(j, "lambda2", c.lambda2);
    take(j, "lambda3", c.lambda3);
    take(j, "lambda4", c.lambda4);
    take(j, "lr_gen", c.lr_gen);
    take(j, "lr_disc", c.lr_disc);
    take(j, "epochs", c.epochs);
    take(j, "disc_steps", c.disc_steps);
    take(j, "contamination", c.contamination);
    take(j, "seed", c.seed);
}

inline void sweep_overrides(const nlohmann::json& j, sweep_config& c) {
    reject_unknown(j, "sweep", {"axis_a", "axis_b", "values_a", "values_b"});
    take(j, "axis_a", c.axis_a);
    take(j, "axis_b", c.axis_b);
    take(j, "values_a", c.values_a);
    take(j, "values_b", c.values_b);
}

inline void correlate_overrides(const nlohmann::json& j, correlate_config& c) {
    reject_unknown(j, "correlate", {"n_samples", "lambda_min", "lambda_max"});
    take(j, "n_samples", c.n_samples);
    take(j, "lambda_min", c.lambda_min);
    take(j, "lambda_max", c.lambda_max);
}

} // namespace detail

inline experiment_config experiment_config_from_json(const nlohmann::json& j) {
    detail::reject_unknown(j, "the top level",
                           {"dataset_path", "synth", "inject", "model", "train", "sweep",
                            "correlate", "n_trials", "base_seed", "out_dir", "threads"});
    experiment_config cfg;
    detail::take(j, "dataset_path", cfg.dataset_path);
    if (j.contains("synth")) detail::synth_overrides(j.at("synth"), cfg.synth);
    if (j.contains("inject"))
        detail::inject_overrides(j.at("inject"), cfg.inject_type, cfg.inject);
    if (j.contains("model")) detail::model_overrides(j.at("model"), cfg.model);
    if (j.contains("train")) detail::train_overrides(j.at("train"), cfg.train);
    if (j.contains("sweep")) detail::sweep_overrides(j.at("sweep"), cfg.sweep);
    if (j.contains("correlate"))
        detail::correlate_overrides(j.at("correlate"), cfg.correlate);
    detail::take(j, "n_trials", cfg.n_trials);
    detail::take(j, "base_seed", cfg.base_seed);
    detail::take(j, "out_dir", cfg.out_dir);
    detail::take(j, "threads", cfg.threads);
    return cfg;
}

inline experiment_config load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config file is not valid JSON: " + std::string(e.what()));
    }
    return experiment_config_from_json(j);
}

inline nlohmann::json experiment_config_to_json(const experiment_config& cfg) {
    nlohmann::json j;
    if (!cfg.dataset_path.empty()) j["dataset_path"] = cfg.dataset_path;
    j["synth"] = {{"n_nodes", cfg.synth.n_nodes},
                  {"latent_dim", cfg.synth.latent_dim},
                  {"observed_dim", cfg.synth.observed_dim},
                  {"p_sensitive", cfg.synth.p_sensitive},
                  {"homophily", cfg.synth.homophily},
                  {"target_mean_degree", cfg.synth.target_mean_degree},
                  {"v_scale", cfg.synth.v_scale},
                  {"freeze_cf_edges", cfg.synth.freeze_cf_edges}};
    j["inject"] = {{"type", cfg.inject_type},
                   {"outlier_ratio", cfg.inject.outlier_ratio},
                   {"group_size", cfg.inject.group_size},
                   {"edge_drop_prob", cfg.inject.edge_drop_prob},
                   {"contextual_pool_k", cfg.inject.contextual_pool_k}};
    j["model"] = model_config_to_json(cfg.model);
    j["train"] = {{"lambda1", cfg.train.lambda1},   {"lambda2", cfg.train.lambda2},
                  {"lambda3", cfg.train.lambda3},   {"lambda4", cfg.train.lambda4},
                  {"lr_gen", cfg.train.lr_gen},     {"lr_disc", cfg.train.lr_disc},
                  {"epochs", cfg.train.epochs},     {"disc_steps", cfg.train.disc_steps},
                  {"contamination", cfg.train.contamination}};
    j["n_trials"] = cfg.n_trials;
    j["base_seed"] = cfg.base_seed;
    j["out_dir"] = cfg.out_dir;
    j["threads"] = cfg.threads;
    return j;
}

// ----- trial pipeline ----------------------------------------------------------

/// Predictions from a fixed score cutoff (learned on the factual graph and
/// applied unchanged to interventional graphs).
inline std::vector<int> threshold_at(const std::vector<double>& scores, double cutoff) {
    std::vector<int> yhat(scores.size(), 0);
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (scores[i] >= cutoff) yhat[i] = 1;
    return yhat;
}

struct trial_report {
    std::string variant;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    double lambda1 = 0, lambda2 = 0, lambda3 = 0, lambda4 = 0;
    metrics_report metrics;
    std::size_t epochs = 0;
    double seconds = 0.0;
    bool failed = false;
    std::string error;
};

namespace detail {

struct trial_data {
    graph g;
    std::optional<graph> cf0, cf1;
};

/// Builds the graph a trial trains on. Synthetic trials regenerate the bundle
/// from the trial seed, drop the generator's classification labels (injection
/// defines the anomaly labels), and apply the same injection to the factual
/// and both interventional graphs so anomalies exist in every world.
inline trial_data prepare_trial_data(const experiment_config& cfg,
                                     const graph* loaded, std::uint64_t seed) {
    trial_data td;
    if (loaded) {
        td.g = *loaded;
    } else {
        synth_config sc = cfg.synth;
        sc.seed = seed;
        synth_bundle b = generate(sc);
        b.factual.labels.reset();
        b.cf_all0.labels.reset();
        b.cf_all1.labels.reset();
        td.g = std::move(b.factual);
        td.cf0 = std::move(b.cf_all0);
        td.cf1 = std::move(b.cf_all1);
    }
    if (cfg.inject_type != "none") {
        inject_config ic = cfg.inject;
        ic.seed = seed;
        const auto apply = cfg.inject_type == "structural" ? inject_structural
                                                           : inject_contextual;
        td.g = apply(td.g, ic);
        if (td.cf0) td.cf0 = apply(*td.cf0, ic);
        if (td.cf1) td.cf1 = apply(*td.cf1, ic);
    }
    return td;
}

/// Metrics that cannot be computed (single-class labels, empty group, no
/// interventional graphs) stay unset and render as n/a downstream.
inline metrics_report compute_trial_metrics(const trial_data& td, const fit_result& fr,
                                            const model_config& mcfg,
                                            double contamination) {
    metrics_report m;
    m.contamination = contamination;
    const std::vector<int> yhat = threshold_scores(fr.scores, contamination);
    for (int v : yhat) m.threshold_k += static_cast<std::size_t>(v);

    if (td.g.labels) {
        const std::vector<int>& y = *td.g.labels;
        m.accuracy = accuracy(yhat, y);
        m.f1 = f1_score(yhat, y);
        try {
            m.auroc = auroc(fr.scores, y);
        } catch (const undefined_metric_error&) {
        }
        try {
            m.delta_eoo = delta_eoo(yhat, y, td.g.sensitive);
        } catch (const undefined_metric_error&) {
        }
    }
    try {
        m.delta_dp = delta_dp(yhat, td.g.sensitive);
    } catch (const undefined_metric_error&) {
    }

    if (td.cf0 && td.cf1) {
        double cutoff = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < yhat.size(); ++i)
            if (yhat[i] == 1 && fr.scores[i] < cutoff) cutoff = fr.scores[i];
        const auto s0 = scores_for_state(*td.cf0, fr.state, mcfg);
        const auto s1 = scores_for_state(*td.cf1, fr.state, mcfg);
        m.delta_cf = delta_cf(threshold_at(s0, cutoff), threshold_at(s1, cutoff));
    }
    return m;
}

} // namespace detail

/// Runs one full trial: data preparation, training, metric computation, and
/// optional trace/checkpoint artifacts. Failures are captured in the report
/// rather than thrown, so one bad trial cannot sink an aggregation.
inline trial_report run_one_trial(const experiment_config& cfg, const std::string& variant,
                                  const train_config& variant_train, const graph* loaded,
                                  std::size_t trial_idx, const std::string& trace_path = "",
                                  const std::string& ckpt_path = "") {
    trial_report r;
    r.variant = variant;
    r.trial = trial_idx;
    r.seed = cfg.base_seed + trial_idx;
    r.lambda1 = variant_train.lambda1;
    r.lambda2 = variant_train.lambda2;
    r.lambda3 = variant_train.lambda3;
    r.lambda4 = variant_train.lambda4;
    r.epochs = variant_train.epochs;
    try {
        const detail::trial_data td = detail::prepare_trial_data(cfg, loaded, r.seed);
        model_config mcfg = cfg.model;
        if (mcfg.input_dim == 0) mcfg.input_dim = td.g.n_attrs();
        train_config tcfg = variant_train;
        tcfg.seed = r.seed;

        const auto t0 = std::chrono::steady_clock::now();
        const fit_result fr = fit(td.g, mcfg, tcfg);
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        r.metrics = detail::compute_trial_metrics(td, fr, mcfg, tcfg.contamination);
        if (!trace_path.empty()) write_trace_csv(trace_path, fr.trace);
        if (!ckpt_path.empty())
            save_checkpoint(ckpt_path, mcfg, fr.state, r.seed, tcfg.epochs);
    } catch (const std::exception& e) {
        r.failed = true;
        r.error = e.what();
    }
    return r;
}

// ----- worker pool --------------------------------------------------------------

/// Executes jobs on `threads` workers. Every job owns a distinct output slot,
/// so scheduling order cannot influence results; running with one thread is
/// exactly the sequential loop.
inline void run_jobs(const std::vector<std::function<trial_report()>>& jobs,
                     std::size_t threads, std::vector<trial_report>& out) {
    out.resize(jobs.size());
    if (threads <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) out[i] = jobs[i]();
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            out[i] = jobs[i]();
        }
    };
    std::vector<std::thread> pool;
    const std::size_t width = std::min(threads, jobs.size());
    pool.reserve(width);
    for (std::size_t t = 0; t < width; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

// ----- aggregation and CSV -------------------------------------------------------

struct metric_agg {
    std::size_t n = 0;
    std::optional<double> mean;
    std::optional<double> se; // sample stddev / sqrt(n), needs n >= 2
};

inline metric_agg aggregate_metric(const std::vector<std::optional<double>>& xs) {
    metric_agg a;
    double sum = 0.0;
    for (const auto& x : xs)
        if (x) {
            sum += *x;
            ++a.n;
        }
    if (a.n == 0) return a;
    a.mean = sum / static_cast<double>(a.n);
    if (a.n >= 2) {
        double ss = 0.0;
        for (const auto& x : xs)
            if (x) ss += (*x - *a.mean) * (*x - *a.mean);
        a.se = std::sqrt(ss / static_cast<double>(a.n - 1)) /
               std::sqrt(static_cast<double>(a.n));
    }
    return a;
}

inline std::string fmt_opt(const std::optional<double>& v) {
    return v ? fmt_shortest(*v) : "n/a";
}

namespace detail {

inline constexpr const char* metric_cols[6] = {"accuracy", "f1",        "auroc",
                                               "delta_dp", "delta_eoo", "delta_cf"};

inline std::optional<double> metric_field(const metrics_report& m, std::size_t i) {
    switch (i) {
        case 0: return m.accuracy;
        case 1: return m.f1;
        case 2: return m.auroc;
        case 3: return m.delta_dp;
        case 4: return m.delta_eoo;
        default: return m.delta_cf;
    }
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    return out;
}

} // namespace detail

inline void write_trials_csv(const std::filesystem::path& path,
                             const std::vector<trial_report>& rows) {
    auto out = detail::open_out(path);
    out << "variant,trial,seed,lambda1,lambda2,lambda3,lambda4";
    for (const char* c : detail::metric_cols) out << ',' << c;
    out << ",epochs,status\n";
    for (const trial_report& r : rows) {
        out << r.variant << ',' << r.trial << ',' << r.seed << ',' << fmt_shortest(r.lambda1)
            << ',' << fmt_shortest(r.lambda2) << ',' << fmt_shortest(r.lambda3) << ','
            << fmt_shortest(r.lambda4);
        for (std::size_t i = 0; i < 6; ++i) {
            if (r.failed)
                out << ",n/a";
            else
                out << ',' << fmt_opt(detail::metric_field(r.metrics, i));
        }
        out << ',' << r.epochs << ',' << (r.failed ? "failed" : "ok") << '\n';
    }
    if (!out) throw io_error("short write: " + path.string());
}

/// Aggregate rows for a list of variants; per metric, mean and standard error
/// over the trials where the metric was defined.
inline void write_aggregate_csv(const std::filesystem::path& path,
                                const std::vector<std::string>& variants,
                                const std::vector<trial_report>& rows) {
    auto out = detail::open_out(path);
    out << "variant,n_completed";
    for (const char* c : detail::metric_cols) out << ",mean_" << c << ",se_" << c;
    out << '\n';
    for (const std::string& v : variants) {
        std::size_t completed = 0;
        out << v;
        std::vector<std::vector<std::optional<double>>> cols(6);
        for (const trial_report& r : rows) {
            if (r.variant != v || r.failed) continue;
            ++completed;
            for (std::size_t i = 0; i < 6; ++i)
                cols[i].push_back(detail::metric_field(r.metrics, i));
        }
        out << ',' << completed;
        for (std::size_t i = 0; i < 6; ++i) {
            const metric_agg a = aggregate_metric(cols[i]);
            out << ',' << fmt_opt(a.mean) << ',' << fmt_opt(a.se);
        }
        out << '\n';
    }
    if (!out) throw io_error("short write: " + path.string());
}

/// Wall-clock seconds live in their own file: every other CSV is byte-stable
/// across identical runs, timing never is.
inline void write_timing_csv(const std::filesystem::path& path,
                             const std::vector<trial_report>& rows) {
    auto out = detail::open_out(path);
    out << "variant,trial,seconds\n";
    for (const trial_report& r : rows)
        out << r.variant << ',' << r.trial << ',' << fmt_shortest(r.seconds) << '\n';
    if (!out) throw io_error("short write: " + path.string());
}

namespace detail {

inline const graph* maybe_load(const experiment_config& cfg, std::optional<graph>& storage) {
    if (cfg.dataset_path.empty()) return nullptr;
    storage = load_graph(cfg.dataset_path);
    // a labeled dataset cannot take a second round of injected anomalies
    if (cfg.inject_type != "none" && storage->labels) {
        for (int y : *storage->labels)
            if (y != 0)
                throw config_error("experiment: dataset already carries labels; "
                                   "set inject type to none");
    }
    return &*storage;
}

inline void warn_failures(const std::vector<trial_report>& rows) {
    std::size_t failed = 0;
    for (const trial_report& r : rows)
        if (r.failed) {
            ++failed;
            std::cerr << "warning: variant " << r.variant << " trial " << r.trial
                      << " failed: " << r.error << '\n';
        }
    if (failed == rows.size() && !rows.empty())
        throw training_error("all trials failed");
}

inline void write_config_provenance(const experiment_config& cfg) {
    auto out = open_out(std::filesystem::path(cfg.out_dir) / "config.json");
    out << experiment_config_to_json(cfg).dump(2) << '\n';
}

inline void print_variant_summary(std::ostream& os, const std::string& variant,
                                  const std::vector<trial_report>& rows) {
    std::vector<std::optional<double>> auc, dp, eoo, cf;
    std::size_t completed = 0;
    for (const trial_report& r : rows) {
        if (r.variant != variant || r.failed) continue;
        ++completed;
        auc.push_back(r.metrics.auroc);
        dp.push_back(r.metrics.delta_dp);
        eoo.push_back(r.metrics.delta_eoo);
        cf.push_back(r.metrics.delta_cf);
    }
    const metric_agg a = aggregate_metric(auc), d = aggregate_metric(dp),
                     e = aggregate_metric(eoo), c = aggregate_metric(cf);
    os << variant << ": " << completed << " trials, auroc " << fmt_opt(a.mean) << ", dp "
       << fmt_opt(d.mean) << ", eoo " << fmt_opt(e.mean) << ", cf " << fmt_opt(c.mean)
       << '\n';
}

} // namespace detail

// ----- commands -------------------------------------------------------------------

/// Baseline-versus-full comparison: the baseline is this same implementation
/// with the three fairness weights zeroed, so the comparison isolates those
/// terms. Writes trials.csv, aggregate.csv, timing.csv, per-trial traces and
/// checkpoints under out_dir.
inline void cmd_run(const experiment_config& cfg, std::ostream& os = std::cout) {
    validate_experiment_config(cfg);
    std::optional<graph> storage;
    const graph* loaded = detail::maybe_load(cfg, storage);
    detail::write_config_provenance(cfg);
    const std::filesystem::path out(cfg.out_dir);
    std::filesystem::create_directories(out / "traces");
    std::filesystem::create_directories(out / "checkpoints");

    train_config baseline = cfg.train;
    baseline.lambda2 = 0.0;
    baseline.lambda3 = 0.0;
    baseline.lambda4 = 0.0;
    const std::vector<std::pair<std::string, train_config>> variants = {
        {"baseline", baseline}, {"decaf", cfg.train}};

    std::vector<std::function<trial_report()>> jobs;
    for (const auto& [name, tcfg] : variants)
        for (std::size_t i = 0; i < cfg.n_trials; ++i) {
            const std::string tag = name + "_trial_" + std::to_string(i);
            const std::string trace = (out / "traces" / (tag + ".csv")).string();
            const std::string ckpt = (out / "checkpoints" / (tag + ".ckpt")).string();
            jobs.push_back([&cfg, name = name, tcfg = tcfg, loaded, i, trace, ckpt] {
                return run_one_trial(cfg, name, tcfg, loaded, i, trace, ckpt);
            });
        }
    std::vector<trial_report> rows;
    run_jobs(jobs, cfg.threads, rows);
    detail::warn_failures(rows);

    write_trials_csv(out / "trials.csv", rows);
    write_aggregate_csv(out / "aggregate.csv", {"baseline", "decaf"}, rows);
    write_timing_csv(out / "timing.csv", rows);
    for (const auto& [name, tcfg] : variants) detail::print_variant_summary(os, name, rows);
}

/// Four-way ablation: full objective, counterfactual term off, adversarial
/// term off, both off.
inline void cmd_ablate(const experiment_config& cfg, std::ostream& os = std::cout) {
    validate_experiment_config(cfg);
    std::optional<graph> storage;
    const graph* loaded = detail::maybe_load(cfg, storage);
    detail::write_config_provenance(cfg);
    const std::filesystem::path out(cfg.out_dir);

    std::vector<std::pair<std::string, train_config>> variants;
    variants.emplace_back("full", cfg.train);
    train_config t = cfg.train;
    t.lambda4 = 0.0;
    variants.emplace_back("no_cf", t);
    t = cfg.train;
    t.lambda3 = 0.0;
    variants.emplace_back("no_adv", t);
    t.lambda4 = 0.0;
    variants.emplace_back("no_adv_cf", t);

    std::vector<std::function<trial_report()>> jobs;
    std::vector<std::string> names;
    for (const auto& [name, tcfg] : variants) {
        names.push_back(name);
        for (std::size_t i = 0; i < cfg.n_trials; ++i)
            jobs.push_back([&cfg, name = name, tcfg = tcfg, loaded, i] {
                return run_one_trial(cfg, name, tcfg, loaded, i);
            });
    }
    std::vector<trial_report> rows;
    run_jobs(jobs, cfg.threads, rows);
    detail::warn_failures(rows);

    write_trials_csv(out / "trials.csv", rows);
    write_aggregate_csv(out / "aggregate.csv", names, rows);
    write_timing_csv(out / "timing.csv", rows);
    for (const std::string& n : names) detail::print_variant_summary(os, n, rows);
}

namespace detail {

inline double* lambda_slot(train_config& t, const std::string& name) {
    if (name == "lambda1") return &t.lambda1;
    if (name == "lambda2") return &t.lambda2;
    if (name == "lambda3") return &t.lambda3;
    if (name == "lambda4") return &t.lambda4;
    throw config_error("sweep: unknown axis '" + name + "' (use lambda1..lambda4)");
}

} // namespace detail

/// Grid sweep over two loss weights; one long-format row per cell with
/// aggregated metrics, for external heatmap tooling.
inline void cmd_sweep(const experiment_config& cfg, std::ostream& os = std::cout) {
    validate_experiment_config(cfg);
    if (cfg.sweep.values_a.empty() || cfg.sweep.values_b.empty())
        throw config_error("sweep: both axis value lists must be nonempty");
    if (cfg.sweep.axis_a == cfg.sweep.axis_b)
        throw config_error("sweep: the two axes must differ");
    std::optional<graph> storage;
    const graph* loaded = detail::maybe_load(cfg, storage);
    detail::write_config_provenance(cfg);
    const std::filesystem::path out(cfg.out_dir);

    auto o = detail::open_out(out / "sweep.csv");
    o << "axis_a,axis_b,value_a,value_b,lambda1,lambda2,lambda3,lambda4,n_completed";
    for (const char* c : detail::metric_cols) o << ",mean_" << c << ",se_" << c;
    o << '\n';

    for (double va : cfg.sweep.values_a) {
        for (double vb : cfg.sweep.values_b) {
            train_config t = cfg.train;
            *detail::lambda_slot(t, cfg.sweep.axis_a) = va;
            *detail::lambda_slot(t, cfg.sweep.axis_b) = vb;
            std::vector<std::function<trial_report()>> jobs;
            for (std::size_t i = 0; i < cfg.n_trials; ++i)
                jobs.push_back([&cfg, &t, loaded, i] {
                    return run_one_trial(cfg, "cell", t, loaded, i);
                });
            std::vector<trial_report> rows;
            run_jobs(jobs, cfg.threads, rows);
            for (const trial_report& r : rows)
                if (r.failed)
                    std::cerr << "warning: sweep cell (" << va << "," << vb << ") trial "
                              << r.trial << " failed: " << r.error << '\n';

            std::vector<std::vector<std::optional<double>>> cols(6);
            std::size_t completed = 0;
            for (const trial_report& r : rows) {
                if (r.failed) continue;
                ++completed;
                for (std::size_t i = 0; i < 6; ++i)
                    cols[i].push_back(detail::metric_field(r.metrics, i));
            }
            o << cfg.sweep.axis_a << ',' << cfg.sweep.axis_b << ',' << fmt_shortest(va)
              << ',' << fmt_shortest(vb) << ',' << fmt_shortest(t.lambda1) << ','
              << fmt_shortest(t.lambda2) << ',' << fmt_shortest(t.lambda3) << ','
              << fmt_shortest(t.lambda4) << ',' << completed;
            for (std::size_t i = 0; i < 6; ++i) {
                const metric_agg a = aggregate_metric(cols[i]);
                o << ',' << fmt_opt(a.mean) << ',' << fmt_opt(a.se);
            }
            o << '\n';
        }
    }
    if (!o) throw io_error("short write: " + (out / "sweep.csv").string());
    os << "sweep: " << cfg.sweep.values_a.size() * cfg.sweep.values_b.size()
       << " cells written\n";
}

/// Random-search correlation study: log-uniform loss-weight vectors, one
/// trial each, then the Pearson matrix over the four weights and the two
/// group-fairness gaps.
inline void cmd_correlate(const experiment_config& cfg, std::ostream& os = std::cout) {
    validate_experiment_config(cfg);
    if (cfg.correlate.n_samples < 10)
        throw config_error("correlate: n_samples must be at least 10");
    if (!(cfg.correlate.lambda_min > 0.0) ||
        cfg.correlate.lambda_max < cfg.correlate.lambda_min)
        throw config_error("correlate: need 0 < lambda_min <= lambda_max");
    std::optional<graph> storage;
    const graph* loaded = detail::maybe_load(cfg, storage);
    detail::write_config_provenance(cfg);
    const std::filesystem::path out(cfg.out_dir);

    // all weight vectors are drawn up front from one dedicated stream, so the
    // sample list is a pure function of the base seed
    auto rng = make_rng(cfg.base_seed, streams::correlate);
    std::uniform_real_distribution<double> u(std::log(cfg.correlate.lambda_min),
                                             std::log(cfg.correlate.lambda_max));
    std::vector<train_config> samples(cfg.correlate.n_samples, cfg.train);
    for (auto& t : samples) {
        t.lambda1 = std::exp(u(rng));
        t.lambda2 = std::exp(u(rng));
        t.lambda3 = std::exp(u(rng));
        t.lambda4 = std::exp(u(rng));
    }

    std::vector<std::function<trial_report()>> jobs;
    for (std::size_t i = 0; i < samples.size(); ++i)
        jobs.push_back([&cfg, &samples, loaded, i] {
            return run_one_trial(cfg, "sample", samples[i], loaded, i);
        });
    std::vector<trial_report> rows;
    run_jobs(jobs, cfg.threads, rows);
    detail::warn_failures(rows);
    write_trials_csv(out / "samples.csv", rows);
    write_timing_csv(out / "timing.csv", rows);

    // matrix order: lambda1..lambda4, delta_eoo, delta_dp
    const std::vector<std::string> names = {"lambda1", "lambda2", "lambda3",
                                            "lambda4", "delta_eoo", "delta_dp"};
    std::vector<std::vector<std::optional<double>>> series(6);
    for (const trial_report& r : rows) {
        const bool ok = !r.failed;
        series[0].push_back(ok ? std::optional<double>(r.lambda1) : std::nullopt);
        series[1].push_back(ok ? std::optional<double>(r.lambda2) : std::nullopt);
        series[2].push_back(ok ? std::optional<double>(r.lambda3) : std::nullopt);
        series[3].push_back(ok ? std::optional<double>(r.lambda4) : std::nullopt);
        series[4].push_back(ok ? r.metrics.delta_eoo : std::nullopt);
        series[5].push_back(ok ? r.metrics.delta_dp : std::nullopt);
    }

    auto o = detail::open_out(out / "correlation.csv");
    o << "variable";
    for (const auto& n : names) o << ',' << n;
    o << '\n';
    for (std::size_t a = 0; a < 6; ++a) {
        o << names[a];
        for (std::size_t b = 0; b < 6; ++b) {
            // pairwise-complete observations
            std::vector<double> xa, xb;
            for (std::size_t k = 0; k < series[a].size(); ++k)
                if (series[a][k] && series[b][k]) {
                    xa.push_back(*series[a][k]);
                    xb.push_back(*series[b][k]);
                }
            std::optional<double> rho;
            if (a == b && xa.size() >= 2) {
                rho = 1.0;
            } else if (xa.size() >= 2) {
                try {
                    rho = pearson(xa, xb);
                } catch (const undefined_metric_error&) {
                }
            }
            o << ',' << fmt_opt(rho);
        }
        o << '\n';
    }
    if (!o) throw io_error("short write: " + (out / "correlation.csv").string());
    os << "correlate: " << rows.size() << " samples written\n";
}

/// Per-node latents of a saved model on a dataset, factual and
/// sensitive-flipped, one CSV row per node. Unlabeled nodes carry y = -1.
inline void cmd_export_embeddings(const std::string& checkpoint_path,
                                  const std::string& dataset_dir,
                                  const std::string& out_csv) {
    const checkpoint ck = load_checkpoint(checkpoint_path);
    const graph g = load_graph(dataset_dir);
    if (ck.config.input_dim != g.n_attrs())
        throw format_error("embeddings: checkpoint expects " +
                           std::to_string(ck.config.input_dim) + " feature columns, dataset has " +
                           std::to_string(g.n_attrs()));
    const latent_split f = encode(g, ck.state, ck.config);
    const latent_split c = encode(flip_sensitive(g), ck.state, ck.config);

    auto out = detail::open_out(out_csv);
    out << "id,s,y";
    const std::size_t dc = f.z_c.cols(), de = f.z_e.cols();
    for (std::size_t k = 0; k < dc; ++k) out << ",z_c_" << k;
    for (std::size_t k = 0; k < de; ++k) out << ",z_e_" << k;
    for (std::size_t k = 0; k < dc; ++k) out << ",z_c_cf_" << k;
    for (std::size_t k = 0; k < de; ++k) out << ",z_e_cf_" << k;
    out << '\n';
    for (std::size_t i = 0; i < g.n_nodes(); ++i) {
        out << i << ',' << g.sensitive[i] << ',' << (g.labels ? (*g.labels)[i] : -1);
        for (std::size_t k = 0; k < dc; ++k) out << ',' << fmt_shortest(f.z_c.at(i, k));
        for (std::size_t k = 0; k < de; ++k) out << ',' << fmt_shortest(f.z_e.at(i, k));
        for (std::size_t k = 0; k < dc; ++k) out << ',' << fmt_shortest(c.z_c.at(i, k));
        for (std::size_t k = 0; k < de; ++k) out << ',' << fmt_shortest(c.z_e.at(i, k));
        out << '\n';
    }
    if (!out) throw io_error("short write: " + out_csv);
}

/// Epoch wall-time of the zero-fairness-weight configuration versus the full
/// objective across synthetic sizes.
inline void cmd_perf(const experiment_config& cfg, const std::vector<std::size_t>& sizes,
                     std::ostream& os = std::cout) {
    validate_experiment_config(cfg);
    if (sizes.size() < 2) throw config_error("perf: need at least two sizes");
    const std::filesystem::path out(cfg.out_dir);
    auto o = detail::open_out(out / "perf.csv");
    o << "n_nodes,baseline_epoch_seconds,full_epoch_seconds,ratio\n";

    for (const std::size_t n : sizes) {
        experiment_config c = cfg;
        c.synth.n_nodes = n;
        const detail::trial_data td = detail::prepare_trial_data(c, nullptr, cfg.base_seed);
        model_config mcfg = c.model;
        if (mcfg.input_dim == 0) mcfg.input_dim = td.g.n_attrs();

        auto time_fit = [&](const train_config& t) {
            const auto t0 = std::chrono::steady_clock::now();
            fit(td.g, mcfg, t);
            const double sec =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            return sec / static_cast<double>(t.epochs);
        };
        train_config baseline = c.train;
        baseline.lambda2 = 0.0;
        baseline.lambda3 = 0.0;
        baseline.lambda4 = 0.0;
        const double tb = time_fit(baseline);
        const double tf = time_fit(c.train);
        o << n << ',' << fmt_shortest(tb) << ',' << fmt_shortest(tf) << ','
          << fmt_shortest(tf / tb) << '\n';
        os << "n=" << n << ": baseline " << tb << " s/epoch, full " << tf
           << " s/epoch, ratio " << tf / tb << '\n';
    }
    if (!o) throw io_error("short write: " + (out / "perf.csv").string());
}

/// Generates the synthetic bundle and writes the three graphs plus the
/// generator metadata under out_dir.
inline void cmd_generate(const experiment_config& cfg, std::ostream& os = std::cout) {
    validate_synth_config(cfg.synth);
    synth_config sc = cfg.synth;
    sc.seed = cfg.base_seed;
    const synth_bundle b = generate(sc);
    const std::filesystem::path out(cfg.out_dir);
    save_graph(b.factual, make_meta(b.factual, "synthetic-factual", "none", 0.0, sc.seed),
               out / "factual");
    save_graph(b.cf_all0, make_meta(b.cf_all0, "synthetic-cf-all0", "none", 0.0, sc.seed),
               out / "cf_all0");
    save_graph(b.cf_all1, make_meta(b.cf_all1, "synthetic-cf-all1", "none", 0.0, sc.seed),
               out / "cf_all1");
    auto o = detail::open_out(out / "bundle_meta.json");
    o << bundle_meta_json(b, sc).dump(2) << '\n';
    os << "generated " << b.factual.n_nodes() << " nodes, " << b.factual.n_edges()
       << " edges -> " << out.string() << '\n';
}

/// Loads a dataset, plants anomalies, writes the labeled dataset.
inline void cmd_inject(const experiment_config& cfg, const std::string& dataset_dir,
                       bool clear_labels, std::ostream& os = std::cout) {
    validate_inject_config(cfg.inject);
    if (cfg.inject_type != "structural" && cfg.inject_type != "contextual")
        throw config_error("inject: type must be structural or contextual");
    auto [g, meta] = load_dataset(dataset_dir);
    if (clear_labels) g.labels.reset();
    inject_config ic = cfg.inject;
    ic.seed = cfg.base_seed;
    const graph injected =
        cfg.inject_type == "structural" ? inject_structural(g, ic) : inject_contextual(g, ic);
    const std::filesystem::path out(cfg.out_dir);
    save_graph(injected,
               make_meta(injected, meta.name + "-" + cfg.inject_type, cfg.inject_type,
                         ic.outlier_ratio, ic.seed),
               out);
    std::size_t k = 0;
    for (int y : *injected.labels) k += static_cast<std::size_t>(y);
    os << "injected " << k << " " << cfg.inject_type << " outliers -> " << out.string()
       << '\n';
}

/// Prints the conditional-independence report for the model's causal graph.
/// Returns true when every check matches its expectation.
inline bool cmd_verify_scm(std::ostream& os = std::cout) {
    const lemma1_report rep = verify_lemma1();
    os << lemma1_to_json(rep).dump(2) << '\n';
    return rep.all_ok;
}

} // namespace decaf
