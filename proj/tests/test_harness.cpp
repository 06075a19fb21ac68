#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <decaf/harness.hpp>

#include "support/tmpdir.hpp"

using namespace decaf;
using testsupport::tmpdir;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
}

std::vector<std::string> fields_of(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

// small but non-degenerate experiment: 80 nodes, 9 feature columns, a few
// epochs of every loss term
experiment_config small_cfg(const std::filesystem::path& out) {
    experiment_config cfg;
    cfg.synth.n_nodes = 80;
    cfg.synth.latent_dim = 8;
    cfg.synth.observed_dim = 4;
    cfg.synth.target_mean_degree = 6.0;
    cfg.inject_type = "structural";
    cfg.inject.outlier_ratio = 0.05;
    cfg.inject.group_size = 4;
    cfg.model.hidden_dim = 12;
    cfg.model.latent_dim = 6;
    cfg.model.disc_hidden = 6;
    cfg.train.epochs = 4;
    cfg.n_trials = 2;
    cfg.base_seed = 11;
    cfg.out_dir = out.string();
    return cfg;
}

} // namespace

TEST_CASE("experiment config json parsing") {
    SECTION("partial sections override only the named keys") {
        const nlohmann::json j = {{"synth", {{"n_nodes", 50}, {"homophily", 0.2}}},
                                  {"train", {{"epochs", 7}, {"lambda3", 2.0}}},
                                  {"inject", {{"type", "contextual"}}},
                                  {"n_trials", 3},
                                  {"base_seed", 99}};
        const experiment_config cfg = experiment_config_from_json(j);
        CHECK(cfg.synth.n_nodes == 50);
        CHECK(cfg.synth.homophily == 0.2);
        CHECK(cfg.synth.observed_dim == 25); // untouched default
        CHECK(cfg.train.epochs == 7);
        CHECK(cfg.train.lambda3 == 2.0);
        CHECK(cfg.train.lambda1 == 1.0);
        CHECK(cfg.inject_type == "contextual");
        CHECK(cfg.n_trials == 3);
        CHECK(cfg.base_seed == 99);
        CHECK(cfg.threads == 1);
    }
    SECTION("unknown keys are rejected") {
        CHECK_THROWS_AS(experiment_config_from_json({{"n_trails", 3}}), config_error);
        CHECK_THROWS_AS(experiment_config_from_json({{"synth", {{"nodes", 5}}}}),
                        config_error);
        CHECK_THROWS_AS(experiment_config_from_json({{"train", {{"lambda5", 1.0}}}}),
                        config_error);
    }
    SECTION("wrong value types are config errors") {
        CHECK_THROWS_AS(experiment_config_from_json({{"n_trials", "three"}}), config_error);
        CHECK_THROWS_AS(experiment_config_from_json({{"train", {{"epochs", "many"}}}}),
                        config_error);
    }
    SECTION("to_json round-trips through from_json") {
        experiment_config cfg;
        cfg.synth.n_nodes = 123;
        cfg.train.lambda4 = 0.25;
        cfg.inject_type = "contextual";
        cfg.n_trials = 5;
        cfg.out_dir = "somewhere";
        const experiment_config back = experiment_config_from_json(experiment_config_to_json(cfg));
        CHECK(back.synth.n_nodes == 123);
        CHECK(back.train.lambda4 == 0.25);
        CHECK(back.inject_type == "contextual");
        CHECK(back.n_trials == 5);
        CHECK(back.out_dir == "somewhere");
    }
    SECTION("config file loading") {
        tmpdir tmp("cfgfile");
        const auto path = tmp.path() / "exp.json";
        {
            std::ofstream out(path);
            out << R"({"train": {"epochs": 9}})";
        }
        CHECK(load_experiment_config(path.string()).train.epochs == 9);
        CHECK_THROWS_AS(load_experiment_config((tmp.path() / "missing.json").string()),
                        config_error);
        {
            std::ofstream out(path);
            out << "{not json";
        }
        CHECK_THROWS_AS(load_experiment_config(path.string()), config_error);
    }
}

TEST_CASE("experiment config validation") {
    tmpdir tmp("val");
    experiment_config cfg = small_cfg(tmp.path());
    CHECK_NOTHROW(validate_experiment_config(cfg));

    experiment_config bad = cfg;
    bad.n_trials = 0;
    CHECK_THROWS_AS(validate_experiment_config(bad), config_error);
    bad = cfg;
    bad.threads = 0;
    CHECK_THROWS_AS(validate_experiment_config(bad), config_error);
    bad = cfg;
    bad.inject_type = "structurál";
    CHECK_THROWS_AS(validate_experiment_config(bad), config_error);
    bad = cfg;
    bad.inject.outlier_ratio = 1.5; // nested validators run too
    CHECK_THROWS_AS(validate_experiment_config(bad), config_error);
    bad = cfg;
    bad.train.contamination = 0.0;
    CHECK_THROWS_AS(validate_experiment_config(bad), config_error);
}

TEST_CASE("threshold_at marks scores at or above the cutoff") {
    const std::vector<double> s = {0.1, 0.5, 0.5, 0.9, 0.2};
    CHECK(threshold_at(s, 0.5) == std::vector<int>{0, 1, 1, 1, 0});
    CHECK(threshold_at(s, 1.0) == std::vector<int>{0, 0, 0, 0, 0});
    CHECK(threshold_at(s, 0.0) == std::vector<int>{1, 1, 1, 1, 1});
}

TEST_CASE("aggregate_metric matches a scalar oracle") {
    SECTION("mean and standard error over defined entries") {
        const std::vector<std::optional<double>> xs = {1.0, 2.0, std::nullopt, 3.0};
        const metric_agg a = aggregate_metric(xs);
        REQUIRE(a.n == 3);
        REQUIRE(a.mean.has_value());
        CHECK(*a.mean == Catch::Approx(2.0).epsilon(1e-15));
        REQUIRE(a.se.has_value());
        // sample stddev of {1,2,3} is 1, so se = 1/sqrt(3)
        CHECK(*a.se == Catch::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
    }
    SECTION("single defined value has a mean but no spread") {
        const metric_agg a = aggregate_metric({std::nullopt, 4.5});
        CHECK(a.n == 1);
        CHECK(a.mean == 4.5);
        CHECK_FALSE(a.se.has_value());
    }
    SECTION("no defined values renders n/a") {
        const metric_agg a = aggregate_metric({std::nullopt, std::nullopt});
        CHECK(a.n == 0);
        CHECK(fmt_opt(a.mean) == "n/a");
    }
    SECTION("fmt_opt uses the shortest float form") {
        CHECK(fmt_opt(0.5) == "0.5");
        CHECK(fmt_opt(1.0) == "1");
    }
}

TEST_CASE("trial data preparation") {
    tmpdir tmp("prep");
    experiment_config cfg = small_cfg(tmp.path());
    cfg.synth.v_override = std::vector<double>(cfg.synth.latent_dim, 0.0);

    SECTION("injection defines the labels, identically in every world") {
        const detail::trial_data td = detail::prepare_trial_data(cfg, nullptr, 11);
        REQUIRE(td.g.labels.has_value());
        std::size_t k = 0;
        for (int y : *td.g.labels) k += static_cast<std::size_t>(y);
        CHECK(k >= 2);
        CHECK(k < td.g.n_nodes());
        REQUIRE(td.cf0.has_value());
        REQUIRE(td.cf1.has_value());
        CHECK(*td.cf0->labels == *td.g.labels);
        CHECK(*td.cf1->labels == *td.g.labels);
        // both interventional worlds are all-same-group, so their edge coins
        // and injected cliques coincide exactly
        CHECK(td.cf0->adjacency.values == td.cf1->adjacency.values);
        // with the group shift zeroed, their features differ only in the
        // sensitive column itself
        REQUIRE(td.cf0->sensitive_col.has_value());
        const std::size_t sc = *td.cf0->sensitive_col;
        for (std::size_t i = 0; i < td.cf0->n_nodes(); ++i)
            for (std::size_t j = 0; j < td.cf0->n_attrs(); ++j) {
                if (j == sc) continue;
                REQUIRE(td.cf0->features.at(i, j) == td.cf1->features.at(i, j));
            }
        CHECK(td.cf0->features.at(0, sc) == 0.0);
        CHECK(td.cf1->features.at(0, sc) == 1.0);
    }
    SECTION("inject type none keeps synthetic data unlabeled") {
        cfg.inject_type = "none";
        const detail::trial_data td = detail::prepare_trial_data(cfg, nullptr, 11);
        CHECK_FALSE(td.g.labels.has_value());
    }
    SECTION("a preloaded graph has no interventional twins") {
        const detail::trial_data synth = detail::prepare_trial_data(cfg, nullptr, 11);
        const graph base = synth.g;
        cfg.inject_type = "none";
        const detail::trial_data td = detail::prepare_trial_data(cfg, &base, 11);
        CHECK_FALSE(td.cf0.has_value());
        CHECK(td.g.features.values == base.features.values);
    }
}

TEST_CASE("counterfactual gap is exactly zero when latents ignore the sensitive bit") {
    tmpdir tmp("cfzero");
    experiment_config cfg = small_cfg(tmp.path());
    cfg.synth.n_nodes = 100;
    cfg.synth.v_override = std::vector<double>(cfg.synth.latent_dim, 0.0);
    const detail::trial_data td = detail::prepare_trial_data(cfg, nullptr, 11);

    model_config mcfg = cfg.model;
    mcfg.input_dim = td.g.n_attrs();
    mcfg.score_include_sensitive = false;
    model_state st = init_model(mcfg, 5);
    REQUIRE(td.g.sensitive_col.has_value());
    for (std::size_t j = 0; j < st.enc_w1.cols(); ++j)
        st.enc_w1.at(*td.g.sensitive_col, j) = 0.0;

    fit_result fr;
    fr.state = st;
    fr.scores = scores_for_state(td.g, st, mcfg);
    const metrics_report m = detail::compute_trial_metrics(td, fr, mcfg, 0.05);
    REQUIRE(m.threshold_k >= 1);
    REQUIRE(m.delta_cf.has_value());
    CHECK(*m.delta_cf == 0.0);

    // the same setup with the sensitive row live generally moves the scores
    const model_state live = init_model(mcfg, 5);
    const auto s0 = scores_for_state(*td.cf0, live, mcfg);
    const auto s1 = scores_for_state(*td.cf1, live, mcfg);
    bool any_diff = false;
    for (std::size_t i = 0; i < s0.size(); ++i) any_diff |= (s0[i] != s1[i]);
    CHECK(any_diff);
}

TEST_CASE("run_one_trial captures failures instead of throwing") {
    tmpdir tmp("fail");
    experiment_config cfg = small_cfg(tmp.path());
    cfg.model.latent_dim = 5; // uneven split, illegal with lambda2 > 0
    const trial_report r = run_one_trial(cfg, "decaf", cfg.train, nullptr, 0);
    CHECK(r.failed);
    CHECK_FALSE(r.error.empty());
    CHECK_FALSE(r.metrics.auroc.has_value());

    write_trials_csv(tmp.path() / "trials.csv", {r});
    const auto rows = lines_of(slurp(tmp.path() / "trials.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] ==
          "variant,trial,seed,lambda1,lambda2,lambda3,lambda4,accuracy,f1,auroc,"
          "delta_dp,delta_eoo,delta_cf,epochs,status");
    const auto f = fields_of(rows[1]);
    REQUIRE(f.size() == 15);
    CHECK(f[0] == "decaf");
    CHECK(f[7] == "n/a");
    CHECK(f[14] == "failed");
}

TEST_CASE("cmd_run output layout and determinism") {
    tmpdir tmp("run");
    std::ostringstream quiet;

    experiment_config a = small_cfg(tmp.path() / "a");
    cmd_run(a, quiet);

    const auto trials = slurp(tmp.path() / "a" / "trials.csv");
    const auto agg = slurp(tmp.path() / "a" / "aggregate.csv");
    const auto rows = lines_of(trials);
    REQUIRE(rows.size() == 1 + 2 * 2); // two variants, two trials each
    CHECK(fields_of(rows[1])[0] == "baseline");
    CHECK(fields_of(rows[3])[0] == "decaf");
    // baseline rows carry zeroed fairness weights, decaf rows the configured ones
    CHECK(fields_of(rows[1])[4] == "0");
    CHECK(fields_of(rows[3])[4] == "0.5");
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(fields_of(rows[i])[14] == "ok");

    const auto agg_rows = lines_of(agg);
    REQUIRE(agg_rows.size() == 3);
    CHECK(fields_of(agg_rows[1])[0] == "baseline");
    CHECK(fields_of(agg_rows[1])[1] == "2");
    CHECK(fields_of(agg_rows[2])[0] == "decaf");
    REQUIRE(fields_of(agg_rows[1]).size() == 14);

    SECTION("same config, fresh output directory, identical bytes") {
        experiment_config b = small_cfg(tmp.path() / "b");
        cmd_run(b, quiet);
        CHECK(slurp(tmp.path() / "b" / "trials.csv") == trials);
        CHECK(slurp(tmp.path() / "b" / "aggregate.csv") == agg);
        CHECK(slurp(tmp.path() / "b" / "traces" / "decaf_trial_0.csv") ==
              slurp(tmp.path() / "a" / "traces" / "decaf_trial_0.csv"));
        CHECK(slurp(tmp.path() / "b" / "checkpoints" / "decaf_trial_1.ckpt") ==
              slurp(tmp.path() / "a" / "checkpoints" / "decaf_trial_1.ckpt"));
    }
    SECTION("worker pool does not change results") {
        experiment_config c = small_cfg(tmp.path() / "c");
        c.threads = 3;
        cmd_run(c, quiet);
        CHECK(slurp(tmp.path() / "c" / "trials.csv") == trials);
        CHECK(slurp(tmp.path() / "c" / "aggregate.csv") == agg);
    }
    SECTION("failed variants are reported per row and aggregated as zero") {
        experiment_config d = small_cfg(tmp.path() / "d");
        d.model.latent_dim = 5; // decaf trials fail, baseline (lambda2 = 0) runs
        cmd_run(d, quiet);
        const auto drows = lines_of(slurp(tmp.path() / "d" / "trials.csv"));
        REQUIRE(drows.size() == 5);
        CHECK(fields_of(drows[1])[14] == "ok");
        CHECK(fields_of(drows[3])[14] == "failed");
        const auto dagg = lines_of(slurp(tmp.path() / "d" / "aggregate.csv"));
        CHECK(fields_of(dagg[2])[1] == "0");
        CHECK(fields_of(dagg[2])[2] == "n/a");
    }
}

TEST_CASE("cmd_run renders undefined metrics as n/a") {
    tmpdir tmp("na");
    std::ostringstream quiet;
    experiment_config cfg = small_cfg(tmp.path());
    cfg.inject_type = "none"; // unlabeled data: no accuracy, f1, auroc, or eoo
    cfg.n_trials = 1;
    cfg.train.epochs = 2;
    cmd_run(cfg, quiet);
    const auto rows = lines_of(slurp(tmp.path() / "trials.csv"));
    REQUIRE(rows.size() == 3);
    const auto f = fields_of(rows[2]);
    CHECK(f[7] == "n/a");  // accuracy
    CHECK(f[9] == "n/a");  // auroc
    CHECK(f[10] != "n/a"); // demographic parity gap needs no labels
    CHECK(f[11] == "n/a"); // eoo
    CHECK(f[12] != "n/a"); // counterfactual gap comes from the twin graphs
    CHECK(f[14] == "ok");
}

TEST_CASE("cmd_ablate covers the four loss-term variants") {
    tmpdir tmp("ablate");
    std::ostringstream quiet;
    experiment_config cfg = small_cfg(tmp.path());
    cfg.n_trials = 1;
    cfg.train.epochs = 2;
    cmd_ablate(cfg, quiet);

    const auto rows = lines_of(slurp(tmp.path() / "trials.csv"));
    REQUIRE(rows.size() == 5);
    // columns: variant, .., lambda2, lambda3, lambda4
    const auto f1 = fields_of(rows[1]), f2 = fields_of(rows[2]), f3 = fields_of(rows[3]),
               f4 = fields_of(rows[4]);
    CHECK(f1[0] == "full");
    CHECK((f1[5] == "0.5" && f1[6] == "0.5"));
    CHECK(f2[0] == "no_cf");
    CHECK((f2[5] == "0.5" && f2[6] == "0"));
    CHECK(f3[0] == "no_adv");
    CHECK((f3[5] == "0" && f3[6] == "0.5"));
    CHECK(f4[0] == "no_adv_cf");
    CHECK((f4[5] == "0" && f4[6] == "0"));
    const auto agg = lines_of(slurp(tmp.path() / "aggregate.csv"));
    REQUIRE(agg.size() == 5);
}

TEST_CASE("cmd_sweep writes one row per grid cell") {
    tmpdir tmp("sweep");
    std::ostringstream quiet;
    experiment_config cfg = small_cfg(tmp.path());
    cfg.n_trials = 1;
    cfg.train.epochs = 2;
    cfg.sweep.axis_a = "lambda3";
    cfg.sweep.axis_b = "lambda4";
    cfg.sweep.values_a = {0.0, 1.0};
    cfg.sweep.values_b = {0.25};
    cmd_sweep(cfg, quiet);

    const auto rows = lines_of(slurp(tmp.path() / "sweep.csv"));
    REQUIRE(rows.size() == 3);
    const auto f = fields_of(rows[1]);
    CHECK(f[0] == "lambda3");
    CHECK(f[1] == "lambda4");
    CHECK(f[2] == "0");
    CHECK(f[3] == "0.25");
    CHECK(f[6] == "0");    // lambda3 column tracks the axis value
    CHECK(f[7] == "0.25"); // lambda4 column
    CHECK(fields_of(rows[2])[6] == "1");

    SECTION("axis validation") {
        cfg.sweep.axis_b = "lambda3";
        CHECK_THROWS_AS(cmd_sweep(cfg, quiet), config_error);
        cfg.sweep.axis_b = "alpha";
        CHECK_THROWS_AS(cmd_sweep(cfg, quiet), config_error);
        cfg.sweep.axis_b = "lambda4";
        cfg.sweep.values_b = {};
        CHECK_THROWS_AS(cmd_sweep(cfg, quiet), config_error);
    }
}

TEST_CASE("cmd_correlate samples weights and writes a symmetric matrix") {
    tmpdir tmp("corr");
    std::ostringstream quiet;
    experiment_config cfg = small_cfg(tmp.path() / "a");
    cfg.synth.n_nodes = 60;
    cfg.train.epochs = 2;
    cfg.correlate.n_samples = 10;
    cmd_correlate(cfg, quiet);

    const auto samples = lines_of(slurp(tmp.path() / "a" / "samples.csv"));
    REQUIRE(samples.size() == 11);
    for (std::size_t i = 1; i < samples.size(); ++i) {
        const auto f = fields_of(samples[i]);
        CHECK(f[0] == "sample");
        for (std::size_t k = 3; k <= 6; ++k) {
            const double lam = std::stod(f[k]);
            CHECK(lam >= cfg.correlate.lambda_min);
            CHECK(lam <= cfg.correlate.lambda_max);
        }
        CHECK(f[14] == "ok");
    }

    const auto matrix = lines_of(slurp(tmp.path() / "a" / "correlation.csv"));
    REQUIRE(matrix.size() == 7);
    CHECK(matrix[0] == "variable,lambda1,lambda2,lambda3,lambda4,delta_eoo,delta_dp");
    for (std::size_t i = 1; i < matrix.size(); ++i) {
        const auto f = fields_of(matrix[i]);
        REQUIRE(f.size() == 7);
        CHECK(f[i] == "1"); // unit diagonal
    }
    // symmetry of the defined off-diagonal entries
    for (std::size_t i = 1; i <= 6; ++i)
        for (std::size_t j = 1; j <= 6; ++j)
            CHECK(fields_of(matrix[i])[j] == fields_of(matrix[j])[i]);

    SECTION("re-running is byte-identical") {
        experiment_config again = cfg;
        again.out_dir = (tmp.path() / "b").string();
        cmd_correlate(again, quiet);
        CHECK(slurp(tmp.path() / "b" / "samples.csv") ==
              slurp(tmp.path() / "a" / "samples.csv"));
        CHECK(slurp(tmp.path() / "b" / "correlation.csv") ==
              slurp(tmp.path() / "a" / "correlation.csv"));
    }
    SECTION("sample count floor") {
        cfg.correlate.n_samples = 9;
        CHECK_THROWS_AS(cmd_correlate(cfg, quiet), config_error);
    }
}

TEST_CASE("generate and inject round-trip through dataset directories") {
    tmpdir tmp("geninj");
    std::ostringstream quiet;
    experiment_config cfg = small_cfg(tmp.path() / "gen");
    cmd_generate(cfg, quiet);

    for (const char* part : {"factual", "cf_all0", "cf_all1"}) {
        const auto g = load_graph((tmp.path() / "gen" / part).string());
        CHECK(g.n_nodes() == 80);
        CHECK(g.n_attrs() == 9);
    }
    CHECK(std::filesystem::exists(tmp.path() / "gen" / "bundle_meta.json"));

    SECTION("inject labels a generated dataset") {
        experiment_config inj = cfg;
        inj.out_dir = (tmp.path() / "lab").string();
        cmd_inject(inj, (tmp.path() / "gen" / "factual").string(), /*clear_labels=*/true,
                   quiet);
        const auto [g, meta] = load_dataset((tmp.path() / "lab").string());
        REQUIRE(g.labels.has_value());
        std::size_t k = 0;
        for (int y : *g.labels) k += static_cast<std::size_t>(y);
        CHECK(k >= 2);
        CHECK(meta.outlier_type == "structural");
        CHECK(meta.outlier_ratio == 0.05);
    }
    SECTION("already-labeled data is refused without clear_labels") {
        experiment_config inj = cfg;
        inj.out_dir = (tmp.path() / "refuse").string();
        CHECK_THROWS_AS(cmd_inject(inj, (tmp.path() / "gen" / "factual").string(), false,
                                   quiet),
                        config_error);
    }
    SECTION("run refuses to inject over a labeled dataset") {
        experiment_config run = cfg;
        run.dataset_path = (tmp.path() / "gen" / "factual").string();
        run.out_dir = (tmp.path() / "refuse2").string();
        CHECK_THROWS_AS(cmd_run(run, quiet), config_error);
    }
    SECTION("run trains on a labeled dataset with injection off") {
        experiment_config run = cfg;
        run.dataset_path = (tmp.path() / "gen" / "factual").string();
        run.inject_type = "none";
        run.n_trials = 1;
        run.train.epochs = 2;
        run.out_dir = (tmp.path() / "loaded").string();
        cmd_run(run, quiet);
        const auto rows = lines_of(slurp(tmp.path() / "loaded" / "trials.csv"));
        REQUIRE(rows.size() == 3);
        CHECK(fields_of(rows[1])[14] == "ok");
        CHECK(fields_of(rows[1])[9] != "n/a");  // auroc against stored labels
        CHECK(fields_of(rows[1])[12] == "n/a"); // no interventional twins
    }
}

TEST_CASE("export-embeddings writes one row per node with both worlds' latents") {
    tmpdir tmp("embed");
    std::ostringstream quiet;
    experiment_config cfg = small_cfg(tmp.path() / "gen");
    cmd_generate(cfg, quiet);

    experiment_config run = cfg;
    run.dataset_path = (tmp.path() / "gen" / "factual").string();
    run.inject_type = "none";
    run.n_trials = 1;
    run.train.epochs = 2;
    run.out_dir = (tmp.path() / "run").string();
    cmd_run(run, quiet);

    const std::string ckpt = (tmp.path() / "run" / "checkpoints" / "decaf_trial_0.ckpt").string();
    const std::string data = (tmp.path() / "gen" / "factual").string();
    const std::string out = (tmp.path() / "emb.csv").string();
    cmd_export_embeddings(ckpt, data, out);

    const auto rows = lines_of(slurp(out));
    REQUIRE(rows.size() == 81);
    const std::size_t want_cols = 3 + 2 * cfg.model.latent_dim;
    CHECK(fields_of(rows[0]).size() == want_cols);
    CHECK(fields_of(rows[0])[0] == "id");
    CHECK(fields_of(rows[0])[3] == "z_c_0");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto f = fields_of(rows[i]);
        REQUIRE(f.size() == want_cols);
        CHECK(f[0] == std::to_string(i - 1));
        CHECK((f[1] == "0" || f[1] == "1"));
        CHECK((f[2] == "0" || f[2] == "1")); // generated labels are present
    }

    SECTION("re-export is byte-identical") {
        const std::string out2 = (tmp.path() / "emb2.csv").string();
        cmd_export_embeddings(ckpt, data, out2);
        CHECK(slurp(out2) == slurp(out));
    }
    SECTION("feature-width mismatch is a format error") {
        experiment_config other = cfg;
        other.synth.latent_dim = 6; // feature width tracks the latent width
        other.synth.observed_dim = 3;
        other.out_dir = (tmp.path() / "gen2").string();
        cmd_generate(other, quiet);
        CHECK_THROWS_AS(cmd_export_embeddings(
                            ckpt, (tmp.path() / "gen2" / "factual").string(),
                            (tmp.path() / "emb3.csv").string()),
                        format_error);
    }
}

TEST_CASE("run_jobs parallel results match sequential") {
    std::vector<std::function<trial_report()>> jobs;
    for (std::size_t i = 0; i < 7; ++i)
        jobs.push_back([i] {
            trial_report r;
            r.trial = i;
            r.seed = 100 + i;
            r.metrics.auroc = 0.1 * static_cast<double>(i);
            return r;
        });
    std::vector<trial_report> seq, par;
    run_jobs(jobs, 1, seq);
    run_jobs(jobs, 4, par);
    REQUIRE(seq.size() == par.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
        CHECK(seq[i].trial == par[i].trial);
        CHECK(seq[i].seed == par[i].seed);
        CHECK(seq[i].metrics.auroc == par[i].metrics.auroc);
    }
}
