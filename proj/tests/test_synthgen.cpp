#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "decaf/synthgen.hpp"

using namespace decaf;

namespace {

struct pair_rates {
    std::size_t within_pairs = 0, cross_pairs = 0;
    std::size_t within_edges = 0, cross_edges = 0;
};

pair_rates count_pair_rates(const graph& g) {
    pair_rates r;
    const std::size_t n = g.n_nodes();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool same = g.sensitive[i] == g.sensitive[j];
            const bool edge = g.adjacency.at(i, j) != 0.0;
            if (same) {
                ++r.within_pairs;
                r.within_edges += edge;
            } else {
                ++r.cross_pairs;
                r.cross_edges += edge;
            }
        }
    }
    return r;
}

bool nonsensitive_features_equal(const tensor& a, const tensor& b, std::size_t s_col) {
    if (a.shape != b.shape) return false;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k)
            if (k != s_col && a.at(i, k) != b.at(i, k)) return false;
    return true;
}

} // namespace

TEST_CASE("sample_mask draws a sorted distinct subset") {
    auto rng = rng_engine(77);
    const auto m = sample_mask(50, 25, rng);
    REQUIRE(m.size() == 25);
    REQUIRE(std::is_sorted(m.begin(), m.end()));
    for (std::size_t i = 1; i < m.size(); ++i) REQUIRE(m[i] != m[i - 1]);
    for (auto k : m) REQUIRE(k < 50);

    auto rng2 = rng_engine(77);
    REQUIRE(sample_mask(50, 25, rng2) == m);

    auto rng3 = rng_engine(5);
    std::vector<std::size_t> all(10);
    std::iota(all.begin(), all.end(), std::size_t{0});
    REQUIRE(sample_mask(10, 10, rng3) == all);

    REQUIRE_THROWS_AS(sample_mask(5, 6, rng3), config_error);
}

TEST_CASE("synth config validation") {
    synth_config c;
    c.n_nodes = 1;
    REQUIRE_THROWS_AS(validate_synth_config(c), config_error);
    c = synth_config{};
    c.p_sensitive = 0.0;
    REQUIRE_THROWS_AS(validate_synth_config(c), config_error);
    c.p_sensitive = 1.0;
    REQUIRE_THROWS_AS(validate_synth_config(c), config_error);
    c = synth_config{};
    c.observed_dim = 51;
    REQUIRE_THROWS_AS(validate_synth_config(c), config_error);
    c = synth_config{};
    c.target_mean_degree = 0.0;
    REQUIRE_THROWS_AS(validate_synth_config(c), config_error);
    c = synth_config{};
    c.v_override = std::vector<double>(49, 0.0);
    REQUIRE_THROWS_AS(validate_synth_config(c), config_error);
    c = synth_config{};
    c.w_override = std::vector<double>(51, 0.0);
    REQUIRE_THROWS_AS(validate_synth_config(c), config_error);
}

TEST_CASE("unreachable target degree is rejected during calibration") {
    synth_config c;
    c.n_nodes = 50;
    c.target_mean_degree = 100.0;
    c.seed = 3;
    REQUIRE_THROWS_AS(generate(c), config_error);
}

TEST_CASE("generated bundle has the documented shapes and passes validation") {
    synth_config c;
    c.n_nodes = 150;
    c.seed = 11;
    const auto b = generate(c);

    REQUIRE(b.latent.shape == std::vector<std::size_t>{150, 50});
    REQUIRE(b.mask.size() == 25);
    REQUIRE(b.v.size() == 50);
    REQUIRE(b.w.size() == 50);
    REQUIRE(b.q > 0.0);
    REQUIRE(b.q <= 1.0);

    for (const graph* g : {&b.factual, &b.cf_all0, &b.cf_all1}) {
        REQUIRE(g->n_nodes() == 150);
        REQUIRE(g->n_attrs() == 51);
        REQUIRE(g->sensitive_col.has_value());
        REQUIRE(*g->sensitive_col == 50);
        REQUIRE(g->labels.has_value());
        REQUIRE_NOTHROW(validate_graph(*g));
    }
    REQUIRE(b.cf_all0.sensitive == std::vector<int>(150, 0));
    REQUIRE(b.cf_all1.sensitive == std::vector<int>(150, 1));
    REQUIRE(*b.cf_all0.labels == *b.factual.labels);
    REQUIRE(*b.cf_all1.labels == *b.factual.labels);

    // feature rule recount: kept latent dims plus the group shift, S last
    std::vector<char> keep(50, 0);
    for (auto k : b.mask) keep[k] = 1;
    for (std::size_t i = 0; i < 150; i += 13) {
        const double si = static_cast<double>(b.factual.sensitive[i]);
        for (std::size_t k = 0; k < 50; ++k) {
            const double want = (keep[k] ? b.latent.at(i, k) : 0.0) + si * b.v[k];
            REQUIRE(b.factual.features.at(i, k) == want);
        }
        REQUIRE(b.factual.features.at(i, 50) == si);
    }
}

TEST_CASE("generation is deterministic in the seed") {
    synth_config c;
    c.n_nodes = 120;
    c.seed = 9;
    const auto a = generate(c);
    const auto b = generate(c);
    REQUIRE(a.factual.features.values == b.factual.features.values);
    REQUIRE(a.factual.adjacency.values == b.factual.adjacency.values);
    REQUIRE(a.cf_all1.adjacency.values == b.cf_all1.adjacency.values);
    REQUIRE(*a.factual.labels == *b.factual.labels);
    REQUIRE(a.mask == b.mask);

    c.seed = 10;
    const auto d = generate(c);
    REQUIRE(a.factual.adjacency.values != d.factual.adjacency.values);
}

TEST_CASE("default parameters hit the target edge count within 10 percent") {
    for (std::uint64_t seed : {1ull, 2ull}) {
        synth_config c;
        c.seed = seed;
        const auto b = generate(c);
        const double edges = static_cast<double>(b.factual.n_edges());
        REQUIRE(edges > 5090.0 * 0.9);
        REQUIRE(edges < 5090.0 * 1.1);
    }
}

TEST_CASE("zero direction vector leaves only the sensitive column varying") {
    synth_config c;
    c.n_nodes = 200;
    c.seed = 21;
    c.v_override = std::vector<double>(50, 0.0);
    const auto b = generate(c);
    REQUIRE(nonsensitive_features_equal(b.factual.features, b.cf_all0.features, 50));
    REQUIRE(nonsensitive_features_equal(b.factual.features, b.cf_all1.features, 50));
    for (std::size_t i = 0; i < 200; ++i) {
        REQUIRE(b.cf_all0.features.at(i, 50) == 0.0);
        REQUIRE(b.cf_all1.features.at(i, 50) == 1.0);
    }
}

TEST_CASE("with v = 0 and a = 0 the three graphs coincide up to the S column") {
    synth_config c;
    c.n_nodes = 250;
    c.seed = 33;
    c.homophily = 0.0;
    c.v_override = std::vector<double>(50, 0.0);
    const auto b = generate(c);
    REQUIRE(b.factual.adjacency.values == b.cf_all0.adjacency.values);
    REQUIRE(b.factual.adjacency.values == b.cf_all1.adjacency.values);
    REQUIRE(nonsensitive_features_equal(b.factual.features, b.cf_all0.features, 50));
    REQUIRE(nonsensitive_features_equal(b.factual.features, b.cf_all1.features, 50));
}

TEST_CASE("freeze_cf_edges copies the factual adjacency verbatim") {
    synth_config c;
    c.n_nodes = 200;
    c.seed = 4;
    c.freeze_cf_edges = true;
    const auto b = generate(c);
    REQUIRE(b.cf_all0.adjacency.values == b.factual.adjacency.values);
    REQUIRE(b.cf_all1.adjacency.values == b.factual.adjacency.values);
}

TEST_CASE("sensitive draw matches p = 0.4 within 3 sigma pooled over seeds") {
    std::size_t ones = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        synth_config c;
        c.n_nodes = 500;
        c.seed = seed;
        const auto b = generate(c);
        for (int v : b.factual.sensitive) ones += (v != 0);
        total += 500;
    }
    const double phat = static_cast<double>(ones) / static_cast<double>(total);
    const double sigma = std::sqrt(0.4 * 0.6 / static_cast<double>(total));
    REQUIRE(std::fabs(phat - 0.4) < 3.0 * sigma);
}

TEST_CASE("labels are median-balanced within one node") {
    for (std::size_t n : {151, 200}) {
        synth_config c;
        c.n_nodes = n;
        c.seed = 8;
        const auto b = generate(c);
        const auto& y = *b.factual.labels;
        const double ones = static_cast<double>(std::count(y.begin(), y.end(), 1));
        REQUIRE(std::fabs(ones - static_cast<double>(n) / 2.0) <= 1.0);
    }
}

TEST_CASE("homophily shifts within-group inclusion probability upward") {
    synth_config c;
    c.n_nodes = 600;
    c.seed = 14;
    const auto b = generate(c);
    REQUIRE(b.pairs_within > 0);
    REQUIRE(b.pairs_cross > 0);
    REQUIRE(b.pairs_within + b.pairs_cross == 600ull * 599ull / 2ull);
    const double mean_within = b.sum_p_within / static_cast<double>(b.pairs_within);
    const double mean_cross = b.sum_p_cross / static_cast<double>(b.pairs_cross);
    REQUIRE(mean_within > mean_cross);
}

TEST_CASE("with a = 0 realized within and cross edge rates agree within 3 sigma") {
    std::size_t we = 0, wp = 0, ce = 0, cp = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        synth_config c;
        c.n_nodes = 400;
        c.homophily = 0.0;
        c.seed = 100 + seed;
        const auto b = generate(c);
        const auto r = count_pair_rates(b.factual);
        we += r.within_edges;
        wp += r.within_pairs;
        ce += r.cross_edges;
        cp += r.cross_pairs;
    }
    const double pw = static_cast<double>(we) / static_cast<double>(wp);
    const double pc = static_cast<double>(ce) / static_cast<double>(cp);
    const double pool = static_cast<double>(we + ce) / static_cast<double>(wp + cp);
    const double sigma = std::sqrt(pool * (1.0 - pool) *
                                   (1.0 / static_cast<double>(wp) + 1.0 / static_cast<double>(cp)));
    REQUIRE(std::fabs(pw - pc) < 3.0 * sigma);
}

TEST_CASE("bundle meta JSON records the generation artifacts") {
    synth_config c;
    c.n_nodes = 80;
    c.seed = 2;
    const auto b = generate(c);
    const auto j = bundle_meta_json(b, c);
    REQUIRE(j["q"].get<double>() == b.q);
    REQUIRE(j["mask"].size() == 25);
    REQUIRE(j["v"].size() == 50);
    REQUIRE(j["w"].size() == 50);
    REQUIRE(j["seed"].get<std::uint64_t>() == 2);
    REQUIRE(j["freeze_cf_edges"].get<bool>() == false);
}
