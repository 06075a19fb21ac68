#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "decaf/errors.hpp"
#include "decaf/graph.hpp"
#include "decaf/rng.hpp"

namespace decaf {

struct inject_config {
    double outlier_ratio = 0.05;
    std::size_t group_size = 15;
    double edge_drop_prob = 0.2;
    std::size_t contextual_pool_k = 50;
    std::uint64_t seed = 0;
};

inline void validate_inject_config(const inject_config& cfg) {
    if (!(cfg.outlier_ratio > 0.0) || !(cfg.outlier_ratio < 1.0))
        throw config_error("inject: outlier_ratio must be in (0, 1)");
    if (cfg.group_size < 2) throw config_error("inject: group_size must be at least 2");
    if (cfg.edge_drop_prob < 0.0 || cfg.edge_drop_prob >= 1.0)
        throw config_error("inject: edge_drop_prob must be in [0, 1)");
    if (cfg.contextual_pool_k < 1)
        throw config_error("inject: contextual_pool_k must be at least 1");
}

namespace detail {

inline void require_unlabeled(const graph& g) {
    if (!g.labels) return;
    for (int v : *g.labels)
        if (v != 0)
            throw config_error("inject: graph already carries nonzero labels; "
                               "clear them before injecting");
}

// uniform k-subset of 0..n-1; the returned (random) order also fixes the
// group partition for structural injection
inline std::vector<std::size_t> pick_outliers(std::size_t n, double ratio, rng_engine& rng) {
    const std::size_t k = static_cast<std::size_t>(
        std::ceil(ratio * static_cast<double>(n)));
    if (k < 2) throw config_error("inject: outlier_ratio * n_nodes must be at least 2");
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(k);
    return pool;
}

// consecutive chunks of group_size; a trailing remainder of one node is
// absorbed into the previous group instead of forming a degenerate clique
inline std::vector<std::vector<std::size_t>> partition_groups(
    const std::vector<std::size_t>& sel, std::size_t group_size) {
    std::vector<std::vector<std::size_t>> groups;
    std::size_t i = 0;
    while (i < sel.size()) {
        std::size_t len = std::min(group_size, sel.size() - i);
        if (sel.size() - i == group_size + 1) len = group_size + 1;
        groups.emplace_back(sel.begin() + static_cast<std::ptrdiff_t>(i),
                            sel.begin() + static_cast<std::ptrdiff_t>(i + len));
        i += len;
    }
    return groups;
}

inline std::vector<int> outlier_labels(std::size_t n, const std::vector<std::size_t>& sel) {
    std::vector<int> y(n, 0);
    for (std::size_t i : sel) y[i] = 1;
    return y;
}

} // namespace detail

/// Plants dense-subgraph anomalies: the selected nodes are partitioned into
/// groups, every within-group edge is added, and each edge that was actually
/// added (never a pre-existing one) is then dropped independently with
/// edge_drop_prob. Features stay untouched; selected nodes get label 1.
inline graph inject_structural(const graph& g, const inject_config& cfg) {
    validate_inject_config(cfg);
    detail::require_unlabeled(g);
    graph out = g;
    auto rng_pick = make_rng(cfg.seed, streams::inject_pick);
    const auto sel = detail::pick_outliers(g.n_nodes(), cfg.outlier_ratio, rng_pick);
    const auto groups = detail::partition_groups(sel, cfg.group_size);

    std::vector<std::pair<std::size_t, std::size_t>> added;
    for (const auto& grp : groups) {
        for (std::size_t a = 0; a < grp.size(); ++a) {
            for (std::size_t bidx = a + 1; bidx < grp.size(); ++bidx) {
                const std::size_t i = grp[a], j = grp[bidx];
                if (!out.has_edge(i, j)) {
                    out.set_edge(i, j, true);
                    added.emplace_back(i, j);
                }
            }
        }
    }
    auto rng_drop = make_rng(cfg.seed, streams::inject_drop);
    std::bernoulli_distribution drop(cfg.edge_drop_prob);
    if (cfg.edge_drop_prob > 0.0) {
        for (const auto& [i, j] : added)
            if (drop(rng_drop)) out.set_edge(i, j, false);
    }
    out.labels = detail::outlier_labels(g.n_nodes(), sel);
    return out;
}

/// Plants contextual anomalies: each selected node's feature row is replaced
/// by the row (from the pre-injection snapshot) of the farthest of
/// contextual_pool_k uniformly drawn candidates; its sensitive-column entry
/// is then restored so S still reflects true group membership. Adjacency is
/// untouched; selected nodes get label 1.
inline graph inject_contextual(const graph& g, const inject_config& cfg) {
    validate_inject_config(cfg);
    detail::require_unlabeled(g);
    graph out = g;
    const std::size_t n = g.n_nodes(), d = g.n_attrs();
    auto rng_pick = make_rng(cfg.seed, streams::inject_pick);
    const auto sel = detail::pick_outliers(n, cfg.outlier_ratio, rng_pick);

    const tensor snapshot = g.features;
    auto rng_pool = make_rng(cfg.seed, streams::inject_pool);
    std::uniform_int_distribution<std::size_t> cand(0, n - 1);
    for (std::size_t i : sel) {
        std::size_t best = 0;
        double best_d2 = -1.0;
        for (std::size_t t = 0; t < cfg.contextual_pool_k; ++t) {
            const std::size_t c = cand(rng_pool);
            double d2 = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = snapshot.at(c, k) - snapshot.at(i, k);
                d2 += diff * diff;
            }
            if (d2 > best_d2) {
                best_d2 = d2;
                best = c;
            }
        }
        for (std::size_t k = 0; k < d; ++k) out.features.at(i, k) = snapshot.at(best, k);
        if (g.sensitive_col)
            out.features.at(i, *g.sensitive_col) = static_cast<double>(g.sensitive[i]);
    }
    out.labels = detail::outlier_labels(n, sel);
    return out;
}

} // namespace decaf
