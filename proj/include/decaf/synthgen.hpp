#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include <json.hpp>

#include "decaf/errors.hpp"
#include "decaf/graph.hpp"
#include "decaf/rng.hpp"
#include "decaf/tensor.hpp"

namespace decaf {

struct synth_config {
    std::size_t n_nodes = 2000;
    std::size_t latent_dim = 50;
    std::size_t observed_dim = 25;
    double p_sensitive = 0.4;
    double homophily = 0.01;
    double target_mean_degree = 5.09;
    double v_scale = 0.5;
    // when unset, v and w are drawn per seed: v a random unit vector scaled
    // by v_scale, w a random unit vector
    std::optional<std::vector<double>> v_override;
    std::optional<std::vector<double>> w_override;
    bool freeze_cf_edges = false;
    std::uint64_t seed = 0;
};

/// Factual graph plus the two whole-population interventions do(S=0) and
/// do(S=1), built from the same latent draws and the same per-pair edge coins
/// so the three graphs differ only through S-dependent terms.
struct synth_bundle {
    graph factual;
    graph cf_all0;
    graph cf_all1;
    tensor latent;                 // n x latent_dim
    std::vector<std::size_t> mask; // kept latent dims, sorted ascending
    std::vector<double> v;
    std::vector<double> w;
    double q = 0.0; // density calibration factor

    // per-pair inclusion probabilities accumulated by group parity; these
    // expose the homophily shift directly, without edge-sampling noise
    double sum_p_within = 0.0;
    double sum_p_cross = 0.0;
    std::size_t pairs_within = 0;
    std::size_t pairs_cross = 0;
};

inline void validate_synth_config(const synth_config& cfg) {
    if (cfg.n_nodes < 2) throw config_error("synth: n_nodes must be at least 2");
    if (cfg.latent_dim == 0) throw config_error("synth: latent_dim must be positive");
    if (cfg.observed_dim > cfg.latent_dim)
        throw config_error("synth: observed_dim must not exceed latent_dim");
    if (!(cfg.p_sensitive > 0.0) || !(cfg.p_sensitive < 1.0))
        throw config_error("synth: p_sensitive must be in (0, 1)");
    if (!(cfg.target_mean_degree > 0.0))
        throw config_error("synth: target_mean_degree must be positive");
    if (cfg.v_override && cfg.v_override->size() != cfg.latent_dim)
        throw config_error("synth: v_override must have latent_dim entries");
    if (cfg.w_override && cfg.w_override->size() != cfg.latent_dim)
        throw config_error("synth: w_override must have latent_dim entries");
}

/// Uniform random subset of observed_dim indices out of latent_dim, sorted.
inline std::vector<std::size_t> sample_mask(std::size_t latent_dim,
                                            std::size_t observed_dim, rng_engine& rng) {
    if (observed_dim > latent_dim)
        throw config_error("sample_mask: observed_dim must not exceed latent_dim");
    std::vector<std::size_t> pool(latent_dim);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < observed_dim; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, latent_dim - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(observed_dim);
    std::sort(pool.begin(), pool.end());
    return pool;
}

namespace detail {

inline std::vector<double> random_unit_vector(std::size_t d, rng_engine& rng, double scale) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> v(d);
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (auto& x : v) {
            x = nd(rng);
            norm2 += x * x;
        }
    } while (norm2 < 1e-24);
    const double s = scale / std::sqrt(norm2);
    for (auto& x : v) x *= s;
    return v;
}

inline double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// features: kept latent dims pass through, dropped dims are zero, the group
// shift s*v is added everywhere, and s itself is appended as the last column
inline tensor build_features(const tensor& z, const std::vector<std::size_t>& mask,
                             const std::vector<double>& v, const std::vector<int>& s) {
    const std::size_t n = z.rows(), d = z.cols();
    std::vector<char> keep(d, 0);
    for (std::size_t k : mask) keep[k] = 1;
    tensor x({n, d + 1});
    for (std::size_t i = 0; i < n; ++i) {
        const double si = static_cast<double>(s[i]);
        for (std::size_t k = 0; k < d; ++k)
            x.at(i, k) = (keep[k] ? z.at(i, k) : 0.0) + si * v[k];
        x.at(i, d) = si;
    }
    return x;
}

} // namespace detail

inline synth_bundle generate(const synth_config& cfg) {
    validate_synth_config(cfg);
    const std::size_t n = cfg.n_nodes, d = cfg.latent_dim;

    auto rng_s = make_rng(cfg.seed, streams::synth_sensitive);
    std::bernoulli_distribution coin(cfg.p_sensitive);
    std::vector<int> s(n);
    for (auto& v : s) v = coin(rng_s) ? 1 : 0;

    auto rng_z = make_rng(cfg.seed, streams::synth_latent);
    std::normal_distribution<double> gauss(0.0, 1.0);
    tensor z({n, d});
    for (auto& v : z.values) v = gauss(rng_z);

    auto rng_m = make_rng(cfg.seed, streams::synth_mask);
    synth_bundle b;
    b.mask = sample_mask(d, cfg.observed_dim, rng_m);

    if (cfg.v_override) {
        b.v = *cfg.v_override;
    } else {
        auto rng_v = make_rng(cfg.seed, streams::synth_direction);
        b.v = detail::random_unit_vector(d, rng_v, cfg.v_scale);
    }
    if (cfg.w_override) {
        b.w = *cfg.w_override;
    } else {
        auto rng_w = make_rng(cfg.seed, streams::synth_labels);
        b.w = detail::random_unit_vector(d, rng_w, 1.0);
    }

    // pairwise cosine of raw latent rows, upper triangle in (i, j>i) order
    std::vector<double> inv_norm(n);
    for (std::size_t i = 0; i < n; ++i) {
        double nn = 0.0;
        for (std::size_t k = 0; k < d; ++k) nn += z.at(i, k) * z.at(i, k);
        inv_norm[i] = nn > 0.0 ? 1.0 / std::sqrt(nn) : 0.0;
    }
    const std::size_t n_pairs = n * (n - 1) / 2;
    std::vector<double> cosures(n_pairs);
    double sum_sig = 0.0;
    {
        std::size_t p = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j, ++p) {
                double dot = 0.0;
                const double* zi = &z.values[i * d];
                const double* zj = &z.values[j * d];
                for (std::size_t k = 0; k < d; ++k) dot += zi[k] * zj[k];
                const double c = dot * inv_norm[i] * inv_norm[j];
                cosures[p] = c;
                sum_sig += detail::sigmoid_scalar(
                    c + cfg.homophily * ((s[i] == s[j]) ? 1.0 : 0.0));
            }
        }
    }
    // calibrate so the expected edge total is target_mean_degree * n / 2
    b.q = cfg.target_mean_degree * static_cast<double>(n) / (2.0 * sum_sig);
    if (b.q > 1.0)
        throw config_error("synth: target_mean_degree unreachable, calibration factor " +
                           std::to_string(b.q) + " exceeds 1");

    tensor adj_f({n, n}), adj_c0({n, n}), adj_c1({n, n});
    // one uniform coin per pair, consumed in the same (i, j>i) sweep for all
    // three graphs, so counterfactual edges differ from factual ones only
    // where the group-match indicator changes the inclusion probability
    auto rng_e = make_rng(cfg.seed, streams::synth_edges);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    {
        std::size_t p = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j, ++p) {
                const double u = unif(rng_e);
                const bool same = (s[i] == s[j]);
                const double p_f =
                    b.q * detail::sigmoid_scalar(cosures[p] + (same ? cfg.homophily : 0.0));
                if (same) {
                    b.sum_p_within += p_f;
                    ++b.pairs_within;
                } else {
                    b.sum_p_cross += p_f;
                    ++b.pairs_cross;
                }
                if (u < p_f) {
                    adj_f.at(i, j) = adj_f.at(j, i) = 1.0;
                }
                if (!cfg.freeze_cf_edges) {
                    // under do(S=c) every pair is same-group
                    const double p_cf =
                        b.q * detail::sigmoid_scalar(cosures[p] + cfg.homophily);
                    if (u < p_cf) {
                        adj_c0.at(i, j) = adj_c0.at(j, i) = 1.0;
                        adj_c1.at(i, j) = adj_c1.at(j, i) = 1.0;
                    }
                }
            }
        }
    }
    if (cfg.freeze_cf_edges) {
        adj_c0 = adj_f;
        adj_c1 = adj_f;
    }

    // labels: median split of w'z plus a neighbor-group term, computed on the
    // factual graph; isolated nodes get no neighbor contribution
    std::vector<double> score(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += b.w[k] * z.at(i, k);
        double nei_s = 0.0, deg = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (adj_f.at(i, j) != 0.0) {
                deg += 1.0;
                nei_s += static_cast<double>(s[j]);
            }
        }
        score[i] = dot + (deg > 0.0 ? nei_s / (2.0 * deg) : 0.0);
    }
    std::vector<double> sorted = score;
    std::sort(sorted.begin(), sorted.end());
    const double median = (n % 2 == 1)
                              ? sorted[n / 2]
                              : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = score[i] > median ? 1 : 0;

    b.latent = z;
    b.factual.features = detail::build_features(z, b.mask, b.v, s);
    b.factual.adjacency = std::move(adj_f);
    b.factual.sensitive = s;
    b.factual.labels = y;
    b.factual.sensitive_col = d;

    const std::vector<int> all0(n, 0), all1(n, 1);
    b.cf_all0.features = detail::build_features(z, b.mask, b.v, all0);
    b.cf_all0.adjacency = std::move(adj_c0);
    b.cf_all0.sensitive = all0;
    b.cf_all0.labels = y;
    b.cf_all0.sensitive_col = d;

    b.cf_all1.features = detail::build_features(z, b.mask, b.v, all1);
    b.cf_all1.adjacency = std::move(adj_c1);
    b.cf_all1.sensitive = all1;
    b.cf_all1.labels = y;
    b.cf_all1.sensitive_col = d;

    return b;
}

inline nlohmann::json bundle_meta_json(const synth_bundle& b, const synth_config& cfg) {
    nlohmann::json j;
    j["n_nodes"] = cfg.n_nodes;
    j["latent_dim"] = cfg.latent_dim;
    j["observed_dim"] = cfg.observed_dim;
    j["p_sensitive"] = cfg.p_sensitive;
    j["homophily"] = cfg.homophily;
    j["target_mean_degree"] = cfg.target_mean_degree;
    j["freeze_cf_edges"] = cfg.freeze_cf_edges;
    j["seed"] = cfg.seed;
    j["q"] = b.q;
    j["mask"] = b.mask;
    j["v"] = b.v;
    j["w"] = b.w;
    return j;
}

} // namespace decaf
