#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "decaf/errors.hpp"
#include "decaf/graph.hpp"
#include "decaf/optim.hpp"
#include "decaf/rng.hpp"
#include "decaf/tape.hpp"
#include "decaf/tensor.hpp"

namespace decaf {

struct model_config {
    std::size_t input_dim = 0; // D, taken from the data
    std::size_t hidden_dim = 64;
    std::size_t latent_dim = 16; // d, split into content and environment parts
    double split_ratio = 0.5;    // d_c = round(ratio * d)
    double alpha_rec = 0.5;      // attribute vs structure weight in loss and score
    std::size_t disc_hidden = 16;
    // alternative decoder reading: both decoders emit full-width rows that are
    // summed, instead of partitioning the columns between them
    bool full_dim_decoders = false;
    // whether the sensitive column participates in the attribute part of the
    // anomaly score
    bool score_include_sensitive = true;

    std::size_t d_c() const {
        return static_cast<std::size_t>(
            std::llround(split_ratio * static_cast<double>(latent_dim)));
    }
    std::size_t d_e() const { return latent_dim - d_c(); }
};

inline void validate_model_config(const model_config& cfg) {
    if (cfg.input_dim < 2)
        throw config_error("model: input_dim must be at least 2 (features plus sensitive)");
    if (cfg.hidden_dim < 1) throw config_error("model: hidden_dim must be positive");
    if (cfg.latent_dim < 2) throw config_error("model: latent_dim must be at least 2");
    if (!(cfg.split_ratio > 0.0) || !(cfg.split_ratio < 1.0))
        throw config_error("model: split_ratio must be in (0, 1)");
    if (cfg.d_c() < 1 || cfg.d_e() < 1)
        throw config_error("model: split_ratio leaves an empty latent part");
    if (cfg.alpha_rec < 0.0 || cfg.alpha_rec > 1.0)
        throw config_error("model: alpha_rec must be in [0, 1]");
    if (cfg.disc_hidden < 1) throw config_error("model: disc_hidden must be positive");
}

struct latent_split {
    tensor z_c; // n x d_c
    tensor z_e; // n x d_e
};

/// All trainable parameters plus their Adam slots. The tensor order below is
/// the checkpoint order; init_model draws weights in the same order.
struct model_state {
    tensor enc_w1, enc_w2;
    tensor dec_c_w1, dec_c_b1, dec_c_w2, dec_c_b2;
    tensor dec_e_w1, dec_e_b1, dec_e_w2, dec_e_b2;
    tensor disc_w1, disc_b1, disc_w2, disc_b2;
    std::array<adam_state, 14> opt;
};

inline constexpr std::size_t n_model_params = 14;

inline std::array<tensor*, n_model_params> param_ptrs(model_state& st) {
    return {&st.enc_w1,   &st.enc_w2,   &st.dec_c_w1, &st.dec_c_b1, &st.dec_c_w2,
            &st.dec_c_b2, &st.dec_e_w1, &st.dec_e_b1, &st.dec_e_w2, &st.dec_e_b2,
            &st.disc_w1,  &st.disc_b1,  &st.disc_w2,  &st.disc_b2};
}

inline std::array<const tensor*, n_model_params> param_ptrs(const model_state& st) {
    return {&st.enc_w1,   &st.enc_w2,   &st.dec_c_w1, &st.dec_c_b1, &st.dec_c_w2,
            &st.dec_c_b2, &st.dec_e_w1, &st.dec_e_b1, &st.dec_e_w2, &st.dec_e_b2,
            &st.disc_w1,  &st.disc_b1,  &st.disc_w2,  &st.disc_b2};
}

inline const std::array<const char*, n_model_params>& param_names() {
    static const std::array<const char*, n_model_params> names = {
        "enc_w1",   "enc_w2",   "dec_c_w1", "dec_c_b1", "dec_c_w2", "dec_c_b2", "dec_e_w1",
        "dec_e_b1", "dec_e_w2", "dec_e_b2", "disc_w1",  "disc_b1",  "disc_w2",  "disc_b2"};
    return names;
}

// parameter-group boundaries in checkpoint order: encoder, content decoder,
// environment decoder, discriminator
inline bool is_encoder_param(std::size_t i) { return i < 2; }
inline bool is_content_dec_param(std::size_t i) { return i >= 2 && i < 6; }
inline bool is_env_dec_param(std::size_t i) { return i >= 6 && i < 10; }
inline bool is_disc_param(std::size_t i) { return i >= 10; }
/// generator group = everything the reconstruction objective trains
inline bool is_generator_param(std::size_t i) { return i < 10; }

namespace detail {

inline tensor glorot(std::size_t rows, std::size_t cols, rng_engine& rng) {
    const double a =
        std::sqrt(6.0 / (static_cast<double>(rows) + static_cast<double>(cols)));
    std::uniform_real_distribution<double> u(-a, a);
    tensor t({rows, cols});
    for (auto& v : t.values) v = u(rng);
    return t;
}

} // namespace detail

inline model_state init_model(const model_config& cfg, std::uint64_t seed) {
    validate_model_config(cfg);
    const std::size_t dd = cfg.input_dim, h = cfg.hidden_dim, d = cfg.latent_dim;
    const std::size_t dc = cfg.d_c(), de = cfg.d_e(), w = cfg.disc_hidden;
    const std::size_t out_c = cfg.full_dim_decoders ? dd : dd - 1;
    const std::size_t out_e = cfg.full_dim_decoders ? dd : 1;

    auto rng = make_rng(seed, streams::model_init);
    model_state st;
    st.enc_w1 = detail::glorot(dd, h, rng);
    st.enc_w2 = detail::glorot(h, d, rng);
    st.dec_c_w1 = detail::glorot(dc, h, rng);
    st.dec_c_b1 = tensor({h});
    st.dec_c_w2 = detail::glorot(h, out_c, rng);
    st.dec_c_b2 = tensor({out_c});
    st.dec_e_w1 = detail::glorot(de, h, rng);
    st.dec_e_b1 = tensor({h});
    st.dec_e_w2 = detail::glorot(h, out_e, rng);
    st.dec_e_b2 = tensor({out_e});
    st.disc_w1 = detail::glorot(dc, w, rng);
    st.disc_b1 = tensor({w});
    st.disc_w2 = detail::glorot(w, 1, rng);
    st.disc_b2 = tensor({1});
    return st;
}

// ----- tape-level forward pieces (shared by training and evaluation) --------

struct encoder_nodes {
    node_id z, z_c, z_e;
};

/// H1 = relu((A_hat X) W1); Z = A_hat (H1 W2); split into content columns
/// [0, d_c) and environment columns [d_c, d). a_hat_x is the precomputed
/// product A_hat * X so repeated forwards touch the n x n matrix only once
/// more (for the second propagation).
inline encoder_nodes encode_on_tape(tape& tp, node_id a_hat, node_id a_hat_x, node_id w1,
                                    node_id w2, const model_config& cfg) {
    if (tp.node(a_hat_x).shape[1] != cfg.input_dim)
        throw shape_error("encode: feature width " +
                          std::to_string(tp.node(a_hat_x).shape[1]) + " != input_dim " +
                          std::to_string(cfg.input_dim));
    const node_id h1 = tp.relu(tp.matmul(a_hat_x, w1));
    const node_id z = tp.matmul(a_hat, tp.matmul(h1, w2));
    const std::size_t dc = cfg.d_c();
    return {z, tp.col_slice(z, 0, dc), tp.col_slice(z, dc, cfg.latent_dim)};
}

/// relu-hidden affine head; the environment head applies a sigmoid on top.
inline node_id mlp_head_on_tape(tape& tp, node_id in, node_id w1, node_id b1, node_id w2,
                                node_id b2, bool sigmoid_out) {
    const node_id h = tp.relu(tp.add_row_bias(tp.matmul(in, w1), b1));
    const node_id o = tp.add_row_bias(tp.matmul(h, w2), b2);
    return sigmoid_out ? tp.sigmoid(o) : o;
}

inline node_id structure_on_tape(tape& tp, node_id z) {
    return tp.sigmoid(tp.matmul_nt(z, z));
}

// ----- plain (evaluation) API -----------------------------------------------

namespace detail {

struct const_params {
    std::array<node_id, n_model_params> id;
};

inline const_params load_constants(tape& tp, const model_state& st) {
    const_params p{};
    const auto ptrs = param_ptrs(st);
    for (std::size_t i = 0; i < n_model_params; ++i) p.id[i] = tp.constant(*ptrs[i]);
    return p;
}

} // namespace detail

inline latent_split encode(const graph& g, const model_state& st, const model_config& cfg) {
    tape tp;
    const node_id a_hat = tp.constant(normalize_adjacency(g.adjacency));
    const node_id x = tp.constant(g.features);
    const node_id ax = tp.matmul(a_hat, x);
    const auto p = detail::load_constants(tp, st);
    const auto enc = encode_on_tape(tp, a_hat, ax, p.id[0], p.id[1], cfg);
    return {tp.node(enc.z_c), tp.node(enc.z_e)};
}

/// Returns (content reconstruction, environment reconstruction). Under the
/// default column partition these are n x (D-1) and n x 1; with
/// full_dim_decoders both are n x D.
inline std::pair<tensor, tensor> decode(const latent_split& split, const model_state& st,
                                        const model_config& cfg) {
    tape tp;
    const node_id zc = tp.constant(split.z_c);
    const node_id ze = tp.constant(split.z_e);
    const auto p = detail::load_constants(tp, st);
    const node_id xc = mlp_head_on_tape(tp, zc, p.id[2], p.id[3], p.id[4], p.id[5], false);
    const node_id xe = mlp_head_on_tape(tp, ze, p.id[6], p.id[7], p.id[8], p.id[9], true);
    return {tp.node(xc), tp.node(xe)};
}

inline tensor decode_structure(const latent_split& split) {
    const std::size_t n = split.z_c.rows();
    const std::size_t dc = split.z_c.cols(), de = split.z_e.cols();
    tensor z({n, dc + de});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < dc; ++k) z.at(i, k) = split.z_c.at(i, k);
        for (std::size_t k = 0; k < de; ++k) z.at(i, dc + k) = split.z_e.at(i, k);
    }
    tape tp;
    return tp.node(structure_on_tape(tp, tp.constant(std::move(z))));
}

/// Discriminator probability that each node's sensitive attribute is 1,
/// computed from the content latent only.
inline std::vector<double> discriminate(const tensor& z_c, const model_state& st) {
    if (z_c.rank() != 2 || z_c.cols() != st.disc_w1.rows())
        throw shape_error("discriminate: latent width " + shape_str(z_c) +
                          " does not match discriminator input " + shape_str(st.disc_w1));
    tape tp;
    const node_id zc = tp.constant(z_c);
    const auto p = detail::load_constants(tp, st);
    const node_id out = mlp_head_on_tape(tp, zc, p.id[10], p.id[11], p.id[12], p.id[13], true);
    return tp.node(out).values;
}

/// Interleaves the two reconstructions back into original column order, or
/// sums them in full-width mode.
inline tensor assemble_reconstruction(const tensor& xc, const tensor& xe,
                                      const model_config& cfg, std::size_t sensitive_col) {
    const std::size_t n = xc.rows();
    if (cfg.full_dim_decoders) {
        if (!xc.same_shape(xe))
            throw shape_error("assemble: full-width parts differ: " + shape_str(xc) +
                              " vs " + shape_str(xe));
        tensor out(xc.shape);
        for (std::size_t i = 0; i < out.size(); ++i)
            out.values[i] = xc.values[i] + xe.values[i];
        return out;
    }
    const std::size_t dd = xc.cols() + 1;
    if (xe.cols() != 1 || xe.rows() != n || sensitive_col >= dd)
        throw shape_error("assemble: bad part shapes " + shape_str(xc) + " / " +
                          shape_str(xe));
    tensor out({n, dd});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < dd; ++k) {
            if (k == sensitive_col)
                out.at(i, k) = xe.at(i, 0);
            else
                out.at(i, k) = xc.at(i, k < sensitive_col ? k : k - 1);
        }
    }
    return out;
}

/// Per-node anomaly score: alpha * row-Euclidean attribute error plus
/// (1 - alpha) * row-Euclidean structure error against the raw adjacency.
inline std::vector<double> anomaly_score(const graph& g, const tensor& x_hat,
                                         const tensor& a_hat, double alpha,
                                         bool include_sensitive = true) {
    const std::size_t n = g.n_nodes(), dd = g.n_attrs();
    if (!x_hat.same_shape(g.features))
        throw shape_error("anomaly_score: reconstruction shape " + shape_str(x_hat) +
                          " vs features " + shape_str(g.features));
    if (a_hat.rank() != 2 || a_hat.rows() != n || a_hat.cols() != n)
        throw shape_error("anomaly_score: structure shape " + shape_str(a_hat));
    if (alpha < 0.0 || alpha > 1.0)
        throw config_error("anomaly_score: alpha must be in [0, 1]");
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        double attr = 0.0;
        for (std::size_t k = 0; k < dd; ++k) {
            if (!include_sensitive && g.sensitive_col && k == *g.sensitive_col) continue;
            const double diff = g.features.at(i, k) - x_hat.at(i, k);
            attr += diff * diff;
        }
        double str = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double diff = g.adjacency.at(i, j) - a_hat.at(i, j);
            str += diff * diff;
        }
        s[i] = alpha * std::sqrt(attr) + (1.0 - alpha) * std::sqrt(str);
    }
    return s;
}

// ----- checkpoint I/O --------------------------------------------------------

inline nlohmann::json model_config_to_json(const model_config& cfg) {
    return {{"input_dim", cfg.input_dim},
            {"hidden_dim", cfg.hidden_dim},
            {"latent_dim", cfg.latent_dim},
            {"split_ratio", cfg.split_ratio},
            {"alpha_rec", cfg.alpha_rec},
            {"disc_hidden", cfg.disc_hidden},
            {"full_dim_decoders", cfg.full_dim_decoders},
            {"score_include_sensitive", cfg.score_include_sensitive}};
}

inline model_config model_config_from_json(const nlohmann::json& j) {
    model_config cfg;
    try {
        cfg.input_dim = j.at("input_dim").get<std::size_t>();
        cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
        cfg.latent_dim = j.at("latent_dim").get<std::size_t>();
        cfg.split_ratio = j.at("split_ratio").get<double>();
        cfg.alpha_rec = j.at("alpha_rec").get<double>();
        cfg.disc_hidden = j.at("disc_hidden").get<std::size_t>();
        cfg.full_dim_decoders = j.at("full_dim_decoders").get<bool>();
        cfg.score_include_sensitive = j.at("score_include_sensitive").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("model config json: ") + e.what());
    }
    return cfg;
}

/// Checkpoint layout: one JSON header line, then every parameter tensor's
/// entries as little-endian 64-bit floats, in declaration order (enc_w1,
/// enc_w2, dec_c_w1, dec_c_b1, dec_c_w2, dec_c_b2, dec_e_w1, dec_e_b1,
/// dec_e_w2, dec_e_b2, disc_w1, disc_b1, disc_w2, disc_b2).
inline void save_checkpoint(const std::string& path, const model_config& cfg,
                            const model_state& st, std::uint64_t seed, std::size_t epoch) {
    std::size_t total = 0;
    for (const tensor* t : param_ptrs(st)) total += t->size();
    nlohmann::json header = {{"format", "decaf-checkpoint-v1"},
                             {"config", model_config_to_json(cfg)},
                             {"seed", seed},
                             {"epoch", epoch},
                             {"doubles", total}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open checkpoint for writing: " + path);
    out << header.dump() << '\n';
    std::vector<unsigned char> buf;
    buf.reserve(total * 8);
    for (const tensor* t : param_ptrs(st)) {
        for (double v : t->values) {
            const auto bits = std::bit_cast<std::uint64_t>(v);
            for (int b = 0; b < 8; ++b)
                buf.push_back(static_cast<unsigned char>((bits >> (8 * b)) & 0xff));
        }
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!out) throw io_error("short write on checkpoint: " + path);
}

struct checkpoint {
    model_config config;
    model_state state;
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
};

inline checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line)) throw format_error("checkpoint missing header: " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw format_error("checkpoint header is not JSON: " + std::string(e.what()));
    }
    checkpoint ck;
    try {
        if (header.at("format").get<std::string>() != "decaf-checkpoint-v1")
            throw format_error("unrecognized checkpoint format tag");
        ck.config = model_config_from_json(header.at("config"));
        ck.seed = header.at("seed").get<std::uint64_t>();
        ck.epoch = header.at("epoch").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("checkpoint header: ") + e.what());
    }
    // shapes are derived from the config; init then overwrite
    ck.state = init_model(ck.config, 0);
    std::size_t total = 0;
    for (tensor* t : param_ptrs(ck.state)) total += t->size();
    if (header.contains("doubles") && header.at("doubles").get<std::size_t>() != total)
        throw format_error("checkpoint double count mismatch: header says " +
                           header.at("doubles").dump() + ", config implies " +
                           std::to_string(total));
    std::vector<unsigned char> buf(total * 8);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size())
        throw format_error("checkpoint blob truncated: " + path);
    char extra;
    if (in.read(&extra, 1))
        throw format_error("checkpoint has trailing bytes: " + path);
    std::size_t off = 0;
    for (tensor* t : param_ptrs(ck.state)) {
        for (double& v : t->values) {
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b)
                bits |= static_cast<std::uint64_t>(buf[off + static_cast<std::size_t>(b)])
                        << (8 * b);
            v = std::bit_cast<double>(bits);
            off += 8;
        }
    }
    return ck;
}

} // namespace decaf
