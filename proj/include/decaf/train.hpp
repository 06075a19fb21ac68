#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "decaf/errors.hpp"
#include "decaf/graph.hpp"
#include "decaf/model.hpp"
#include "decaf/optim.hpp"
#include "decaf/tape.hpp"
#include "decaf/tensor.hpp"
#include "decaf/textio.hpp"

namespace decaf {

struct train_config {
    double lambda1 = 1.0; // reconstruction
    double lambda2 = 0.5; // disentanglement
    double lambda3 = 0.5; // adversarial
    double lambda4 = 0.5; // counterfactual
    double lr_gen = 1e-2;
    double lr_disc = 1e-2;
    std::size_t epochs = 100;
    std::size_t disc_steps = 1; // discriminator updates per generator update
    double contamination = 0.05;
    std::uint64_t seed = 0;
};

inline void validate_train_config(const train_config& cfg) {
    if (cfg.lambda1 < 0.0 || cfg.lambda2 < 0.0 || cfg.lambda3 < 0.0 || cfg.lambda4 < 0.0)
        throw config_error("train: loss weights must be nonnegative");
    if (cfg.epochs < 1) throw config_error("train: epochs must be at least 1");
    if (cfg.lr_gen < 0.0 || cfg.lr_disc < 0.0)
        throw config_error("train: learning rates must be nonnegative");
    if (cfg.disc_steps < 1) throw config_error("train: disc_steps must be at least 1");
    if (!(cfg.contamination > 0.0) || cfg.contamination > 1.0)
        throw config_error("train: contamination must be in (0, 1]");
}

struct loss_record {
    double l_rec = 0.0;
    double l_dis = 0.0;
    double l_adv = 0.0;
    double l_cf = 0.0;
    double l_total = 0.0;
};

struct train_trace {
    std::vector<loss_record> epochs;
};

namespace detail {

inline constexpr node_id no_node = static_cast<node_id>(-1);

/// Precomputed per-fit constants. The normalized adjacency and its feature
/// products are computed once; every epoch re-reads them as tape constants.
struct train_ctx {
    const graph* g = nullptr;
    tensor a_hat;     // normalized adjacency
    tensor ax;        // a_hat * X
    tensor ax_cf;     // a_hat * X with the sensitive column flipped
    tensor s_target;  // n x 1 sensitive values
    tensor xc_target; // non-sensitive feature columns (partition mode)
    model_config mcfg;
    train_config tcfg;
};

inline train_ctx make_ctx(const graph& g, const graph& g_cf, model_config mcfg,
                          train_config tcfg) {
    if (mcfg.input_dim == 0) mcfg.input_dim = g.n_attrs();
    validate_model_config(mcfg);
    validate_train_config(tcfg);
    if (mcfg.input_dim != g.n_attrs())
        throw shape_error("train: input_dim " + std::to_string(mcfg.input_dim) +
                          " does not match feature width " + std::to_string(g.n_attrs()));
    if (!g.sensitive_col)
        throw config_error("train: graph must carry sensitive_col (the environment "
                           "decoder targets that column)");
    if (tcfg.lambda2 > 0.0 && mcfg.d_c() != mcfg.d_e())
        throw config_error("train: the disentanglement loss compares content and "
                           "environment rows, so lambda2 > 0 requires d_c == d_e "
                           "(got " + std::to_string(mcfg.d_c()) + " vs " +
                           std::to_string(mcfg.d_e()) + ")");
    if (g_cf.n_nodes() != g.n_nodes() || g_cf.n_attrs() != g.n_attrs())
        throw shape_error("train: counterfactual graph shape differs from factual");

    train_ctx ctx;
    ctx.g = &g;
    ctx.mcfg = mcfg;
    ctx.tcfg = tcfg;
    ctx.a_hat = normalize_adjacency(g.adjacency);
    {
        tape tp;
        const node_id ah = tp.constant(ctx.a_hat);
        ctx.ax = tp.node(tp.matmul(ah, tp.constant(g.features)));
        ctx.ax_cf = tp.node(tp.matmul(ah, tp.constant(g_cf.features)));
    }
    const std::size_t n = g.n_nodes(), dd = g.n_attrs(), sc = *g.sensitive_col;
    ctx.s_target = tensor({n, 1});
    for (std::size_t i = 0; i < n; ++i)
        ctx.s_target.at(i, 0) = static_cast<double>(g.sensitive[i]);
    if (!mcfg.full_dim_decoders) {
        ctx.xc_target = tensor({n, dd - 1});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < dd; ++k) {
                if (k == sc) continue;
                ctx.xc_target.at(i, k < sc ? k : k - 1) = g.features.at(i, k);
            }
    }
    return ctx;
}

struct gen_nodes {
    node_id l_rec = no_node;
    node_id l_dis = no_node;
    node_id l_adv = no_node;
    node_id l_cf = no_node;
};

/// Builds the generator-phase forward graph. params holds tape ids for all 14
/// parameter tensors (leaves or constants per the caller's policy); the want_*
/// switches skip terms whose weight is zero so a disabled term costs nothing.
inline gen_nodes build_gen_graph(tape& tp, const train_ctx& ctx,
                                 const std::array<node_id, n_model_params>& params,
                                 bool want_rec, bool want_dis, bool want_adv,
                                 bool want_cf) {
    const model_config& m = ctx.mcfg;
    const std::size_t n = ctx.g->n_nodes(), dd = ctx.g->n_attrs();
    gen_nodes out;

    const node_id a_hat = tp.constant(ctx.a_hat);
    const node_id ax = tp.constant(ctx.ax);
    const auto enc = encode_on_tape(tp, a_hat, ax, params[0], params[1], m);

    if (want_rec) {
        const node_id xc = mlp_head_on_tape(tp, enc.z_c, params[2], params[3], params[4],
                                            params[5], false);
        const node_id xe = mlp_head_on_tape(tp, enc.z_e, params[6], params[7], params[8],
                                            params[9], true);
        node_id attr_ss;
        if (m.full_dim_decoders) {
            const node_id x_hat = tp.add(xc, xe);
            attr_ss = tp.sum_sq(tp.sub(tp.constant(ctx.g->features), x_hat));
        } else {
            const node_id ss_c = tp.sum_sq(tp.sub(tp.constant(ctx.xc_target), xc));
            const node_id ss_e = tp.sum_sq(tp.sub(tp.constant(ctx.s_target), xe));
            attr_ss = tp.add(ss_c, ss_e);
        }
        const node_id a_rec = structure_on_tape(tp, enc.z);
        const node_id str_ss = tp.sum_sq(tp.sub(tp.constant(ctx.g->adjacency), a_rec));
        const double attr_w = m.alpha_rec / (static_cast<double>(n) * static_cast<double>(dd));
        const double str_w = (1.0 - m.alpha_rec) / (static_cast<double>(n) * static_cast<double>(n));
        out.l_rec = tp.add(tp.scale(attr_ss, attr_w), tp.scale(str_ss, str_w));
    }
    if (want_dis) {
        out.l_dis = tp.mean(tp.abs(tp.row_cosine(enc.z_c, enc.z_e)));
    }
    if (want_adv) {
        const node_id p = mlp_head_on_tape(tp, enc.z_c, params[10], params[11], params[12],
                                           params[13], true);
        out.l_adv = tp.bce(p, tp.constant(ctx.s_target));
    }
    if (want_cf) {
        const node_id ax_cf = tp.constant(ctx.ax_cf);
        const auto enc_cf = encode_on_tape(tp, a_hat, ax_cf, params[0], params[1], m);
        const node_id xe_f = mlp_head_on_tape(tp, enc.z_e, params[6], params[7], params[8],
                                              params[9], true);
        const node_id xe_c = mlp_head_on_tape(tp, enc_cf.z_e, params[6], params[7],
                                              params[8], params[9], true);
        out.l_cf = tp.scale(tp.sum_sq(tp.sub(xe_f, xe_c)), 1.0 / static_cast<double>(n));
    }
    return out;
}

inline void check_finite_loss(double v, const char* name, std::size_t epoch) {
    if (!std::isfinite(v))
        throw training_error("epoch " + std::to_string(epoch) + ": " + name +
                             " is not finite");
}

/// One discriminator update on a fixed content latent; returns the bce value
/// before the update.
inline double disc_substep(model_state& st, const tensor& z_c, const tensor& s_target,
                           double lr, std::size_t epoch) {
    tape tp;
    const node_id zc = tp.constant(z_c);
    std::array<node_id, n_model_params> ids{};
    const auto ptrs = param_ptrs(st);
    for (std::size_t i = 0; i < n_model_params; ++i) {
        tensor t = *ptrs[i];
        t.requires_grad = is_disc_param(i);
        ids[i] = tp.leaf(std::move(t));
    }
    const node_id p = mlp_head_on_tape(tp, zc, ids[10], ids[11], ids[12], ids[13], true);
    const node_id loss = tp.bce(p, tp.constant(s_target));
    const double value = tp.node(loss).item();
    check_finite_loss(value, "discriminator bce", epoch);
    tp.backward(loss);
    const adam_config acfg{lr, 0.9, 0.999, 1e-8};
    for (std::size_t i = 0; i < n_model_params; ++i) {
        if (!is_disc_param(i)) continue;
        adam_step(*ptrs[i], tp.node(ids[i]).grad_buf(), st.opt[i], acfg);
    }
    return value;
}

/// Content latent under the current encoder, values only (no gradient).
inline tensor content_latent(const train_ctx& ctx, const model_state& st) {
    tape tp;
    const node_id a_hat = tp.constant(ctx.a_hat);
    const node_id ax = tp.constant(ctx.ax);
    const auto enc = encode_on_tape(tp, a_hat, ax, tp.constant(st.enc_w1),
                                    tp.constant(st.enc_w2), ctx.mcfg);
    return tp.node(enc.z_c);
}

inline loss_record ctx_step(const train_ctx& ctx, model_state& st, std::size_t epoch) {
    const train_config& t = ctx.tcfg;
    loss_record rec;

    // discriminator phase: encoder frozen, so the latent is computed once and
    // shared across the sub-steps
    if (t.lambda3 > 0.0) {
        const tensor z_c = content_latent(ctx, st);
        for (std::size_t k = 0; k < t.disc_steps; ++k)
            disc_substep(st, z_c, ctx.s_target, t.lr_disc, epoch);
    }

    // generator phase: discriminator frozen (its parameters enter the tape as
    // constants, so no gradient can reach them)
    const bool want_rec = t.lambda1 > 0.0;
    const bool want_dis = t.lambda2 > 0.0;
    const bool want_adv = t.lambda3 > 0.0;
    const bool want_cf = t.lambda4 > 0.0;
    if (want_rec || want_dis || want_adv || want_cf) {
        tape tp;
        std::array<node_id, n_model_params> ids{};
        const auto ptrs = param_ptrs(st);
        for (std::size_t i = 0; i < n_model_params; ++i) {
            if (is_generator_param(i)) {
                tensor t2 = *ptrs[i];
                t2.requires_grad = true;
                ids[i] = tp.leaf(std::move(t2));
            } else {
                ids[i] = tp.constant(*ptrs[i]);
            }
        }
        const gen_nodes g = build_gen_graph(tp, ctx, ids, want_rec, want_dis, want_adv, want_cf);

        std::optional<node_id> total;
        auto add_term = [&](node_id term, double coef) {
            const node_id scaled = tp.scale(term, coef);
            total = total ? tp.add(*total, scaled) : scaled;
        };
        if (want_rec) {
            rec.l_rec = tp.node(g.l_rec).item();
            check_finite_loss(rec.l_rec, "l_rec", epoch);
            add_term(g.l_rec, t.lambda1);
        }
        if (want_dis) {
            rec.l_dis = tp.node(g.l_dis).item();
            check_finite_loss(rec.l_dis, "l_dis", epoch);
            add_term(g.l_dis, t.lambda2);
        }
        if (want_adv) {
            rec.l_adv = tp.node(g.l_adv).item();
            check_finite_loss(rec.l_adv, "l_adv", epoch);
            // the generator maximizes the discriminator's loss: that is the
            // adversarial game, realized as explicit negation
            add_term(g.l_adv, -t.lambda3);
        }
        if (want_cf) {
            rec.l_cf = tp.node(g.l_cf).item();
            check_finite_loss(rec.l_cf, "l_cf", epoch);
            add_term(g.l_cf, t.lambda4);
        }
        tp.backward(*total);
        const adam_config acfg{t.lr_gen, 0.9, 0.999, 1e-8};
        for (std::size_t i = 0; i < n_model_params; ++i) {
            if (!is_generator_param(i)) continue;
            adam_step(*ptrs[i], tp.node(ids[i]).grad_buf(), st.opt[i], acfg);
        }
    }

    {
        const auto ptrs = param_ptrs(st);
        for (std::size_t i = 0; i < n_model_params; ++i)
            if (!ptrs[i]->all_finite())
                throw training_error("epoch " + std::to_string(epoch) + ": parameter " +
                                     param_names()[i] + " became non-finite");
    }
    // reported objective: all contributions with positive sign, so the trace
    // reads as magnitudes
    rec.l_total = t.lambda1 * rec.l_rec + t.lambda2 * rec.l_dis + t.lambda3 * rec.l_adv +
                  t.lambda4 * rec.l_cf;
    return rec;
}

} // namespace detail

// ----- standalone loss values (evaluation/diagnostics) -----------------------

/// alpha * mean squared attribute error + (1 - alpha) * mean squared
/// structure error, Frobenius over all entries.
inline double l_rec_value(const graph& g, const tensor& x_hat, const tensor& a_rec,
                          double alpha) {
    tape tp;
    const node_id attr = tp.sum_sq(tp.sub(tp.constant(g.features), tp.constant(x_hat)));
    const node_id str = tp.sum_sq(tp.sub(tp.constant(g.adjacency), tp.constant(a_rec)));
    const double n = static_cast<double>(g.n_nodes()), dd = static_cast<double>(g.n_attrs());
    return alpha / (n * dd) * tp.node(attr).item() +
           (1.0 - alpha) / (n * n) * tp.node(str).item();
}

/// Mean absolute per-row cosine between content and environment latents.
inline double l_dis_value(const latent_split& split) {
    if (split.z_c.cols() != split.z_e.cols())
        throw config_error("l_dis requires d_c == d_e, got " +
                           std::to_string(split.z_c.cols()) + " vs " +
                           std::to_string(split.z_e.cols()));
    tape tp;
    const node_id c =
        tp.mean(tp.abs(tp.row_cosine(tp.constant(split.z_c), tp.constant(split.z_e))));
    return tp.node(c).item();
}

/// Mean binary cross-entropy of discriminator outputs against sensitive values.
inline double l_adv_value(const std::vector<double>& p, const std::vector<int>& s) {
    if (p.size() != s.size()) throw shape_error("l_adv: length mismatch");
    tape tp;
    tensor tpred({p.size()}, p);
    tensor ttgt({s.size()});
    for (std::size_t i = 0; i < s.size(); ++i) ttgt.values[i] = static_cast<double>(s[i]);
    return tp.node(tp.bce(tp.constant(std::move(tpred)), tp.constant(std::move(ttgt)))).item();
}

/// Mean per-row squared distance between factual and counterfactual
/// environment reconstructions.
inline double l_cf_value(const tensor& xe, const tensor& xe_cf) {
    if (!xe.same_shape(xe_cf))
        throw shape_error("l_cf: " + shape_str(xe) + " vs " + shape_str(xe_cf));
    tape tp;
    const node_id d = tp.sum_sq(tp.sub(tp.constant(xe), tp.constant(xe_cf)));
    return tp.node(d).item() / static_cast<double>(xe.rows());
}

// ----- steps and fit ----------------------------------------------------------

/// One alternation: disc_steps discriminator updates (when lambda3 > 0), then
/// one generator update. g_cf must be flip_sensitive(g).
inline loss_record train_step(const graph& g, const graph& g_cf, model_state& st,
                              const model_config& mcfg, const train_config& tcfg,
                              std::size_t epoch = 0) {
    const auto ctx = detail::make_ctx(g, g_cf, mcfg, tcfg);
    return detail::ctx_step(ctx, st, epoch);
}

/// Anomaly scores of a trained model on a graph; discriminator parameters are
/// never touched here, so scores are invariant to them.
inline std::vector<double> scores_for_state(const graph& g, const model_state& st,
                                            const model_config& cfg) {
    const latent_split split = encode(g, st, cfg);
    const auto [xc, xe] = decode(split, st, cfg);
    const tensor x_hat = assemble_reconstruction(
        xc, xe, cfg, g.sensitive_col ? *g.sensitive_col : g.n_attrs());
    const tensor a_rec = decode_structure(split);
    return anomaly_score(g, x_hat, a_rec, cfg.alpha_rec, cfg.score_include_sensitive);
}

struct fit_result {
    model_state state;
    train_trace trace;
    std::vector<double> scores;
};

/// Full training run: builds the sensitive-flipped twin, precomputes the
/// propagation products once, alternates discriminator/generator updates for
/// the configured epochs, then scores every node with the final parameters.
inline fit_result fit(const graph& g, model_config mcfg, const train_config& tcfg) {
    if (mcfg.input_dim == 0) mcfg.input_dim = g.n_attrs();
    const graph g_cf = flip_sensitive(g);
    const auto ctx = detail::make_ctx(g, g_cf, mcfg, tcfg);

    fit_result out;
    out.state = init_model(ctx.mcfg, tcfg.seed);
    out.trace.epochs.reserve(tcfg.epochs);
    for (std::size_t e = 0; e < tcfg.epochs; ++e)
        out.trace.epochs.push_back(detail::ctx_step(ctx, out.state, e));
    out.scores = scores_for_state(g, out.state, ctx.mcfg);
    return out;
}

inline void write_trace_csv(const std::string& path, const train_trace& trace) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open trace file for writing: " + path);
    out << "epoch,l_rec,l_dis,l_adv,l_cf,l_total\n";
    for (std::size_t e = 0; e < trace.epochs.size(); ++e) {
        const loss_record& r = trace.epochs[e];
        out << e << ',' << fmt_shortest(r.l_rec) << ',' << fmt_shortest(r.l_dis) << ','
            << fmt_shortest(r.l_adv) << ',' << fmt_shortest(r.l_cf) << ','
            << fmt_shortest(r.l_total) << '\n';
    }
    if (!out) throw io_error("short write on trace file: " + path);
}

} // namespace decaf
