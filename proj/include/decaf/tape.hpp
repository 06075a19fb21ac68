#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "decaf/errors.hpp"
#include "decaf/tensor.hpp"

namespace decaf {

using node_id = std::size_t;

/// Reverse-mode autodiff tape. Nodes are tensors owned by the tape; every op
/// records its input/output ids plus a pull closure that routes the output
/// gradient to the inputs. backward() sweeps the records in reverse topological
/// order (which is reverse recording order) and runs each contributing record
/// exactly once. A tape and its tensors are one single-threaded unit of work;
/// independent tapes may live on different threads.
class tape {
public:
    tape() = default;
    tape(const tape&) = delete;
    tape& operator=(const tape&) = delete;

    node_id leaf(tensor t) {
        nodes_.push_back(std::move(t));
        return nodes_.size() - 1;
    }

    node_id constant(tensor t) {
        t.requires_grad = false;
        return leaf(std::move(t));
    }

    tensor& node(node_id id) { return nodes_[id]; }
    const tensor& node(node_id id) const { return nodes_[id]; }
    std::size_t size() const { return nodes_.size(); }

    // ----- ops ------------------------------------------------------------

    /// C = A * B for rank-2 A (m x k) and B (k x n).
    node_id matmul(node_id a, node_id b) {
        const tensor& ta = nodes_[a];
        const tensor& tb = nodes_[b];
        if (ta.rank() != 2 || tb.rank() != 2 || ta.shape[1] != tb.shape[0])
            throw shape_error("matmul: " + shape_str(ta) + " x " + shape_str(tb));
        const std::size_t m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
        tensor out({m, n}, needs(a, b));
        mm_acc(ta.values.data(), tb.values.data(), out.values.data(), m, k, n);
        node_id c = leaf(std::move(out));
        if (nodes_[c].requires_grad) {
            record({a, b}, c, [this, a, b, c, m, k, n] {
                const double* dc = nodes_[c].grad.data();
                if (nodes_[a].requires_grad) {
                    // dA = dC * B^T
                    double* da = nodes_[a].grad_buf().data();
                    const double* bv = nodes_[b].values.data();
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t t = 0; t < k; ++t) {
                            double s = 0.0;
                            const double* dci = dc + i * n;
                            const double* bt = bv + t * n;
                            for (std::size_t j = 0; j < n; ++j) s += dci[j] * bt[j];
                            da[i * k + t] += s;
                        }
                }
                if (nodes_[b].requires_grad) {
                    // dB = A^T * dC
                    double* db = nodes_[b].grad_buf().data();
                    const double* av = nodes_[a].values.data();
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* dci = dc + i * n;
                        for (std::size_t t = 0; t < k; ++t) {
                            const double ait = av[i * k + t];
                            if (ait == 0.0) continue;
                            double* dbt = db + t * n;
                            for (std::size_t j = 0; j < n; ++j) dbt[j] += ait * dci[j];
                        }
                    }
                }
            });
        }
        return c;
    }

    /// C = A * B^T for rank-2 A (m x k) and B (n x k).
    node_id matmul_nt(node_id a, node_id b) {
        const tensor& ta = nodes_[a];
        const tensor& tb = nodes_[b];
        if (ta.rank() != 2 || tb.rank() != 2 || ta.shape[1] != tb.shape[1])
            throw shape_error("matmul_nt: " + shape_str(ta) + " x " + shape_str(tb) + "^T");
        const std::size_t m = ta.shape[0], k = ta.shape[1], n = tb.shape[0];
        tensor out({m, n}, needs(a, b));
        {
            const double* av = ta.values.data();
            const double* bv = tb.values.data();
            double* cv = out.values.data();
            for (std::size_t i = 0; i < m; ++i) {
                const double* ai = av + i * k;
                for (std::size_t j = 0; j < n; ++j) {
                    const double* bj = bv + j * k;
                    double s = 0.0;
                    for (std::size_t t = 0; t < k; ++t) s += ai[t] * bj[t];
                    cv[i * n + j] = s;
                }
            }
        }
        node_id c = leaf(std::move(out));
        if (nodes_[c].requires_grad) {
            record({a, b}, c, [this, a, b, c, m, k, n] {
                const double* dc = nodes_[c].grad.data();
                if (nodes_[a].requires_grad) {
                    // dA = dC * B
                    double* da = nodes_[a].grad_buf().data();
                    const double* bv = nodes_[b].values.data();
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* dci = dc + i * n;
                        double* dai = da + i * k;
                        for (std::size_t j = 0; j < n; ++j) {
                            const double d = dci[j];
                            if (d == 0.0) continue;
                            const double* bj = bv + j * k;
                            for (std::size_t t = 0; t < k; ++t) dai[t] += d * bj[t];
                        }
                    }
                }
                if (nodes_[b].requires_grad) {
                    // dB = dC^T * A
                    double* db = nodes_[b].grad_buf().data();
                    const double* av = nodes_[a].values.data();
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* dci = dc + i * n;
                        const double* ai = av + i * k;
                        for (std::size_t j = 0; j < n; ++j) {
                            const double d = dci[j];
                            if (d == 0.0) continue;
                            double* dbj = db + j * k;
                            for (std::size_t t = 0; t < k; ++t) dbj[t] += d * ai[t];
                        }
                    }
                }
            });
        }
        return c;
    }

    node_id add(node_id a, node_id b) { return ew2(a, b, "add", +1.0); }
    node_id sub(node_id a, node_id b) { return ew2(a, b, "sub", -1.0); }

    /// out = x * c for a compile-time-constant scalar c.
    node_id scale(node_id x, double c) {
        const tensor& tx = nodes_[x];
        tensor out(tx.shape, needs(x));
        for (std::size_t i = 0; i < tx.size(); ++i) out.values[i] = tx.values[i] * c;
        node_id y = leaf(std::move(out));
        if (nodes_[y].requires_grad) {
            record({x}, y, [this, x, y, c] {
                double* dx = nodes_[x].grad_buf().data();
                const double* dy = nodes_[y].grad.data();
                for (std::size_t i = 0; i < nodes_[y].size(); ++i) dx[i] += c * dy[i];
            });
        }
        return y;
    }

    /// Broadcasts a rank-1 bias of width k over the rows of an n x k matrix.
    node_id add_row_bias(node_id x, node_id bias) {
        const tensor& tx = nodes_[x];
        const tensor& tb = nodes_[bias];
        if (tx.rank() != 2 || tb.rank() != 1 || tb.shape[0] != tx.shape[1])
            throw shape_error("add_row_bias: " + shape_str(tx) + " + " + shape_str(tb));
        const std::size_t n = tx.shape[0], k = tx.shape[1];
        tensor out(tx.shape, needs(x, bias));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j)
                out.values[i * k + j] = tx.values[i * k + j] + tb.values[j];
        node_id y = leaf(std::move(out));
        if (nodes_[y].requires_grad) {
            record({x, bias}, y, [this, x, bias, y, n, k] {
                const double* dy = nodes_[y].grad.data();
                if (nodes_[x].requires_grad) {
                    double* dx = nodes_[x].grad_buf().data();
                    for (std::size_t i = 0; i < n * k; ++i) dx[i] += dy[i];
                }
                if (nodes_[bias].requires_grad) {
                    double* db = nodes_[bias].grad_buf().data();
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < k; ++j) db[j] += dy[i * k + j];
                }
            });
        }
        return y;
    }

    node_id relu(node_id x) {
        const tensor& tx = nodes_[x];
        tensor out(tx.shape, needs(x));
        for (std::size_t i = 0; i < tx.size(); ++i)
            out.values[i] = tx.values[i] > 0.0 ? tx.values[i] : 0.0;
        node_id y = leaf(std::move(out));
        if (nodes_[y].requires_grad) {
            record({x}, y, [this, x, y] {
                double* dx = nodes_[x].grad_buf().data();
                const double* dy = nodes_[y].grad.data();
                const double* xv = nodes_[x].values.data();
                for (std::size_t i = 0; i < nodes_[y].size(); ++i)
                    if (xv[i] > 0.0) dx[i] += dy[i];
            });
        }
        return y;
    }

    /// Numerically stable logistic; outputs are clamped to the open (0,1)
    /// interval so downstream logs and the strict-positivity contract survive
    /// saturated inputs.
    node_id sigmoid(node_id x) {
        const tensor& tx = nodes_[x];
        tensor out(tx.shape, needs(x));
        const double hi = std::nextafter(1.0, 0.0);
        const double lo = std::numeric_limits<double>::min();
        for (std::size_t i = 0; i < tx.size(); ++i) {
            const double v = tx.values[i];
            double s;
            if (v >= 0.0) {
                s = 1.0 / (1.0 + std::exp(-v));
            } else {
                const double e = std::exp(v);
                s = e / (1.0 + e);
            }
            if (s < lo) s = lo;
            if (s > hi) s = hi;
            out.values[i] = s;
        }
        node_id y = leaf(std::move(out));
        if (nodes_[y].requires_grad) {
            record({x}, y, [this, x, y] {
                double* dx = nodes_[x].grad_buf().data();
                const double* dy = nodes_[y].grad.data();
                const double* s = nodes_[y].values.data();
                for (std::size_t i = 0; i < nodes_[y].size(); ++i)
                    dx[i] += dy[i] * s[i] * (1.0 - s[i]);
            });
        }
        return y;
    }

    node_id abs(node_id x) {
        const tensor& tx = nodes_[x];
        tensor out(tx.shape, needs(x));
        for (std::size_t i = 0; i < tx.size(); ++i) out.values[i] = std::fabs(tx.values[i]);
        node_id y = leaf(std::move(out));
        if (nodes_[y].requires_grad) {
            record({x}, y, [this, x, y] {
                double* dx = nodes_[x].grad_buf().data();
                const double* dy = nodes_[y].grad.data();
                const double* xv = nodes_[x].values.data();
                for (std::size_t i = 0; i < nodes_[y].size(); ++i) {
                    if (xv[i] > 0.0) dx[i] += dy[i];
                    else if (xv[i] < 0.0) dx[i] -= dy[i];
                    // subgradient 0 at exactly 0
                }
            });
        }
        return y;
    }

    node_id mean(node_id x) {
        const tensor& tx = nodes_[x];
        if (tx.size() == 0) throw shape_error("mean: empty tensor");
        double s = 0.0;
        for (double v : tx.values) s += v;
        const double inv = 1.0 / static_cast<double>(tx.size());
        node_id y = leaf(tensor({1}, {s * inv}, needs(x)));
        if (nodes_[y].requires_grad) {
            record({x}, y, [this, x, y, inv] {
                double* dx = nodes_[x].grad_buf().data();
                const double g = nodes_[y].grad[0] * inv;
                for (std::size_t i = 0; i < nodes_[x].size(); ++i) dx[i] += g;
            });
        }
        return y;
    }

    /// Sum of squared entries (squared Frobenius norm), as a scalar node.
    node_id sum_sq(node_id x) {
        const tensor& tx = nodes_[x];
        double s = 0.0;
        for (double v : tx.values) s += v * v;
        node_id y = leaf(tensor({1}, {s}, needs(x)));
        if (nodes_[y].requires_grad) {
            record({x}, y, [this, x, y] {
                double* dx = nodes_[x].grad_buf().data();
                const double g = nodes_[y].grad[0];
                const double* xv = nodes_[x].values.data();
                for (std::size_t i = 0; i < nodes_[x].size(); ++i) dx[i] += 2.0 * g * xv[i];
            });
        }
        return y;
    }

    /// Per-row cosine similarity of two n x d matrices -> rank-1 n-vector.
    /// A row whose norm falls below 1e-12 yields 0 and passes no gradient.
    node_id row_cosine(node_id a, node_id b) {
        const tensor& ta = nodes_[a];
        const tensor& tb = nodes_[b];
        if (ta.rank() != 2 || !ta.same_shape(tb))
            throw shape_error("row_cosine: " + shape_str(ta) + " vs " + shape_str(tb));
        const std::size_t n = ta.shape[0], d = ta.shape[1];
        tensor out({n}, needs(a, b));
        auto na = std::make_shared<std::vector<double>>(n);
        auto nb = std::make_shared<std::vector<double>>(n);
        constexpr double min_norm = 1e-12;
        for (std::size_t i = 0; i < n; ++i) {
            const double* ai = ta.values.data() + i * d;
            const double* bi = tb.values.data() + i * d;
            double saa = 0.0, sbb = 0.0, sab = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                saa += ai[j] * ai[j];
                sbb += bi[j] * bi[j];
                sab += ai[j] * bi[j];
            }
            (*na)[i] = std::sqrt(saa);
            (*nb)[i] = std::sqrt(sbb);
            out.values[i] = ((*na)[i] < min_norm || (*nb)[i] < min_norm)
                                ? 0.0
                                : sab / ((*na)[i] * (*nb)[i]);
        }
        node_id c = leaf(std::move(out));
        if (nodes_[c].requires_grad) {
            record({a, b}, c, [this, a, b, c, n, d, na, nb] {
                const double* dy = nodes_[c].grad.data();
                const double* cv = nodes_[c].values.data();
                const double* av = nodes_[a].values.data();
                const double* bv = nodes_[b].values.data();
                double* da = nodes_[a].requires_grad ? nodes_[a].grad_buf().data() : nullptr;
                double* db = nodes_[b].requires_grad ? nodes_[b].grad_buf().data() : nullptr;
                constexpr double min_norm = 1e-12;
                for (std::size_t i = 0; i < n; ++i) {
                    if ((*na)[i] < min_norm || (*nb)[i] < min_norm) continue;
                    const double g = dy[i];
                    if (g == 0.0) continue;
                    const double inv = 1.0 / ((*na)[i] * (*nb)[i]);
                    const double ci = cv[i];
                    const double* ai = av + i * d;
                    const double* bi = bv + i * d;
                    for (std::size_t j = 0; j < d; ++j) {
                        if (da) da[i * d + j] += g * (bi[j] * inv - ci * ai[j] / ((*na)[i] * (*na)[i]));
                        if (db) db[i * d + j] += g * (ai[j] * inv - ci * bi[j] / ((*nb)[i] * (*nb)[i]));
                    }
                }
            });
        }
        return c;
    }

    /// Mean binary cross-entropy of predictions p against 0/1 targets t.
    /// Predictions are clamped to [eps, 1-eps], eps = 1e-7; clamped entries
    /// pass no gradient.
    node_id bce(node_id p, node_id t) {
        const tensor& tp = nodes_[p];
        const tensor& tt = nodes_[t];
        if (!tp.same_shape(tt))
            throw shape_error("bce: " + shape_str(tp) + " vs " + shape_str(tt));
        if (tp.size() == 0) throw shape_error("bce: empty tensor");
        constexpr double eps = 1e-7;
        const std::size_t n = tp.size();
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double pi = tp.values[i];
            if (pi < eps) pi = eps;
            if (pi > 1.0 - eps) pi = 1.0 - eps;
            const double ti = tt.values[i];
            s -= ti * std::log(pi) + (1.0 - ti) * std::log(1.0 - pi);
        }
        const double inv = 1.0 / static_cast<double>(n);
        node_id y = leaf(tensor({1}, {s * inv}, needs(p)));
        if (nodes_[y].requires_grad) {
            record({p, t}, y, [this, p, t, y, inv] {
                constexpr double eps = 1e-7;
                double* dp = nodes_[p].grad_buf().data();
                const double g = nodes_[y].grad[0] * inv;
                const double* pv = nodes_[p].values.data();
                const double* tv = nodes_[t].values.data();
                for (std::size_t i = 0; i < nodes_[p].size(); ++i) {
                    const double pi = pv[i];
                    if (pi <= eps || pi >= 1.0 - eps) continue;
                    dp[i] += g * (-(tv[i] / pi) + (1.0 - tv[i]) / (1.0 - pi));
                }
            });
        }
        return y;
    }

    /// Columns [c0, c1) of a rank-2 tensor, as a new node.
    node_id col_slice(node_id x, std::size_t c0, std::size_t c1) {
        const tensor& tx = nodes_[x];
        if (tx.rank() != 2 || c0 >= c1 || c1 > tx.shape[1])
            throw shape_error("col_slice: [" + std::to_string(c0) + "," + std::to_string(c1) +
                              ") of " + shape_str(tx));
        const std::size_t n = tx.shape[0], k = tx.shape[1], w = c1 - c0;
        tensor out({n, w}, needs(x));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < w; ++j)
                out.values[i * w + j] = tx.values[i * k + c0 + j];
        node_id y = leaf(std::move(out));
        if (nodes_[y].requires_grad) {
            record({x}, y, [this, x, y, n, k, w, c0] {
                double* dx = nodes_[x].grad_buf().data();
                const double* dy = nodes_[y].grad.data();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < w; ++j)
                        dx[i * k + c0 + j] += dy[i * w + j];
            });
        }
        return y;
    }

    /// Value copy with the gradient link severed.
    node_id detach(node_id x) {
        return constant(tensor(nodes_[x].shape, nodes_[x].values));
    }

    // ----- backward -------------------------------------------------------

    /// Seeds d(root)/d(root) = 1 and accumulates gradients into every
    /// contributing leaf. One reverse sweep; each record runs at most once.
    /// Interior (op-produced) adjoints are scratch state of the call, so a
    /// second backward adds exactly one more gradient unit to each leaf.
    void backward(node_id root) {
        if (nodes_[root].size() != 1)
            throw shape_error("backward: root must be scalar, got " + shape_str(nodes_[root]));
        if (!nodes_[root].requires_grad) return;
        for (const op_record& r : records_) nodes_[r.out].clear_grad();
        std::vector<char> needed(nodes_.size(), 0);
        needed[root] = 1;
        nodes_[root].grad_buf()[0] += 1.0;
        for (std::size_t i = records_.size(); i-- > 0;) {
            const op_record& r = records_[i];
            if (!needed[r.out]) continue;
            for (node_id in : r.inputs)
                if (nodes_[in].requires_grad) needed[in] = 1;
            r.pull();
        }
    }

    /// Zeroes every allocated gradient buffer; a subsequent backward()
    /// reproduces the same gradients.
    void zero_grad() {
        for (tensor& t : nodes_) t.clear_grad();
    }

private:
    struct op_record {
        std::vector<node_id> inputs;
        node_id out;
        std::function<void()> pull;
    };

    bool needs(node_id a) const { return nodes_[a].requires_grad; }
    bool needs(node_id a, node_id b) const {
        return nodes_[a].requires_grad || nodes_[b].requires_grad;
    }

    void record(std::vector<node_id> inputs, node_id out, std::function<void()> pull) {
        records_.push_back({std::move(inputs), out, std::move(pull)});
    }

    // C += A * B, ikj order; zero entries of A are skipped, which makes
    // products against mostly-zero matrices (normalized adjacency) cheap
    // without changing any computed value.
    static void mm_acc(const double* a, const double* b, double* c,
                       std::size_t m, std::size_t k, std::size_t n) {
        for (std::size_t i = 0; i < m; ++i) {
            double* ci = c + i * n;
            const double* ai = a + i * k;
            for (std::size_t t = 0; t < k; ++t) {
                const double ait = ai[t];
                if (ait == 0.0) continue;
                const double* bt = b + t * n;
                for (std::size_t j = 0; j < n; ++j) ci[j] += ait * bt[j];
            }
        }
    }

    // elementwise a + sign*b
    node_id ew2(node_id a, node_id b, const char* name, double sign) {
        const tensor& ta = nodes_[a];
        const tensor& tb = nodes_[b];
        if (!ta.same_shape(tb))
            throw shape_error(std::string(name) + ": " + shape_str(ta) + " vs " + shape_str(tb));
        tensor out(ta.shape, needs(a, b));
        for (std::size_t i = 0; i < ta.size(); ++i)
            out.values[i] = ta.values[i] + sign * tb.values[i];
        node_id y = leaf(std::move(out));
        if (nodes_[y].requires_grad) {
            record({a, b}, y, [this, a, b, y, sign] {
                const double* dy = nodes_[y].grad.data();
                const std::size_t n = nodes_[y].size();
                if (nodes_[a].requires_grad) {
                    double* da = nodes_[a].grad_buf().data();
                    for (std::size_t i = 0; i < n; ++i) da[i] += dy[i];
                }
                if (nodes_[b].requires_grad) {
                    double* db = nodes_[b].grad_buf().data();
                    for (std::size_t i = 0; i < n; ++i) db[i] += sign * dy[i];
                }
            });
        }
        return y;
    }

    std::deque<tensor> nodes_;
    std::vector<op_record> records_;
};

} // namespace decaf
