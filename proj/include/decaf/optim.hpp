#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "decaf/errors.hpp"
#include "decaf/tensor.hpp"

namespace decaf {

struct adam_config {
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Per-parameter Adam moment buffers. One instance per parameter tensor.
struct adam_state {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;
};

/// One bias-corrected Adam update of `param` along `grad`.
inline void adam_step(tensor& param, const std::vector<double>& grad,
                      adam_state& st, const adam_config& cfg) {
    const std::size_t n = param.size();
    if (grad.size() != n)
        throw shape_error("adam_step: gradient size " + std::to_string(grad.size()) +
                          " vs parameter size " + std::to_string(n));
    if (st.m.size() != n) st.m.assign(n, 0.0);
    if (st.v.size() != n) st.v.assign(n, 0.0);
    st.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < n; ++i) {
        st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * grad[i];
        st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        param.values[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

} // namespace decaf
