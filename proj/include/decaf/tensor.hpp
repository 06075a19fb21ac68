#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "decaf/errors.hpp"

namespace decaf {

/// Dense row-major float64 tensor of rank 1 or 2. Scalars are rank-1 tensors
/// of size 1. The gradient buffer stays empty until something writes to it.
class tensor {
public:
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;

    tensor() = default;

    explicit tensor(std::vector<std::size_t> s, bool req = false)
        : shape(std::move(s)), requires_grad(req) {
        values.assign(count(shape), 0.0);
    }

    tensor(std::vector<std::size_t> s, std::vector<double> v, bool req = false)
        : shape(std::move(s)), values(std::move(v)), requires_grad(req) {
        if (values.size() != count(shape))
            throw shape_error("tensor: value count does not match shape");
    }

    tensor(std::vector<std::size_t> s, std::initializer_list<double> v, bool req = false)
        : tensor(std::move(s), std::vector<double>(v), req) {}

    static tensor scalar(double v, bool req = false) {
        return tensor({1}, {v}, req);
    }

    std::size_t size() const { return values.size(); }
    std::size_t rank() const { return shape.size(); }

    std::size_t rows() const {
        return shape.empty() ? 0 : shape[0];
    }

    std::size_t cols() const {
        if (rank() == 2) return shape[1];
        if (rank() == 1) return 1;
        throw shape_error("tensor: cols() on rank " + std::to_string(rank()));
    }

    double& at(std::size_t i, std::size_t j) { return values[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * shape[1] + j]; }

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    double item() const {
        if (size() != 1) throw shape_error("tensor: item() on non-scalar");
        return values[0];
    }

    bool same_shape(const tensor& o) const { return shape == o.shape; }

    /// Allocates (zero-filled) the gradient buffer on first use.
    std::vector<double>& grad_buf() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
        return grad;
    }

    void clear_grad() {
        if (!grad.empty()) grad.assign(grad.size(), 0.0);
    }

    bool all_finite() const {
        for (double x : values)
            if (!std::isfinite(x)) return false;
        return true;
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return s.empty() ? 0 : n;
    }
};

inline std::string shape_str(const tensor& t) {
    std::string s = "(";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(t.shape[i]);
    }
    return s + ")";
}

} // namespace decaf
