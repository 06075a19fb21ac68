#pragma once

#include <random>

#include "decaf/tensor.hpp"

namespace testsupport {

inline decaf::tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                                   double scale = 1.0, bool requires_grad = true) {
    decaf::tensor t(std::move(shape), requires_grad);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (double& v : t.values) v = u(rng);
    return t;
}

inline decaf::tensor random_binary(std::vector<std::size_t> shape, std::mt19937_64& rng) {
    decaf::tensor t(std::move(shape), false);
    std::bernoulli_distribution b(0.5);
    for (double& v : t.values) v = b(rng) ? 1.0 : 0.0;
    return t;
}

} // namespace testsupport
