#pragma once

// Brute-force d-separation oracle: enumerate every simple undirected trail
// between the query sets and apply the blocking rules vertex by vertex.
// Exponential, fine for the tiny graphs the tests use; shares no code with
// the production reachability sweep.

#include <cstddef>
#include <string>
#include <vector>

#include "decaf/causal.hpp"

namespace testsupport {

inline bool oracle_path_blocked(const decaf::dag& g, const std::vector<std::size_t>& path,
                                const std::vector<bool>& in_z) {
    // descendants-of-v-in-Z helper
    auto collider_opened = [&](std::size_t v) {
        if (in_z[v]) return true;
        std::vector<bool> seen(g.size(), false);
        std::vector<std::size_t> stack{v};
        seen[v] = true;
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            for (std::size_t c : g.children(u)) {
                if (in_z[c]) return true;
                if (!seen[c]) {
                    seen[c] = true;
                    stack.push_back(c);
                }
            }
        }
        return false;
    };

    for (std::size_t k = 1; k + 1 < path.size(); ++k) {
        const std::size_t prev = path[k - 1], v = path[k], next = path[k + 1];
        const bool collider = g.has_edge(prev, v) && g.has_edge(next, v);
        if (collider) {
            if (!collider_opened(v)) return true;
        } else {
            if (in_z[v]) return true;
        }
    }
    return false;
}

inline void oracle_walk(const decaf::dag& g, std::size_t v, std::size_t target,
                        std::vector<bool>& on_path, std::vector<std::size_t>& path,
                        const std::vector<bool>& in_z, bool& found_open) {
    if (found_open) return;
    if (v == target) {
        if (!oracle_path_blocked(g, path, in_z)) found_open = true;
        return;
    }
    auto step = [&](std::size_t u) {
        if (on_path[u] || found_open) return;
        on_path[u] = true;
        path.push_back(u);
        oracle_walk(g, u, target, on_path, path, in_z, found_open);
        path.pop_back();
        on_path[u] = false;
    };
    for (std::size_t u : g.children(v)) step(u);
    for (std::size_t u : g.parents(v)) step(u);
}

inline bool oracle_d_separated(const decaf::dag& g, const std::vector<std::string>& xs,
                               const std::vector<std::string>& ys,
                               const std::vector<std::string>& zs) {
    std::vector<bool> in_z(g.size(), false);
    for (const auto& s : zs) in_z[g.index(s)] = true;
    for (const auto& sx : xs)
        for (const auto& sy : ys) {
            const std::size_t a = g.index(sx), b = g.index(sy);
            bool found_open = false;
            std::vector<bool> on_path(g.size(), false);
            std::vector<std::size_t> path{a};
            on_path[a] = true;
            oracle_walk(g, a, b, on_path, path, in_z, found_open);
            if (found_open) return false;
        }
    return true;
}

} // namespace testsupport
