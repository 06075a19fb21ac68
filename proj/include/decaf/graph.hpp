#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "decaf/errors.hpp"
#include "decaf/tensor.hpp"
#include "decaf/textio.hpp"

namespace decaf {

/// Undirected attributed graph with a binary sensitive attribute.
/// Invariants (checked by validate_graph): adjacency is symmetric 0/1 with a
/// zero diagonal; sensitive values are 0/1; when sensitive_col is set, that
/// feature column equals the sensitive vector entrywise; labels, when present,
/// are 0/1 with 1 = anomaly.
struct graph {
    tensor features;  // n x d
    tensor adjacency; // n x n
    std::vector<int> sensitive;
    std::optional<std::vector<int>> labels;
    std::optional<std::size_t> sensitive_col;

    std::size_t n_nodes() const { return features.rows(); }
    std::size_t n_attrs() const { return features.cols(); }

    std::size_t n_edges() const {
        std::size_t twice = 0;
        for (double v : adjacency.values) twice += (v != 0.0);
        return twice / 2;
    }

    bool has_edge(std::size_t i, std::size_t j) const {
        return adjacency.at(i, j) != 0.0;
    }

    void set_edge(std::size_t i, std::size_t j, bool present) {
        adjacency.at(i, j) = present ? 1.0 : 0.0;
        adjacency.at(j, i) = present ? 1.0 : 0.0;
    }
};

struct dataset_meta {
    std::string name;
    std::size_t n_nodes = 0;
    std::size_t n_edges = 0;
    std::size_t n_attrs = 0;
    std::string sensitive = "S";
    std::string outlier_type = "none"; // none | structural | contextual
    double outlier_ratio = 0.0;
    std::uint64_t seed = 0;
    std::optional<std::size_t> sensitive_col;
};

inline nlohmann::json meta_to_json(const dataset_meta& m) {
    nlohmann::json j;
    j["name"] = m.name;
    j["n_nodes"] = m.n_nodes;
    j["n_edges"] = m.n_edges;
    j["n_attrs"] = m.n_attrs;
    j["sensitive"] = m.sensitive;
    j["outlier_type"] = m.outlier_type;
    j["outlier_ratio"] = m.outlier_ratio;
    j["seed"] = m.seed;
    if (m.sensitive_col)
        j["sensitive_col"] = *m.sensitive_col;
    else
        j["sensitive_col"] = nullptr;
    return j;
}

inline dataset_meta meta_from_json(const nlohmann::json& j) {
    dataset_meta m;
    try {
        m.name = j.at("name").get<std::string>();
        m.n_nodes = j.at("n_nodes").get<std::size_t>();
        m.n_edges = j.at("n_edges").get<std::size_t>();
        m.n_attrs = j.at("n_attrs").get<std::size_t>();
        m.sensitive = j.at("sensitive").get<std::string>();
        m.outlier_type = j.at("outlier_type").get<std::string>();
        m.outlier_ratio = j.at("outlier_ratio").get<double>();
        m.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("sensitive_col") && !j.at("sensitive_col").is_null())
            m.sensitive_col = j.at("sensitive_col").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("meta.json: ") + e.what());
    }
    return m;
}

inline dataset_meta make_meta(const graph& g, std::string name,
                              std::string outlier_type = "none",
                              double outlier_ratio = 0.0, std::uint64_t seed = 0) {
    dataset_meta m;
    m.name = std::move(name);
    m.n_nodes = g.n_nodes();
    m.n_edges = g.n_edges();
    m.n_attrs = g.n_attrs();
    m.outlier_type = std::move(outlier_type);
    m.outlier_ratio = outlier_ratio;
    m.seed = seed;
    m.sensitive_col = g.sensitive_col;
    return m;
}

/// Checks every structural invariant; throws format_error naming the first
/// violation.
inline void validate_graph(const graph& g) {
    const std::size_t n = g.n_nodes();
    if (g.adjacency.rank() != 2 || g.adjacency.shape[0] != n || g.adjacency.shape[1] != n)
        throw format_error("graph: adjacency shape " + shape_str(g.adjacency) +
                           " does not match " + std::to_string(n) + " nodes");
    if (g.sensitive.size() != n)
        throw format_error("graph: sensitive length != n_nodes");
    for (std::size_t i = 0; i < n; ++i) {
        if (g.adjacency.at(i, i) != 0.0)
            throw format_error("graph: nonzero diagonal at node " + std::to_string(i));
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = g.adjacency.at(i, j);
            if (v != 0.0 && v != 1.0)
                throw format_error("graph: adjacency entry not 0/1 at (" +
                                   std::to_string(i) + "," + std::to_string(j) + ")");
            if (v != g.adjacency.at(j, i))
                throw format_error("graph: adjacency asymmetric at (" +
                                   std::to_string(i) + "," + std::to_string(j) + ")");
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (g.sensitive[i] != 0 && g.sensitive[i] != 1)
            throw format_error("graph: sensitive value " + std::to_string(g.sensitive[i]) +
                               " at node " + std::to_string(i));
    if (g.sensitive_col) {
        if (*g.sensitive_col >= g.n_attrs())
            throw format_error("graph: sensitive_col out of range");
        for (std::size_t i = 0; i < n; ++i)
            if (g.features.at(i, *g.sensitive_col) != static_cast<double>(g.sensitive[i]))
                throw format_error("graph: feature column " + std::to_string(*g.sensitive_col) +
                                   " disagrees with sensitive at node " + std::to_string(i));
    }
    if (g.labels) {
        if (g.labels->size() != n)
            throw format_error("graph: labels length != n_nodes");
        for (int y : *g.labels)
            if (y != 0 && y != 1)
                throw format_error("graph: label value " + std::to_string(y));
    }
}

/// Upper-triangle edge list (i < j), ascending lexicographic.
inline std::vector<std::pair<std::size_t, std::size_t>> edge_list(const graph& g) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const std::size_t n = g.n_nodes();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (g.adjacency.at(i, j) != 0.0) out.emplace_back(i, j);
    return out;
}

/// Neighbor lists, for generators and injectors that iterate edges.
inline std::vector<std::vector<std::size_t>> adjacency_lists(const graph& g) {
    std::vector<std::vector<std::size_t>> nb(g.n_nodes());
    for (auto [i, j] : edge_list(g)) {
        nb[i].push_back(j);
        nb[j].push_back(i);
    }
    return nb;
}

/// Symmetrically normalized adjacency with self-loops: entries
/// (A+I)_ij / sqrt(deg_i * deg_j) where deg is the row sum of A+I.
inline tensor normalize_adjacency(const tensor& a) {
    if (a.rank() != 2 || a.shape[0] != a.shape[1])
        throw shape_error("normalize_adjacency: expected square matrix, got " + shape_str(a));
    const std::size_t n = a.shape[0];
    std::vector<double> deg(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d = 1.0; // self-loop
        for (std::size_t j = 0; j < n; ++j) d += a.at(i, j);
        deg[i] = d;
    }
    tensor out({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double aij = a.at(i, j) + (i == j ? 1.0 : 0.0);
            if (aij != 0.0) out.at(i, j) = aij / std::sqrt(deg[i] * deg[j]);
        }
    return out;
}

/// Involution flipping the sensitive attribute everywhere it lives: the S
/// vector and, when set, the sensitive feature column. Everything else is
/// copied bit-identically.
inline graph flip_sensitive(const graph& g) {
    graph out = g;
    for (std::size_t i = 0; i < out.sensitive.size(); ++i) {
        out.sensitive[i] = 1 - out.sensitive[i];
        if (out.sensitive_col)
            out.features.at(i, *out.sensitive_col) = static_cast<double>(out.sensitive[i]);
    }
    return out;
}

// ----- on-disk dataset directory -------------------------------------------
//
//   meta.json      UTF-8 JSON object (dataset_meta fields)
//   features.csv   n rows, comma-separated %.17g floats, no header
//   edges.csv      one "i,j" per line, i < j, ascending, each edge once
//   sensitive.csv  one 0/1 per line
//   labels.csv     one 0/1 per line; file absent when the graph is unlabeled

inline void save_graph(const graph& g, const dataset_meta& meta,
                       const std::filesystem::path& dir) {
    validate_graph(g);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("save_graph: cannot create " + dir.string());

    auto open_out = [&](const char* name) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw io_error("save_graph: cannot write " + (dir / name).string());
        return f;
    };

    {
        auto f = open_out("meta.json");
        f << meta_to_json(meta).dump(2) << "\n";
    }
    {
        auto f = open_out("features.csv");
        const std::size_t n = g.n_nodes(), d = g.n_attrs();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                if (j) f << ',';
                f << fmt_g17(g.features.at(i, j));
            }
            f << '\n';
        }
    }
    {
        auto f = open_out("edges.csv");
        for (auto [i, j] : edge_list(g)) f << i << ',' << j << '\n';
    }
    {
        auto f = open_out("sensitive.csv");
        for (int s : g.sensitive) f << s << '\n';
    }
    if (g.labels) {
        auto f = open_out("labels.csv");
        for (int y : *g.labels) f << y << '\n';
    }
}

namespace detail {

inline std::vector<std::string> read_lines(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw io_error("cannot open " + p.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

} // namespace detail

inline std::pair<graph, dataset_meta> load_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "meta.json"))
        throw io_error("load_graph: missing " + (dir / "meta.json").string());

    dataset_meta meta;
    {
        std::ifstream f(dir / "meta.json", std::ios::binary);
        if (!f) throw io_error("load_graph: cannot open meta.json");
        nlohmann::json j;
        try {
            f >> j;
        } catch (const nlohmann::json::exception& e) {
            throw format_error(std::string("meta.json: ") + e.what());
        }
        meta = meta_from_json(j);
    }

    graph g;
    g.sensitive_col = meta.sensitive_col;

    // features
    {
        auto lines = detail::read_lines(dir / "features.csv");
        const std::size_t n = lines.size();
        if (n != meta.n_nodes)
            throw format_error("features.csv: " + std::to_string(n) + " rows, meta says " +
                               std::to_string(meta.n_nodes));
        std::size_t d = 0;
        std::vector<double> vals;
        for (std::size_t i = 0; i < n; ++i) {
            auto cells = split_csv(lines[i]);
            if (i == 0) {
                d = cells.size();
                if (d != meta.n_attrs)
                    throw format_error("features.csv: " + std::to_string(d) +
                                       " columns, meta says " + std::to_string(meta.n_attrs));
                vals.reserve(n * d);
            } else if (cells.size() != d) {
                throw format_error("features.csv: ragged row " + std::to_string(i));
            }
            for (auto& c : cells) vals.push_back(parse_double(c, "features.csv"));
        }
        g.features = tensor({n, d}, std::move(vals));
    }

    const std::size_t n = meta.n_nodes;

    // edges; self-loops are stripped, duplicates (either orientation) rejected
    {
        g.adjacency = tensor({n, n});
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (const auto& line : detail::read_lines(dir / "edges.csv")) {
            auto cells = split_csv(line);
            if (cells.size() != 2) throw format_error("edges.csv: bad line '" + line + "'");
            const long long a = parse_int(cells[0], "edges.csv");
            const long long b = parse_int(cells[1], "edges.csv");
            if (a < 0 || b < 0 || a >= static_cast<long long>(n) || b >= static_cast<long long>(n))
                throw format_error("edges.csv: node index out of range in '" + line + "'");
            if (a == b) continue;
            const std::size_t lo = static_cast<std::size_t>(std::min(a, b));
            const std::size_t hi = static_cast<std::size_t>(std::max(a, b));
            if (!seen.insert({lo, hi}).second)
                throw format_error("edges.csv: duplicate edge " + std::to_string(lo) +
                                   "," + std::to_string(hi));
            g.adjacency.at(lo, hi) = 1.0;
            g.adjacency.at(hi, lo) = 1.0;
        }
        if (seen.size() != meta.n_edges)
            throw format_error("edges.csv: " + std::to_string(seen.size()) +
                               " edges, meta says " + std::to_string(meta.n_edges));
    }

    // sensitive
    {
        auto lines = detail::read_lines(dir / "sensitive.csv");
        if (lines.size() != n)
            throw format_error("sensitive.csv: " + std::to_string(lines.size()) +
                               " rows, meta says " + std::to_string(n));
        g.sensitive.reserve(n);
        for (const auto& line : lines) {
            const long long v = parse_int(line, "sensitive.csv");
            if (v != 0 && v != 1)
                throw format_error("sensitive.csv: value " + line + " is not 0/1");
            g.sensitive.push_back(static_cast<int>(v));
        }
    }

    // labels (optional)
    if (std::filesystem::exists(dir / "labels.csv")) {
        auto lines = detail::read_lines(dir / "labels.csv");
        if (lines.size() != n)
            throw format_error("labels.csv: " + std::to_string(lines.size()) +
                               " rows, meta says " + std::to_string(n));
        std::vector<int> y;
        y.reserve(n);
        for (const auto& line : lines) {
            const long long v = parse_int(line, "labels.csv");
            if (v != 0 && v != 1)
                throw format_error("labels.csv: value " + line + " is not 0/1");
            y.push_back(static_cast<int>(v));
        }
        g.labels = std::move(y);
    }

    validate_graph(g);
    return {std::move(g), std::move(meta)};
}

inline graph load_graph(const std::filesystem::path& dir) {
    return load_dataset(dir).first;
}

} // namespace decaf
