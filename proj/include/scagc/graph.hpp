#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scagc/common.hpp"
#include "scagc/matrix.hpp"

namespace scagc {

/// An undirected attributed graph: N nodes with d-dimensional real
/// attributes, a binary symmetric adjacency held as a sorted edge list
/// (u < v, no self-loops), and optional ground-truth labels used only
/// for evaluation.
struct AttributedGraph {
    int n_nodes = 0;
    int attr_dim = 0;
    Matrix attributes;                         // N x d
    std::vector<std::pair<int, int>> edges;    // sorted, u < v, unique
    std::optional<std::vector<int>> true_labels;

    int num_edges() const { return static_cast<int>(edges.size()); }

    /// Cluster count implied by the labels, max label + 1. Zero when no labels.
    int label_count() const {
        if (!true_labels || true_labels->empty()) return 0;
        return *std::max_element(true_labels->begin(), true_labels->end()) + 1;
    }
};

/// Symmetrically normalized propagation operator with self-loops:
/// entries 1/sqrt((deg(i)+1)(deg(j)+1)) on edges and the diagonal.
struct NormalizedAdjacency {
    CsrMatrix matrix;
};

namespace detail {

/// Sorts, canonicalizes (u < v), deduplicates, and drops self-loops.
inline std::vector<std::pair<int, int>> canonicalize_edges(std::vector<std::pair<int, int>> edges) {
    for (auto& e : edges)
        if (e.first > e.second) std::swap(e.first, e.second);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges.erase(std::remove_if(edges.begin(), edges.end(),
                               [](const std::pair<int, int>& e) { return e.first == e.second; }),
                edges.end());
    return edges;
}

}  // namespace detail

/// Per-node degree: number of undirected edges incident to each node.
inline std::vector<int> degree_vector(const AttributedGraph& g) {
    std::vector<int> deg(g.n_nodes, 0);
    for (const auto& [u, v] : g.edges) {
        ++deg[u];
        ++deg[v];
    }
    return deg;
}

/// Adjacency neighbor lists (sorted), convenient for per-node traversal.
inline std::vector<std::vector<int>> adjacency_lists(int n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<std::vector<int>> adj(n);
    for (const auto& [u, v] : edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    for (auto& a : adj) std::sort(a.begin(), a.end());
    return adj;
}

/// Builds D^{-1/2} (G + I) D^{-1/2} where D is the degree matrix of G + I.
/// Isolated nodes get degree 1 from the self-loop, so the operator is
/// well-defined for every graph.
inline NormalizedAdjacency sym_normalize(int n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<int> deg(n, 1);  // +1 self-loop
    for (const auto& [u, v] : edges) {
        ++deg[u];
        ++deg[v];
    }
    std::vector<double> inv_sqrt(n);
    for (int i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(deg[i]));

    auto adj = adjacency_lists(n, edges);
    CsrMatrix m;
    m.rows = m.cols = n;
    m.row_ptr.resize(n + 1, 0);
    for (int i = 0; i < n; ++i) m.row_ptr[i + 1] = m.row_ptr[i] + static_cast<int>(adj[i].size()) + 1;
    m.col_idx.resize(m.row_ptr[n]);
    m.values.resize(m.row_ptr[n]);
    for (int i = 0; i < n; ++i) {
        int p = m.row_ptr[i];
        size_t a = 0;
        // merge sorted neighbors with the diagonal entry
        while (a < adj[i].size() && adj[i][a] < i) {
            m.col_idx[p] = adj[i][a];
            m.values[p] = inv_sqrt[i] * inv_sqrt[adj[i][a]];
            ++p, ++a;
        }
        m.col_idx[p] = i;
        m.values[p] = inv_sqrt[i] * inv_sqrt[i];
        ++p;
        while (a < adj[i].size()) {
            m.col_idx[p] = adj[i][a];
            m.values[p] = inv_sqrt[i] * inv_sqrt[adj[i][a]];
            ++p, ++a;
        }
    }
    return NormalizedAdjacency{std::move(m)};
}

inline NormalizedAdjacency sym_normalize(const AttributedGraph& g) {
    return sym_normalize(g.n_nodes, g.edges);
}

// ---------------------------------------------------------------------------
// File ingestion
// ---------------------------------------------------------------------------

/// Headerless CSV of N rows x d real columns. Ragged rows and non-finite
/// cells are parse errors.
inline Matrix load_attr_csv(const std::string& attrs_path) {
    std::ifstream attrs_in(attrs_path);
    if (!attrs_in) throw ParseError("cannot open attribute file: " + attrs_path);
    std::vector<std::vector<double>> rows;
    std::string line;
    size_t width = 0;
    int lineno = 0;
    while (std::getline(attrs_in, line)) {
        ++lineno;
        if (line.empty() && attrs_in.peek() == EOF) break;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                size_t pos = 0;
                double v = std::stod(cell, &pos);
                while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
                if (pos != cell.size()) throw std::invalid_argument(cell);
                row.push_back(v);
            } catch (const std::exception&) {
                throw ParseError(attrs_path + ":" + std::to_string(lineno) + ": bad numeric cell '" + cell + "'");
            }
        }
        if (row.empty()) throw ParseError(attrs_path + ":" + std::to_string(lineno) + ": empty row");
        for (double v : row)
            if (!std::isfinite(v))
                throw ParseError(attrs_path + ":" + std::to_string(lineno) + ": non-finite attribute");
        if (width == 0) width = row.size();
        else if (row.size() != width)
            throw ParseError(attrs_path + ":" + std::to_string(lineno) + ": ragged row (expected " +
                             std::to_string(width) + " columns, got " + std::to_string(row.size()) + ")");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(attrs_path + ": no attribute rows");
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(width));
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) m(i, j) = rows[i][j];
    return m;
}

/// Loads a graph from an edge list ("u v" per line, 0-indexed), a headerless
/// CSV attribute matrix, and an optional label file (one integer per line).
/// Node count is the attribute row count. Reversed/duplicate edge listings
/// collapse to one undirected edge and self-loops are dropped.
inline AttributedGraph load_graph(const std::string& edges_path, const std::string& attrs_path,
                                  const std::optional<std::string>& labels_path = std::nullopt) {
    AttributedGraph g;
    g.attributes = load_attr_csv(attrs_path);
    g.n_nodes = g.attributes.rows;
    g.attr_dim = g.attributes.cols;

    std::string line;
    int lineno = 0;

    std::ifstream edges_in(edges_path);
    if (!edges_in) throw ParseError("cannot open edge file: " + edges_path);
    std::vector<std::pair<int, int>> edges;
    long long u, v;
    while (std::getline(edges_in, line)) {
        ++lineno;
        std::stringstream ss(line);
        if (!(ss >> u)) continue;  // blank line
        if (!(ss >> v)) throw ParseError(edges_path + ":" + std::to_string(lineno) + ": expected 'u v'");
        if (u < 0 || v < 0 || u >= g.n_nodes || v >= g.n_nodes)
            throw MalformedGraphError(edges_path + ":" + std::to_string(lineno) + ": edge endpoint " +
                                      std::to_string(std::max(u, v)) + " out of range for " +
                                      std::to_string(g.n_nodes) + " nodes");
        edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
    }
    g.edges = detail::canonicalize_edges(std::move(edges));

    if (labels_path) {
        std::ifstream labels_in(*labels_path);
        if (!labels_in) throw ParseError("cannot open label file: " + *labels_path);
        std::vector<int> labels;
        long long l;
        while (labels_in >> l) labels.push_back(static_cast<int>(l));
        if (static_cast<int>(labels.size()) != g.n_nodes)
            throw ParseError(*labels_path + ": expected " + std::to_string(g.n_nodes) + " labels, got " +
                             std::to_string(labels.size()));
        for (int x : labels)
            if (x < 0) throw ParseError(*labels_path + ": negative label");
        g.true_labels = std::move(labels);
    }
    return g;
}

// ---------------------------------------------------------------------------
// JSON round-trip format
// ---------------------------------------------------------------------------

inline nlohmann::json graph_to_json(const AttributedGraph& g) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["n"] = g.n_nodes;
    j["d"] = g.attr_dim;
    auto edges = nlohmann::json::array();
    for (const auto& [u, v] : g.edges) edges.push_back({u, v});
    j["edges"] = std::move(edges);
    auto attrs = nlohmann::json::array();
    for (int i = 0; i < g.n_nodes; ++i)
        attrs.push_back(std::vector<double>(g.attributes.row(i), g.attributes.row(i) + g.attr_dim));
    j["attributes"] = std::move(attrs);
    if (g.true_labels) j["labels"] = *g.true_labels;
    else j["labels"] = nullptr;
    return j;
}

inline AttributedGraph graph_from_json(const nlohmann::json& j) {
    if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
        throw ParseError("graph json: unsupported format_version");
    AttributedGraph g;
    g.n_nodes = j.at("n").get<int>();
    g.attr_dim = j.at("d").get<int>();
    if (g.n_nodes <= 0 || g.attr_dim <= 0) throw ParseError("graph json: non-positive dimensions");
    g.attributes = Matrix(g.n_nodes, g.attr_dim);
    const auto& attrs = j.at("attributes");
    if (static_cast<int>(attrs.size()) != g.n_nodes) throw ParseError("graph json: attribute row count mismatch");
    for (int i = 0; i < g.n_nodes; ++i) {
        if (static_cast<int>(attrs[i].size()) != g.attr_dim) throw ParseError("graph json: ragged attributes");
        for (int k = 0; k < g.attr_dim; ++k) {
            g.attributes(i, k) = attrs[i][k].get<double>();
            if (!std::isfinite(g.attributes(i, k))) throw ParseError("graph json: non-finite attribute");
        }
    }
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : j.at("edges")) {
        int u = e.at(0).get<int>(), v = e.at(1).get<int>();
        if (u < 0 || v < 0 || u >= g.n_nodes || v >= g.n_nodes)
            throw MalformedGraphError("graph json: edge endpoint out of range");
        edges.emplace_back(u, v);
    }
    g.edges = detail::canonicalize_edges(std::move(edges));
    if (j.contains("labels") && !j["labels"].is_null()) {
        auto labels = j["labels"].get<std::vector<int>>();
        if (static_cast<int>(labels.size()) != g.n_nodes) throw ParseError("graph json: label count mismatch");
        g.true_labels = std::move(labels);
    }
    return g;
}

inline void save_graph_json(const AttributedGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << graph_to_json(g).dump() << "\n";
}

inline AttributedGraph load_graph_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open graph json: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": invalid json: " + e.what());
    }
    return graph_from_json(j);
}

// ---------------------------------------------------------------------------
// Synthetic benchmark graphs
// ---------------------------------------------------------------------------

/// Planted-partition generator: n nodes in k equal blocks; each intra-block
/// pair is an edge with probability p_in, inter-block with p_out.
/// Attributes are Gaussian around per-block means placed so any two means
/// are `separation` apart (scaled coordinate axes when attr_dim >= k,
/// random directions of the same norm otherwise). Labels are the block ids.
inline AttributedGraph generate_sbm(int n, int k, double p_in, double p_out, int attr_dim,
                                    double separation, double noise_sd, std::uint64_t seed) {
    if (n <= 0 || k <= 0 || attr_dim <= 0) throw ArgumentError("generate_sbm: sizes must be positive");
    if (n % k != 0) throw ArgumentError("generate_sbm: n must be divisible by k");
    if (!(p_out >= 0.0 && p_out <= p_in && p_in <= 1.0))
        throw ArgumentError("generate_sbm: need 0 <= p_out <= p_in <= 1");
    if (!(separation >= 0.0) || !(noise_sd > 0.0))
        throw ArgumentError("generate_sbm: separation >= 0 and noise_sd > 0 required");

    AttributedGraph g;
    g.n_nodes = n;
    g.attr_dim = attr_dim;
    const int block = n / k;
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = i / block;

    std::mt19937_64 rng(seed);

    // Block means: pairwise distance `separation` exactly when the scaled
    // basis fits, approximately otherwise.
    const double radius = separation / std::sqrt(2.0);
    Matrix means(k, attr_dim);
    if (attr_dim >= k) {
        for (int b = 0; b < k; ++b) means(b, b) = radius;
    } else {
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int b = 0; b < k; ++b) {
            double norm2 = 0.0;
            for (int f = 0; f < attr_dim; ++f) {
                means(b, f) = gauss(rng);
                norm2 += means(b, f) * means(b, f);
            }
            const double scale = radius / std::max(std::sqrt(norm2), 1e-12);
            for (int f = 0; f < attr_dim; ++f) means(b, f) *= scale;
        }
    }

    g.attributes = Matrix(n, attr_dim);
    {
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int i = 0; i < n; ++i)
            for (int f = 0; f < attr_dim; ++f) g.attributes(i, f) = means(labels[i], f) + noise_sd * gauss(rng);
    }

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
            const double p = (labels[u] == labels[v]) ? p_in : p_out;
            if (unif(rng) < p) g.edges.emplace_back(u, v);
        }
    }
    g.true_labels = std::move(labels);
    return g;
}

}  // namespace scagc
