#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "scagc/common.hpp"
#include "scagc/graph.hpp"

namespace scagc {

/// Stochastic view-generation settings. With `adaptive` set, drop/mask
/// probabilities are rescaled by degree centrality so that structurally
/// important edges and attribute dimensions are perturbed less.
struct AugmentationSpec {
    double edge_drop_rate = 0.3;
    double attr_mask_rate = 0.3;
    double prob_cap = 0.7;
    bool adaptive = true;
};

/// One perturbed copy of a graph: masked attributes, a subset of the source
/// edges, and the normalized propagation operator of the perturbed adjacency.
struct GraphView {
    Matrix attributes;
    std::vector<std::pair<int, int>> edges;
    NormalizedAdjacency normalized;
};

namespace detail {

/// Rescales raw centrality weights into probabilities:
/// p_i = rate * (w_max - w_i) / (w_max - w_mean), clamped to [0, cap].
/// Degenerate all-equal weights fall back to the uniform base rate.
inline std::vector<double> rescale_weights(const std::vector<double>& w, double rate, double cap) {
    std::vector<double> probs(w.size(), rate);
    if (w.empty()) return probs;
    const double w_max = *std::max_element(w.begin(), w.end());
    double w_mean = 0.0;
    for (double x : w) w_mean += x;
    w_mean /= static_cast<double>(w.size());
    if (w_max - w_mean <= 1e-12) return probs;  // regular structure
    for (size_t i = 0; i < w.size(); ++i)
        probs[i] = std::clamp(rate * (w_max - w[i]) / (w_max - w_mean), 0.0, cap);
    return probs;
}

}  // namespace detail

/// Per-edge drop probability, in the order of graph.edges.
/// Adaptive edge weight: mean of log(1+degree) over the two endpoints.
inline std::vector<double> edge_drop_probs(const AttributedGraph& g, const AugmentationSpec& spec) {
    if (!spec.adaptive) return std::vector<double>(g.edges.size(), spec.edge_drop_rate);
    const auto deg = degree_vector(g);
    std::vector<double> w(g.edges.size());
    for (size_t e = 0; e < g.edges.size(); ++e) {
        const auto& [u, v] = g.edges[e];
        w[e] = 0.5 * (std::log1p(static_cast<double>(deg[u])) + std::log1p(static_cast<double>(deg[v])));
    }
    return detail::rescale_weights(w, spec.edge_drop_rate, spec.prob_cap);
}

/// Per-dimension mask probability. Adaptive dimension weight:
/// sum_i |X[i,f]| * log(1+degree(i)).
inline std::vector<double> attr_mask_probs(const AttributedGraph& g, const AugmentationSpec& spec) {
    if (!spec.adaptive) return std::vector<double>(g.attr_dim, spec.attr_mask_rate);
    const auto deg = degree_vector(g);
    std::vector<double> w(g.attr_dim, 0.0);
    for (int i = 0; i < g.n_nodes; ++i) {
        const double c = std::log1p(static_cast<double>(deg[i]));
        const double* xi = g.attributes.row(i);
        for (int f = 0; f < g.attr_dim; ++f) w[f] += std::abs(xi[f]) * c;
    }
    return detail::rescale_weights(w, spec.attr_mask_rate, spec.prob_cap);
}

/// Samples one augmented view: every edge is dropped independently with its
/// drop probability (both directions at once, so symmetry is preserved) and
/// every attribute dimension is zeroed across all nodes with its mask
/// probability. Deterministic for a fixed (graph, spec, seed) triple.
inline GraphView sample_view(const AttributedGraph& g, const AugmentationSpec& spec, std::uint64_t seed) {
    const auto edge_probs = edge_drop_probs(g, spec);
    const auto dim_probs = attr_mask_probs(g, spec);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    GraphView view;
    view.edges.reserve(g.edges.size());
    for (size_t e = 0; e < g.edges.size(); ++e)
        if (!(unif(rng) < edge_probs[e])) view.edges.push_back(g.edges[e]);

    view.attributes = g.attributes;
    for (int f = 0; f < g.attr_dim; ++f) {
        if (unif(rng) < dim_probs[f]) {
            for (int i = 0; i < g.n_nodes; ++i) view.attributes(i, f) = 0.0;
        }
    }
    view.normalized = sym_normalize(g.n_nodes, view.edges);
    return view;
}

/// The unperturbed graph packaged as a view (used for raw forward passes).
inline GraphView raw_view(const AttributedGraph& g) {
    GraphView view;
    view.attributes = g.attributes;
    view.edges = g.edges;
    view.normalized = sym_normalize(g);
    return view;
}

}  // namespace scagc
