#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "scagc/augment.hpp"

using namespace scagc;

namespace {

AttributedGraph make_graph(int n, std::vector<std::pair<int, int>> edges, Matrix attrs = {}) {
    AttributedGraph g;
    g.n_nodes = n;
    g.edges = std::move(edges);
    if (attrs.rows == 0) attrs = Matrix(n, 2, 1.0);
    g.attributes = std::move(attrs);
    g.attr_dim = g.attributes.cols;
    return g;
}

}  // namespace

TEST_CASE("edge_drop_probs degenerates to the base rate on regular graphs") {
    const auto tri = make_graph(3, {{0, 1}, {0, 2}, {1, 2}});
    AugmentationSpec spec;
    spec.edge_drop_rate = 0.2;
    spec.adaptive = true;
    for (double p : edge_drop_probs(tri, spec)) REQUIRE(p == Catch::Approx(0.2));
}

TEST_CASE("edge_drop_probs with zero rate is all zero") {
    const auto tri = make_graph(3, {{0, 1}, {0, 2}, {1, 2}});
    AugmentationSpec spec;
    spec.edge_drop_rate = 0.0;
    for (double p : edge_drop_probs(tri, spec)) REQUIRE(p == 0.0);
    spec.adaptive = false;
    for (double p : edge_drop_probs(tri, spec)) REQUIRE(p == 0.0);
}

TEST_CASE("edge_drop_probs matches the centrality formula on a star") {
    // K_{1,3}: every edge touches the hub, so all weights coincide and the
    // degenerate rule hands every edge the base rate.
    const auto star = make_graph(4, {{0, 1}, {0, 2}, {0, 3}});
    AugmentationSpec spec;
    spec.edge_drop_rate = 0.3;
    spec.prob_cap = 0.7;
    const auto probs = edge_drop_probs(star, spec);
    REQUIRE(probs[0] == probs[1]);
    REQUIRE(probs[1] == probs[2]);
    REQUIRE(probs[0] == Catch::Approx(0.3));
}

TEST_CASE("edge_drop_probs orders edges by centrality on a path") {
    // Path 0-1-2-3: the middle edge joins two degree-2 nodes and must get a
    // strictly lower drop probability than the outer edges.
    const auto path = make_graph(4, {{0, 1}, {1, 2}, {2, 3}});
    AugmentationSpec spec;
    spec.edge_drop_rate = 0.3;
    spec.prob_cap = 0.7;
    const auto probs = edge_drop_probs(path, spec);

    // direct evaluation of the stated formula
    const double w_outer = 0.5 * (std::log1p(1.0) + std::log1p(2.0));
    const double w_mid = std::log1p(2.0);
    const double w_max = w_mid;
    const double w_mean = (2.0 * w_outer + w_mid) / 3.0;
    const double expected_outer = std::clamp(0.3 * (w_max - w_outer) / (w_max - w_mean), 0.0, 0.7);
    REQUIRE(probs[0] == Catch::Approx(expected_outer).epsilon(1e-12));
    REQUIRE(probs[2] == Catch::Approx(expected_outer).epsilon(1e-12));
    REQUIRE(probs[1] == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(probs[0] > probs[1]);
}

TEST_CASE("attr_mask_probs uniform cases") {
    const auto tri = make_graph(3, {{0, 1}, {0, 2}, {1, 2}});
    AugmentationSpec spec;
    spec.attr_mask_rate = 0.0;
    for (double p : attr_mask_probs(tri, spec)) REQUIRE(p == 0.0);

    spec.attr_mask_rate = 0.25;
    // constant attribute matrix -> equal weights -> uniform rate
    for (double p : attr_mask_probs(tri, spec)) REQUIRE(p == Catch::Approx(0.25));
}

TEST_CASE("attr_mask_probs shields the dominant dimension") {
    Matrix attrs(4, 2);
    for (int i = 0; i < 4; ++i) {
        attrs(i, 0) = 10.0;
        attrs(i, 1) = 0.1;
    }
    const auto path = make_graph(4, {{0, 1}, {1, 2}, {2, 3}}, attrs);
    AugmentationSpec spec;
    spec.attr_mask_rate = 0.3;
    spec.prob_cap = 0.7;
    const auto probs = attr_mask_probs(path, spec);
    REQUIRE(probs[0] < probs[1]);
    REQUIRE(probs[0] == Catch::Approx(0.0).margin(1e-12));  // dominant dim is w_max
    // with two dimensions, (w_max - w_min)/(w_max - w_mean) = 2, capped at 0.7
    REQUIRE(probs[1] == Catch::Approx(std::min(2.0 * 0.3, 0.7)).epsilon(1e-12));
}

TEST_CASE("sample_view with zero rates reproduces the graph") {
    const auto g = generate_sbm(20, 2, 0.5, 0.1, 4, 2.0, 1.0, 3);
    AugmentationSpec spec;
    spec.edge_drop_rate = 0.0;
    spec.attr_mask_rate = 0.0;
    const auto view = sample_view(g, spec, 99);
    REQUIRE(view.edges == g.edges);
    REQUIRE(view.attributes.data == g.attributes.data);
}

TEST_CASE("sample_view with full mask rate zeroes all attributes") {
    const auto g = generate_sbm(10, 2, 0.5, 0.1, 4, 2.0, 1.0, 3);
    AugmentationSpec spec;
    spec.attr_mask_rate = 1.0;
    spec.adaptive = false;
    const auto view = sample_view(g, spec, 1);
    for (double x : view.attributes.data) REQUIRE(x == 0.0);
}

TEST_CASE("sample_view drop rate matches the binomial expectation") {
    // 100-node cycle: 2-regular, exactly 100 edges, adaptive degenerates to 0.5.
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < 100; ++i) edges.emplace_back(std::min(i, (i + 1) % 100), std::max(i, (i + 1) % 100));
    std::sort(edges.begin(), edges.end());
    const auto g = make_graph(100, edges);
    AugmentationSpec spec;
    spec.edge_drop_rate = 0.5;
    spec.attr_mask_rate = 0.0;

    const int trials = 10000;
    long long surviving = 0;
    for (int s = 0; s < trials; ++s) surviving += static_cast<long long>(sample_view(g, spec, s).edges.size());
    const double mean = static_cast<double>(surviving) / trials;
    const double sigma_mean = std::sqrt(100 * 0.25) / std::sqrt(static_cast<double>(trials));
    REQUIRE(std::abs(mean - 50.0) <= 3.0 * sigma_mean);
}

TEST_CASE("sample_view edges are a subset and the result is deterministic") {
    const auto g = generate_sbm(30, 3, 0.5, 0.1, 4, 2.0, 1.0, 8);
    AugmentationSpec spec;
    const std::set<std::pair<int, int>> source(g.edges.begin(), g.edges.end());
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto view = sample_view(g, spec, seed);
        for (const auto& e : view.edges) REQUIRE(source.count(e) == 1);
        const auto again = sample_view(g, spec, seed);
        REQUIRE(view.edges == again.edges);
        REQUIRE(view.attributes.data == again.attributes.data);
    }
}

TEST_CASE("distinct seeds give uncorrelated edge survival") {
    const auto tri = make_graph(3, {{0, 1}, {0, 2}, {1, 2}});
    AugmentationSpec spec;
    spec.edge_drop_rate = 0.5;
    spec.attr_mask_rate = 0.0;
    const int trials = 2000;
    auto survives_first_edge = [&](std::uint64_t seed) {
        const auto view = sample_view(tri, spec, seed);
        return !view.edges.empty() && view.edges.front() == std::pair<int, int>{0, 1};
    };
    double sx = 0, sy = 0, sxy = 0;
    for (int s = 0; s < trials; ++s) {
        const bool x = survives_first_edge(2 * s);
        const bool y = survives_first_edge(2 * s + 1);
        sx += x;
        sy += y;
        sxy += x && y;
    }
    const double px = sx / trials, py = sy / trials, pxy = sxy / trials;
    const double corr = (pxy - px * py) / std::sqrt(px * (1 - px) * py * (1 - py));
    REQUIRE(std::abs(corr) < 0.1);
}
