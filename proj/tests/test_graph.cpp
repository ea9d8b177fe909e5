#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "scagc/graph.hpp"
#include "scagc/metrics.hpp"

using namespace scagc;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
    const fs::path dir = fs::temp_directory_path() / "scagc_test_graph";
    fs::create_directories(dir);
    return dir;
}

std::string write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
    return p.string();
}

// Cyclic Jacobi eigenvalue sweep for small symmetric matrices (test oracle).
std::vector<double> sym_eigenvalues(Matrix a) {
    const int n = a.rows;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off < 1e-22) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-15) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (int i = 0; i < n; ++i) eig[i] = a(i, i);
    return eig;
}

AttributedGraph random_graph(int n, int d, double p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    AttributedGraph graph;
    graph.n_nodes = n;
    graph.attr_dim = d;
    graph.attributes = Matrix(n, d);
    for (double& x : graph.attributes.data) x = g(rng);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (u(rng) < p) graph.edges.emplace_back(i, j);
    return graph;
}

}  // namespace

TEST_CASE("load_graph dedups reversed listings") {
    const auto dir = test_dir();
    const auto edges = write_file(dir / "e1.txt", "0 1\n1 0\n");
    const auto attrs = write_file(dir / "a1.csv", "1.0\n2.0\n");
    const auto g = load_graph(edges, attrs);
    REQUIRE(g.n_nodes == 2);
    REQUIRE(g.attr_dim == 1);
    REQUIRE(g.edges == std::vector<std::pair<int, int>>{{0, 1}});
}

TEST_CASE("load_graph drops self-loops") {
    const auto dir = test_dir();
    const auto edges = write_file(dir / "e2.txt", "0 0\n");
    const auto attrs = write_file(dir / "a2.csv", "1.0\n");
    const auto g = load_graph(edges, attrs);
    REQUIRE(g.n_nodes == 1);
    REQUIRE(g.edges.empty());
}

TEST_CASE("load_graph rejects out-of-range endpoints") {
    const auto dir = test_dir();
    const auto edges = write_file(dir / "e3.txt", "0 5\n");
    const auto attrs = write_file(dir / "a3.csv", "1.0\n2.0\n");
    REQUIRE_THROWS_AS(load_graph(edges, attrs), MalformedGraphError);
}

TEST_CASE("load_graph rejects ragged and non-finite attributes") {
    const auto dir = test_dir();
    const auto edges = write_file(dir / "e4.txt", "0 1\n");
    REQUIRE_THROWS_AS(load_graph(edges, write_file(dir / "a4.csv", "1.0,2.0\n3.0\n")), ParseError);
    REQUIRE_THROWS_AS(load_graph(edges, write_file(dir / "a5.csv", "1.0\nnan\n")), ParseError);
    REQUIRE_THROWS_AS(load_graph(edges, write_file(dir / "a6.csv", "1.0\nfoo\n")), ParseError);
}

TEST_CASE("load_graph reads labels and infers K") {
    const auto dir = test_dir();
    const auto edges = write_file(dir / "e5.txt", "0 1\n1 2\n");
    const auto attrs = write_file(dir / "a7.csv", "1\n2\n3\n");
    const auto labels = write_file(dir / "l1.txt", "0\n1\n1\n");
    const auto g = load_graph(edges, attrs, labels);
    REQUIRE(g.true_labels.has_value());
    REQUIRE(g.label_count() == 2);
    REQUIRE_THROWS_AS(load_graph(edges, attrs, write_file(dir / "l2.txt", "0\n1\n")), ParseError);
}

TEST_CASE("sym_normalize on canonical small graphs") {
    SECTION("edgeless graph gives the identity") {
        const auto norm = sym_normalize(3, {});
        const Matrix d = norm.matrix.to_dense();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) REQUIRE(d(i, j) == Catch::Approx(i == j ? 1.0 : 0.0));
    }
    SECTION("triangle gives the constant 1/3 matrix") {
        const auto norm = sym_normalize(3, {{0, 1}, {0, 2}, {1, 2}});
        const Matrix d = norm.matrix.to_dense();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) REQUIRE(d(i, j) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    SECTION("single edge gives the constant 1/2 matrix") {
        const auto norm = sym_normalize(2, {{0, 1}});
        const Matrix d = norm.matrix.to_dense();
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) REQUIRE(d(i, j) == Catch::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("sym_normalize is symmetric with spectrum in [-1, 1]") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const auto g = random_graph(10, 2, 0.3, seed);
        const Matrix d = sym_normalize(g).matrix.to_dense();
        for (int i = 0; i < d.rows; ++i)
            for (int j = 0; j < d.cols; ++j) {
                REQUIRE(std::abs(d(i, j) - d(j, i)) <= 1e-12);
                REQUIRE(d(i, j) >= 0.0);
            }
        for (int i = 0; i < d.rows; ++i) REQUIRE(d(i, i) > 0.0);
        for (double ev : sym_eigenvalues(d)) {
            REQUIRE(ev <= 1.0 + 1e-10);
            REQUIRE(ev >= -1.0 - 1e-10);
        }
    }
}

TEST_CASE("degree_vector") {
    AttributedGraph tri;
    tri.n_nodes = 3;
    tri.attr_dim = 1;
    tri.attributes = Matrix(3, 1);
    tri.edges = {{0, 1}, {0, 2}, {1, 2}};
    REQUIRE(degree_vector(tri) == std::vector<int>{2, 2, 2});

    tri.edges.clear();
    REQUIRE(degree_vector(tri) == std::vector<int>{0, 0, 0});

    tri.edges = {{0, 1}, {1, 2}};
    REQUIRE(degree_vector(tri) == std::vector<int>{1, 2, 1});
}

TEST_CASE("generate_sbm deterministic block structure") {
    SECTION("p_in=1, p_out=0 gives disjoint cliques") {
        const auto g = generate_sbm(6, 3, 1.0, 0.0, 4, 1.0, 0.5, 42);
        REQUIRE(g.edges == std::vector<std::pair<int, int>>{{0, 1}, {2, 3}, {4, 5}});
        REQUIRE(*g.true_labels == std::vector<int>{0, 0, 1, 1, 2, 2});
    }
    SECTION("same seed reproduces the graph exactly") {
        const auto a = generate_sbm(40, 4, 0.4, 0.05, 6, 2.0, 1.0, 7);
        const auto b = generate_sbm(40, 4, 0.4, 0.05, 6, 2.0, 1.0, 7);
        REQUIRE(a.edges == b.edges);
        REQUIRE(a.attributes.data == b.attributes.data);
    }
    SECTION("indivisible n is rejected") {
        REQUIRE_THROWS_AS(generate_sbm(10, 3, 0.5, 0.1, 4, 1.0, 1.0, 0), ArgumentError);
    }
}

TEST_CASE("generate_sbm separation makes attributes clusterable") {
    const auto g = generate_sbm(150, 3, 0.3, 0.02, 16, 5.0, 1.0, 7);
    const auto km = kmeans(g.attributes, 3, 0);
    REQUIRE(acc(km.labels, *g.true_labels) >= 0.9);
}

TEST_CASE("generate_sbm edge count matches the binomial expectation") {
    const int n = 60, k = 3;
    const double p_in = 0.3, p_out = 0.05;
    const long pairs_in = 3 * (20 * 19 / 2);
    const long pairs_out = static_cast<long>(n) * (n - 1) / 2 - pairs_in;
    const double mu = pairs_in * p_in + pairs_out * p_out;
    const double var = pairs_in * p_in * (1 - p_in) + pairs_out * p_out * (1 - p_out);
    const int trials = 30;
    long total = 0;
    for (int s = 0; s < trials; ++s) total += generate_sbm(n, k, p_in, p_out, 4, 1.0, 1.0, 100 + s).num_edges();
    REQUIRE(std::abs(total - trials * mu) <= 5.0 * std::sqrt(trials * var));
}

TEST_CASE("graph json round-trip is lossless") {
    const auto dir = test_dir();
    const auto g = generate_sbm(24, 3, 0.5, 0.1, 5, 2.0, 1.0, 11);
    const auto path = (dir / "graph.json").string();
    save_graph_json(g, path);
    const auto g2 = load_graph_json(path);
    REQUIRE(g2.n_nodes == g.n_nodes);
    REQUIRE(g2.attr_dim == g.attr_dim);
    REQUIRE(g2.edges == g.edges);
    REQUIRE(g2.attributes.data == g.attributes.data);
    REQUIRE(*g2.true_labels == *g.true_labels);

    // a second serialization is byte-identical
    const auto path2 = (dir / "graph2.json").string();
    save_graph_json(g2, path2);
    std::ifstream f1(path), f2(path2);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    REQUIRE(s1 == s2);
}
