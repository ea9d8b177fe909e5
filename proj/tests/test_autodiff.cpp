#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "scagc/autodiff.hpp"
#include "scagc/graph.hpp"

using namespace scagc;

namespace {

Matrix random_matrix(int r, int c, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    Matrix m(r, c);
    for (double& x : m.data) x = g(rng);
    return m;
}

}  // namespace

TEST_CASE("relu values and subgradient at zero") {
    Tape tape;
    Matrix x(1, 3);
    x(0, 0) = -1.0;
    x(0, 1) = 0.0;
    x(0, 2) = 2.0;
    ParamTensor p(x);
    const auto y = tape.relu(tape.param(p));
    REQUIRE(tape.value(y)(0, 0) == 0.0);
    REQUIRE(tape.value(y)(0, 1) == 0.0);
    REQUIRE(tape.value(y)(0, 2) == 2.0);
    tape.backward(tape.sum(y));
    REQUIRE(p.grad(0, 0) == 0.0);
    REQUIRE(p.grad(0, 1) == 0.0);  // subgradient at 0 fixed to 0
    REQUIRE(p.grad(0, 2) == 1.0);
}

TEST_CASE("row_softmax") {
    Tape tape;
    Matrix x(1, 2);  // zeros
    const auto y = tape.row_softmax(tape.constant(x));
    REQUIRE(tape.value(y)(0, 0) == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(tape.value(y)(0, 1) == Catch::Approx(0.5).margin(1e-15));

    const Matrix logits = random_matrix(6, 5, 3);
    Tape t2;
    const Matrix soft = t2.value(t2.row_softmax(t2.constant(logits)));
    for (int i = 0; i < soft.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < soft.cols; ++j) {
            REQUIRE(soft(i, j) > 0.0);
            s += soft(i, j);
        }
        REQUIRE(std::abs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("cosine similarity analytic cases") {
    Matrix a(3, 2);
    a(0, 0) = 1.0;  // [1, 0]
    a(1, 1) = 1.0;  // [0, 1]
    a(2, 0) = 1.0;  // [1, 1]
    a(2, 1) = 1.0;
    Tape tape;
    const auto s = tape.cosine_sim_matrix(tape.constant(a), tape.constant(a));
    const Matrix& v = tape.value(s);
    REQUIRE(v(0, 1) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(v(0, 0) == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(v(2, 0) == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("zero rows have zero cosine similarity with everything") {
    Matrix a(2, 3);
    a(1, 0) = 2.0;  // row 0 stays zero
    Tape tape;
    const auto s = tape.cosine_sim_matrix(tape.constant(a), tape.constant(a));
    REQUIRE(tape.value(s)(0, 1) == 0.0);
    REQUIRE(tape.value(s)(0, 0) == 0.0);
}

TEST_CASE("logsumexp is overflow-safe") {
    const std::vector<double> big{1000.0, 1000.0};
    REQUIRE(logsumexp(big) == Catch::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
    const std::vector<double> mixed{-1.0, 2.0, 0.5};
    double direct = std::log(std::exp(-1.0) + std::exp(2.0) + std::exp(0.5));
    REQUIRE(logsumexp(mixed) == Catch::Approx(direct).epsilon(1e-14));
}

TEST_CASE("spmm agrees with dense multiplication") {
    const auto g = generate_sbm(24, 3, 0.5, 0.1, 4, 1.0, 1.0, 5);
    const auto norm = sym_normalize(g);
    const Matrix x = random_matrix(24, 7, 9);
    const Matrix sparse_result = spmm(norm.matrix, x);
    const Matrix dense_result = matmul(norm.matrix.to_dense(), x);
    for (size_t i = 0; i < sparse_result.size(); ++i)
        REQUIRE(std::abs(sparse_result.data[i] - dense_result.data[i]) <= 1e-12);
}

TEST_CASE("non-finite results raise a numeric error") {
    Tape tape;
    Matrix bad(1, 1);
    bad(0, 0) = -1.0;
    REQUIRE_THROWS_AS(tape.log_eps(tape.constant(bad)), NumericError);
}

TEST_CASE("grad_check on a quadratic is near machine precision") {
    ParamTensor p(random_matrix(3, 3, 1));
    auto objective = [&](bool with_grad) {
        Tape tape;
        const auto x = tape.param(p);
        const auto loss = tape.sum(tape.hadamard(x, x));
        const double v = tape.scalar(loss);
        if (with_grad) tape.backward(loss);
        return v;
    };
    REQUIRE(grad_check(objective, {&p}, 1e-5, 7) <= 1e-8);
}

TEST_CASE("grad_check on a constant objective gives zero gradients") {
    ParamTensor p(random_matrix(2, 4, 2));
    auto objective = [&](bool with_grad) {
        Tape tape;
        tape.param(p);
        const auto one = tape.constant(Matrix(1, 1, 3.5));
        if (with_grad) tape.backward(one);
        return tape.scalar(one);
    };
    REQUIRE(grad_check(objective, {&p}, 1e-5, 3) <= 1e-10);
    for (double g : p.grad.data) REQUIRE(std::abs(g) <= 1e-10);
}

TEST_CASE("grad_check across the full op catalog") {
    // A deliberately tangled composition touching every primitive.
    ParamTensor a(random_matrix(5, 4, 11));
    ParamTensor b(random_matrix(4, 5, 12));
    ParamTensor c(random_matrix(5, 5, 13));
    ParamTensor bias(random_matrix(1, 5, 14));
    const auto g = generate_sbm(5, 1, 1.0, 1.0, 2, 0.0, 1.0, 1);
    const auto norm = sym_normalize(5, {{0, 1}, {1, 2}, {3, 4}});
    Matrix mask(5, 5);
    std::mt19937_64 rng(15);
    for (double& x : mask.data) x = rng() % 2 ? 1.0 : 0.0;
    Matrix weights(5, 1);
    for (int i = 0; i < 5; ++i) weights(i, 0) = 0.3 * (i + 1);

    auto objective = [&](bool with_grad) {
        Tape tape;
        const auto na = tape.param(a);
        const auto nb = tape.param(b);
        const auto nc = tape.param(c);
        const auto nbias = tape.param(bias);
        const auto prod = tape.add_rowvec(tape.matmul(na, nb), nbias);  // 5x5
        const auto mixed = tape.add(tape.spmm(norm.matrix, prod), tape.relu(nc));
        const auto soft = tape.row_softmax(mixed);
        const auto sims = tape.cosine_sim_matrix(tape.transpose(soft), tape.matmul_nt(na, na));
        const auto lse = tape.row_logsumexp(sims, 2.0, true);
        const auto lse2 = tape.row_logsumexp(tape.scale(sims, 0.5), 1.0, false);
        const auto comb = tape.logsumexp_combine({lse, lse2});
        const auto masked = tape.masked_rowsum(sims, mask);
        const auto rho = tape.div_by_scalar(tape.col_sum(soft), tape.sum(soft));
        const auto ent = tape.sum(tape.hadamard(rho, tape.log_eps(rho, 1e-12)));
        const auto d = tape.diag(sims);
        const auto parts = tape.add(tape.dot_const(comb, weights),
                                    tape.add(tape.sum(tape.exp(tape.scale(d, 0.1))),
                                             tape.add(tape.dot_const(tape.sub(masked, d), weights), ent)));
        const double v = tape.scalar(parts);
        if (with_grad) tape.backward(parts);
        return v;
    };
    REQUIRE(grad_check(objective, {&a, &b, &c, &bias}, 1e-5, 99, 40) <= 1e-6);
}

TEST_CASE("adam zero gradient leaves the parameter unchanged") {
    ParamTensor p(random_matrix(2, 2, 4));
    const Matrix before = p.value;
    AdamState s(p);
    adam_step(p, s, 0.05);
    REQUIRE(p.value.data == before.data);
    REQUIRE(s.step_count == 1);
}

TEST_CASE("adam first step moves by -lr * sign(g)") {
    ParamTensor p(random_matrix(2, 3, 5));
    const Matrix before = p.value;
    Matrix g = random_matrix(2, 3, 6);
    p.grad = g;
    AdamState s(p);
    const double lr = 0.01;
    adam_step(p, s, lr);
    for (size_t i = 0; i < p.value.size(); ++i) {
        const double expected = before.data[i] - lr * g.data[i] / (std::abs(g.data[i]) + s.eps);
        REQUIRE(p.value.data[i] == Catch::Approx(expected).epsilon(1e-12));
        REQUIRE(p.grad.data[i] == 0.0);  // grads consumed
    }
}

TEST_CASE("adam descends against a constant gradient") {
    ParamTensor p(Matrix(1, 1, 1.0));
    AdamState s(p);
    for (int i = 0; i < 50; ++i) {
        p.grad(0, 0) = 2.5;
        adam_step(p, s, 0.01);
    }
    REQUIRE(p.value(0, 0) < 1.0 - 0.4);  // moved opposite the gradient sign
}
