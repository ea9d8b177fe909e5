#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "scagc/common.hpp"
#include "scagc/matrix.hpp"

namespace scagc {

/// Cross-tabulation of two labelings: counts[i][j] = #nodes with predicted
/// cluster i and true class j, plus marginals.
struct ContingencyTable {
    std::vector<std::vector<long>> counts;
    std::vector<long> row_marginals;
    std::vector<long> col_marginals;
    long total = 0;
};

inline ContingencyTable contingency_table(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size()) throw ContractViolation("contingency_table: length mismatch");
    if (pred.empty()) throw ArgumentError("contingency_table: empty labelings");
    const int kp = *std::max_element(pred.begin(), pred.end()) + 1;
    const int kt = *std::max_element(truth.begin(), truth.end()) + 1;
    ContingencyTable t;
    t.counts.assign(kp, std::vector<long>(kt, 0));
    t.row_marginals.assign(kp, 0);
    t.col_marginals.assign(kt, 0);
    t.total = static_cast<long>(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] < 0 || truth[i] < 0) throw ArgumentError("contingency_table: negative label");
        ++t.counts[pred[i]][truth[i]];
        ++t.row_marginals[pred[i]];
        ++t.col_marginals[truth[i]];
    }
    return t;
}

/// Minimum-cost perfect assignment on a square cost matrix (Kuhn-Munkres
/// with potentials, O(n^3)). Returns the column assigned to each row.
inline std::vector<int> hungarian(const Matrix& cost) {
    if (cost.rows != cost.cols) throw ContractViolation("hungarian: matrix not square");
    if (!cost.all_finite()) throw ContractViolation("hungarian: non-finite cost");
    const int n = cost.rows;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> assignment(n, -1);
    for (int j = 1; j <= n; ++j)
        if (match[j] > 0) assignment[match[j] - 1] = j - 1;
    return assignment;
}

namespace detail {

/// Optimal cluster-to-class mapping: Hungarian on the negated contingency
/// counts, zero-padded to square. Exact count ties prefer the identity
/// mapping (a vanishing off-diagonal penalty breaks them deterministically).
inline std::vector<int> best_label_mapping(const ContingencyTable& t) {
    const int k = static_cast<int>(std::max(t.counts.size(), t.col_marginals.size()));
    Matrix cost(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            const long c = (i < static_cast<int>(t.counts.size()) && j < static_cast<int>(t.col_marginals.size()))
                               ? t.counts[i][j]
                               : 0;
            cost(i, j) = -static_cast<double>(c) + (i == j ? 0.0 : 1e-6);
        }
    return hungarian(cost);
}

}  // namespace detail

/// Clustering accuracy: the best fraction of correctly mapped nodes over
/// all cluster-to-class assignments.
inline double acc(const std::vector<int>& pred, const std::vector<int>& truth) {
    const auto t = contingency_table(pred, truth);
    const auto mapping = detail::best_label_mapping(t);
    long correct = 0;
    for (size_t i = 0; i < t.counts.size(); ++i) {
        const int j = mapping[i];
        if (j < static_cast<int>(t.col_marginals.size())) correct += t.counts[i][j];
    }
    return static_cast<double>(correct) / static_cast<double>(t.total);
}

/// Normalized mutual information with geometric-mean normalization
/// (arithmetic-mean variant available for cross-toolkit comparison).
inline double nmi(const std::vector<int>& pred, const std::vector<int>& truth,
                  bool arithmetic_mean = false) {
    const auto t = contingency_table(pred, truth);
    const double n = static_cast<double>(t.total);
    double hp = 0.0, ht = 0.0, mi = 0.0;
    for (long a : t.row_marginals)
        if (a > 0) hp -= (a / n) * std::log(a / n);
    for (long b : t.col_marginals)
        if (b > 0) ht -= (b / n) * std::log(b / n);
    if (hp == 0.0 && ht == 0.0) return 1.0;  // both single-cluster
    if (hp == 0.0 || ht == 0.0) return 0.0;
    for (size_t i = 0; i < t.counts.size(); ++i)
        for (size_t j = 0; j < t.counts[i].size(); ++j) {
            const long c = t.counts[i][j];
            if (c == 0) continue;
            mi += (c / n) * std::log(n * c / (static_cast<double>(t.row_marginals[i]) * t.col_marginals[j]));
        }
    const double denom = arithmetic_mean ? 0.5 * (hp + ht) : std::sqrt(hp * ht);
    return std::clamp(mi / denom, 0.0, 1.0);
}

/// Adjusted Rand index via the pair-counting contingency formula.
inline double ari(const std::vector<int>& pred, const std::vector<int>& truth) {
    const auto t = contingency_table(pred, truth);
    auto choose2 = [](long x) { return 0.5 * static_cast<double>(x) * (x - 1); };
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& row : t.counts)
        for (long c : row) sum_ij += choose2(c);
    for (long a : t.row_marginals) sum_a += choose2(a);
    for (long b : t.col_marginals) sum_b += choose2(b);
    const double pairs = choose2(t.total);
    const double expected = sum_a * sum_b / pairs;
    const double maximum = 0.5 * (sum_a + sum_b);
    if (maximum == expected) return 1.0;  // both partitions trivial
    return (sum_ij - expected) / (maximum - expected);
}

/// Macro-averaged F1 after the optimal cluster-to-class mapping. A true
/// class that receives no mapped predictions contributes F1 = 0.
inline double macro_f1(const std::vector<int>& pred, const std::vector<int>& truth) {
    const auto t = contingency_table(pred, truth);
    const auto mapping = detail::best_label_mapping(t);
    const int kt = static_cast<int>(t.col_marginals.size());
    std::vector<int> mapped(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) mapped[i] = mapping[pred[i]];
    double f1_sum = 0.0;
    for (int c = 0; c < kt; ++c) {
        long tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < pred.size(); ++i) {
            const bool p = mapped[i] == c, g = truth[i] == c;
            tp += p && g;
            fp += p && !g;
            fn += !p && g;
        }
        if (tp == 0) continue;  // precision or recall zero -> F1 zero
        const double precision = static_cast<double>(tp) / (tp + fp);
        const double recall = static_cast<double>(tp) / (tp + fn);
        f1_sum += 2.0 * precision * recall / (precision + recall);
    }
    return f1_sum / kt;
}

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

struct KMeansResult {
    std::vector<int> labels;
    Matrix centroids;                    // k x d
    double inertia = 0.0;                // final sum of squared distances
    std::vector<double> inertia_history; // one entry per Lloyd iteration
};

namespace detail {

inline double sq_dist(const double* a, const double* b, int d) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
        const double diff = a[j] - b[j];
        s += diff * diff;
    }
    return s;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are re-seeded
/// to the point farthest from its assigned centroid. Runs to an assignment
/// fixpoint or max_iters; deterministic for a fixed seed.
inline KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, int max_iters = 100) {
    const int n = points.rows, d = points.cols;
    if (k <= 0) throw ArgumentError("kmeans: k must be positive");
    if (n < k) throw ArgumentError("kmeans: fewer points than clusters");

    std::mt19937_64 rng(seed);
    Matrix centroids(k, d);

    // k-means++ seeding
    std::uniform_int_distribution<int> first(0, n - 1);
    int c0 = first(rng);
    for (int j = 0; j < d; ++j) centroids(0, j) = points(c0, j);
    std::vector<double> d2(n);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int cc = 0; cc < c; ++cc)
                best = std::min(best, detail::sq_dist(points.row(i), centroids.row(cc), d));
            d2[i] = best;
            total += best;
        }
        int pick;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double r = u(rng), acc = 0.0;
            pick = n - 1;
            for (int i = 0; i < n; ++i) {
                acc += d2[i];
                if (r <= acc) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = first(rng);  // all remaining points coincide with a centroid
        }
        for (int j = 0; j < d; ++j) centroids(c, j) = points(pick, j);
    }

    KMeansResult res;
    res.labels.assign(n, -1);
    std::vector<long> counts(k);
    for (int iter = 0; iter < max_iters; ++iter) {
        // assignment step
        bool changed = false;
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) {
            int best_c = 0;
            double best = detail::sq_dist(points.row(i), centroids.row(0), d);
            for (int c = 1; c < k; ++c) {
                const double dist = detail::sq_dist(points.row(i), centroids.row(c), d);
                if (dist < best) {
                    best = dist;
                    best_c = c;
                }
            }
            if (res.labels[i] != best_c) changed = true;
            res.labels[i] = best_c;
            inertia += best;
        }
        res.inertia_history.push_back(inertia);
        res.inertia = inertia;
        if (!changed && iter > 0) break;

        // update step: means of nonempty clusters
        centroids = Matrix(k, d);
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i) {
            ++counts[res.labels[i]];
            const double* p = points.row(i);
            double* c = centroids.row(res.labels[i]);
            for (int j = 0; j < d; ++j) c[j] += p[j];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            double* row = centroids.row(c);
            for (int j = 0; j < d; ++j) row[j] /= static_cast<double>(counts[c]);
        }
        // empty clusters grab the point farthest from its assigned centroid
        std::vector<char> taken(n, 0);
        for (int c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            int far_i = -1;
            double far = -1.0;
            for (int i = 0; i < n; ++i) {
                if (taken[i]) continue;
                const double dist = detail::sq_dist(points.row(i), centroids.row(res.labels[i]), d);
                if (dist > far) {
                    far = dist;
                    far_i = i;
                }
            }
            taken[far_i] = 1;
            for (int j = 0; j < d; ++j) centroids(c, j) = points(far_i, j);
        }
    }
    return res;
}

}  // namespace scagc
