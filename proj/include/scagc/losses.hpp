#pragma once

#include <vector>

#include "scagc/autodiff.hpp"
#include "scagc/common.hpp"
#include "scagc/matrix.hpp"

namespace scagc {

/// Pseudo-label group structure: for each node i, the sorted set of nodes
/// sharing i's label (including i itself).
struct ClusterIndexSets {
    std::vector<int> labels;
    std::vector<std::vector<int>> same_cluster;

    int n_nodes() const { return static_cast<int>(labels.size()); }
};

inline ClusterIndexSets build_cluster_sets(const std::vector<int>& hard) {
    ClusterIndexSets sets;
    sets.labels = hard;
    sets.same_cluster.resize(hard.size());
    for (size_t i = 0; i < hard.size(); ++i)
        for (size_t t = 0; t < hard.size(); ++t)
            if (hard[t] == hard[i]) sets.same_cluster[i].push_back(static_cast<int>(t));
    return sets;
}

/// Loss hyper-parameters and ablation switches.
struct LossConfig {
    double tau1 = 0.5;   // cluster-contrast temperature
    double tau2 = 0.5;   // node-contrast temperature
    double gamma = 1.0;  // balance-regularizer weight
    bool no_ccm = false; // drop the cluster contrast + regularizer
    bool no_ssc = false; // replace the group contrast with plain two-view contrast
    bool exclude_self_in_ccl = false;       // drop the same-view self term from the denominator
    bool literal_regularizer_sign = false;  // negate the balance regularizer
};

namespace detail {

/// The four pairwise cosine-similarity matrices between two view embeddings.
struct SimBlocks {
    Tape::NodeId s11, s12, s21, s22;
};

inline SimBlocks sim_blocks(Tape& tape, Tape::NodeId m1, Tape::NodeId m2) {
    const auto a1 = tape.l2_normalize_rows(m1);
    const auto a2 = tape.l2_normalize_rows(m2);
    SimBlocks s;
    s.s11 = tape.matmul_nt(a1, a1);
    s.s12 = tape.matmul_nt(a1, a2);
    s.s21 = tape.matmul_nt(a2, a1);
    s.s22 = tape.matmul_nt(a2, a2);
    return s;
}

}  // namespace detail

/// Self-supervised group contrastive loss over two view embeddings.
///
/// For anchor node i with pseudo-label group G_i, every (t in G_i, view
/// pair) combination is a positive except the anchor paired with itself in
/// the same view; the denominator pools all four view pairs against every
/// other node. Summed over nodes, each normalized by |G_i|.
inline Tape::NodeId ssc_loss(Tape& tape, Tape::NodeId m1, Tape::NodeId m2,
                             const ClusterIndexSets& sets, double tau2) {
    const Matrix& v1 = tape.value(m1);
    const Matrix& v2 = tape.value(m2);
    if (!(tau2 > 0.0)) throw ArgumentError("ssc_loss: tau2 must be positive");
    if (!v1.same_shape(v2)) throw ContractViolation("ssc_loss: view shapes differ");
    const int n = v1.rows;
    if (n < 2) throw ArgumentError("ssc_loss: need at least 2 nodes");
    if (sets.n_nodes() != n) throw ContractViolation("ssc_loss: label sets do not match node count");
    const double inv_t = 1.0 / tau2;

    const auto s = detail::sim_blocks(tape, m1, m2);

    Matrix mask(n, n);
    for (int i = 0; i < n; ++i)
        for (int q = 0; q < n; ++q) mask(i, q) = sets.labels[i] == sets.labels[q] ? 1.0 : 0.0;

    // positive-similarity mass per anchor, minus the two same-view self terms
    auto num = tape.add(tape.add(tape.masked_rowsum(s.s11, mask), tape.masked_rowsum(s.s12, mask)),
                        tape.add(tape.masked_rowsum(s.s21, mask), tape.masked_rowsum(s.s22, mask)));
    num = tape.sub(num, tape.add(tape.diag(s.s11), tape.diag(s.s22)));

    // shared per-anchor denominator: all four view pairs, every node but i
    const auto log_den = tape.logsumexp_combine({tape.row_logsumexp(s.s11, inv_t, true),
                                                 tape.row_logsumexp(s.s12, inv_t, true),
                                                 tape.row_logsumexp(s.s21, inv_t, true),
                                                 tape.row_logsumexp(s.s22, inv_t, true)});

    Matrix den_w(n, 1), num_w(n, 1);
    for (int i = 0; i < n; ++i) {
        const double gi = static_cast<double>(sets.same_cluster[i].size());
        den_w(i, 0) = (4.0 * gi - 2.0) / gi;
        num_w(i, 0) = -inv_t / gi;
    }
    return tape.add(tape.dot_const(log_den, std::move(den_w)), tape.dot_const(num, std::move(num_w)));
}

/// Cluster contrastive loss over assignment columns. Each cluster's column
/// in one view is pulled toward the same column in the other view and pushed
/// from all 2K columns in the denominator (the same-view self term is kept
/// unless exclude_self is set).
inline Tape::NodeId cc_loss(Tape& tape, Tape::NodeId soft1, Tape::NodeId soft2, double tau1,
                            bool exclude_self = false) {
    const Matrix& v1 = tape.value(soft1);
    const Matrix& v2 = tape.value(soft2);
    if (!(tau1 > 0.0)) throw ArgumentError("cc_loss: tau1 must be positive");
    if (v1.cols != v2.cols || v1.rows != v2.rows) throw ContractViolation("cc_loss: assignment shapes differ");
    const int k = v1.cols;
    if (exclude_self && k < 2) throw ArgumentError("cc_loss: self exclusion needs K >= 2");
    const double inv_t = 1.0 / tau1;

    const auto s = detail::sim_blocks(tape, tape.transpose(soft1), tape.transpose(soft2));

    const auto den1 = tape.logsumexp_combine(
        {tape.row_logsumexp(s.s11, inv_t, exclude_self), tape.row_logsumexp(s.s12, inv_t, false)});
    const auto den2 = tape.logsumexp_combine(
        {tape.row_logsumexp(s.s22, inv_t, exclude_self), tape.row_logsumexp(s.s21, inv_t, false)});

    const auto part1 = tape.add(tape.sum(den1), tape.scale(tape.sum(tape.diag(s.s12)), -inv_t));
    const auto part2 = tape.add(tape.sum(den2), tape.scale(tape.sum(tape.diag(s.s21)), -inv_t));
    return tape.scale(tape.add(part1, part2), 1.0 / (2.0 * k));
}

/// Cluster-balance regularizer: the negative entropy of each view's cluster
/// mass distribution. Minimized (at -log K per view) when mass spreads
/// evenly, so adding it to a minimization objective fights collapse. The
/// literal_sign variant negates it.
inline Tape::NodeId regularizer(Tape& tape, Tape::NodeId soft1, Tape::NodeId soft2,
                                bool literal_sign = false) {
    constexpr double kLogEps = 1e-12;
    auto one_view = [&](Tape::NodeId soft) {
        const auto rho = tape.div_by_scalar(tape.col_sum(soft), tape.sum(soft));
        return tape.sum(tape.hadamard(rho, tape.log_eps(rho, kLogEps)));
    };
    auto r = tape.add(one_view(soft1), one_view(soft2));
    return literal_sign ? tape.scale(r, -1.0) : r;
}

/// Plain two-view instance contrast over 2N embeddings: each anchor's
/// positive is its own other-view row; the denominator pools the other
/// 2N - 1 rows. Mean over anchors.
inline Tape::NodeId ntxent_loss(Tape& tape, Tape::NodeId m1, Tape::NodeId m2, double tau) {
    const Matrix& v1 = tape.value(m1);
    const Matrix& v2 = tape.value(m2);
    if (!(tau > 0.0)) throw ArgumentError("ntxent_loss: tau must be positive");
    if (!v1.same_shape(v2)) throw ContractViolation("ntxent_loss: view shapes differ");
    const int n = v1.rows;
    if (n < 2) throw ArgumentError("ntxent_loss: need at least 2 nodes");
    const double inv_t = 1.0 / tau;

    const auto s = detail::sim_blocks(tape, m1, m2);

    const auto den1 = tape.logsumexp_combine(
        {tape.row_logsumexp(s.s11, inv_t, true), tape.row_logsumexp(s.s12, inv_t, false)});
    const auto den2 = tape.logsumexp_combine(
        {tape.row_logsumexp(s.s22, inv_t, true), tape.row_logsumexp(s.s21, inv_t, false)});

    const auto part1 = tape.add(tape.sum(den1), tape.scale(tape.sum(tape.diag(s.s12)), -inv_t));
    const auto part2 = tape.add(tape.sum(den2), tape.scale(tape.sum(tape.diag(s.s21)), -inv_t));
    return tape.scale(tape.add(part1, part2), 1.0 / (2.0 * n));
}

/// Component nodes of the full objective; cc/reg are absent under no_ccm.
struct LossNodes {
    Tape::NodeId total = -1;
    Tape::NodeId representation = -1;  // group contrast, or its plain replacement
    Tape::NodeId cc = -1;
    Tape::NodeId reg = -1;
    bool has_ccm = false;
};

/// Full objective: representation contrast + cluster contrast + gamma *
/// balance regularizer, with the documented ablation switches.
inline LossNodes total_loss_nodes(Tape& tape, Tape::NodeId m1, Tape::NodeId m2,
                                  Tape::NodeId soft1, Tape::NodeId soft2,
                                  const ClusterIndexSets& sets, const LossConfig& cfg) {
    if (cfg.gamma < 0.0) throw ArgumentError("total_loss: gamma must be nonnegative");
    LossNodes out;
    out.representation =
        cfg.no_ssc ? ntxent_loss(tape, m1, m2, cfg.tau2) : ssc_loss(tape, m1, m2, sets, cfg.tau2);
    if (cfg.no_ccm) {
        out.total = out.representation;
        return out;
    }
    out.cc = cc_loss(tape, soft1, soft2, cfg.tau1, cfg.exclude_self_in_ccl);
    out.reg = regularizer(tape, soft1, soft2, cfg.literal_regularizer_sign);
    out.total = tape.add(out.representation, tape.add(out.cc, tape.scale(out.reg, cfg.gamma)));
    out.has_ccm = true;
    return out;
}

inline Tape::NodeId total_loss(Tape& tape, Tape::NodeId m1, Tape::NodeId m2, Tape::NodeId soft1,
                               Tape::NodeId soft2, const ClusterIndexSets& sets,
                               const LossConfig& cfg) {
    return total_loss_nodes(tape, m1, m2, soft1, soft2, sets, cfg).total;
}

// ---------------------------------------------------------------------------
// Value-level conveniences (single evaluation on a throwaway tape)
// ---------------------------------------------------------------------------

inline double ssc_loss_value(const Matrix& m1, const Matrix& m2, const ClusterIndexSets& sets,
                             double tau2) {
    Tape tape;
    return tape.scalar(ssc_loss(tape, tape.constant(m1), tape.constant(m2), sets, tau2));
}

inline double cc_loss_value(const Matrix& soft1, const Matrix& soft2, double tau1,
                            bool exclude_self = false) {
    Tape tape;
    return tape.scalar(cc_loss(tape, tape.constant(soft1), tape.constant(soft2), tau1, exclude_self));
}

inline double regularizer_value(const Matrix& soft1, const Matrix& soft2, bool literal_sign = false) {
    Tape tape;
    return tape.scalar(regularizer(tape, tape.constant(soft1), tape.constant(soft2), literal_sign));
}

inline double ntxent_loss_value(const Matrix& m1, const Matrix& m2, double tau) {
    Tape tape;
    return tape.scalar(ntxent_loss(tape, tape.constant(m1), tape.constant(m2), tau));
}

}  // namespace scagc
