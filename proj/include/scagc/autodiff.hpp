#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "scagc/common.hpp"
#include "scagc/matrix.hpp"

namespace scagc {

/// A trainable tensor: value plus the accumulated gradient of the current
/// scalar objective. Shapes always match.
struct ParamTensor {
    Matrix value;
    Matrix grad;

    ParamTensor() = default;
    explicit ParamTensor(Matrix v) : value(std::move(v)), grad(value.rows, value.cols) {}
    ParamTensor(int r, int c) : value(r, c), grad(r, c) {}

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

/// Numerically stable log(sum(exp(x))).
inline double logsumexp(std::span<const double> xs) {
    if (xs.empty()) throw ArgumentError("logsumexp: empty input");
    double m = xs[0];
    for (double x : xs) m = std::max(m, x);
    if (!std::isfinite(m)) return m;  // all -inf, or a stray inf propagates
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

// ---------------------------------------------------------------------------
// Reverse-mode tape
// ---------------------------------------------------------------------------

/// Records a sequence of matrix operations during a forward pass and replays
/// their adjoints in reverse order. One tape serves one forward/backward
/// pass; independent tapes are independent. Every operation validates that
/// its output is finite and throws NumericError otherwise.
class Tape {
public:
    using NodeId = int;

    /// Leaf holding a constant (gradient is tracked but discarded).
    NodeId constant(Matrix v) { return make_leaf(std::move(v), nullptr); }

    /// Leaf bound to an external parameter; backward() accumulates into
    /// the parameter's grad.
    NodeId param(ParamTensor& p) { return make_leaf(p.value, &p); }

    const Matrix& value(NodeId id) const { return nodes_[id].value; }
    const Matrix& grad(NodeId id) const { return nodes_[id].grad; }

    double scalar(NodeId id) const {
        const Matrix& v = nodes_[id].value;
        if (v.rows != 1 || v.cols != 1) throw ContractViolation("scalar: node is not 1x1");
        return v.data[0];
    }

    // -- differentiable primitives ------------------------------------------

    NodeId matmul(NodeId a, NodeId b) {
        const Matrix& va = val(a);
        const Matrix& vb = val(b);
        Matrix out;
        gemm_nn(va, vb, out);
        return make(std::move(out), [a, b](Tape& t, const Node& n) {
            gemm_nt(n.grad, t.val(b), t.gr(a), true);
            gemm_tn(t.val(a), n.grad, t.gr(b), true);
        });
    }

    /// C = A * B^T.
    NodeId matmul_nt(NodeId a, NodeId b) {
        Matrix out;
        gemm_nt(val(a), val(b), out);
        return make(std::move(out), [a, b](Tape& t, const Node& n) {
            gemm_nn(n.grad, t.val(b), t.gr(a), true);
            gemm_tn(n.grad, t.val(a), t.gr(b), true);
        });
    }

    /// Y = S * X for a constant symmetric sparse operator S.
    NodeId spmm(const CsrMatrix& s, NodeId x) {
        Matrix out = scagc::spmm(s, val(x));
        return make(std::move(out), [s, x](Tape& t, const Node& n) {
            // S symmetric, so the adjoint reuses S itself.
            spmm_acc(s, n.grad, t.gr(x));
        });
    }

    NodeId add(NodeId a, NodeId b) {
        const Matrix& va = val(a);
        const Matrix& vb = val(b);
        if (!va.same_shape(vb)) throw ContractViolation("add: shape mismatch");
        Matrix out = va;
        for (size_t i = 0; i < out.size(); ++i) out.data[i] += vb.data[i];
        return make(std::move(out), [a, b](Tape& t, const Node& n) {
            accum(t.gr(a), n.grad);
            accum(t.gr(b), n.grad);
        });
    }

    NodeId sub(NodeId a, NodeId b) {
        const Matrix& va = val(a);
        const Matrix& vb = val(b);
        if (!va.same_shape(vb)) throw ContractViolation("sub: shape mismatch");
        Matrix out = va;
        for (size_t i = 0; i < out.size(); ++i) out.data[i] -= vb.data[i];
        return make(std::move(out), [a, b](Tape& t, const Node& n) {
            accum(t.gr(a), n.grad);
            for (size_t i = 0; i < n.grad.size(); ++i) t.gr(b).data[i] -= n.grad.data[i];
        });
    }

    /// Broadcast add of a 1 x C row vector to every row of an R x C matrix.
    NodeId add_rowvec(NodeId a, NodeId bvec) {
        const Matrix& va = val(a);
        const Matrix& vb = val(bvec);
        if (vb.rows != 1 || vb.cols != va.cols) throw ContractViolation("add_rowvec: bias must be 1 x cols");
        Matrix out = va;
        for (int i = 0; i < out.rows; ++i) {
            double* r = out.row(i);
            for (int j = 0; j < out.cols; ++j) r[j] += vb.data[j];
        }
        return make(std::move(out), [a, bvec](Tape& t, const Node& n) {
            accum(t.gr(a), n.grad);
            Matrix& gb = t.gr(bvec);
            for (int i = 0; i < n.grad.rows; ++i) {
                const double* r = n.grad.row(i);
                for (int j = 0; j < n.grad.cols; ++j) gb.data[j] += r[j];
            }
        });
    }

    NodeId scale(NodeId a, double c) {
        Matrix out = val(a);
        for (double& x : out.data) x *= c;
        return make(std::move(out), [a, c](Tape& t, const Node& n) {
            Matrix& ga = t.gr(a);
            for (size_t i = 0; i < n.grad.size(); ++i) ga.data[i] += c * n.grad.data[i];
        });
    }

    /// max(x, 0); the subgradient at exactly 0 is fixed to 0.
    NodeId relu(NodeId a) {
        Matrix out = val(a);
        for (double& x : out.data) x = x > 0.0 ? x : 0.0;
        return make(std::move(out), [a](Tape& t, const Node& n) {
            Matrix& ga = t.gr(a);
            const Matrix& va = t.val(a);
            for (size_t i = 0; i < n.grad.size(); ++i)
                if (va.data[i] > 0.0) ga.data[i] += n.grad.data[i];
        });
    }

    /// Softmax applied independently to each row (max-shifted).
    NodeId row_softmax(NodeId a) {
        Matrix out = val(a);
        for (int i = 0; i < out.rows; ++i) {
            double* r = out.row(i);
            double m = r[0];
            for (int j = 1; j < out.cols; ++j) m = std::max(m, r[j]);
            double s = 0.0;
            for (int j = 0; j < out.cols; ++j) {
                r[j] = std::exp(r[j] - m);
                s += r[j];
            }
            for (int j = 0; j < out.cols; ++j) r[j] /= s;
        }
        return make(std::move(out), [a](Tape& t, const Node& n) {
            Matrix& ga = t.gr(a);
            for (int i = 0; i < n.value.rows; ++i) {
                const double* y = n.value.row(i);
                const double* gy = n.grad.row(i);
                double dot = 0.0;
                for (int j = 0; j < n.value.cols; ++j) dot += y[j] * gy[j];
                double* gx = ga.row(i);
                for (int j = 0; j < n.value.cols; ++j) gx[j] += y[j] * (gy[j] - dot);
            }
        });
    }

    /// Rows scaled to unit L2 norm; rows with norm below `eps` are divided
    /// by `eps` instead, so an all-zero row stays all-zero.
    NodeId l2_normalize_rows(NodeId a, double eps = 1e-12) {
        const Matrix& va = val(a);
        Matrix out = va;
        std::vector<double> norms(va.rows);
        for (int i = 0; i < va.rows; ++i) {
            const double* r = va.row(i);
            double s = 0.0;
            for (int j = 0; j < va.cols; ++j) s += r[j] * r[j];
            norms[i] = std::sqrt(s);
            const double d = std::max(norms[i], eps);
            double* o = out.row(i);
            for (int j = 0; j < va.cols; ++j) o[j] /= d;
        }
        return make(std::move(out), [a, eps, norms = std::move(norms)](Tape& t, const Node& n) {
            Matrix& ga = t.gr(a);
            const Matrix& va = t.val(a);
            for (int i = 0; i < va.rows; ++i) {
                const double* x = va.row(i);
                const double* gy = n.grad.row(i);
                double* gx = ga.row(i);
                const double nm = norms[i];
                if (nm <= eps) {
                    for (int j = 0; j < va.cols; ++j) gx[j] += gy[j] / eps;
                    continue;
                }
                double dot = 0.0;
                for (int j = 0; j < va.cols; ++j) dot += x[j] * gy[j];
                const double inv = 1.0 / nm, inv3 = inv * inv * inv;
                for (int j = 0; j < va.cols; ++j) gx[j] += gy[j] * inv - x[j] * dot * inv3;
            }
        });
    }

    /// Pairwise cosine similarities between the rows of two matrices:
    /// unit-normalize rows, then multiply against the transpose.
    NodeId cosine_sim_matrix(NodeId a, NodeId b) {
        if (val(a).cols != val(b).cols) throw ContractViolation("cosine_sim_matrix: column mismatch");
        return matmul_nt(l2_normalize_rows(a), l2_normalize_rows(b));
    }

    NodeId transpose(NodeId a) {
        return make(transposed(val(a)), [a](Tape& t, const Node& n) {
            Matrix& ga = t.gr(a);
            for (int i = 0; i < n.grad.rows; ++i)
                for (int j = 0; j < n.grad.cols; ++j) ga(j, i) += n.grad(i, j);
        });
    }

    /// Diagonal of a square matrix, as an N x 1 column.
    NodeId diag(NodeId a) {
        const Matrix& va = val(a);
        if (va.rows != va.cols) throw ContractViolation("diag: matrix not square");
        Matrix out(va.rows, 1);
        for (int i = 0; i < va.rows; ++i) out(i, 0) = va(i, i);
        return make(std::move(out), [a](Tape& t, const Node& n) {
            Matrix& ga = t.gr(a);
            for (int i = 0; i < n.grad.rows; ++i) ga(i, i) += n.grad(i, 0);
        });
    }

    /// Row-wise masked sum: out[i] = sum_j mask[i,j] * a[i,j] for a constant
    /// 0/1 mask. Returns an N x 1 column.
    NodeId masked_rowsum(NodeId a, Matrix mask) {
        const Matrix& va = val(a);
        if (!va.same_shape(mask)) throw ContractViolation("masked_rowsum: mask shape mismatch");
        Matrix out(va.rows, 1);
        for (int i = 0; i < va.rows; ++i) {
            const double* r = va.row(i);
            const double* m = mask.row(i);
            double s = 0.0;
            for (int j = 0; j < va.cols; ++j) s += m[j] * r[j];
            out(i, 0) = s;
        }
        return make(std::move(out), [a, mask = std::move(mask)](Tape& t, const Node& n) {
            Matrix& ga = t.gr(a);
            for (int i = 0; i < mask.rows; ++i) {
                const double g = n.grad(i, 0);
                const double* m = mask.row(i);
                double* gr = ga.row(i);
                for (int j = 0; j < mask.cols; ++j) gr[j] += g * m[j];
            }
        });
    }

    /// out[i] = log sum_j exp(a[i,j] * inv_temp), optionally excluding the
    /// diagonal entry (requires a square matrix in that case). Max-shifted.
    NodeId row_logsumexp(NodeId a, double inv_temp, bool exclude_diag) {
        const Matrix& va = val(a);
        if (exclude_diag && va.rows != va.cols)
            throw ContractViolation("row_logsumexp: diagonal exclusion needs a square matrix");
        if (exclude_diag && va.cols < 2)
            throw ArgumentError("row_logsumexp: no off-diagonal entries to sum");
        Matrix out(va.rows, 1);
        for (int i = 0; i < va.rows; ++i) {
            const double* r = va.row(i);
            double m = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < va.cols; ++j)
                if (!(exclude_diag && j == i)) m = std::max(m, r[j] * inv_temp);
            double s = 0.0;
            for (int j = 0; j < va.cols; ++j)
                if (!(exclude_diag && j == i)) s += std::exp(r[j] * inv_temp - m);
            out(i, 0) = m + std::log(s);
        }
        return make(std::move(out), [a, inv_temp, exclude_diag](Tape& t, const Node& n) {
            Matrix& ga = t.gr(a);
            const Matrix& va = t.val(a);
            for (int i = 0; i < va.rows; ++i) {
                const double g = n.grad(i, 0);
                if (g == 0.0) continue;
                const double lse = n.value(i, 0);
                const double* r = va.row(i);
                double* gr = ga.row(i);
                for (int j = 0; j < va.cols; ++j)
                    if (!(exclude_diag && j == i)) gr[j] += g * inv_temp * std::exp(r[j] * inv_temp - lse);
            }
        });
    }

    /// Elementwise log-sum-exp across several same-shaped nodes:
    /// out[i] = log sum_k exp(v_k[i]).
    NodeId logsumexp_combine(const std::vector<NodeId>& parts) {
        if (parts.empty()) throw ArgumentError("logsumexp_combine: no inputs");
        const Matrix& v0 = val(parts[0]);
        for (NodeId p : parts)
            if (!val(p).same_shape(v0)) throw ContractViolation("logsumexp_combine: shape mismatch");
        Matrix out = v0;
        for (size_t i = 0; i < out.size(); ++i) {
            double m = val(parts[0]).data[i];
            for (NodeId p : parts) m = std::max(m, val(p).data[i]);
            double s = 0.0;
            for (NodeId p : parts) s += std::exp(val(p).data[i] - m);
            out.data[i] = m + std::log(s);
        }
        return make(std::move(out), [parts](Tape& t, const Node& n) {
            for (NodeId p : parts) {
                Matrix& gp = t.gr(p);
                const Matrix& vp = t.val(p);
                for (size_t i = 0; i < n.grad.size(); ++i)
                    gp.data[i] += n.grad.data[i] * std::exp(vp.data[i] - n.value.data[i]);
            }
        });
    }

    /// Sum of all entries, as a 1 x 1 node.
    NodeId sum(NodeId a) {
        double s = 0.0;
        for (double x : val(a).data) s += x;
        Matrix out(1, 1);
        out.data[0] = s;
        return make(std::move(out), [a](Tape& t, const Node& n) {
            Matrix& ga = t.gr(a);
            for (double& g : ga.data) g += n.grad.data[0];
        });
    }

    /// Weighted sum with constant weights, as a 1 x 1 node.
    NodeId dot_const(NodeId a, Matrix weights) {
        const Matrix& va = val(a);
        if (!va.same_shape(weights)) throw ContractViolation("dot_const: weight shape mismatch");
        double s = 0.0;
        for (size_t i = 0; i < va.size(); ++i) s += va.data[i] * weights.data[i];
        Matrix out(1, 1);
        out.data[0] = s;
        return make(std::move(out), [a, weights = std::move(weights)](Tape& t, const Node& n) {
            Matrix& ga = t.gr(a);
            for (size_t i = 0; i < ga.size(); ++i) ga.data[i] += n.grad.data[0] * weights.data[i];
        });
    }

    /// Elementwise product.
    NodeId hadamard(NodeId a, NodeId b) {
        const Matrix& va = val(a);
        const Matrix& vb = val(b);
        if (!va.same_shape(vb)) throw ContractViolation("hadamard: shape mismatch");
        Matrix out = va;
        for (size_t i = 0; i < out.size(); ++i) out.data[i] *= vb.data[i];
        return make(std::move(out), [a, b](Tape& t, const Node& n) {
            Matrix& ga = t.gr(a);
            Matrix& gb = t.gr(b);
            const Matrix& va = t.val(a);
            const Matrix& vb = t.val(b);
            for (size_t i = 0; i < n.grad.size(); ++i) {
                ga.data[i] += n.grad.data[i] * vb.data[i];
                gb.data[i] += n.grad.data[i] * va.data[i];
            }
        });
    }

    /// Elementwise log(x + eps).
    NodeId log_eps(NodeId a, double eps = 0.0) {
        Matrix out = val(a);
        for (double& x : out.data) x = std::log(x + eps);
        return make(std::move(out), [a, eps](Tape& t, const Node& n) {
            Matrix& ga = t.gr(a);
            const Matrix& va = t.val(a);
            for (size_t i = 0; i < ga.size(); ++i) ga.data[i] += n.grad.data[i] / (va.data[i] + eps);
        });
    }

    /// Elementwise exp(x).
    NodeId exp(NodeId a) {
        Matrix out = val(a);
        for (double& x : out.data) x = std::exp(x);
        return make(std::move(out), [a](Tape& t, const Node& n) {
            Matrix& ga = t.gr(a);
            for (size_t i = 0; i < ga.size(); ++i) ga.data[i] += n.grad.data[i] * n.value.data[i];
        });
    }

    /// Column sums as a 1 x C row.
    NodeId col_sum(NodeId a) {
        const Matrix& va = val(a);
        Matrix out(1, va.cols);
        for (int i = 0; i < va.rows; ++i) {
            const double* r = va.row(i);
            for (int j = 0; j < va.cols; ++j) out.data[j] += r[j];
        }
        return make(std::move(out), [a](Tape& t, const Node& n) {
            Matrix& ga = t.gr(a);
            for (int i = 0; i < ga.rows; ++i) {
                double* gr = ga.row(i);
                for (int j = 0; j < ga.cols; ++j) gr[j] += n.grad.data[j];
            }
        });
    }

    /// Elementwise division by a 1 x 1 scalar node.
    NodeId div_by_scalar(NodeId a, NodeId s) {
        const Matrix& vs = val(s);
        if (vs.rows != 1 || vs.cols != 1) throw ContractViolation("div_by_scalar: divisor is not 1x1");
        const double d = vs.data[0];
        Matrix out = val(a);
        for (double& x : out.data) x /= d;
        return make(std::move(out), [a, s, d](Tape& t, const Node& n) {
            Matrix& ga = t.gr(a);
            Matrix& gs = t.gr(s);
            double acc_s = 0.0;
            for (size_t i = 0; i < ga.size(); ++i) {
                ga.data[i] += n.grad.data[i] / d;
                acc_s -= n.grad.data[i] * n.value.data[i] / d;
            }
            gs.data[0] += acc_s;
        });
    }

    // -- reverse pass ---------------------------------------------------------

    /// Backpropagates from a 1 x 1 root; parameter leaves accumulate into
    /// their bound ParamTensor grads.
    void backward(NodeId root) {
        Matrix& rv = nodes_[root].value;
        if (rv.rows != 1 || rv.cols != 1) throw ContractViolation("backward: root is not scalar");
        nodes_[root].grad.data[0] = 1.0;
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.back) n.back(*this, n);
        }
        for (Node& n : nodes_) {
            if (!n.bound) continue;
            for (size_t i = 0; i < n.grad.size(); ++i) n.bound->grad.data[i] += n.grad.data[i];
        }
    }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void(Tape&, const Node&)> back;
        ParamTensor* bound = nullptr;
    };

    const Matrix& val(NodeId id) const { return nodes_[id].value; }
    Matrix& gr(NodeId id) { return nodes_[id].grad; }

    static void accum(Matrix& dst, const Matrix& src) {
        for (size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
    }

    NodeId make_leaf(Matrix v, ParamTensor* bound) {
        Node n;
        n.value = std::move(v);
        n.grad = Matrix(n.value.rows, n.value.cols);
        n.bound = bound;
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size()) - 1;
    }

    NodeId make(Matrix v, std::function<void(Tape&, const Node&)> back) {
        if (!v.all_finite()) throw NumericError("tape: non-finite result");
        Node n;
        n.value = std::move(v);
        n.grad = Matrix(n.value.rows, n.value.cols);
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size()) - 1;
    }

    std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

/// Per-parameter Adam accumulator state.
struct AdamState {
    Matrix first_moment;
    Matrix second_moment;
    long step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    explicit AdamState(const ParamTensor& p)
        : first_moment(p.value.rows, p.value.cols), second_moment(p.value.rows, p.value.cols) {}
};

/// One bias-corrected Adam update; the gradient is consumed (zeroed).
inline void adam_step(ParamTensor& p, AdamState& s, double lr) {
    if (!p.value.same_shape(s.first_moment)) throw ContractViolation("adam_step: state shape mismatch");
    s.step_count += 1;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step_count));
    for (size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad.data[i];
        double& m = s.first_moment.data[i];
        double& v = s.second_moment.data[i];
        m = s.beta1 * m + (1.0 - s.beta1) * g;
        v = s.beta2 * v + (1.0 - s.beta2) * g * g;
        p.value.data[i] -= lr * (m / bc1) / (std::sqrt(v / bc2) + s.eps);
    }
    p.zero_grad();
}

// ---------------------------------------------------------------------------
// Finite-difference validation
// ---------------------------------------------------------------------------

/// Compares reverse-mode gradients against central finite differences on a
/// random sample of coordinates per parameter. `objective(true)` must
/// evaluate the loss and accumulate parameter gradients; `objective(false)`
/// must evaluate the loss only. Returns the max relative error
/// |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
inline double grad_check(const std::function<double(bool)>& objective,
                         const std::vector<ParamTensor*>& params, double h, std::uint64_t seed,
                         int coords_per_param = 50) {
    if (!(h > 0.0)) throw ArgumentError("grad_check: h must be positive");
    for (ParamTensor* p : params) p->zero_grad();
    const double base = objective(true);
    if (!std::isfinite(base)) throw NumericError("grad_check: non-finite objective");

    std::vector<Matrix> ad_grads;
    ad_grads.reserve(params.size());
    for (ParamTensor* p : params) ad_grads.push_back(p->grad);

    std::mt19937_64 rng(seed);
    double max_rel = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        ParamTensor& p = *params[pi];
        const size_t total = p.value.size();
        std::vector<size_t> coords;
        if (total <= static_cast<size_t>(coords_per_param)) {
            coords.resize(total);
            for (size_t i = 0; i < total; ++i) coords[i] = i;
        } else {
            std::uniform_int_distribution<size_t> pick(0, total - 1);
            for (int i = 0; i < coords_per_param; ++i) coords.push_back(pick(rng));
        }
        for (size_t c : coords) {
            const double saved = p.value.data[c];
            p.value.data[c] = saved + h;
            const double fp = objective(false);
            p.value.data[c] = saved - h;
            const double fm = objective(false);
            p.value.data[c] = saved;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw NumericError("grad_check: non-finite objective at probe point");
            const double g_fd = (fp - fm) / (2.0 * h);
            const double g_ad = ad_grads[pi].data[c];
            const double rel = std::abs(g_ad - g_fd) / std::max({1.0, std::abs(g_ad), std::abs(g_fd)});
            max_rel = std::max(max_rel, rel);
        }
    }
    for (size_t pi = 0; pi < params.size(); ++pi) params[pi]->grad = ad_grads[pi];
    return max_rel;
}

}  // namespace scagc
