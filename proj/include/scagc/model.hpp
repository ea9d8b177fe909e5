#pragma once

#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "scagc/augment.hpp"
#include "scagc/autodiff.hpp"
#include "scagc/common.hpp"
#include "scagc/graph.hpp"

namespace scagc {

/// Layer widths. Encoder output 256 and projection output 128 are the
/// method's standard sizes; the clustering head always ends at K.
struct Widths {
    int enc_hidden = 256;
    int enc_out = 256;
    int proj_hidden = 256;
    int proj_out = 128;
    int clus_hidden = 256;
};

/// Bias-free two-layer graph convolutional encoder weights.
struct EncoderParams {
    ParamTensor omega1;  // attr_dim x enc_hidden
    ParamTensor omega2;  // enc_hidden x enc_out
};

/// Projection head (two-layer MLP to proj_out) and clustering head
/// (two-layer MLP to K), both with biases.
struct HeadParams {
    ParamTensor phi_w1, phi_b1, phi_w2, phi_b2;
    ParamTensor psi_w1, psi_b1, psi_w2, psi_b2;
};

struct ModelParams {
    EncoderParams encoder;
    HeadParams heads;
    Widths widths;
    int attr_dim = 0;
    int k = 0;
    bool second_layer_relu = true;

    std::vector<ParamTensor*> all_params() {
        return {&encoder.omega1, &encoder.omega2, &heads.phi_w1, &heads.phi_b1, &heads.phi_w2,
                &heads.phi_b2,   &heads.psi_w1,   &heads.psi_b1, &heads.psi_w2, &heads.psi_b2};
    }
    /// Parameters touched by representation pretraining (encoder + projection).
    std::vector<ParamTensor*> encoder_proj_params() {
        return {&encoder.omega1, &encoder.omega2, &heads.phi_w1, &heads.phi_b1, &heads.phi_w2,
                &heads.phi_b2};
    }
    void zero_grads() {
        for (ParamTensor* p : all_params()) p->zero_grad();
    }
};

namespace detail {

inline ParamTensor glorot(int fan_in, int fan_out, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    ParamTensor p(fan_in, fan_out);
    for (double& x : p.value.data) x = u(rng);
    return p;
}

}  // namespace detail

/// Glorot-uniform weights, zero biases; deterministic per seed.
inline ModelParams init_params(int attr_dim, const Widths& widths, int k, std::uint64_t seed,
                               bool second_layer_relu = true) {
    if (attr_dim <= 0 || k <= 0) throw ArgumentError("init_params: dimensions must be positive");
    if (widths.enc_hidden <= 0 || widths.enc_out <= 0 || widths.proj_hidden <= 0 ||
        widths.proj_out <= 0 || widths.clus_hidden <= 0)
        throw ArgumentError("init_params: widths must be positive");
    std::mt19937_64 rng(seed);
    ModelParams p;
    p.widths = widths;
    p.attr_dim = attr_dim;
    p.k = k;
    p.second_layer_relu = second_layer_relu;
    p.encoder.omega1 = detail::glorot(attr_dim, widths.enc_hidden, rng);
    p.encoder.omega2 = detail::glorot(widths.enc_hidden, widths.enc_out, rng);
    p.heads.phi_w1 = detail::glorot(widths.enc_out, widths.proj_hidden, rng);
    p.heads.phi_b1 = ParamTensor(1, widths.proj_hidden);
    p.heads.phi_w2 = detail::glorot(widths.proj_hidden, widths.proj_out, rng);
    p.heads.phi_b2 = ParamTensor(1, widths.proj_out);
    p.heads.psi_w1 = detail::glorot(widths.enc_out, widths.clus_hidden, rng);
    p.heads.psi_b1 = ParamTensor(1, widths.clus_hidden);
    p.heads.psi_w2 = detail::glorot(widths.clus_hidden, k, rng);
    p.heads.psi_b2 = ParamTensor(1, k);
    return p;
}

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

/// Parameter leaves bound once per tape; every view forward on the tape
/// shares them, which is exactly the shared-encoder weight tying.
struct ParamNodes {
    Tape::NodeId omega1, omega2;
    Tape::NodeId phi_w1, phi_b1, phi_w2, phi_b2;
    Tape::NodeId psi_w1, psi_b1, psi_w2, psi_b2;
};

inline ParamNodes bind_params(Tape& tape, ModelParams& p) {
    ParamNodes n;
    n.omega1 = tape.param(p.encoder.omega1);
    n.omega2 = tape.param(p.encoder.omega2);
    n.phi_w1 = tape.param(p.heads.phi_w1);
    n.phi_b1 = tape.param(p.heads.phi_b1);
    n.phi_w2 = tape.param(p.heads.phi_w2);
    n.phi_b2 = tape.param(p.heads.phi_b2);
    n.psi_w1 = tape.param(p.heads.psi_w1);
    n.psi_b1 = tape.param(p.heads.psi_b1);
    n.psi_w2 = tape.param(p.heads.psi_w2);
    n.psi_b2 = tape.param(p.heads.psi_b2);
    return n;
}

struct EncodeNodes {
    Tape::NodeId z_bar, z;
};

/// Two propagation-then-transform layers; ReLU after both by default, the
/// second activation can be disabled.
inline EncodeNodes encode_on_tape(Tape& tape, const GraphView& view, const ParamNodes& pn,
                                  bool second_layer_relu) {
    EncodeNodes e;
    const auto x = tape.constant(view.attributes);
    e.z_bar = tape.relu(tape.matmul(tape.spmm(view.normalized.matrix, x), pn.omega1));
    const auto pre2 = tape.matmul(tape.spmm(view.normalized.matrix, e.z_bar), pn.omega2);
    e.z = second_layer_relu ? tape.relu(pre2) : pre2;
    return e;
}

/// Projection head: two-layer MLP on top of the representation.
inline Tape::NodeId project_on_tape(Tape& tape, Tape::NodeId z, const ParamNodes& pn) {
    const auto h = tape.relu(tape.add_rowvec(tape.matmul(z, pn.phi_w1), pn.phi_b1));
    return tape.add_rowvec(tape.matmul(h, pn.phi_w2), pn.phi_b2);
}

/// Clustering head: two-layer MLP ending in a row softmax over K clusters.
inline Tape::NodeId assign_on_tape(Tape& tape, Tape::NodeId z, const ParamNodes& pn) {
    const auto h = tape.relu(tape.add_rowvec(tape.matmul(z, pn.psi_w1), pn.psi_b1));
    return tape.row_softmax(tape.add_rowvec(tape.matmul(h, pn.psi_w2), pn.psi_b2));
}

struct ForwardNodes {
    Tape::NodeId z_bar, z, m, soft;
};

inline ForwardNodes forward_on_tape(Tape& tape, const GraphView& view, const ParamNodes& pn,
                                    bool second_layer_relu) {
    const auto e = encode_on_tape(tape, view, pn, second_layer_relu);
    return ForwardNodes{e.z_bar, e.z, project_on_tape(tape, e.z, pn), assign_on_tape(tape, e.z, pn)};
}

/// Value-level encoder pass: (first-layer output, representation).
inline std::pair<Matrix, Matrix> encode(const GraphView& view, ModelParams& p) {
    Tape tape;
    const auto pn = bind_params(tape, p);
    const auto e = encode_on_tape(tape, view, pn, p.second_layer_relu);
    return {tape.value(e.z_bar), tape.value(e.z)};
}

/// Value snapshot of one forward pass.
struct ForwardOutputs {
    Matrix z_bar;        // N x enc_hidden
    Matrix z;            // N x enc_out
    Matrix m;            // N x proj_out
    Matrix soft_assign;  // N x K, row-stochastic
};

/// Projection head applied to a representation matrix (value-level helper).
inline Matrix project(const Matrix& z, ModelParams& p) {
    Tape tape;
    const auto pn = bind_params(tape, p);
    const auto zn = tape.constant(z);
    const auto h = tape.relu(tape.add_rowvec(tape.matmul(zn, pn.phi_w1), pn.phi_b1));
    return tape.value(tape.add_rowvec(tape.matmul(h, pn.phi_w2), pn.phi_b2));
}

/// Clustering head applied to a representation matrix (value-level helper).
inline Matrix assign(const Matrix& z, ModelParams& p) {
    Tape tape;
    const auto pn = bind_params(tape, p);
    const auto zn = tape.constant(z);
    const auto h = tape.relu(tape.add_rowvec(tape.matmul(zn, pn.psi_w1), pn.psi_b1));
    return tape.value(tape.row_softmax(tape.add_rowvec(tape.matmul(h, pn.psi_w2), pn.psi_b2)));
}

/// Full forward pass on the unperturbed graph.
inline ForwardOutputs forward_raw(const AttributedGraph& g, ModelParams& p) {
    if (g.attr_dim != p.attr_dim)
        throw ContractViolation("forward_raw: graph attr_dim " + std::to_string(g.attr_dim) +
                                " != model attr_dim " + std::to_string(p.attr_dim));
    Tape tape;
    const auto pn = bind_params(tape, p);
    const GraphView view = raw_view(g);
    const auto f = forward_on_tape(tape, view, pn, p.second_layer_relu);
    return ForwardOutputs{tape.value(f.z_bar), tape.value(f.z), tape.value(f.m), tape.value(f.soft)};
}

/// Row argmax; exact ties break toward the smallest cluster index.
inline std::vector<int> discretize(const Matrix& soft) {
    std::vector<int> hard(soft.rows);
    for (int i = 0; i < soft.rows; ++i) {
        const double* r = soft.row(i);
        int best = 0;
        for (int j = 1; j < soft.cols; ++j)
            if (r[j] > r[best]) best = j;
        hard[i] = best;
    }
    return hard;
}

/// Cluster labels for unseen nodes: a single forward pass on the new graph
/// followed by discretization. Never mutates the parameters.
inline std::vector<int> predict_oos(const AttributedGraph& new_graph, ModelParams& p) {
    return discretize(forward_raw(new_graph, p).soft_assign);
}

// ---------------------------------------------------------------------------
// Checkpoint serialization
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
    auto rows = nlohmann::json::array();
    for (int i = 0; i < m.rows; ++i)
        rows.push_back(std::vector<double>(m.row(i), m.row(i) + m.cols));
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array() || j.empty()) throw ParseError(std::string("checkpoint: bad matrix for ") + what);
    Matrix m(static_cast<int>(j.size()), static_cast<int>(j[0].size()));
    for (int i = 0; i < m.rows; ++i) {
        if (static_cast<int>(j[i].size()) != m.cols)
            throw ParseError(std::string("checkpoint: ragged matrix for ") + what);
        for (int c = 0; c < m.cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    if (!m.all_finite()) throw ParseError(std::string("checkpoint: non-finite entries in ") + what);
    return m;
}

}  // namespace detail

inline nlohmann::json checkpoint_to_json(const ModelParams& p) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["dims"] = {{"attr_dim", p.attr_dim},
                 {"k", p.k},
                 {"enc_hidden", p.widths.enc_hidden},
                 {"enc_out", p.widths.enc_out},
                 {"proj_hidden", p.widths.proj_hidden},
                 {"proj_out", p.widths.proj_out},
                 {"clus_hidden", p.widths.clus_hidden},
                 {"second_layer_relu", p.second_layer_relu}};
    j["omega1"] = detail::matrix_to_json(p.encoder.omega1.value);
    j["omega2"] = detail::matrix_to_json(p.encoder.omega2.value);
    j["phi"] = {{"w1", detail::matrix_to_json(p.heads.phi_w1.value)},
                {"b1", detail::matrix_to_json(p.heads.phi_b1.value)},
                {"w2", detail::matrix_to_json(p.heads.phi_w2.value)},
                {"b2", detail::matrix_to_json(p.heads.phi_b2.value)}};
    j["psi"] = {{"w1", detail::matrix_to_json(p.heads.psi_w1.value)},
                {"b1", detail::matrix_to_json(p.heads.psi_b1.value)},
                {"w2", detail::matrix_to_json(p.heads.psi_w2.value)},
                {"b2", detail::matrix_to_json(p.heads.psi_b2.value)}};
    return j;
}

inline ModelParams checkpoint_from_json(const nlohmann::json& j) {
    if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
        throw ParseError("checkpoint: unsupported format_version");
    ModelParams p;
    const auto& d = j.at("dims");
    p.attr_dim = d.at("attr_dim").get<int>();
    p.k = d.at("k").get<int>();
    p.widths.enc_hidden = d.at("enc_hidden").get<int>();
    p.widths.enc_out = d.at("enc_out").get<int>();
    p.widths.proj_hidden = d.at("proj_hidden").get<int>();
    p.widths.proj_out = d.at("proj_out").get<int>();
    p.widths.clus_hidden = d.at("clus_hidden").get<int>();
    p.second_layer_relu = d.at("second_layer_relu").get<bool>();
    p.encoder.omega1 = ParamTensor(detail::matrix_from_json(j.at("omega1"), "omega1"));
    p.encoder.omega2 = ParamTensor(detail::matrix_from_json(j.at("omega2"), "omega2"));
    const auto& phi = j.at("phi");
    p.heads.phi_w1 = ParamTensor(detail::matrix_from_json(phi.at("w1"), "phi.w1"));
    p.heads.phi_b1 = ParamTensor(detail::matrix_from_json(phi.at("b1"), "phi.b1"));
    p.heads.phi_w2 = ParamTensor(detail::matrix_from_json(phi.at("w2"), "phi.w2"));
    p.heads.phi_b2 = ParamTensor(detail::matrix_from_json(phi.at("b2"), "phi.b2"));
    const auto& psi = j.at("psi");
    p.heads.psi_w1 = ParamTensor(detail::matrix_from_json(psi.at("w1"), "psi.w1"));
    p.heads.psi_b1 = ParamTensor(detail::matrix_from_json(psi.at("b1"), "psi.b1"));
    p.heads.psi_w2 = ParamTensor(detail::matrix_from_json(psi.at("w2"), "psi.w2"));
    p.heads.psi_b2 = ParamTensor(detail::matrix_from_json(psi.at("b2"), "psi.b2"));
    return p;
}

inline void save_checkpoint(const ModelParams& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << checkpoint_to_json(p).dump() << "\n";
}

inline ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": invalid json: " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace scagc
