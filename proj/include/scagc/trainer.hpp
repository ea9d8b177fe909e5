#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "scagc/augment.hpp"
#include "scagc/autodiff.hpp"
#include "scagc/common.hpp"
#include "scagc/graph.hpp"
#include "scagc/losses.hpp"
#include "scagc/metrics.hpp"
#include "scagc/model.hpp"

namespace scagc {

enum class InitLabels { forward_argmax, kmeans_on_m };

/// Everything a training run needs. Defaults are the working desk-scale
/// configuration; all fields are overridable from the run-config JSON.
struct TrainConfig {
    int k = 0;  // cluster count, required
    double tau1 = 0.5;
    double tau2 = 0.5;
    double gamma = 1.0;
    double lr = 1e-3;
    int t_max = 400;
    int pretrain_steps = 200;
    int label_refresh_period = 5;
    Widths widths;
    bool second_layer_relu = true;
    AugmentationSpec aug_view1;
    AugmentationSpec aug_view2;
    std::uint64_t seed = 0;
    bool no_ccm = false;
    bool no_ssc = false;
    bool exclude_self_in_ccl = false;
    bool literal_regularizer_sign = false;
    InitLabels init_labels = InitLabels::kmeans_on_m;

    LossConfig loss_config() const {
        LossConfig c;
        c.tau1 = tau1;
        c.tau2 = tau2;
        c.gamma = gamma;
        c.no_ccm = no_ccm;
        c.no_ssc = no_ssc;
        c.exclude_self_in_ccl = exclude_self_in_ccl;
        c.literal_regularizer_sign = literal_regularizer_sign;
        return c;
    }

    void validate() const {
        if (k < 2) throw ArgumentError("config: k must be >= 2");
        if (!(tau1 > 0.0) || !(tau2 > 0.0)) throw ArgumentError("config: temperatures must be positive");
        if (gamma < 0.0) throw ArgumentError("config: gamma must be nonnegative");
        if (!(lr > 0.0)) throw ArgumentError("config: lr must be positive");
        if (t_max < 0 || pretrain_steps < 0) throw ArgumentError("config: step counts must be nonnegative");
        if (label_refresh_period < 1) throw ArgumentError("config: label_refresh_period must be >= 1");
    }
};

/// One training step's record. acc/nmi are NaN except on refresh steps of
/// runs with ground-truth labels.
struct StepRecord {
    int step = 0;
    double total = 0.0;
    double sgc = 0.0;
    double cc = 0.0;
    double reg = 0.0;
    double acc = std::numeric_limits<double>::quiet_NaN();
    double nmi = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    ModelParams params;
    std::vector<int> labels;
    std::vector<StepRecord> history;
};

namespace detail {

// Seed streams: 1 = parameter init, 2 = pretraining views, 3 = training
// views, 4 = k-means label init.
inline std::uint64_t view_seed(std::uint64_t master, int stream, int step, int view) {
    return mix_seed(master, static_cast<std::uint64_t>(stream), static_cast<std::uint64_t>(step),
                    static_cast<std::uint64_t>(view));
}

}  // namespace detail

/// Pseudo labels from the current model: discretized raw-graph assignment.
inline std::vector<int> refresh_pseudo_labels(const AttributedGraph& g, ModelParams& params) {
    return discretize(forward_raw(g, params).soft_assign);
}

/// Representation pretraining: plain two-view contrast on the projection
/// output. Only the encoder and projection head receive updates; the
/// clustering head is untouched. Per-step losses go to `loss_history` when
/// given.
inline ModelParams pretrain(const AttributedGraph& g, const TrainConfig& cfg,
                            std::vector<double>* loss_history = nullptr) {
    cfg.validate();
    ModelParams params = init_params(g.attr_dim, cfg.widths, cfg.k, detail::view_seed(cfg.seed, 1, 0, 0),
                                     cfg.second_layer_relu);
    auto trainable = params.encoder_proj_params();
    std::vector<AdamState> states;
    for (ParamTensor* p : trainable) states.emplace_back(*p);

    for (int step = 1; step <= cfg.pretrain_steps; ++step) {
        try {
            const GraphView v1 = sample_view(g, cfg.aug_view1, detail::view_seed(cfg.seed, 2, step, 1));
            const GraphView v2 = sample_view(g, cfg.aug_view2, detail::view_seed(cfg.seed, 2, step, 2));
            Tape tape;
            const auto pn = bind_params(tape, params);
            const auto e1 = encode_on_tape(tape, v1, pn, cfg.second_layer_relu);
            const auto e2 = encode_on_tape(tape, v2, pn, cfg.second_layer_relu);
            const auto m1 = project_on_tape(tape, e1.z, pn);
            const auto m2 = project_on_tape(tape, e2.z, pn);
            const auto loss = ntxent_loss(tape, m1, m2, cfg.tau2);
            if (loss_history) loss_history->push_back(tape.scalar(loss));
            tape.backward(loss);
            for (size_t i = 0; i < trainable.size(); ++i) adam_step(*trainable[i], states[i], cfg.lr);
        } catch (const NumericError& e) {
            throw NumericError("pretraining step " + std::to_string(step) + ": " + e.what());
        }
    }
    return params;
}

/// Initial pseudo labels. Default: k-means on the projection output of a
/// raw forward pass (an untrained clustering head would hand out near-random
/// labels). The discretized-head variant stays available.
inline std::vector<int> init_pseudo_labels(const AttributedGraph& g, ModelParams& params,
                                           const TrainConfig& cfg) {
    if (cfg.init_labels == InitLabels::forward_argmax) return refresh_pseudo_labels(g, params);
    const ForwardOutputs fo = forward_raw(g, params);
    for (int attempt = 0; attempt < 10; ++attempt) {
        const auto res = kmeans(fo.m, cfg.k, detail::view_seed(cfg.seed, 4, attempt, 0));
        std::vector<int> seen(cfg.k, 0);
        for (int l : res.labels) seen[l] = 1;
        int nonempty = 0;
        for (int s : seen) nonempty += s;
        if (nonempty == cfg.k) return res.labels;
    }
    throw ArgumentError("init_pseudo_labels: k-means degenerate after 10 re-seeds");
}

/// Full training: pretraining, pseudo-label initialization, then the main
/// loop of two sampled views per step, joint updates, and periodic label
/// refresh from the raw graph. Deterministic in (graph, config).
inline TrainResult train(const AttributedGraph& g, const TrainConfig& cfg) {
    cfg.validate();
    if (g.n_nodes < cfg.k) throw ArgumentError("train: fewer nodes than clusters");

    TrainResult out;
    out.params = pretrain(g, cfg);
    ModelParams& params = out.params;

    std::vector<int> pseudo = init_pseudo_labels(g, params, cfg);
    ClusterIndexSets sets = build_cluster_sets(pseudo);

    auto trainable = params.all_params();
    std::vector<AdamState> states;
    for (ParamTensor* p : trainable) states.emplace_back(*p);

    const LossConfig loss_cfg = cfg.loss_config();
    out.history.reserve(cfg.t_max);

    for (int step = 1; step <= cfg.t_max; ++step) {
        StepRecord rec;
        rec.step = step;
        try {
            const GraphView v1 = sample_view(g, cfg.aug_view1, detail::view_seed(cfg.seed, 3, step, 1));
            const GraphView v2 = sample_view(g, cfg.aug_view2, detail::view_seed(cfg.seed, 3, step, 2));
            Tape tape;
            const auto pn = bind_params(tape, params);
            const auto f1 = forward_on_tape(tape, v1, pn, cfg.second_layer_relu);
            const auto f2 = forward_on_tape(tape, v2, pn, cfg.second_layer_relu);
            const LossNodes loss = total_loss_nodes(tape, f1.m, f2.m, f1.soft, f2.soft, sets, loss_cfg);

            rec.total = tape.scalar(loss.total);
            rec.sgc = tape.scalar(loss.representation);
            if (loss.has_ccm) {
                rec.cc = tape.scalar(loss.cc);
                rec.reg = tape.scalar(loss.reg);
            }
            if (!std::isfinite(rec.total))
                throw NumericError("non-finite total loss (sgc=" + std::to_string(rec.sgc) +
                                   ", cc=" + std::to_string(rec.cc) + ", reg=" + std::to_string(rec.reg) + ")");

            tape.backward(loss.total);
            for (size_t i = 0; i < trainable.size(); ++i) adam_step(*trainable[i], states[i], cfg.lr);
        } catch (const NumericError& e) {
            throw NumericError("training step " + std::to_string(step) + ": " + e.what());
        }

        if (step % cfg.label_refresh_period == 0) {
            pseudo = refresh_pseudo_labels(g, params);
            sets = build_cluster_sets(pseudo);
            if (g.true_labels) {
                rec.acc = acc(pseudo, *g.true_labels);
                rec.nmi = nmi(pseudo, *g.true_labels);
            }
        }
        out.history.push_back(rec);
    }

    out.labels = cfg.t_max == 0 ? pseudo : refresh_pseudo_labels(g, params);
    return out;
}

/// History CSV: step,total,sgc,cc,reg,acc,nmi (acc/nmi blank when absent).
inline void write_history_csv(const std::vector<StepRecord>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << "step,total,sgc,cc,reg,acc,nmi\n";
    char buf[64];
    auto fmt = [&](double v) -> std::string {
        if (std::isnan(v)) return "";
        std::snprintf(buf, sizeof(buf), "%.10g", v);
        return buf;
    };
    for (const StepRecord& r : history) {
        out << r.step << ',' << fmt(r.total) << ',' << fmt(r.sgc) << ',' << fmt(r.cc) << ','
            << fmt(r.reg) << ',' << fmt(r.acc) << ',' << fmt(r.nmi) << '\n';
    }
}

}  // namespace scagc
