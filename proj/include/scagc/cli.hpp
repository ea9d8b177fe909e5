#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scagc/common.hpp"
#include "scagc/graph.hpp"
#include "scagc/metrics.hpp"
#include "scagc/model.hpp"
#include "scagc/trainer.hpp"

namespace scagc {

// ---------------------------------------------------------------------------
// Run-config JSON (mirrors TrainConfig; unknown keys are rejected)
// ---------------------------------------------------------------------------

inline nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    nlohmann::json j;
    j["k"] = cfg.k;
    j["tau1"] = cfg.tau1;
    j["tau2"] = cfg.tau2;
    j["gamma"] = cfg.gamma;
    j["lr"] = cfg.lr;
    j["t_max"] = cfg.t_max;
    j["pretrain_steps"] = cfg.pretrain_steps;
    j["label_refresh_period"] = cfg.label_refresh_period;
    j["seed"] = cfg.seed;
    j["second_layer_relu"] = cfg.second_layer_relu;
    j["widths"] = {{"enc_hidden", cfg.widths.enc_hidden},
                   {"enc_out", cfg.widths.enc_out},
                   {"proj_hidden", cfg.widths.proj_hidden},
                   {"proj_out", cfg.widths.proj_out},
                   {"clus_hidden", cfg.widths.clus_hidden}};
    j["augmentation"] = {{"edge_drop", {cfg.aug_view1.edge_drop_rate, cfg.aug_view2.edge_drop_rate}},
                         {"attr_mask", {cfg.aug_view1.attr_mask_rate, cfg.aug_view2.attr_mask_rate}},
                         {"cap", cfg.aug_view1.prob_cap},
                         {"adaptive", cfg.aug_view1.adaptive}};
    j["ablation"] = {{"no_ccm", cfg.no_ccm}, {"no_ssc", cfg.no_ssc}};
    j["init_labels"] = cfg.init_labels == InitLabels::kmeans_on_m ? "kmeans_on_m" : "forward_argmax";
    j["exclude_self_in_ccl"] = cfg.exclude_self_in_ccl;
    j["literal_regularizer_sign"] = cfg.literal_regularizer_sign;
    return j;
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::vector<std::string>& known,
                                const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const auto& k : known) ok = ok || k == key;
        if (!ok) throw ParseError("config: unknown key '" + key + "' in " + where);
    }
}

}  // namespace detail

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j,
        {"k", "tau1", "tau2", "gamma", "lr", "t_max", "pretrain_steps", "label_refresh_period",
         "seed", "second_layer_relu", "widths", "augmentation", "ablation", "init_labels",
         "exclude_self_in_ccl", "literal_regularizer_sign"},
        "config");
    TrainConfig cfg;
    if (j.contains("k")) cfg.k = j["k"].get<int>();
    if (j.contains("tau1")) cfg.tau1 = j["tau1"].get<double>();
    if (j.contains("tau2")) cfg.tau2 = j["tau2"].get<double>();
    if (j.contains("gamma")) cfg.gamma = j["gamma"].get<double>();
    if (j.contains("lr")) cfg.lr = j["lr"].get<double>();
    if (j.contains("t_max")) cfg.t_max = j["t_max"].get<int>();
    if (j.contains("pretrain_steps")) cfg.pretrain_steps = j["pretrain_steps"].get<int>();
    if (j.contains("label_refresh_period")) cfg.label_refresh_period = j["label_refresh_period"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("second_layer_relu")) cfg.second_layer_relu = j["second_layer_relu"].get<bool>();
    if (j.contains("widths")) {
        const auto& w = j["widths"];
        detail::reject_unknown_keys(w, {"enc_hidden", "enc_out", "proj_hidden", "proj_out", "clus_hidden"},
                                    "widths");
        if (w.contains("enc_hidden")) cfg.widths.enc_hidden = w["enc_hidden"].get<int>();
        if (w.contains("enc_out")) cfg.widths.enc_out = w["enc_out"].get<int>();
        if (w.contains("proj_hidden")) cfg.widths.proj_hidden = w["proj_hidden"].get<int>();
        if (w.contains("proj_out")) cfg.widths.proj_out = w["proj_out"].get<int>();
        if (w.contains("clus_hidden")) cfg.widths.clus_hidden = w["clus_hidden"].get<int>();
    }
    if (j.contains("augmentation")) {
        const auto& a = j["augmentation"];
        detail::reject_unknown_keys(a, {"edge_drop", "attr_mask", "cap", "adaptive"}, "augmentation");
        if (a.contains("edge_drop")) {
            const auto rates = a["edge_drop"].get<std::vector<double>>();
            if (rates.size() != 2) throw ParseError("config: augmentation.edge_drop needs two rates");
            cfg.aug_view1.edge_drop_rate = rates[0];
            cfg.aug_view2.edge_drop_rate = rates[1];
        }
        if (a.contains("attr_mask")) {
            const auto rates = a["attr_mask"].get<std::vector<double>>();
            if (rates.size() != 2) throw ParseError("config: augmentation.attr_mask needs two rates");
            cfg.aug_view1.attr_mask_rate = rates[0];
            cfg.aug_view2.attr_mask_rate = rates[1];
        }
        if (a.contains("cap")) {
            cfg.aug_view1.prob_cap = a["cap"].get<double>();
            cfg.aug_view2.prob_cap = cfg.aug_view1.prob_cap;
        }
        if (a.contains("adaptive")) {
            cfg.aug_view1.adaptive = a["adaptive"].get<bool>();
            cfg.aug_view2.adaptive = cfg.aug_view1.adaptive;
        }
    }
    if (j.contains("ablation")) {
        const auto& ab = j["ablation"];
        detail::reject_unknown_keys(ab, {"no_ccm", "no_ssc"}, "ablation");
        if (ab.contains("no_ccm")) cfg.no_ccm = ab["no_ccm"].get<bool>();
        if (ab.contains("no_ssc")) cfg.no_ssc = ab["no_ssc"].get<bool>();
    }
    if (j.contains("init_labels")) {
        const auto s = j["init_labels"].get<std::string>();
        if (s == "kmeans_on_m") cfg.init_labels = InitLabels::kmeans_on_m;
        else if (s == "forward_argmax") cfg.init_labels = InitLabels::forward_argmax;
        else throw ParseError("config: init_labels must be kmeans_on_m or forward_argmax");
    }
    if (j.contains("exclude_self_in_ccl")) cfg.exclude_self_in_ccl = j["exclude_self_in_ccl"].get<bool>();
    if (j.contains("literal_regularizer_sign"))
        cfg.literal_regularizer_sign = j["literal_regularizer_sign"].get<bool>();
    return cfg;
}

// ---------------------------------------------------------------------------
// Small file helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<int> read_label_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open label file: " + path);
    std::vector<int> labels;
    long long v;
    while (in >> v) labels.push_back(static_cast<int>(v));
    if (labels.empty()) throw ParseError(path + ": no labels");
    return labels;
}

inline void write_label_file(const std::vector<int>& labels, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    for (int l : labels) out << l << "\n";
}

inline void write_text(const std::string& text, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << text;
}

inline std::string metrics_json_line(double a, double n, double r, double f) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "{\"acc\":%.4f,\"nmi\":%.4f,\"ari\":%.4f,\"f1\":%.4f}", a, n, r, f);
    return buf;
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

struct SynthArgs {
    int n = 150, k = 3, attr_dim = 16;
    double p_in = 0.3, p_out = 0.02, separation = 5.0, noise_sd = 1.0;
    std::uint64_t seed = 0;
    std::string out_dir;
};

inline int cmd_synth(const SynthArgs& a) {
    const AttributedGraph g =
        generate_sbm(a.n, a.k, a.p_in, a.p_out, a.attr_dim, a.separation, a.noise_sd, a.seed);
    std::filesystem::create_directories(a.out_dir);
    const auto dir = std::filesystem::path(a.out_dir);

    std::ofstream edges(dir / "edges.txt");
    for (const auto& [u, v] : g.edges) edges << u << " " << v << "\n";
    std::ofstream attrs(dir / "attrs.csv");
    for (int i = 0; i < g.n_nodes; ++i) {
        for (int j = 0; j < g.attr_dim; ++j)
            attrs << (j ? "," : "") << detail::format_double(g.attributes(i, j));
        attrs << "\n";
    }
    detail::write_label_file(*g.true_labels, (dir / "labels.txt").string());

    nlohmann::json manifest;
    manifest["n"] = a.n;
    manifest["k"] = a.k;
    manifest["p_in"] = a.p_in;
    manifest["p_out"] = a.p_out;
    manifest["attr_dim"] = a.attr_dim;
    manifest["separation"] = a.separation;
    manifest["noise_sd"] = a.noise_sd;
    manifest["seed"] = a.seed;
    manifest["edges"] = "edges.txt";
    manifest["attributes"] = "attrs.csv";
    manifest["labels"] = "labels.txt";
    manifest["num_edges"] = g.num_edges();
    detail::write_text(manifest.dump(2) + "\n", (dir / "manifest.json").string());
    std::cout << "wrote " << a.out_dir << " (" << g.n_nodes << " nodes, " << g.num_edges()
              << " edges)\n";
    return 0;
}

struct TrainArgs {
    std::string edges, attrs, labels, config, out_dir;
    TrainConfig cfg;
    bool k_given = false;
};

inline int cmd_train(const TrainArgs& a) {
    AttributedGraph g = load_graph(a.edges, a.attrs,
                                   a.labels.empty() ? std::nullopt : std::optional<std::string>(a.labels));
    TrainConfig cfg = a.cfg;
    if (cfg.k == 0) {
        if (g.true_labels) cfg.k = g.label_count();
        else throw ArgumentError("train: cluster count unknown; pass --k or a config with k");
    }

    const TrainResult result = train(g, cfg);

    std::filesystem::create_directories(a.out_dir);
    const auto dir = std::filesystem::path(a.out_dir);
    detail::write_text(train_config_to_json(cfg).dump(2) + "\n", (dir / "config.json").string());
    save_checkpoint(result.params, (dir / "checkpoint.json").string());
    detail::write_label_file(result.labels, (dir / "labels.txt").string());
    write_history_csv(result.history, (dir / "history.csv").string());

    if (g.true_labels) {
        const auto& truth = *g.true_labels;
        std::cout << detail::metrics_json_line(acc(result.labels, truth), nmi(result.labels, truth),
                                               ari(result.labels, truth), macro_f1(result.labels, truth))
                  << "\n";
    } else {
        std::cout << "trained; labels written to " << (dir / "labels.txt").string() << "\n";
    }
    return 0;
}

struct PredictArgs {
    std::string checkpoint, edges, attrs, out_dir;
};

inline int cmd_predict(const PredictArgs& a) {
    ModelParams params = load_checkpoint(a.checkpoint);
    const AttributedGraph g = load_graph(a.edges, a.attrs);
    const auto labels = predict_oos(g, params);
    std::filesystem::create_directories(a.out_dir);
    detail::write_label_file(labels, (std::filesystem::path(a.out_dir) / "labels.txt").string());
    return 0;
}

struct EvalArgs {
    std::string pred, truth, out_file;
};

inline int cmd_eval(const EvalArgs& a) {
    const auto pred = detail::read_label_file(a.pred);
    const auto truth = detail::read_label_file(a.truth);
    if (pred.size() != truth.size())
        throw ArgumentError("eval: prediction and truth files have different lengths");
    const std::string line = detail::metrics_json_line(acc(pred, truth), nmi(pred, truth),
                                                       ari(pred, truth), macro_f1(pred, truth));
    std::cout << line << "\n";
    if (!a.out_file.empty()) detail::write_text(line + "\n", a.out_file);
    return 0;
}

struct BaselineArgs {
    std::string attrs, labels;
    int k = 0;
    std::uint64_t seed = 0;
    std::string out_file;
};

inline int cmd_baseline(const BaselineArgs& a) {
    const auto truth = detail::read_label_file(a.labels);
    const Matrix attrs = load_attr_csv(a.attrs);
    if (static_cast<int>(truth.size()) != attrs.rows)
        throw ArgumentError("baseline: label count does not match attribute rows");
    const int k = a.k > 0 ? a.k : (*std::max_element(truth.begin(), truth.end()) + 1);
    const auto res = kmeans(attrs, k, a.seed);
    const std::string line = detail::metrics_json_line(acc(res.labels, truth), nmi(res.labels, truth),
                                                       ari(res.labels, truth), macro_f1(res.labels, truth));
    std::cout << line << "\n";
    if (!a.out_file.empty()) detail::write_text(line + "\n", a.out_file);
    return 0;
}

// ---------------------------------------------------------------------------
// Argument parsing and dispatch
// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"self-supervised contrastive attributed graph clustering"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic planted-partition graph");
    synth_cmd->add_option("--n", synth.n, "node count");
    synth_cmd->add_option("--k", synth.k, "block count");
    synth_cmd->add_option("--p-in", synth.p_in, "intra-block edge probability");
    synth_cmd->add_option("--p-out", synth.p_out, "inter-block edge probability");
    synth_cmd->add_option("--sep", synth.separation, "attribute mean separation");
    synth_cmd->add_option("--noise-sd", synth.noise_sd, "attribute noise standard deviation");
    synth_cmd->add_option("--attr-dim", synth.attr_dim, "attribute dimension");
    synth_cmd->add_option("--seed", synth.seed, "random seed");
    synth_cmd->add_option("--out", synth.out_dir, "output directory")->required();

    TrainArgs tr;
    int tr_k = 0;
    std::uint64_t tr_seed = 0;
    double tr_lr = 0, tr_tau1 = 0, tr_tau2 = 0, tr_gamma = -1;
    int tr_tmax = -1, tr_pre = -1;
    std::vector<std::string> tr_ablation;
    std::string tr_init_labels;
    auto* train_cmd = app.add_subcommand("train", "train on a graph and emit labels + checkpoint");
    train_cmd->add_option("--edges", tr.edges, "edge list file")->required();
    train_cmd->add_option("--attrs", tr.attrs, "attribute CSV file")->required();
    train_cmd->add_option("--labels", tr.labels, "ground-truth labels (evaluation only)");
    train_cmd->add_option("--config", tr.config, "run-config JSON");
    train_cmd->add_option("--out", tr.out_dir, "output directory")->required();
    auto* opt_k = train_cmd->add_option("--k", tr_k, "cluster count");
    auto* opt_seed = train_cmd->add_option("--seed", tr_seed, "random seed");
    auto* opt_lr = train_cmd->add_option("--lr", tr_lr, "learning rate");
    auto* opt_tau1 = train_cmd->add_option("--tau1", tr_tau1, "cluster-contrast temperature");
    auto* opt_tau2 = train_cmd->add_option("--tau2", tr_tau2, "node-contrast temperature");
    auto* opt_gamma = train_cmd->add_option("--gamma", tr_gamma, "regularizer weight");
    auto* opt_tmax = train_cmd->add_option("--t-max", tr_tmax, "training steps");
    auto* opt_pre = train_cmd->add_option("--pretrain-steps", tr_pre, "pretraining steps");
    train_cmd->add_option("--ablation", tr_ablation, "ablation switches: no-ccm, no-ssc");
    auto* opt_init = train_cmd->add_option("--init-labels", tr_init_labels,
                                           "initial pseudo labels: kmeans_on_m or forward_argmax");

    PredictArgs pr;
    auto* predict_cmd = app.add_subcommand("predict", "label a new graph with a trained checkpoint");
    predict_cmd->add_option("--checkpoint", pr.checkpoint, "model checkpoint JSON")->required();
    predict_cmd->add_option("--edges", pr.edges, "edge list file")->required();
    predict_cmd->add_option("--attrs", pr.attrs, "attribute CSV file")->required();
    predict_cmd->add_option("--out", pr.out_dir, "output directory")->required();

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "score a predicted labeling against ground truth");
    eval_cmd->add_option("--pred", ev.pred, "predicted labels file")->required();
    eval_cmd->add_option("--truth", ev.truth, "ground-truth labels file")->required();
    eval_cmd->add_option("--out", ev.out_file, "also write the metrics JSON here");

    BaselineArgs bl;
    auto* baseline_cmd = app.add_subcommand("baseline", "k-means on raw attributes, scored");
    baseline_cmd->add_option("--attrs", bl.attrs, "attribute CSV file")->required();
    baseline_cmd->add_option("--labels", bl.labels, "ground-truth labels file")->required();
    baseline_cmd->add_option("--k", bl.k, "cluster count (default: from labels)");
    baseline_cmd->add_option("--seed", bl.seed, "random seed");
    baseline_cmd->add_option("--out", bl.out_file, "also write the metrics JSON here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth);
        if (train_cmd->parsed()) {
            if (!tr.config.empty()) {
                std::ifstream in(tr.config);
                if (!in) throw ParseError("cannot open config: " + tr.config);
                nlohmann::json j;
                try {
                    in >> j;
                } catch (const nlohmann::json::exception& e) {
                    throw ParseError(tr.config + ": invalid json: " + e.what());
                }
                tr.cfg = train_config_from_json(j);
            }
            if (opt_k->count()) tr.cfg.k = tr_k;
            if (opt_seed->count()) tr.cfg.seed = tr_seed;
            if (opt_lr->count()) tr.cfg.lr = tr_lr;
            if (opt_tau1->count()) tr.cfg.tau1 = tr_tau1;
            if (opt_tau2->count()) tr.cfg.tau2 = tr_tau2;
            if (opt_gamma->count()) tr.cfg.gamma = tr_gamma;
            if (opt_tmax->count()) tr.cfg.t_max = tr_tmax;
            if (opt_pre->count()) tr.cfg.pretrain_steps = tr_pre;
            for (const auto& ab : tr_ablation) {
                if (ab == "no-ccm") tr.cfg.no_ccm = true;
                else if (ab == "no-ssc") tr.cfg.no_ssc = true;
                else throw ArgumentError("train: unknown ablation '" + ab + "'");
            }
            if (opt_init->count()) {
                if (tr_init_labels == "kmeans_on_m") tr.cfg.init_labels = InitLabels::kmeans_on_m;
                else if (tr_init_labels == "forward_argmax") tr.cfg.init_labels = InitLabels::forward_argmax;
                else throw ArgumentError("train: unknown init-labels mode '" + tr_init_labels + "'");
            }
            return cmd_train(tr);
        }
        if (predict_cmd->parsed()) return cmd_predict(pr);
        if (eval_cmd->parsed()) return cmd_eval(ev);
        if (baseline_cmd->parsed()) return cmd_baseline(bl);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

inline int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.reserve(args.size() + 1);
    full.emplace_back("scagc");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const auto& s : full) argv.push_back(s.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace scagc
