// Command-line surface: cost accounting, weight container management,
// embedding extraction, verification metrics, factorization, the gradient
// suite, and the toy trainer.
//
// Exit codes: 0 success, 1 usage error, 2 validation/format error, 3 numeric
// failure. Diagnostics go to stderr.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "edgeface/accounting.hpp"
#include "edgeface/backbone.hpp"
#include "edgeface/container.hpp"
#include "edgeface/eval.hpp"
#include "edgeface/image.hpp"
#include "edgeface/losses.hpp"

namespace {

using edgeface::EdgeFaceModel;
using json = nlohmann::ordered_json;

// Floats printed with up to 9 significant digits.
json jnum(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return json(std::strtod(buf, nullptr));
}

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

edgeface::VariantSpec spec_for(const std::string& name) {
    const auto v = edgeface::parse_variant(name);
    if (!v.has_value()) throw std::invalid_argument("unknown variant '" + name + "' (use s, xs, or xxs)");
    return edgeface::variant_spec(*v);
}

json cost_report_json(const edgeface::CostReport& r) {
    json out;
    out["rows"] = json::array();
    for (const auto& row : r.rows) {
        json jr;
        jr["layer"] = row.layer;
        jr["params"] = row.params;
        jr["macs"] = row.macs;
        out["rows"].push_back(std::move(jr));
    }
    out["total_params"] = r.total_params;
    out["total_macs"] = r.total_macs;
    out["mparams"] = jnum(r.mparams());
    out["mflops"] = jnum(r.mflops());
    out["mmacs"] = jnum(r.mmacs());
    return out;
}

int run_count(const std::string& variant, std::optional<double> gamma, bool csv) {
    const edgeface::CostReport r = edgeface::count_variant(spec_for(variant), gamma);
    if (csv)
        std::fputs(edgeface::cost_report_csv(r).c_str(), stdout);
    else
        std::printf("%s\n", cost_report_json(r).dump(2).c_str());
    return 0;
}

int run_sweep(const std::string& variant, const std::vector<double>& gammas) {
    const auto rows = edgeface::gamma_sweep(spec_for(variant), gammas);
    std::fputs(edgeface::sweep_csv(rows).c_str(), stdout);
    return 0;
}

int run_init(const std::string& variant, std::optional<double> gamma, uint64_t seed,
             const std::string& out) {
    const EdgeFaceModel model = edgeface::build(spec_for(variant), gamma, seed);
    edgeface::save_container_file(model, out);
    std::fprintf(stderr, "wrote %s (%lld parameters)\n", out.c_str(),
                 static_cast<long long>(edgeface::parameter_count(model)));
    return 0;
}

int run_embed(const std::string& weights, const std::string& input, const std::string& out) {
    const EdgeFaceModel model = edgeface::load_container_file(weights);
    const edgeface::Tensor img = edgeface::load_image_file(input, model.spec.input_side);
    edgeface::Tensor batched({1, img.dim(0), img.dim(1), img.dim(2)}, img.data);
    const edgeface::Tensor emb = edgeface::embed(model, batched);
    edgeface::write_f32_file(out, emb.data);
    return 0;
}

int run_verify(const std::string& weights, const std::string& a, const std::string& b) {
    const EdgeFaceModel model = edgeface::load_container_file(weights);
    auto one = [&](const std::string& path) {
        const edgeface::Tensor img = edgeface::load_image_file(path, model.spec.input_side);
        edgeface::Tensor batched({1, img.dim(0), img.dim(1), img.dim(2)}, img.data);
        return edgeface::embed(model, batched);
    };
    const edgeface::Tensor ea = one(a), eb = one(b);
    std::printf("%.6f\n", edgeface::cosine_score(ea.data, eb.data));
    return 0;
}

int run_evaluate(const std::string& weights, const std::string& pairs_path, const std::string& report_path,
                 int folds, const std::vector<double>& far_targets, const std::string& scores_path) {
    const EdgeFaceModel model = edgeface::load_container_file(weights);
    std::ifstream pf(pairs_path);
    if (!pf) throw std::invalid_argument("cannot open pair list '" + pairs_path + "'");
    std::string text((std::istreambuf_iterator<char>(pf)), std::istreambuf_iterator<char>());
    const edgeface::PairList pairs = edgeface::parse_pair_list(text);

    edgeface::ImageLoader loader = [&](const std::string& ref) -> std::optional<edgeface::Tensor> {
        try {
            return edgeface::load_image_file(ref, model.spec.input_side);
        } catch (const std::exception&) {
            return std::nullopt;
        }
    };
    const edgeface::ScoreResult scored = edgeface::score_pairs(model, pairs, loader);
    if (scored.pairs.empty()) throw std::invalid_argument("evaluate: no pair could be scored");
    if (!scores_path.empty()) {
        std::ofstream sf(scores_path);
        if (!sf) throw std::invalid_argument("cannot open score file '" + scores_path + "'");
        sf << edgeface::format_score_lines(scored.pairs);
    }

    const edgeface::VerificationReport rep = edgeface::evaluate_scores(scored.pairs, folds, far_targets);
    json out;
    out["accuracy"] = jnum(rep.accuracy);
    out["best_threshold"] = jnum(rep.best_threshold);
    out["folds"] = json::array();
    for (double f : rep.folds) out["folds"].push_back(jnum(f));
    out["roc"] = json::array();
    for (const auto& [far, tar] : rep.roc) out["roc"].push_back(json::array({jnum(far), jnum(tar)}));
    out["tar_at_far"] = json::object();
    for (const auto& [target, tar] : rep.tar.tar) out["tar_at_far"][fmt9(target)] = jnum(tar);
    out["flags"] = json::object();
    out["flags"]["rejects"] = scored.rejects;
    out["flags"]["far_floor"] = json::array();
    for (double t : rep.tar.floored) out["flags"]["far_floor"].push_back(fmt9(t));

    std::ofstream rf(report_path);
    if (!rf) throw std::invalid_argument("cannot open report file '" + report_path + "'");
    rf << out.dump(2) << "\n";
    return 0;
}

int run_factorize(const std::string& weights, double gamma, const std::string& out) {
    const EdgeFaceModel model = edgeface::load_container_file(weights);
    std::vector<edgeface::FactorizeError> errors;
    const EdgeFaceModel low = edgeface::factorize_dense_layers(model, gamma, &errors);
    for (const auto& e : errors) std::printf("%s %.6g\n", e.layer.c_str(), e.frobenius_error);
    edgeface::save_container_file(low, out);
    return 0;
}

int run_gradcheck(uint64_t seed, int points) {
    const auto cases = edgeface::run_gradient_suite(seed, points);
    bool ok = true;
    for (const auto& c : cases) {
        const bool pass = c.max_rel_err < 1e-4;
        ok = ok && pass;
        std::printf("%-20s max_rel_err=%.3g %s\n", c.name.c_str(), c.max_rel_err,
                    pass ? "PASS" : "FAIL");
    }
    if (!ok) throw std::runtime_error("gradient checks exceeded tolerance");
    return 0;
}

int run_train_toy(const std::string& config_path, const std::string& out) {
    std::ifstream cf(config_path);
    if (!cf) throw std::invalid_argument("cannot open config '" + config_path + "'");
    json cfg_json;
    try {
        cfg_json = json::parse(cf);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config parse failure: ") + e.what());
    }

    edgeface::ToyTrainConfig cfg;
    cfg.steps = cfg_json.value("steps", cfg.steps);
    cfg.batch = cfg_json.value("batch", cfg.batch);
    cfg.learning_rate = cfg_json.value("learning_rate", cfg.learning_rate);
    cfg.momentum = cfg_json.value("momentum", cfg.momentum);
    cfg.seed = cfg_json.value("seed", cfg.seed);
    cfg.input_dim = cfg_json.value("input_dim", cfg.input_dim);
    cfg.hidden_dim = cfg_json.value("hidden_dim", cfg.hidden_dim);
    cfg.embed_dim = cfg_json.value("embed_dim", cfg.embed_dim);
    cfg.gamma = cfg_json.value("gamma", cfg.gamma);
    cfg.blob_sigma = cfg_json.value("blob_sigma", cfg.blob_sigma);
    cfg.samples_per_class = cfg_json.value("samples_per_class", cfg.samples_per_class);

    edgeface::MarginLossConfig loss;
    loss.class_count = 10;
    if (cfg_json.contains("loss")) {
        const auto& lj = cfg_json.at("loss");
        const std::string kind = lj.value("kind", std::string("cosface"));
        if (kind == "cosface")
            loss.kind = edgeface::MarginKind::CosFace;
        else if (kind == "arcface")
            loss.kind = edgeface::MarginKind::ArcFace;
        else
            throw std::invalid_argument("loss kind must be cosface or arcface");
        loss.scale = lj.value("scale", loss.scale);
        loss.margin = lj.value("margin", loss.margin);
        loss.class_count = lj.value("class_count", loss.class_count);
    }

    const edgeface::ToyTrainHistory hist = edgeface::toy_train(cfg, loss);
    std::ofstream of(out);
    if (!of) throw std::invalid_argument("cannot open history file '" + out + "'");
    of << edgeface::history_csv(hist);
    std::fprintf(stderr, "final accuracy %.4f over %zu steps\n", hist.final_accuracy,
                 hist.steps.size());
    if (hist.diverged)
        throw std::runtime_error("training diverged at step " + std::to_string(hist.divergence_step));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EdgeFace inference engine and cost-accounting toolkit"};
    app.require_subcommand(1);

    std::string variant = "xs", weights, input, output, pairs, report, scores, a_path, b_path, config;
    std::optional<double> gamma;
    double factor_gamma = 0.5;
    uint64_t seed = 0;
    int folds = 10, points = 20;
    bool csv = false;
    std::vector<double> gammas{0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<double> far_targets{1e-4, 1e-6};

    auto* count = app.add_subcommand("count", "Parameter/MAC report for a variant");
    count->add_option("--variant", variant, "s, xs, or xxs")->required();
    count->add_option("--gamma", gamma, "rank ratio for low-rank linear layers");
    count->add_flag("--csv", csv, "emit CSV instead of JSON");

    auto* sweep = app.add_subcommand("sweep", "Cost sweep over rank ratios");
    sweep->add_option("--variant", variant)->required();
    sweep->add_option("--gammas", gammas, "comma-separated rank ratios")->delimiter(',');

    auto* init = app.add_subcommand("init", "Create a seeded weight container");
    init->add_option("--variant", variant)->required();
    init->add_option("--gamma", gamma);
    init->add_option("--seed", seed)->required();
    init->add_option("--out", output)->required();

    auto* emb = app.add_subcommand("embed", "Embed one image");
    emb->add_option("--weights", weights)->required();
    emb->add_option("--input", input)->required();
    emb->add_option("--out", output)->required();

    auto* verify = app.add_subcommand("verify", "Cosine score of two images");
    verify->add_option("--weights", weights)->required();
    verify->add_option("--a", a_path)->required();
    verify->add_option("--b", b_path)->required();

    auto* evaluate = app.add_subcommand("evaluate", "Verification metrics over a pair list");
    evaluate->add_option("--weights", weights)->required();
    evaluate->add_option("--pairs", pairs)->required();
    evaluate->add_option("--report", report)->required();
    evaluate->add_option("--folds", folds);
    evaluate->add_option("--far", far_targets)->delimiter(',');
    evaluate->add_option("--scores", scores, "also write '<a> <b> <score>' lines");

    auto* factorize = app.add_subcommand("factorize", "SVD-factorize every dense linear layer");
    factorize->add_option("--weights", weights)->required();
    factorize->add_option("--gamma", factor_gamma)->required();
    factorize->add_option("--out", output)->required();

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
    gradcheck->add_option("--seed", seed);
    gradcheck->add_option("--points", points);

    auto* train = app.add_subcommand("train-toy", "Train the toy low-rank MLP");
    train->add_option("--config", config)->required();
    train->add_option("--out", output)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (count->parsed()) return run_count(variant, gamma, csv);
        if (sweep->parsed()) return run_sweep(variant, gammas);
        if (init->parsed()) return run_init(variant, gamma, seed, output);
        if (emb->parsed()) return run_embed(weights, input, output);
        if (verify->parsed()) return run_verify(weights, a_path, b_path);
        if (evaluate->parsed()) return run_evaluate(weights, pairs, report, folds, far_targets, scores);
        if (factorize->parsed()) return run_factorize(weights, factor_gamma, output);
        if (gradcheck->parsed()) return run_gradcheck(seed, points);
        if (train->parsed()) return run_train_toy(config, output);
    } catch (const edgeface::ContainerException& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::runtime_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 1;
}
