// oodbench: command-line front end for the OOD scoring toolkit.
//
// Subcommands: synth, score, knn, train-head, eval, bench.
// All randomness flows from --seed (env fallback OODBENCH_SEED), so
// identical invocations on identical inputs produce byte-identical
// output files.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oodkit/oodkit.hpp"

namespace {

using namespace oodkit;

std::uint64_t default_seed() {
    if (const char* env = std::getenv("OODBENCH_SEED"))
        return std::strtoull(env, nullptr, 10);
    return 0;
}

std::vector<std::optional<std::size_t>> parse_shots(const std::string& csv) {
    std::vector<std::optional<std::size_t>> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        if (tok == "all") {
            out.emplace_back(std::nullopt);
        } else {
            const long v = std::stol(tok);
            if (v < 1) throw CLI::ValidationError("--shots", "shot counts must be >= 1 or 'all'");
            out.emplace_back(static_cast<std::size_t>(v));
        }
    }
    if (out.empty()) throw CLI::ValidationError("--shots", "empty shot list");
    return out;
}

std::vector<ScoreMethod> parse_methods(const std::string& csv) {
    std::vector<ScoreMethod> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(score_method_from_string(tok));
    if (out.empty()) throw CLI::ValidationError("--methods", "empty method list");
    return out;
}

std::vector<FusedVariant> parse_variants(const std::string& csv) {
    if (csv == "all")
        return {FusedVariant::concat_then_normalize, FusedVariant::normalize_then_concat,
                FusedVariant::score_sum};
    std::vector<FusedVariant> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(fused_variant_from_string(tok));
    if (out.empty()) throw CLI::ValidationError("--variants", "empty variant list");
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << text;
    if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Post-hoc OOD detection toolkit over exported feature/logit matrices"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "Generate a synthetic two-stream bundle");
    SynthConfig synth_cfg;
    synth_cfg.seed = default_seed();
    std::string synth_out = "bundle";
    synth->add_option("--out", synth_out, "Output directory for matrices + manifest.json");
    synth->add_option("--classes", synth_cfg.num_classes, "Number of ID classes");
    synth->add_option("--train-per-class", synth_cfg.train_per_class, "Training rows per class");
    synth->add_option("--test-per-class", synth_cfg.test_per_class, "ID test rows per class");
    synth->add_option("--d-orig", synth_cfg.d_orig, "Feature dim of the frozen-model stream");
    synth->add_option("--d-ft", synth_cfg.d_ft, "Feature dim of the fine-tuned stream");
    synth->add_option("--sep-orig", synth_cfg.class_sep_orig, "Class separation, orig stream");
    synth->add_option("--sep-ft", synth_cfg.class_sep_ft, "Class separation, ft stream");
    synth->add_option("--ood-shift-orig", synth_cfg.ood_shift_orig, "OOD shift, orig stream");
    synth->add_option("--ood-shift-ft", synth_cfg.ood_shift_ft, "OOD shift, ft stream");
    synth->add_option("--n-ood", synth_cfg.n_ood, "Rows per OOD set");
    synth->add_option("--ood-sets", synth_cfg.num_ood_sets, "Number of OOD sets");
    synth->add_option("--seed", synth_cfg.seed, "Seed (env fallback OODBENCH_SEED)");

    // ---- score ----
    auto* score = app.add_subcommand("score", "Compute one logit-based score over a logit file");
    std::string score_method = "energy", score_logits, score_out;
    double score_temp = 1.0;
    score->add_option("--method", score_method,
                      "One of energy, entropy, variance, msp, maxlogit");
    score->add_option("--temperature", score_temp, "Temperature T > 0");
    score->add_option("--logits", score_logits, "Input logit NPY file")->required();
    score->add_option("--out", score_out, "Output score NPY file")->required();

    // ---- knn ----
    auto* knn = app.add_subcommand("knn", "Build a feature index and score queries");
    std::string knn_train, knn_queries, knn_out;
    std::size_t knn_k = 1;
    knn->add_option("--train", knn_train, "Training feature NPY file")->required();
    knn->add_option("--queries", knn_queries, "Query feature NPY file")->required();
    knn->add_option("--k", knn_k, "Use the k-th largest cosine similarity");
    knn->add_option("--out", knn_out, "Output score NPY file")->required();

    // ---- train-head ----
    auto* train = app.add_subcommand(
        "train-head", "Stage-2 fusion: subsample, concatenate streams, train the linear head");
    std::string train_manifest, train_weights = "head_weights.npy",
                train_bias = "head_bias.npy", train_sidecar = "head_config.json";
    std::string train_shots = "all";
    TrainConfig train_cfg;
    train_cfg.seed = default_seed();
    train->add_option("--manifest", train_manifest, "Bundle manifest JSON")->required();
    train->add_option("--shots", train_shots, "Shots per class, or 'all'");
    train->add_option("--epochs", train_cfg.epochs, "Training epochs");
    train->add_option("--batch-size", train_cfg.batch_size, "Minibatch size");
    train->add_option("--lr", train_cfg.learning_rate, "Learning rate");
    train->add_option("--weight-decay", train_cfg.weight_decay, "L2 penalty");
    train->add_option("--momentum", train_cfg.momentum, "SGD momentum in [0,1)");
    train->add_option("--seed", train_cfg.seed, "Seed (env fallback OODBENCH_SEED)");
    train->add_option("--out-weights", train_weights, "Output weight matrix NPY");
    train->add_option("--out-bias", train_bias, "Output bias vector NPY");
    train->add_option("--out-config", train_sidecar, "JSON sidecar recording the config");

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "Metrics from precomputed score files");
    std::string eval_id_scores, eval_logits, eval_labels, eval_out, eval_format = "json";
    std::vector<std::string> eval_ood;
    eval->add_option("--id-scores", eval_id_scores, "ID test score NPY file")->required();
    eval->add_option("--ood-scores", eval_ood,
                     "OOD score files as name=path (repeatable)")
        ->required();
    eval->add_option("--logits", eval_logits, "ID test logits for ID accuracy (optional)");
    eval->add_option("--labels", eval_labels, "ID test labels (required with --logits)");
    eval->add_option("--out", eval_out, "Output report path")->required();
    eval->add_option("--format", eval_format, "json or csv");

    // ---- bench ----
    auto* bench = app.add_subcommand("bench", "Run the full benchmark grid");
    std::string bench_manifest, bench_out = "report.json", bench_format = "json";
    std::string bench_shots = "2,4,8,16", bench_methods =
                                              "energy,entropy,variance,msp,maxlogit,knn";
    std::string bench_variants = "all", bench_timestamp;
    bool bench_synth_default = false;
    BenchRequest req;
    req.run.seed = default_seed();
    SynthConfig bench_synth_cfg;
    bench->add_option("--manifest", bench_manifest, "Bundle manifest JSON");
    bench->add_flag("--synth-default", bench_synth_default,
                    "Use the default synthetic bundle instead of a manifest");
    bench->add_option("--shots", bench_shots, "Comma list of shot counts and/or 'all'");
    bench->add_option("--methods", bench_methods, "Comma list of score methods");
    bench->add_option("--variants", bench_variants, "Fused k-NN variants, or 'all'");
    bench->add_option("--temperature", req.run.temperature, "Temperature T > 0");
    bench->add_option("--k", req.run.knn_k, "k for the k-NN score");
    bench->add_option("--seed", req.run.seed, "Seed (env fallback OODBENCH_SEED)");
    bench->add_option("--epochs", req.run.train.epochs, "Head training epochs");
    bench->add_option("--batch-size", req.run.train.batch_size, "Head minibatch size");
    bench->add_option("--lr", req.run.train.learning_rate, "Head learning rate");
    bench->add_option("--weight-decay", req.run.train.weight_decay, "Head L2 penalty");
    bench->add_option("--timestamp", bench_timestamp,
                      "Timestamp string recorded in metadata (omitted when empty)");
    bench->add_option("--out", bench_out, "Output report path");
    bench->add_option("--format", bench_format, "json or csv");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            DatasetBundle b = synth_bundle(synth_cfg);
            validate_bundle(b);
            const std::string manifest = save_bundle(b, synth_out);
            std::cout << "wrote " << manifest << "\n";
        } else if (score->parsed()) {
            const ScoreMethod method = score_method_from_string(score_method);
            if (method == ScoreMethod::knn)
                throw std::invalid_argument("knn is feature-based; use the 'knn' subcommand");
            LogitMatrix logits = load_logits(score_logits);
            save_matrix(score_batch(logits, method, score_temp), score_out);
            std::cout << "wrote " << score_out << "\n";
        } else if (knn->parsed()) {
            KnnIndex index = build_index(load_features(knn_train));
            save_matrix(knn_score_batch(index, load_features(knn_queries), knn_k), knn_out);
            std::cout << "wrote " << knn_out << "\n";
        } else if (train->parsed()) {
            DatasetBundle b = load_bundle(train_manifest);
            validate_bundle(b);
            RunConfig cfg;
            cfg.train = train_cfg;
            cfg.seed = train_cfg.seed;
            if (train_shots != "all") cfg.shots = std::stoul(train_shots);
            DsgfArtifacts art = dsgf_pipeline(b, cfg);
            save_head(art.head, train_weights, train_bias);
            nlohmann::json sidecar;
            sidecar["shots"] = train_shots;
            sidecar["epochs"] = train_cfg.epochs;
            sidecar["batch_size"] = train_cfg.batch_size;
            sidecar["learning_rate"] = train_cfg.learning_rate;
            sidecar["weight_decay"] = train_cfg.weight_decay;
            sidecar["momentum"] = train_cfg.momentum;
            sidecar["seed"] = train_cfg.seed;
            sidecar["num_classes"] = art.head.num_classes;
            sidecar["dim"] = art.head.dim;
            write_text(train_sidecar, sidecar.dump(2) + "\n");
            std::cout << "wrote " << train_weights << ", " << train_bias << ", "
                      << train_sidecar << "\n";
        } else if (eval->parsed()) {
            ScoredMethod sm;
            sm.name = "scores";
            sm.id_scores = load_scores(eval_id_scores);
            for (const auto& entry : eval_ood) {
                const auto pos = entry.find('=');
                if (pos == std::string::npos)
                    throw std::invalid_argument("--ood-scores expects name=path, got '" + entry +
                                                "'");
                sm.ood_scores.emplace_back(entry.substr(0, pos),
                                           load_scores(entry.substr(pos + 1)));
            }
            EvalReport report;
            for (const auto& [name, scores] : sm.ood_scores) {
                MetricCell cell;
                cell.fpr95 = fpr_at_tpr(sm.id_scores, scores, 0.95);
                cell.auroc = auroc(sm.id_scores, scores);
                report.cells[sm.name][name] = cell;
            }
            report.finalize_averages();
            if (!eval_logits.empty()) {
                if (eval_labels.empty())
                    throw std::invalid_argument("--logits requires --labels");
                report.id_accuracy =
                    id_accuracy(load_logits(eval_logits), load_labels(eval_labels));
            }
            if (eval_format == "json")
                write_text(eval_out, eval_report_json(report).dump(2) + "\n");
            else if (eval_format == "csv")
                write_text(eval_out, eval_report_csv(report));
            else
                throw std::invalid_argument("unknown format '" + eval_format +
                                            "' (valid: json, csv)");
            std::cout << "wrote " << eval_out << "\n";
        } else if (bench->parsed()) {
            if (bench_manifest.empty() && !bench_synth_default)
                throw std::invalid_argument("bench needs --manifest or --synth-default");
            DatasetBundle b = bench_synth_default ? synth_bundle(bench_synth_cfg)
                                                  : load_bundle(bench_manifest);
            req.shots = parse_shots(bench_shots);
            req.methods = parse_methods(bench_methods);
            req.variants = parse_variants(bench_variants);
            BenchReport report = run_benchmark(b, req);
            report.timestamp = bench_timestamp;
            emit_report(report, bench_format, bench_out);
            std::cout << "wrote " << bench_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
