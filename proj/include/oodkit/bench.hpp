#pragma once

// Benchmark grid: shots x pipelines x methods x OOD sets. Pipelines are
// baseline-orig (frozen-model stream), baseline-ft (fine-tuned stream)
// and dsgf (fused). Each pipeline trains its own linear head on the
// few-shot subset; k-NN scores come from the matching feature stream,
// the dsgf pipeline reports every requested fused variant.

#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oodkit/core.hpp"
#include "oodkit/dsgf.hpp"
#include "oodkit/eval.hpp"
#include "oodkit/knn.hpp"
#include "oodkit/scores.hpp"
#include "oodkit/types.hpp"

namespace oodkit {

struct BenchRequest {
    std::vector<std::optional<std::size_t>> shots;  // nullopt == "all"
    std::vector<ScoreMethod> methods = {
        ScoreMethod::energy,   ScoreMethod::entropy,  ScoreMethod::variance,
        ScoreMethod::msp,      ScoreMethod::maxlogit, ScoreMethod::knn};
    std::vector<FusedVariant> variants = {FusedVariant::concat_then_normalize,
                                          FusedVariant::normalize_then_concat,
                                          FusedVariant::score_sum};
    RunConfig run;
};

struct BenchReport {
    // shot label -> pipeline name -> report
    std::map<std::string, std::map<std::string, EvalReport>> grid;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string timestamp;  // empty unless explicitly supplied
    nlohmann::json divergence_witness;
};

namespace detail {

inline std::string shot_label(const std::optional<std::size_t>& shots) {
    return shots ? std::to_string(*shots) : std::string("all");
}

inline std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// Scores one single-stream pipeline: linear head trained on the subset
// supplies the logits, the subset feature bank backs the k-NN score.
inline EvalReport run_single_stream(const FeatureMatrix& train, const LabelVector& train_labels,
                                    const FeatureMatrix& id_test, const LabelVector& id_labels,
                                    const std::vector<const FeatureMatrix*>& ood_feats,
                                    const std::vector<std::string>& ood_names,
                                    const BenchRequest& req) {
    LinearHead head = train_head(train, train_labels, req.run.train);
    LogitMatrix id_logits = head_forward(head, id_test);

    std::vector<ScoredMethod> scored;
    KnnIndex index = build_index(train);
    for (ScoreMethod m : req.methods) {
        ScoredMethod sm;
        sm.name = to_string(m);
        if (m == ScoreMethod::knn) {
            sm.id_scores = knn_score_batch(index, id_test, req.run.knn_k);
            for (std::size_t s = 0; s < ood_feats.size(); ++s)
                sm.ood_scores.emplace_back(ood_names[s],
                                           knn_score_batch(index, *ood_feats[s], req.run.knn_k));
        } else {
            sm.id_scores = score_batch(id_logits, m, req.run.temperature);
            for (std::size_t s = 0; s < ood_feats.size(); ++s)
                sm.ood_scores.emplace_back(
                    ood_names[s],
                    score_batch(head_forward(head, *ood_feats[s]), m, req.run.temperature));
        }
        scored.push_back(std::move(sm));
    }
    return evaluate_suite(scored, id_logits, id_labels);
}

inline EvalReport run_dsgf(const DatasetBundle& bundle, const BenchRequest& req,
                           const std::optional<std::size_t>& shots) {
    RunConfig cfg = req.run;
    cfg.shots = shots;
    DsgfArtifacts art = dsgf_pipeline(bundle, cfg);

    std::vector<ScoredMethod> scored;
    for (ScoreMethod m : req.methods) {
        if (m == ScoreMethod::knn) continue;
        ScoredMethod sm;
        sm.name = to_string(m);
        sm.id_scores = score_batch(art.id_test_logits, m, cfg.temperature);
        for (std::size_t s = 0; s < bundle.ood_sets.size(); ++s)
            sm.ood_scores.emplace_back(bundle.ood_sets[s].name,
                                       score_batch(art.ood_logits[s], m, cfg.temperature));
        scored.push_back(std::move(sm));
    }

    const bool want_knn =
        std::find(req.methods.begin(), req.methods.end(), ScoreMethod::knn) != req.methods.end();
    if (want_knn) {
        FusedIndex fused(take_rows(bundle.train_orig, art.train_indices),
                         take_rows(bundle.train_ft, art.train_indices));
        for (FusedVariant v : req.variants) {
            ScoredMethod sm;
            sm.name = "knn[" + to_string(v) + "]";
            sm.id_scores = fused_knn_score_batch(fused, bundle.id_test_orig, bundle.id_test_ft,
                                                 v, cfg.knn_k);
            for (const auto& ood : bundle.ood_sets)
                sm.ood_scores.emplace_back(
                    ood.name, fused_knn_score_batch(fused, ood.orig, ood.ft, v, cfg.knn_k));
            scored.push_back(std::move(sm));
        }
    }
    return evaluate_suite(scored, art.id_test_logits, bundle.id_test_labels);
}

// Fixed paired two-row instance on which normalize-then-concat and
// score-sum rank two queries in opposite order: query A matches a
// different training row per stream. Documents that the equality of
// the fused variants is empirical, not algebraic.
inline nlohmann::json divergence_witness() {
    FeatureMatrix train_o(2, 2, {1.0f, 0.0f, 0.0f, 1.0f});
    FeatureMatrix train_ft(2, 2, {1.0f, 0.0f, 0.0f, 1.0f});
    FusedIndex fused(train_o, train_ft);

    const std::vector<float> qa_o = {1.0f, 0.0f}, qa_ft = {0.0f, 1.0f};
    const std::vector<float> qb_o = {0.8f, 0.6f}, qb_ft = {0.8f, 0.6f};
    auto span = [](const std::vector<float>& v) { return std::span<const float>(v); };

    nlohmann::json j;
    j["train_orig"] = {{1.0, 0.0}, {0.0, 1.0}};
    j["train_ft"] = {{1.0, 0.0}, {0.0, 1.0}};
    j["query_a"] = {{"orig", {1.0, 0.0}}, {"ft", {0.0, 1.0}}};
    j["query_b"] = {{"orig", {0.8, 0.6}}, {"ft", {0.8, 0.6}}};
    for (FusedVariant v :
         {FusedVariant::normalize_then_concat, FusedVariant::score_sum}) {
        const double sa = fused_knn_score(fused, span(qa_o), span(qa_ft), v, 1);
        const double sb = fused_knn_score(fused, span(qb_o), span(qb_ft), v, 1);
        j["scores"][to_string(v)] = {{"query_a", sa}, {"query_b", sb}};
        j["more_ood"][to_string(v)] = sa > sb ? "query_a" : "query_b";
    }
    j["orderings_differ"] =
        j["more_ood"]["normalize-then-concat"] != j["more_ood"]["score-sum"];
    return j;
}

}  // namespace detail

inline BenchReport run_benchmark(const DatasetBundle& bundle, const BenchRequest& req) {
    if (req.shots.empty()) throw std::invalid_argument("run_benchmark: empty shot grid");
    if (req.methods.empty()) throw std::invalid_argument("run_benchmark: empty method set");
    req.run.validate();
    validate_bundle(bundle);

    std::vector<const FeatureMatrix*> ood_orig, ood_ft;
    std::vector<std::string> ood_names;
    for (const auto& set : bundle.ood_sets) {
        ood_orig.push_back(&set.orig);
        ood_ft.push_back(&set.ft);
        ood_names.push_back(set.name);
    }

    BenchReport report;
    report.seed = req.run.seed;
    for (const auto& shots : req.shots) {
        const std::string label = detail::shot_label(shots);
        std::vector<std::size_t> indices;
        if (shots) {
            indices = few_shot_indices(bundle.train_labels, bundle.num_classes(), *shots,
                                       req.run.seed);
        } else {
            indices.resize(bundle.train_orig.rows);
            std::iota(indices.begin(), indices.end(), 0);
        }
        const LabelVector sub_labels = take_labels(bundle.train_labels, indices);

        auto& row = report.grid[label];
        try {
            row["baseline-orig"] = detail::run_single_stream(
                take_rows(bundle.train_orig, indices), sub_labels, bundle.id_test_orig,
                bundle.id_test_labels, ood_orig, ood_names, req);
            row["baseline-ft"] = detail::run_single_stream(
                take_rows(bundle.train_ft, indices), sub_labels, bundle.id_test_ft,
                bundle.id_test_labels, ood_ft, ood_names, req);
            row["dsgf"] = detail::run_dsgf(bundle, req, shots);
        } catch (const std::exception& e) {
            throw std::runtime_error("bench: shot setting '" + label + "': " + e.what());
        }
    }
    report.divergence_witness = detail::divergence_witness();

    nlohmann::json cfg;
    cfg["temperature"] = req.run.temperature;
    cfg["knn_k"] = req.run.knn_k;
    cfg["seed"] = req.run.seed;
    cfg["epochs"] = req.run.train.epochs;
    cfg["batch_size"] = req.run.train.batch_size;
    cfg["learning_rate"] = req.run.train.learning_rate;
    cfg["weight_decay"] = req.run.train.weight_decay;
    cfg["momentum"] = req.run.train.momentum;
    std::vector<std::string> names;
    for (auto m : req.methods) names.push_back(to_string(m));
    cfg["methods"] = names;
    names.clear();
    for (auto v : req.variants) names.push_back(to_string(v));
    cfg["variants"] = names;
    for (const auto& s : req.shots) cfg["shots"].push_back(detail::shot_label(s));
    report.config_hash = detail::fnv1a_hex(cfg.dump());
    return report;
}

// ---- report serialization ----

inline nlohmann::json eval_report_json(const EvalReport& r) {
    nlohmann::json j;
    for (const auto& [method, sets] : r.cells) {
        for (const auto& [set_name, cell] : sets)
            j["methods"][method]["ood_sets"][set_name] = {{"fpr95", cell.fpr95},
                                                          {"auroc", cell.auroc}};
        const auto& avg = r.averages.at(method);
        j["methods"][method]["average"] = {{"fpr95", avg.fpr95}, {"auroc", avg.auroc}};
    }
    j["id_accuracy"] = r.id_accuracy;
    return j;
}

inline nlohmann::json bench_report_json(const BenchReport& r) {
    nlohmann::json j;
    j["metadata"]["config_hash"] = r.config_hash;
    j["metadata"]["seed"] = r.seed;
    if (!r.timestamp.empty()) j["metadata"]["timestamp"] = r.timestamp;
    for (const auto& [shot, pipelines] : r.grid)
        for (const auto& [pipeline, report] : pipelines)
            j["grid"][shot][pipeline] = eval_report_json(report);
    j["appendix_divergence_witness"] = r.divergence_witness;
    return j;
}

namespace detail {

inline std::string fmt_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

}  // namespace detail

inline std::string eval_report_csv(const EvalReport& r) {
    std::ostringstream os;
    os << "method,ood_set,fpr95,auroc\n";
    for (const auto& [method, sets] : r.cells) {
        for (const auto& [set_name, cell] : sets)
            os << method << "," << set_name << "," << detail::fmt_metric(cell.fpr95) << ","
               << detail::fmt_metric(cell.auroc) << "\n";
        const auto& avg = r.averages.at(method);
        os << method << ",average," << detail::fmt_metric(avg.fpr95) << ","
           << detail::fmt_metric(avg.auroc) << "\n";
    }
    return os.str();
}

inline std::string bench_report_csv(const BenchReport& r) {
    std::ostringstream os;
    os << "shot,pipeline,method,ood_set,fpr95,auroc\n";
    for (const auto& [shot, pipelines] : r.grid)
        for (const auto& [pipeline, report] : pipelines) {
            for (const auto& [method, sets] : report.cells) {
                for (const auto& [set_name, cell] : sets)
                    os << shot << "," << pipeline << "," << method << "," << set_name << ","
                       << detail::fmt_metric(cell.fpr95) << "," << detail::fmt_metric(cell.auroc)
                       << "\n";
                const auto& avg = report.averages.at(method);
                os << shot << "," << pipeline << "," << method << ",average,"
                   << detail::fmt_metric(avg.fpr95) << "," << detail::fmt_metric(avg.auroc)
                   << "\n";
            }
        }
    return os.str();
}

inline void emit_report(const BenchReport& r, const std::string& format,
                        const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    if (format == "json")
        out << bench_report_json(r).dump(2) << "\n";
    else if (format == "csv")
        out << bench_report_csv(r);
    else
        throw std::invalid_argument("emit_report: unknown format '" + format +
                                    "' (valid: json, csv)");
    if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace oodkit
