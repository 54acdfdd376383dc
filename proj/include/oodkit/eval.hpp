#pragma once

// FPR@95, AUROC (average-rank Mann-Whitney), ID accuracy, threshold
// detector, and the per-OOD-set report structure. ID is the positive
// class; uncertainty scores are low for ID.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "oodkit/types.hpp"

namespace oodkit {

enum class Detection { id, ood };

/// Threshold detector: OOD iff score > lambda, boundary goes to ID.
inline std::vector<Detection> detect(const ScoreVector& scores, double lambda) {
    if (!std::isfinite(lambda)) throw std::invalid_argument("detect: non-finite threshold");
    std::vector<Detection> out;
    out.reserve(scores.size());
    for (double s : scores) {
        if (!std::isfinite(s)) throw std::invalid_argument("detect: non-finite score");
        out.push_back(s > lambda ? Detection::ood : Detection::id);
    }
    return out;
}

/// P(uncertainty(id) < uncertainty(ood)) with ties credited 1/2,
/// computed via average ranks in O(n log n). Exactly equals the
/// pairwise definition.
inline double auroc(const ScoreVector& id_scores, const ScoreVector& ood_scores) {
    const std::size_t n_id = id_scores.size();
    const std::size_t n_ood = ood_scores.size();
    if (n_id == 0 || n_ood == 0) throw std::invalid_argument("auroc: empty score vector");

    struct Entry {
        double score;
        bool is_ood;
    };
    std::vector<Entry> all;
    all.reserve(n_id + n_ood);
    for (double s : id_scores.values) all.push_back({s, false});
    for (double s : ood_scores.values) all.push_back({s, true});
    std::stable_sort(all.begin(), all.end(),
                     [](const Entry& a, const Entry& b) { return a.score < b.score; });

    // average ranks over tie groups, 1-based
    double rank_sum_ood = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t t = i; t < j; ++t)
            if (all[t].is_ood) rank_sum_ood += avg_rank;
        i = j;
    }
    const double u = rank_sum_ood - 0.5 * static_cast<double>(n_ood) *
                                        (static_cast<double>(n_ood) + 1.0);
    return u / (static_cast<double>(n_id) * static_cast<double>(n_ood));
}

/// FPR at the smallest observed ID-score threshold reaching the target
/// TPR, with the <= acceptance convention.
inline double fpr_at_tpr(const ScoreVector& id_scores, const ScoreVector& ood_scores,
                         double tpr_target = 0.95) {
    if (id_scores.size() == 0 || ood_scores.size() == 0)
        throw std::invalid_argument("fpr_at_tpr: empty score vector");
    if (!(tpr_target > 0.0) || tpr_target > 1.0)
        throw std::invalid_argument("fpr_at_tpr: target must be in (0, 1]");

    std::vector<double> sorted_id = id_scores.values;
    std::sort(sorted_id.begin(), sorted_id.end());
    const double n = static_cast<double>(sorted_id.size());
    std::size_t need = static_cast<std::size_t>(std::ceil(tpr_target * n - 1e-12));
    if (need < 1) need = 1;
    const double lambda = sorted_id[need - 1];

    std::size_t false_pos = 0;
    for (double s : ood_scores.values)
        if (s <= lambda) ++false_pos;
    return static_cast<double>(false_pos) / static_cast<double>(ood_scores.size());
}

/// Fraction of rows whose argmax logit equals the label; argmax ties go
/// to the lowest class index.
inline double id_accuracy(const LogitMatrix& logits, const LabelVector& labels) {
    if (logits.rows != labels.size())
        throw std::invalid_argument("id_accuracy: label length mismatch");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        auto z = logits.row(i);
        const auto v = labels.values[i];
        if (v < 0 || v >= static_cast<std::int64_t>(logits.cols))
            throw std::invalid_argument("id_accuracy: label out of range at row " +
                                        std::to_string(i));
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.cols; ++c)
            if (z[c] > z[best]) best = c;
        if (static_cast<std::int64_t>(best) == v) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(logits.rows);
}

struct MetricCell {
    double fpr95 = 0.0;
    double auroc = 0.0;
};

/// Per-method, per-OOD-set metric grid plus cross-set averages and the
/// classifier's ID accuracy.
struct EvalReport {
    // method name -> ood set name -> metrics; std::map keeps emission order stable
    std::map<std::string, std::map<std::string, MetricCell>> cells;
    std::map<std::string, MetricCell> averages;
    double id_accuracy = 0.0;

    void finalize_averages() {
        averages.clear();
        for (const auto& [method, sets] : cells) {
            MetricCell avg;
            for (const auto& [_, cell] : sets) {
                avg.fpr95 += cell.fpr95;
                avg.auroc += cell.auroc;
            }
            const double n = static_cast<double>(sets.size());
            avg.fpr95 /= n;
            avg.auroc /= n;
            averages[method] = avg;
        }
    }
};

/// One method's scores for the ID test set and each OOD set.
struct ScoredMethod {
    std::string name;
    ScoreVector id_scores;
    std::vector<std::pair<std::string, ScoreVector>> ood_scores;
};

inline EvalReport evaluate_suite(const std::vector<ScoredMethod>& methods,
                                 const LogitMatrix& id_logits, const LabelVector& id_labels) {
    EvalReport report;
    for (const auto& m : methods) {
        if (m.ood_scores.empty())
            throw std::invalid_argument("evaluate_suite: method '" + m.name +
                                        "' has no OOD score vectors");
        for (const auto& [set_name, scores] : m.ood_scores) {
            MetricCell cell;
            cell.fpr95 = fpr_at_tpr(m.id_scores, scores, 0.95);
            cell.auroc = auroc(m.id_scores, scores);
            report.cells[m.name][set_name] = cell;
        }
    }
    report.finalize_averages();
    report.id_accuracy = id_accuracy(id_logits, id_labels);
    return report;
}

}  // namespace oodkit
