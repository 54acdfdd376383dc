#pragma once

// Stage-2 fusion pipeline: concatenate the two feature streams, train a
// linear classification head with minibatch SGD on softmax
// cross-entropy, expose fused logits and features for scoring.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "oodkit/core.hpp"
#include "oodkit/rng.hpp"
#include "oodkit/scores.hpp"
#include "oodkit/types.hpp"

namespace oodkit {

/// FC classifier: logits = x W^T + b, weights K x D in double.
struct LinearHead {
    std::size_t num_classes = 0;
    std::size_t dim = 0;
    std::vector<double> weights;  // row-major K x D
    std::vector<double> bias;     // length K

    LinearHead() = default;
    LinearHead(std::size_t k, std::size_t d)
        : num_classes(k), dim(d), weights(k * d, 0.0), bias(k, 0.0) {}

    double& w(std::size_t c, std::size_t j) { return weights[c * dim + j]; }
    double w(std::size_t c, std::size_t j) const { return weights[c * dim + j]; }

    bool operator==(const LinearHead&) const = default;
};

inline FeatureMatrix fuse_features(const FeatureMatrix& f_orig, const FeatureMatrix& f_ft) {
    if (f_orig.rows != f_ft.rows)
        throw std::invalid_argument("fuse_features: row count mismatch (" +
                                    std::to_string(f_orig.rows) + " vs " +
                                    std::to_string(f_ft.rows) + ")");
    FeatureMatrix out(f_orig.rows, f_orig.cols + f_ft.cols);
    for (std::size_t i = 0; i < out.rows; ++i) {
        auto a = f_orig.row(i);
        auto b = f_ft.row(i);
        auto dst = out.row(i);
        std::copy(a.begin(), a.end(), dst.begin());
        std::copy(b.begin(), b.end(), dst.begin() + static_cast<std::ptrdiff_t>(f_orig.cols));
    }
    return out;
}

inline LogitMatrix head_forward(const LinearHead& head, const FeatureMatrix& features) {
    if (features.cols != head.dim)
        throw std::invalid_argument("head_forward: feature dim " + std::to_string(features.cols) +
                                    " does not match head dim " + std::to_string(head.dim));
    LogitMatrix out(features.rows, head.num_classes);
    for (std::size_t i = 0; i < features.rows; ++i) {
        auto x = features.row(i);
        auto z = out.row(i);
        for (std::size_t c = 0; c < head.num_classes; ++c) {
            double acc = head.bias[c];
            for (std::size_t j = 0; j < head.dim; ++j)
                acc += head.w(c, j) * static_cast<double>(x[j]);
            z[c] = static_cast<float>(acc);
        }
    }
    return out;
}

/// Mean of -log softmax(z)_y over rows, via stable log-sum-exp.
inline double cross_entropy(const LogitMatrix& logits, const LabelVector& labels) {
    if (logits.rows != labels.size())
        throw std::invalid_argument("cross_entropy: label length mismatch");
    validate_labels(labels, logits.cols, "cross_entropy labels");
    double total = 0.0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        auto z = logits.row(i);
        const double lse = detail::log_sum_exp(z, 1.0);
        total += lse - static_cast<double>(z[static_cast<std::size_t>(labels.values[i])]);
    }
    return total / static_cast<double>(logits.rows);
}

struct HeadGradient {
    std::vector<double> weights;  // K x D
    std::vector<double> bias;     // K
};

/// Analytic gradient of mean cross-entropy plus coupled L2 penalty:
/// dW = (1/n)(P - Y)^T X + lambda W, db = (1/n) sum (P - Y).
inline HeadGradient head_gradient(const LinearHead& head, const FeatureMatrix& features,
                                  const LabelVector& labels, double weight_decay) {
    if (features.cols != head.dim)
        throw std::invalid_argument("head_gradient: feature dim mismatch");
    if (features.rows != labels.size())
        throw std::invalid_argument("head_gradient: label length mismatch");
    validate_labels(labels, head.num_classes, "head_gradient labels");

    const std::size_t n = features.rows;
    HeadGradient g{std::vector<double>(head.num_classes * head.dim, 0.0),
                   std::vector<double>(head.num_classes, 0.0)};
    std::vector<double> z(head.num_classes);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = features.row(i);
        for (std::size_t c = 0; c < head.num_classes; ++c) {
            double acc = head.bias[c];
            for (std::size_t j = 0; j < head.dim; ++j)
                acc += head.w(c, j) * static_cast<double>(x[j]);
            z[c] = acc;
        }
        auto p = softmax(std::span<const double>(z), 1.0);
        p[static_cast<std::size_t>(labels.values[i])] -= 1.0;
        for (std::size_t c = 0; c < head.num_classes; ++c) {
            g.bias[c] += p[c];
            double* grow = g.weights.data() + c * head.dim;
            for (std::size_t j = 0; j < head.dim; ++j)
                grow[j] += p[c] * static_cast<double>(x[j]);
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& v : g.bias) v *= inv_n;
    for (std::size_t t = 0; t < g.weights.size(); ++t)
        g.weights[t] = g.weights[t] * inv_n + weight_decay * head.weights[t];
    return g;
}

/// Minibatch SGD from zero initialization. Rows are reshuffled each
/// epoch by Fisher-Yates under SplitMix64 keyed seed^epoch; the final
/// partial batch is averaged over its actual size. Bit-deterministic
/// for fixed inputs and config.
inline LinearHead train_head(const FeatureMatrix& features, const LabelVector& labels,
                             const TrainConfig& cfg) {
    cfg.validate();
    if (features.rows < 1) throw std::invalid_argument("train_head: empty training set");
    if (features.rows != labels.size())
        throw std::invalid_argument("train_head: label length mismatch");
    std::size_t num_classes = 0;
    for (auto v : labels.values) {
        if (v < 0) throw std::invalid_argument("train_head: negative label");
        num_classes = std::max(num_classes, static_cast<std::size_t>(v) + 1);
    }
    if (num_classes < 2) throw std::invalid_argument("train_head: need at least 2 classes");

    LinearHead head(num_classes, features.cols);
    std::vector<double> vel_w(head.weights.size(), 0.0);
    std::vector<double> vel_b(head.bias.size(), 0.0);
    std::vector<std::size_t> order(features.rows);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        SplitMix64 rng(cfg.seed ^ static_cast<std::uint64_t>(epoch));
        fisher_yates_shuffle(order, rng);

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, order.size());
            std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(stop));
            FeatureMatrix bx = take_rows(features, batch);
            LabelVector by = take_labels(labels, batch);
            HeadGradient g = head_gradient(head, bx, by, cfg.weight_decay);
            for (std::size_t t = 0; t < head.weights.size(); ++t) {
                vel_w[t] = cfg.momentum * vel_w[t] + g.weights[t];
                head.weights[t] -= cfg.learning_rate * vel_w[t];
                if (!std::isfinite(head.weights[t]))
                    throw std::runtime_error("train_head: non-finite weight at epoch " +
                                             std::to_string(epoch) + ", batch offset " +
                                             std::to_string(start));
            }
            for (std::size_t c = 0; c < head.bias.size(); ++c) {
                vel_b[c] = cfg.momentum * vel_b[c] + g.bias[c];
                head.bias[c] -= cfg.learning_rate * vel_b[c];
            }
        }
    }
    return head;
}

/// Everything the evaluation stage needs from the fusion pipeline.
struct DsgfArtifacts {
    LinearHead head;
    std::vector<std::size_t> train_indices;
    FeatureMatrix fused_train;
    LabelVector train_labels;
    FeatureMatrix fused_id_test;
    LogitMatrix id_test_logits;
    std::vector<FeatureMatrix> fused_ood;   // parallel to bundle.ood_sets
    std::vector<LogitMatrix> ood_logits;
};

inline DsgfArtifacts dsgf_pipeline(const DatasetBundle& bundle, const RunConfig& cfg) {
    cfg.validate();
    const std::size_t num_classes = bundle.num_classes();

    std::vector<std::size_t> indices;
    if (cfg.shots) {
        indices = few_shot_indices(bundle.train_labels, num_classes, *cfg.shots, cfg.seed);
    } else {
        indices.resize(bundle.train_orig.rows);
        std::iota(indices.begin(), indices.end(), 0);
    }

    DsgfArtifacts art;
    art.train_indices = indices;
    art.fused_train = fuse_features(take_rows(bundle.train_orig, indices),
                                    take_rows(bundle.train_ft, indices));
    art.train_labels = take_labels(bundle.train_labels, indices);
    art.head = train_head(art.fused_train, art.train_labels, cfg.train);

    art.fused_id_test = fuse_features(bundle.id_test_orig, bundle.id_test_ft);
    art.id_test_logits = head_forward(art.head, art.fused_id_test);
    for (const auto& ood : bundle.ood_sets) {
        art.fused_ood.push_back(fuse_features(ood.orig, ood.ft));
        art.ood_logits.push_back(head_forward(art.head, art.fused_ood.back()));
    }
    return art;
}

// ---- head persistence: weight/bias matrix files + JSON sidecar ----

inline void save_head(const LinearHead& head, const std::string& weights_path,
                      const std::string& bias_path) {
    npy::save<double>(weights_path, head.weights, {head.num_classes, head.dim});
    npy::save<double>(bias_path, head.bias, {head.num_classes, 0});
}

inline LinearHead load_head(const std::string& weights_path, const std::string& bias_path) {
    LinearHead head;
    std::vector<double> w, b;
    npy::Shape ws = npy::load<double>(weights_path, w);
    npy::Shape bs = npy::load<double>(bias_path, b);
    if (ws.is_1d() || !bs.is_1d() || ws.rows != bs.rows)
        throw std::runtime_error("load_head: inconsistent weight/bias shapes");
    head.num_classes = ws.rows;
    head.dim = ws.cols;
    head.weights = std::move(w);
    head.bias = std::move(b);
    return head;
}

}  // namespace oodkit
