#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace oodkit {

/// n x d row-major matrix of 32-bit floats carrying sample embeddings.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t n, std::size_t d)
        : rows(n), cols(d), data(n * d, 0.0f) {}
    FeatureMatrix(std::size_t n, std::size_t d, std::vector<float> values)
        : rows(n), cols(d), data(std::move(values)) {
        if (data.size() != n * d)
            throw std::invalid_argument("FeatureMatrix: data size does not match shape");
    }

    std::span<const float> row(std::size_t i) const {
        return std::span<const float>(data.data() + i * cols, cols);
    }
    std::span<float> row(std::size_t i) {
        return std::span<float>(data.data() + i * cols, cols);
    }

    bool operator==(const FeatureMatrix&) const = default;
};

/// n x K matrix of classifier outputs, same layout as FeatureMatrix.
struct LogitMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    LogitMatrix() = default;
    LogitMatrix(std::size_t n, std::size_t k)
        : rows(n), cols(k), data(n * k, 0.0f) {}
    LogitMatrix(std::size_t n, std::size_t k, std::vector<float> values)
        : rows(n), cols(k), data(std::move(values)) {
        if (data.size() != n * k)
            throw std::invalid_argument("LogitMatrix: data size does not match shape");
    }

    std::span<const float> row(std::size_t i) const {
        return std::span<const float>(data.data() + i * cols, cols);
    }
    std::span<float> row(std::size_t i) {
        return std::span<float>(data.data() + i * cols, cols);
    }

    bool operator==(const LogitMatrix&) const = default;
};

/// Class labels, values in [0, K).
struct LabelVector {
    std::vector<std::int64_t> values;

    std::size_t size() const { return values.size(); }
    bool operator==(const LabelVector&) const = default;
};

/// Uncertainty scores, oriented larger == more OOD.
struct ScoreVector {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    auto begin() const { return values.begin(); }
    auto end() const { return values.end(); }
    bool operator==(const ScoreVector&) const = default;
};

struct OodSet {
    std::string name;
    FeatureMatrix orig;
    FeatureMatrix ft;
    std::optional<LogitMatrix> logits;
};

/// One benchmark unit: paired train streams plus ID/OOD test sets.
struct DatasetBundle {
    FeatureMatrix train_orig;
    FeatureMatrix train_ft;
    LabelVector train_labels;
    std::optional<LogitMatrix> train_logits;
    FeatureMatrix id_test_orig;
    FeatureMatrix id_test_ft;
    std::optional<LogitMatrix> id_test_logits;
    LabelVector id_test_labels;
    std::vector<OodSet> ood_sets;

    std::size_t num_classes() const {
        std::int64_t k = 0;
        for (auto v : train_labels.values) k = std::max(k, v + 1);
        for (auto v : id_test_labels.values) k = std::max(k, v + 1);
        return static_cast<std::size_t>(k);
    }
};

enum class ScoreMethod { energy, entropy, variance, msp, maxlogit, knn };

enum class FusedVariant { concat_then_normalize, normalize_then_concat, score_sum };

inline std::string to_string(ScoreMethod m) {
    switch (m) {
        case ScoreMethod::energy: return "energy";
        case ScoreMethod::entropy: return "entropy";
        case ScoreMethod::variance: return "variance";
        case ScoreMethod::msp: return "msp";
        case ScoreMethod::maxlogit: return "maxlogit";
        case ScoreMethod::knn: return "knn";
    }
    throw std::logic_error("unreachable");
}

inline ScoreMethod score_method_from_string(const std::string& s) {
    if (s == "energy") return ScoreMethod::energy;
    if (s == "entropy") return ScoreMethod::entropy;
    if (s == "variance") return ScoreMethod::variance;
    if (s == "msp") return ScoreMethod::msp;
    if (s == "maxlogit") return ScoreMethod::maxlogit;
    if (s == "knn") return ScoreMethod::knn;
    throw std::invalid_argument(
        "unknown score method '" + s +
        "' (valid: energy, entropy, variance, msp, maxlogit, knn)");
}

inline std::string to_string(FusedVariant v) {
    switch (v) {
        case FusedVariant::concat_then_normalize: return "concat-then-normalize";
        case FusedVariant::normalize_then_concat: return "normalize-then-concat";
        case FusedVariant::score_sum: return "score-sum";
    }
    throw std::logic_error("unreachable");
}

inline FusedVariant fused_variant_from_string(const std::string& s) {
    if (s == "concat-then-normalize") return FusedVariant::concat_then_normalize;
    if (s == "normalize-then-concat") return FusedVariant::normalize_then_concat;
    if (s == "score-sum") return FusedVariant::score_sum;
    throw std::invalid_argument(
        "unknown fused variant '" + s +
        "' (valid: concat-then-normalize, normalize-then-concat, score-sum)");
}

/// Stage-2 head training settings. Defaults follow the usual stage-2
/// recipe: 20 epochs, batch 32, plain SGD.
struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double learning_rate = 0.1;
    double weight_decay = 0.0;
    double momentum = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
        if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
        if (momentum < 0.0 || momentum >= 1.0)
            throw std::invalid_argument("momentum must be in [0, 1)");
    }
};

struct RunConfig {
    double temperature = 1.0;
    std::size_t knn_k = 1;
    std::optional<std::size_t> shots;  // nullopt == "all"
    std::uint64_t seed = 0;
    std::vector<ScoreMethod> methods = {
        ScoreMethod::energy,   ScoreMethod::entropy, ScoreMethod::variance,
        ScoreMethod::msp,      ScoreMethod::maxlogit, ScoreMethod::knn};
    FusedVariant variant = FusedVariant::concat_then_normalize;
    TrainConfig train;

    void validate() const {
        if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
        if (knn_k < 1) throw std::invalid_argument("knn_k must be >= 1");
        if (shots && *shots < 1) throw std::invalid_argument("shots must be >= 1");
        if (methods.empty()) throw std::invalid_argument("method set must be non-empty");
        train.validate();
    }
};

}  // namespace oodkit
