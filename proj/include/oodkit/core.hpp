#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "oodkit/npy.hpp"
#include "oodkit/rng.hpp"
#include "oodkit/types.hpp"

namespace oodkit {

inline constexpr double kMinRowNorm = 1e-12;

namespace detail {

inline double row_norm(std::span<const float> row) {
    double s = 0.0;
    for (float v : row) s += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(s);
}

}  // namespace detail

/// Checks finiteness of every entry; feature matrices additionally need
/// nonzero row norms for cosine similarity. Row index is reported.
inline void validate_features(const FeatureMatrix& m, const std::string& what = "features") {
    if (m.rows < 1 || m.cols < 1)
        throw std::invalid_argument(what + ": empty matrix (need n >= 1, d >= 1)");
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (float v : m.row(i)) {
            if (!std::isfinite(v))
                throw std::invalid_argument(what + ": non-finite value at row " +
                                            std::to_string(i));
        }
        if (detail::row_norm(m.row(i)) <= kMinRowNorm)
            throw std::invalid_argument(what + ": zero-norm feature row " + std::to_string(i));
    }
}

inline void validate_logits(const LogitMatrix& m, const std::string& what = "logits") {
    if (m.rows < 1 || m.cols < 2)
        throw std::invalid_argument(what + ": need n >= 1 rows and K >= 2 classes");
    for (std::size_t i = 0; i < m.rows; ++i)
        for (float v : m.row(i))
            if (!std::isfinite(v))
                throw std::invalid_argument(what + ": non-finite value at row " +
                                            std::to_string(i));
}

inline void validate_labels(const LabelVector& labels, std::size_t num_classes,
                            const std::string& what = "labels") {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto v = labels.values[i];
        if (v < 0 || v >= static_cast<std::int64_t>(num_classes))
            throw std::invalid_argument(what + ": label out of range at index " +
                                        std::to_string(i) + " (value " + std::to_string(v) +
                                        ", K=" + std::to_string(num_classes) + ")");
    }
}

// ---- typed matrix file I/O ----

inline FeatureMatrix load_features(const std::string& path) {
    std::vector<float> data;
    npy::Shape shape = npy::load<float>(path, data);
    if (shape.is_1d()) shape = {shape.rows, 1};
    FeatureMatrix m(shape.rows, shape.cols, std::move(data));
    validate_features(m, path);
    return m;
}

inline LogitMatrix load_logits(const std::string& path) {
    std::vector<float> data;
    npy::Shape shape = npy::load<float>(path, data);
    if (shape.is_1d())
        throw std::runtime_error(path + ": logit file must be 2-D (n, K)");
    LogitMatrix m(shape.rows, shape.cols, std::move(data));
    validate_logits(m, path);
    return m;
}

inline LabelVector load_labels(const std::string& path) {
    std::vector<std::int64_t> data;
    npy::Shape shape = npy::load<std::int64_t>(path, data);
    if (!shape.is_1d())
        throw std::runtime_error(path + ": label file must be 1-D");
    return LabelVector{std::move(data)};
}

inline ScoreVector load_scores(const std::string& path) {
    std::vector<double> data;
    npy::Shape shape = npy::load<double>(path, data);
    if (!shape.is_1d())
        throw std::runtime_error(path + ": score file must be 1-D");
    for (std::size_t i = 0; i < data.size(); ++i)
        if (!std::isfinite(data[i]))
            throw std::runtime_error(path + ": non-finite score at index " + std::to_string(i));
    return ScoreVector{std::move(data)};
}

inline void save_matrix(const FeatureMatrix& m, const std::string& path) {
    npy::save<float>(path, m.data, {m.rows, m.cols});
}
inline void save_matrix(const LogitMatrix& m, const std::string& path) {
    npy::save<float>(path, m.data, {m.rows, m.cols});
}
inline void save_matrix(const LabelVector& v, const std::string& path) {
    npy::save<std::int64_t>(path, v.values, {v.size(), 0});
}
inline void save_matrix(const ScoreVector& v, const std::string& path) {
    npy::save<double>(path, v.values, {v.size(), 0});
}

// ---- bundle validation ----

/// Aggregates every violated invariant into one report instead of
/// failing on the first.
inline void validate_bundle(const DatasetBundle& b) {
    std::vector<std::string> problems;
    auto check = [&](auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            problems.emplace_back(e.what());
        }
    };

    check([&] { validate_features(b.train_orig, "train_orig"); });
    check([&] { validate_features(b.train_ft, "train_ft"); });
    check([&] { validate_features(b.id_test_orig, "id_test_orig"); });
    check([&] { validate_features(b.id_test_ft, "id_test_ft"); });

    if (b.train_orig.rows != b.train_ft.rows)
        problems.push_back("train_orig/train_ft: row count mismatch (" +
                           std::to_string(b.train_orig.rows) + " vs " +
                           std::to_string(b.train_ft.rows) + ")");
    if (b.train_labels.size() != b.train_orig.rows)
        problems.push_back("train_labels: length mismatch with train features (" +
                           std::to_string(b.train_labels.size()) + " vs " +
                           std::to_string(b.train_orig.rows) + ")");
    if (b.id_test_orig.rows != b.id_test_ft.rows)
        problems.push_back("id_test_orig/id_test_ft: row count mismatch");
    if (b.id_test_labels.size() != b.id_test_orig.rows)
        problems.push_back("id_test_labels: length mismatch with id_test features");
    if (b.train_orig.cols != b.id_test_orig.cols)
        problems.push_back("id_test_orig: feature dim differs from train_orig");
    if (b.train_ft.cols != b.id_test_ft.cols)
        problems.push_back("id_test_ft: feature dim differs from train_ft");

    const std::size_t k = b.num_classes();
    check([&] { validate_labels(b.train_labels, k, "train_labels"); });
    check([&] { validate_labels(b.id_test_labels, k, "id_test_labels"); });

    if (b.train_logits) {
        check([&] { validate_logits(*b.train_logits, "train_logits"); });
        if (b.train_logits->rows != b.train_orig.rows)
            problems.push_back("train_logits: row count mismatch with train features");
    }
    if (b.id_test_logits) {
        check([&] { validate_logits(*b.id_test_logits, "id_test_logits"); });
        if (b.id_test_logits->rows != b.id_test_orig.rows)
            problems.push_back("id_test_logits: row count mismatch with id_test features");
    }
    for (const auto& ood : b.ood_sets) {
        const std::string tag = "ood_set '" + ood.name + "'";
        check([&] { validate_features(ood.orig, tag + " orig"); });
        check([&] { validate_features(ood.ft, tag + " ft"); });
        if (ood.orig.rows != ood.ft.rows)
            problems.push_back(tag + ": orig/ft row count mismatch");
        if (ood.orig.cols != b.train_orig.cols)
            problems.push_back(tag + ": orig feature dim differs from train_orig");
        if (ood.ft.cols != b.train_ft.cols)
            problems.push_back(tag + ": ft feature dim differs from train_ft");
        if (ood.logits) {
            check([&] { validate_logits(*ood.logits, tag + " logits"); });
            if (ood.logits->rows != ood.orig.rows)
                problems.push_back(tag + ": logits row count mismatch");
        }
    }

    if (!problems.empty()) {
        std::ostringstream os;
        os << "bundle validation failed (" << problems.size() << " problem"
           << (problems.size() > 1 ? "s" : "") << "):";
        for (const auto& p : problems) os << "\n  - " << p;
        throw std::invalid_argument(os.str());
    }
}

// ---- few-shot subsampling ----

struct SubsampleResult {
    FeatureMatrix features;
    LabelVector labels;
    std::vector<std::size_t> indices;  // into the original row order
};

/// Deterministic stratified subsample: per class c the class-c row
/// indices are Fisher-Yates shuffled by SplitMix64 keyed seed^c, the
/// first `shots` survivors are kept in ascending original-index order.
inline std::vector<std::size_t> few_shot_indices(const LabelVector& labels,
                                                 std::size_t num_classes, std::size_t shots,
                                                 std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> per_class(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i)
        per_class[static_cast<std::size_t>(labels.values[i])].push_back(i);

    std::vector<std::size_t> picked;
    picked.reserve(num_classes * shots);
    for (std::size_t c = 0; c < num_classes; ++c) {
        auto& idx = per_class[c];
        if (idx.size() < shots)
            throw std::invalid_argument("few_shot_subsample: class " + std::to_string(c) +
                                        " has only " + std::to_string(idx.size()) +
                                        " samples, need " + std::to_string(shots));
        SplitMix64 rng(seed ^ static_cast<std::uint64_t>(c));
        fisher_yates_shuffle(idx, rng);
        std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(shots));
        picked.insert(picked.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(shots));
    }
    return picked;
}

inline FeatureMatrix take_rows(const FeatureMatrix& m, const std::vector<std::size_t>& indices) {
    FeatureMatrix out(indices.size(), m.cols);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto src = m.row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

inline LabelVector take_labels(const LabelVector& labels,
                               const std::vector<std::size_t>& indices) {
    LabelVector out;
    out.values.reserve(indices.size());
    for (auto i : indices) out.values.push_back(labels.values[i]);
    return out;
}

inline SubsampleResult few_shot_subsample(const FeatureMatrix& features,
                                          const LabelVector& labels, std::size_t shots,
                                          std::uint64_t seed) {
    if (labels.size() != features.rows)
        throw std::invalid_argument("few_shot_subsample: label length mismatch");
    std::size_t num_classes = 0;
    for (auto v : labels.values)
        num_classes = std::max(num_classes, static_cast<std::size_t>(v) + 1);
    auto indices = few_shot_indices(labels, num_classes, shots, seed);
    return SubsampleResult{take_rows(features, indices), take_labels(labels, indices),
                           std::move(indices)};
}

// ---- row normalization ----

inline FeatureMatrix l2_normalize_rows(const FeatureMatrix& m) {
    FeatureMatrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double norm = detail::row_norm(m.row(i));
        if (norm <= kMinRowNorm)
            throw std::invalid_argument("l2_normalize_rows: zero-norm row " + std::to_string(i));
        auto src = m.row(i);
        auto dst = out.row(i);
        for (std::size_t j = 0; j < m.cols; ++j)
            dst[j] = static_cast<float>(static_cast<double>(src[j]) / norm);
    }
    return out;
}

}  // namespace oodkit
