#pragma once

// Non-parametric OOD scoring by cosine matching against the training
// bank: score = -(k-th largest cosine similarity), k=1 by default.
// Exact brute-force search; the normalized bank and all similarity
// arithmetic are kept in double.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "oodkit/core.hpp"
#include "oodkit/types.hpp"

namespace oodkit {

namespace detail {

template <typename T>
double vec_norm(std::span<T> v) {
    double s = 0.0;
    for (T x : v) s += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(s);
}

}  // namespace detail

/// Normalized copy of the training bank for exact cosine search.
class KnnIndex {
public:
    explicit KnnIndex(const FeatureMatrix& train)
        : rows_(train.rows), cols_(train.cols), data_(train.rows * train.cols) {
        for (std::size_t i = 0; i < rows_; ++i) normalize_into(train.row(i), i);
    }

    /// Builds from a row-major double matrix; used by the fused paths.
    KnnIndex(std::size_t rows, std::size_t cols, const std::vector<double>& raw)
        : rows_(rows), cols_(cols), data_(rows * cols) {
        if (raw.size() != rows * cols)
            throw std::invalid_argument("knn: data size does not match shape");
        for (std::size_t i = 0; i < rows_; ++i)
            normalize_into(std::span<const double>(raw.data() + i * cols_, cols_), i);
    }

    std::size_t size() const { return rows_; }
    std::size_t dim() const { return cols_; }
    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }

    /// Cosine similarities of a query against every stored row.
    template <typename T>
    std::vector<double> similarities(std::span<T> query) const {
        if (query.size() != cols_)
            throw std::invalid_argument("knn: query dim " + std::to_string(query.size()) +
                                        " does not match index dim " + std::to_string(cols_));
        const double qnorm = detail::vec_norm(query);
        if (qnorm <= kMinRowNorm) throw std::invalid_argument("knn: zero-norm query");

        std::vector<double> sims(rows_);
        for (std::size_t j = 0; j < rows_; ++j) {
            auto r = row(j);
            double dot = 0.0;
            for (std::size_t t = 0; t < cols_; ++t)
                dot += r[t] * static_cast<double>(query[t]);
            sims[j] = dot / qnorm;
        }
        return sims;
    }

private:
    template <typename T>
    void normalize_into(std::span<const T> src, std::size_t i) {
        const double norm = detail::vec_norm(src);
        if (norm <= kMinRowNorm)
            throw std::invalid_argument("knn: zero-norm training row " + std::to_string(i));
        for (std::size_t j = 0; j < cols_; ++j)
            data_[i * cols_ + j] = static_cast<double>(src[j]) / norm;
    }

    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
};

inline KnnIndex build_index(const FeatureMatrix& train) { return KnnIndex(train); }

namespace detail {

// k-th largest similarity; ties broken by ascending training-row index.
inline double kth_largest(std::vector<double> sims, std::size_t k) {
    std::vector<std::size_t> order(sims.size());
    std::iota(order.begin(), order.end(), 0);
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     order.end(), [&](std::size_t a, std::size_t b) {
                         if (sims[a] != sims[b]) return sims[a] > sims[b];
                         return a < b;
                     });
    return sims[order[k - 1]];
}

}  // namespace detail

template <typename T>
double knn_score(const KnnIndex& index, std::span<T> query, std::size_t k = 1) {
    if (k < 1 || k > index.size())
        throw std::invalid_argument("knn: k=" + std::to_string(k) +
                                    " outside [1, n_train=" + std::to_string(index.size()) + "]");
    auto sims = index.similarities(query);
    if (k == 1) return -*std::max_element(sims.begin(), sims.end());
    return -detail::kth_largest(std::move(sims), k);
}

inline ScoreVector knn_score_batch(const KnnIndex& index, const FeatureMatrix& queries,
                                   std::size_t k = 1) {
    ScoreVector out;
    out.values.reserve(queries.rows);
    for (std::size_t i = 0; i < queries.rows; ++i) {
        try {
            out.values.push_back(knn_score(index, queries.row(i), k));
        } catch (const std::exception& e) {
            throw std::invalid_argument("knn_score_batch: row " + std::to_string(i) + ": " +
                                        e.what());
        }
    }
    return out;
}

// ---- fused two-stream scoring ----

namespace detail {

template <typename T>
std::vector<double> normalized_copy(std::span<T> v) {
    const double n = vec_norm(v);
    if (n <= kMinRowNorm) throw std::invalid_argument("fused knn: zero-norm query");
    std::vector<double> out;
    out.reserve(v.size());
    for (T x : v) out.push_back(static_cast<double>(x) / n);
    return out;
}

template <typename TA, typename TB>
std::vector<double> concat_query(std::span<TA> a, std::span<TB> b) {
    std::vector<double> q;
    q.reserve(a.size() + b.size());
    for (auto v : a) q.push_back(static_cast<double>(v));
    for (auto v : b) q.push_back(static_cast<double>(v));
    return q;
}

}  // namespace detail

/// Paired two-stream index holding the views needed by all three
/// fused-scoring variants. Both streams must list the same training
/// samples in the same row order.
class FusedIndex {
public:
    FusedIndex(const FeatureMatrix& train_orig, const FeatureMatrix& train_ft)
        : orig_(train_orig),
          ft_(train_ft),
          concat_raw_(make_concat_raw(train_orig, train_ft)),
          concat_normalized_(make_concat_normalized(orig_, ft_)) {}

    const KnnIndex& orig() const { return orig_; }
    const KnnIndex& ft() const { return ft_; }
    const KnnIndex& concat_raw() const { return concat_raw_; }
    const KnnIndex& concat_normalized() const { return concat_normalized_; }
    std::size_t size() const { return orig_.size(); }

private:
    static KnnIndex make_concat_raw(const FeatureMatrix& a, const FeatureMatrix& b) {
        if (a.rows != b.rows)
            throw std::invalid_argument(
                "fused knn: paired matrices have different row counts (" +
                std::to_string(a.rows) + " vs " + std::to_string(b.rows) + ")");
        std::vector<double> raw(a.rows * (a.cols + b.cols));
        for (std::size_t i = 0; i < a.rows; ++i) {
            double* dst = raw.data() + i * (a.cols + b.cols);
            for (std::size_t j = 0; j < a.cols; ++j) dst[j] = static_cast<double>(a.row(i)[j]);
            for (std::size_t j = 0; j < b.cols; ++j)
                dst[a.cols + j] = static_cast<double>(b.row(i)[j]);
        }
        return KnnIndex(a.rows, a.cols + b.cols, raw);
    }

    // concatenates the already unit-normalized per-stream rows
    static KnnIndex make_concat_normalized(const KnnIndex& a, const KnnIndex& b) {
        std::vector<double> raw(a.size() * (a.dim() + b.dim()));
        for (std::size_t i = 0; i < a.size(); ++i) {
            double* dst = raw.data() + i * (a.dim() + b.dim());
            auto ra = a.row(i);
            auto rb = b.row(i);
            std::copy(ra.begin(), ra.end(), dst);
            std::copy(rb.begin(), rb.end(), dst + a.dim());
        }
        return KnnIndex(a.size(), a.dim() + b.dim(), raw);
    }

    KnnIndex orig_;
    KnnIndex ft_;
    KnnIndex concat_raw_;         // raw concatenation, normalized at build
    KnnIndex concat_normalized_;  // per-stream normalization, then concat
};

template <typename T>
double fused_knn_score(const FusedIndex& index, std::span<T> q_orig,
                       std::span<T> q_ft, FusedVariant variant, std::size_t k = 1) {
    switch (variant) {
        case FusedVariant::concat_then_normalize: {
            auto q = detail::concat_query(q_orig, q_ft);
            return knn_score(index.concat_raw(), std::span<const double>(q), k);
        }
        case FusedVariant::normalize_then_concat: {
            auto qo = detail::normalized_copy(q_orig);
            auto qf = detail::normalized_copy(q_ft);
            auto q = detail::concat_query(std::span<const double>(qo),
                                          std::span<const double>(qf));
            return knn_score(index.concat_normalized(), std::span<const double>(q), k);
        }
        case FusedVariant::score_sum:
            return knn_score(index.orig(), q_orig, k) + knn_score(index.ft(), q_ft, k);
    }
    throw std::logic_error("unreachable");
}

inline ScoreVector fused_knn_score_batch(const FusedIndex& index, const FeatureMatrix& q_orig,
                                         const FeatureMatrix& q_ft, FusedVariant variant,
                                         std::size_t k = 1) {
    if (q_orig.rows != q_ft.rows)
        throw std::invalid_argument("fused knn: query streams have different row counts");
    ScoreVector out;
    out.values.reserve(q_orig.rows);
    for (std::size_t i = 0; i < q_orig.rows; ++i)
        out.values.push_back(fused_knn_score(index, q_orig.row(i), q_ft.row(i), variant, k));
    return out;
}

}  // namespace oodkit
