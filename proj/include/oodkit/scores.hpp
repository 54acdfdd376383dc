#pragma once

// Logit-based uncertainty scores. All arithmetic in double regardless
// of input precision; every score is oriented larger == more OOD.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "oodkit/types.hpp"

namespace oodkit {

namespace detail {

template <typename T>
void require_finite_row(std::span<const T> z) {
    for (T v : z)
        if (!std::isfinite(static_cast<double>(v)))
            throw std::invalid_argument("non-finite logit value");
}

template <typename T>
double max_scaled(std::span<const T> z, double temperature) {
    double m = -std::numeric_limits<double>::infinity();
    for (T v : z) m = std::max(m, static_cast<double>(v) / temperature);
    return m;
}

// log sum exp(z_j/T), max-subtracted.
template <typename T>
double log_sum_exp(std::span<const T> z, double temperature) {
    const double m = max_scaled(z, temperature);
    double s = 0.0;
    for (T v : z) s += std::exp(static_cast<double>(v) / temperature - m);
    return m + std::log(s);
}

}  // namespace detail

template <typename T>
std::vector<double> softmax(std::span<const T> z, double temperature) {
    if (z.size() < 2) throw std::invalid_argument("softmax: need K >= 2");
    if (!(temperature > 0.0)) throw std::invalid_argument("softmax: temperature must be > 0");
    detail::require_finite_row(z);
    const double m = detail::max_scaled(z, temperature);
    std::vector<double> p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(static_cast<double>(z[i]) / temperature - m);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

/// -logsumexp(z/T).
template <typename T>
double energy_score(std::span<const T> z, double temperature) {
    if (z.size() < 2) throw std::invalid_argument("energy_score: need K >= 2");
    if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
    detail::require_finite_row(z);
    return -detail::log_sum_exp(z, temperature);
}

/// Shannon entropy of softmax(z/T), natural log, 0*log0 == 0.
template <typename T>
double entropy_score(std::span<const T> z, double temperature) {
    const auto p = softmax(z, temperature);
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

/// Negative population variance of the softmax vector.
template <typename T>
double variance_score(std::span<const T> z, double temperature) {
    const auto p = softmax(z, temperature);
    const double mean = 1.0 / static_cast<double>(p.size());
    double var = 0.0;
    for (double v : p) var += (v - mean) * (v - mean);
    return -var / static_cast<double>(p.size());
}

/// Negative maximum softmax probability.
template <typename T>
double msp_score(std::span<const T> z, double temperature) {
    const auto p = softmax(z, temperature);
    return -*std::max_element(p.begin(), p.end());
}

/// Negative maximum temperature-scaled logit.
template <typename T>
double maxlogit_score(std::span<const T> z, double temperature) {
    if (z.empty()) throw std::invalid_argument("maxlogit_score: empty row");
    if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
    detail::require_finite_row(z);
    return -detail::max_scaled(z, temperature);
}

template <typename T>
double logit_score(std::span<const T> z, ScoreMethod method, double temperature) {
    switch (method) {
        case ScoreMethod::energy: return energy_score(z, temperature);
        case ScoreMethod::entropy: return entropy_score(z, temperature);
        case ScoreMethod::variance: return variance_score(z, temperature);
        case ScoreMethod::msp: return msp_score(z, temperature);
        case ScoreMethod::maxlogit: return maxlogit_score(z, temperature);
        case ScoreMethod::knn:
            throw std::invalid_argument("knn is feature-based, not a logit score");
    }
    throw std::logic_error("unreachable");
}

inline ScoreVector score_batch(const LogitMatrix& logits, ScoreMethod method,
                               double temperature) {
    ScoreVector out;
    out.values.reserve(logits.rows);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        try {
            out.values.push_back(logit_score(logits.row(i), method, temperature));
        } catch (const std::exception& e) {
            throw std::invalid_argument("score_batch: row " + std::to_string(i) + ": " +
                                        e.what());
        }
    }
    return out;
}

}  // namespace oodkit
