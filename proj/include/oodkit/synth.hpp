#pragma once

// Synthetic two-stream bundle generator. The geometry is engineered so
// the fusion premise is testable at desk scale: the "orig" stream keeps
// all ID classes in one directional cone with OOD pointing elsewhere
// (good OOD separability, poor class separability), the "ft" stream
// spreads classes apart but draws OOD on top of the ID clusters (the
// reverse). Gaussian clusters via Box-Muller over SplitMix64, so a
// fixed seed gives a bit-identical bundle.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "oodkit/core.hpp"
#include "oodkit/rng.hpp"
#include "oodkit/types.hpp"

namespace oodkit {

struct SynthConfig {
    std::size_t num_classes = 3;
    std::size_t train_per_class = 50;
    std::size_t test_per_class = 20;
    std::size_t d_orig = 8;
    std::size_t d_ft = 8;
    double class_sep_orig = 0.5;   // small: classes blur together
    double class_sep_ft = 5.0;     // large: classes well separated
    double ood_shift_orig = 3.0;   // OOD cone away from the ID cone
    double ood_shift_ft = 4.5;     // OOD displaced from, but near, ID clusters
    std::size_t n_ood = 100;
    std::size_t num_ood_sets = 2;
    std::uint64_t seed = 7;

    void validate() const {
        if (num_classes < 2) throw std::invalid_argument("synth: need >= 2 classes");
        if (train_per_class < 1 || test_per_class < 1 || n_ood < 1 || num_ood_sets < 1)
            throw std::invalid_argument("synth: all counts must be >= 1");
        if (d_orig < 2 || d_ft < 2) throw std::invalid_argument("synth: dims must be >= 2");
    }
};

namespace detail {

inline std::vector<double> random_unit(GaussianSource& g, std::size_t dim) {
    std::vector<double> v(dim);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& x : v) {
            x = g.next();
            norm += x * x;
        }
        norm = std::sqrt(norm);
    } while (norm <= 1e-8);
    for (auto& x : v) x /= norm;
    return v;
}

inline void sample_around(GaussianSource& g, std::span<const double> center,
                          std::span<float> out) {
    for (std::size_t j = 0; j < out.size(); ++j)
        out[j] = static_cast<float>(center[j] + g.next());
}

inline std::vector<double> scaled_sum(std::span<const double> a, double wa,
                                      std::span<const double> b, double wb) {
    std::vector<double> out(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) out[j] = wa * a[j] + wb * b[j];
    return out;
}

}  // namespace detail

inline DatasetBundle synth_bundle(const SynthConfig& cfg) {
    cfg.validate();
    GaussianSource g(cfg.seed);
    const double radius = 5.0;

    // orig stream: shared cone direction plus small per-class offsets
    const auto cone_orig = detail::random_unit(g, cfg.d_orig);
    std::vector<std::vector<double>> means_orig;
    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
        auto offset = detail::random_unit(g, cfg.d_orig);
        means_orig.push_back(detail::scaled_sum(cone_orig, radius, offset, cfg.class_sep_orig));
    }
    // ft stream: well-separated class directions
    std::vector<std::vector<double>> means_ft;
    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
        auto dir = detail::random_unit(g, cfg.d_ft);
        for (auto& x : dir) x *= cfg.class_sep_ft;
        means_ft.push_back(std::move(dir));
    }

    DatasetBundle b;
    auto fill_id_split = [&](std::size_t per_class, FeatureMatrix& orig, FeatureMatrix& ft,
                             LabelVector& labels) {
        const std::size_t n = per_class * cfg.num_classes;
        orig = FeatureMatrix(n, cfg.d_orig);
        ft = FeatureMatrix(n, cfg.d_ft);
        labels.values.resize(n);
        std::size_t row = 0;
        for (std::size_t c = 0; c < cfg.num_classes; ++c) {
            for (std::size_t s = 0; s < per_class; ++s, ++row) {
                detail::sample_around(g, means_orig[c], orig.row(row));
                detail::sample_around(g, means_ft[c], ft.row(row));
                labels.values[row] = static_cast<std::int64_t>(c);
            }
        }
    };
    fill_id_split(cfg.train_per_class, b.train_orig, b.train_ft, b.train_labels);
    fill_id_split(cfg.test_per_class, b.id_test_orig, b.id_test_ft, b.id_test_labels);

    // fixed linear map from ft features to logits for the test sets
    std::vector<std::vector<double>> logit_map;
    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
        std::vector<double> row = means_ft[c];
        const double scale = 1.0 / std::max(cfg.class_sep_ft, 1e-6);
        for (auto& x : row) x *= scale;
        logit_map.push_back(std::move(row));
    }
    auto map_logits = [&](const FeatureMatrix& ft) {
        LogitMatrix z(ft.rows, cfg.num_classes);
        for (std::size_t i = 0; i < ft.rows; ++i) {
            auto x = ft.row(i);
            auto zi = z.row(i);
            for (std::size_t c = 0; c < cfg.num_classes; ++c) {
                double acc = 0.0;
                for (std::size_t j = 0; j < cfg.d_ft; ++j)
                    acc += logit_map[c][j] * static_cast<double>(x[j]);
                zi[c] = static_cast<float>(acc);
            }
        }
        return z;
    };
    b.id_test_logits = map_logits(b.id_test_ft);

    for (std::size_t s = 0; s < cfg.num_ood_sets; ++s) {
        OodSet set;
        set.name = "ood_" + std::to_string(s);
        set.orig = FeatureMatrix(cfg.n_ood, cfg.d_orig);
        set.ft = FeatureMatrix(cfg.n_ood, cfg.d_ft);
        // each OOD set gets its own off-cone direction
        const auto ood_dir = detail::random_unit(g, cfg.d_orig);
        const double shift = cfg.ood_shift_orig * (1.0 + 0.25 * static_cast<double>(s));
        std::vector<double> ood_center_orig(cfg.d_orig);
        for (std::size_t j = 0; j < cfg.d_orig; ++j) ood_center_orig[j] = shift * ood_dir[j];

        SplitMix64 pick(cfg.seed ^ (0xABCDULL + s));
        for (std::size_t i = 0; i < cfg.n_ood; ++i) {
            detail::sample_around(g, ood_center_orig, set.orig.row(i));
            // ft stream: draw near a random ID class mean, lightly displaced
            const std::size_t c = static_cast<std::size_t>(pick.next_below(cfg.num_classes));
            auto wobble = detail::random_unit(g, cfg.d_ft);
            auto center =
                detail::scaled_sum(means_ft[c], 1.0, wobble, cfg.ood_shift_ft);
            detail::sample_around(g, center, set.ft.row(i));
        }
        set.logits = map_logits(set.ft);
        b.ood_sets.push_back(std::move(set));
    }
    return b;
}

}  // namespace oodkit
