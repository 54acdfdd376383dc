#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oodkit/eval.hpp"
#include "oodkit/rng.hpp"

using namespace oodkit;

namespace {

// O(n^2) pairwise definition, the oracle for the rank-based AUROC
double pairwise_auroc(const ScoreVector& id, const ScoreVector& ood) {
    double total = 0.0;
    for (double si : id.values)
        for (double so : ood.values) {
            if (si < so)
                total += 1.0;
            else if (si == so)
                total += 0.5;
        }
    return total / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

// exhaustive scan over candidate thresholds drawn from the ID multiset
double scan_fpr_at_tpr(const ScoreVector& id, const ScoreVector& ood, double target) {
    std::vector<double> candidates = id.values;
    std::sort(candidates.begin(), candidates.end());
    for (double lambda : candidates) {
        std::size_t tp = 0;
        for (double s : id.values)
            if (s <= lambda) ++tp;
        if (static_cast<double>(tp) / static_cast<double>(id.size()) >= target - 1e-12) {
            std::size_t fp = 0;
            for (double s : ood.values)
                if (s <= lambda) ++fp;
            return static_cast<double>(fp) / static_cast<double>(ood.size());
        }
    }
    return 1.0;
}

ScoreVector random_scores(SplitMix64& rng, std::size_t n, bool quantize) {
    ScoreVector out;
    for (std::size_t i = 0; i < n; ++i) {
        double v = rng.next_double();
        if (quantize) v = std::floor(v * 8.0) / 8.0;  // force heavy ties
        out.values.push_back(v);
    }
    return out;
}

}  // namespace

TEST_CASE("detect boundary convention") {
    ScoreVector s{{0.2, 0.8}};
    auto d = detect(s, 0.5);
    CHECK(d[0] == Detection::id);
    CHECK(d[1] == Detection::ood);

    ScoreVector boundary{{0.5}};
    CHECK(detect(boundary, 0.5)[0] == Detection::id);

    auto all_id = detect(s, 1e18);
    CHECK(all_id[0] == Detection::id);
    CHECK(all_id[1] == Detection::id);

    CHECK_THROWS_AS(detect(s, std::nan("")), std::invalid_argument);
}

TEST_CASE("auroc worked examples") {
    CHECK(auroc(ScoreVector{{0.1, 0.2}}, ScoreVector{{0.3, 0.4}}) == 1.0);
    CHECK(auroc(ScoreVector{{0.5, 0.5}}, ScoreVector{{0.5, 0.5}}) == 0.5);
    CHECK(auroc(ScoreVector{{0.1, 0.3}}, ScoreVector{{0.2, 0.4}}) == 0.75);
    CHECK_THROWS_AS(auroc(ScoreVector{}, ScoreVector{{1.0}}), std::invalid_argument);
}

TEST_CASE("rank-based auroc equals the pairwise oracle on 100 seeded instances") {
    SplitMix64 rng(314);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n_id = 1 + rng.next_below(200);
        const std::size_t n_ood = 1 + rng.next_below(200);
        const bool ties = trial % 2 == 0;
        auto id = random_scores(rng, n_id, ties);
        auto ood = random_scores(rng, n_ood, ties);
        CHECK(auroc(id, ood) == pairwise_auroc(id, ood));
        CHECK(fpr_at_tpr(id, ood, 0.95) == scan_fpr_at_tpr(id, ood, 0.95));
        // complement symmetry
        CHECK(std::abs(auroc(id, ood) + auroc(ood, id) - 1.0) < 1e-12);
    }
}

TEST_CASE("auroc invariant under strictly increasing transforms") {
    SplitMix64 rng(55);
    auto id = random_scores(rng, 60, false);
    auto ood = random_scores(rng, 40, false);
    const double base = auroc(id, ood);

    auto apply = [&](auto&& f) {
        ScoreVector i2 = id, o2 = ood;
        for (auto& v : i2.values) v = f(v);
        for (auto& v : o2.values) v = f(v);
        return auroc(i2, o2);
    };
    CHECK(apply([](double v) { return std::exp(v); }) == base);
    CHECK(apply([](double v) { return 3.0 * v - 7.0; }) == base);
}

TEST_CASE("fpr_at_tpr worked example and edge cases") {
    ScoreVector id;
    for (int i = 1; i <= 20; ++i) id.values.push_back(static_cast<double>(i));
    ScoreVector ood{{10.0, 18.0, 19.5, 25.0}};
    CHECK(fpr_at_tpr(id, ood, 0.95) == 0.5);

    ScoreVector high{{100.0, 101.0}};
    CHECK(fpr_at_tpr(id, high, 0.95) == 0.0);
    ScoreVector low{{-5.0, -4.0}};
    CHECK(fpr_at_tpr(id, low, 0.95) == 1.0);
}

TEST_CASE("fpr_at_tpr is non-decreasing in the target") {
    SplitMix64 rng(77);
    auto id = random_scores(rng, 120, true);
    auto ood = random_scores(rng, 90, true);
    double prev = 0.0;
    for (double target : {0.05, 0.25, 0.5, 0.75, 0.9, 0.95, 1.0}) {
        const double cur = fpr_at_tpr(id, ood, target);
        CHECK(cur >= prev);
        prev = cur;
    }
}

TEST_CASE("id_accuracy worked examples") {
    LogitMatrix z(2, 2, {2, 1, 0, 3});
    CHECK(id_accuracy(z, LabelVector{{0, 1}}) == 1.0);

    LogitMatrix tie(1, 2, {1, 1});
    CHECK(id_accuracy(tie, LabelVector{{1}}) == 0.0);  // tie goes to class 0
    CHECK(id_accuracy(tie, LabelVector{{0}}) == 1.0);

    // random logits vs random labels, n=1000, K=10 -> about 0.1
    SplitMix64 rng(41);
    LogitMatrix rz(1000, 10);
    for (auto& v : rz.data) v = static_cast<float>(rng.next_double());
    LabelVector ry;
    for (int i = 0; i < 1000; ++i)
        ry.values.push_back(static_cast<std::int64_t>(rng.next_below(10)));
    const double acc = id_accuracy(rz, ry);
    CHECK(acc > 0.07);
    CHECK(acc < 0.13);
}

TEST_CASE("evaluate_suite builds a complete grid with averages") {
    ScoredMethod m;
    m.name = "energy";
    m.id_scores = ScoreVector{{0.1, 0.2, 0.3}};
    m.ood_scores = {{"a", ScoreVector{{0.4, 0.5}}}, {"b", ScoreVector{{0.15, 0.6}}}};

    LogitMatrix logits(3, 2, {2, 1, 2, 1, 0, 3});
    LabelVector labels{{0, 0, 1}};
    auto report = evaluate_suite({m}, logits, labels);

    REQUIRE(report.cells.at("energy").size() == 2);
    const double avg = report.averages.at("energy").auroc;
    const double mean = 0.5 * (report.cells.at("energy").at("a").auroc +
                               report.cells.at("energy").at("b").auroc);
    CHECK(std::abs(avg - mean) < 1e-12);
    CHECK(report.id_accuracy == 1.0);

    // single OOD set: average equals the value
    m.ood_scores.pop_back();
    auto single = evaluate_suite({m}, logits, labels);
    CHECK(single.averages.at("energy").auroc == single.cells.at("energy").at("a").auroc);

    m.ood_scores.clear();
    CHECK_THROWS_WITH(evaluate_suite({m}, logits, labels),
                      Catch::Matchers::ContainsSubstring("energy"));
}
