// Acceptance suite: one pass/fail line per criterion, non-zero exit if
// any fails. Criteria are property- and oracle-based; tolerances are
// pinned in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oodkit/oodkit.hpp"

using namespace oodkit;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int number, const std::string& name, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << number << ": " << name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << "\n";
    if (!ok) ++failures;
}

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::span<const double> sp(const std::vector<double>& v) { return {v.data(), v.size()}; }

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// ---- criterion 1: score oracles ----
void criterion_1() {
    const double t0 = now_seconds();
    SplitMix64 rng(6021);
    bool ok = true;
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        const std::size_t k = 2 + rng.next_below(9);
        std::vector<double> z(k);
        for (auto& v : z) v = -20.0 + 40.0 * rng.next_double();

        long double sum = 0;
        for (double v : z) sum += expl(static_cast<long double>(v));
        std::vector<long double> p(k);
        for (std::size_t i = 0; i < k; ++i) p[i] = expl(static_cast<long double>(z[i])) / sum;
        long double h = 0, var = 0, maxp = 0, maxz = z[0];
        const long double mean = 1.0L / static_cast<long double>(k);
        for (std::size_t i = 0; i < k; ++i) {
            if (p[i] > 0) h -= p[i] * logl(p[i]);
            var += (p[i] - mean) * (p[i] - mean);
            maxp = std::max(maxp, p[i]);
            maxz = std::max(maxz, static_cast<long double>(z[i]));
        }
        var /= static_cast<long double>(k);

        auto close = [](double got, long double want) {
            return std::abs(got - static_cast<double>(want)) /
                       std::max(1.0L, fabsl(want)) <
                   1e-9;
        };
        ok = ok && close(energy_score(sp(z), 1.0), -logl(sum));
        ok = ok && close(entropy_score(sp(z), 1.0), h);
        ok = ok && close(variance_score(sp(z), 1.0), -var);
        ok = ok && close(msp_score(sp(z), 1.0), -maxp);
        ok = ok && close(maxlogit_score(sp(z), 1.0), -maxz);
    }
    const double elapsed = now_seconds() - t0;
    report(1, "score oracle suite (1000 rows, 1e-9 relative)", ok && elapsed < 1.0,
           "runtime " + std::to_string(elapsed) + " s");
}

// ---- criterion 2: shift properties ----
void criterion_2() {
    SplitMix64 rng(88);
    bool ok = true;
    for (int trial = 0; trial < 200 && ok; ++trial) {
        const std::size_t k = 2 + rng.next_below(7);
        std::vector<double> z(k), zs(k);
        for (auto& v : z) v = -15.0 + 30.0 * rng.next_double();
        const double c = -8.0 + 16.0 * rng.next_double();
        const double t = 0.5 + 2.0 * rng.next_double();
        for (std::size_t i = 0; i < k; ++i) zs[i] = z[i] + c;

        ok = ok && std::abs(entropy_score(sp(zs), t) - entropy_score(sp(z), t)) < 1e-12;
        ok = ok && std::abs(variance_score(sp(zs), t) - variance_score(sp(z), t)) < 1e-12;
        ok = ok && std::abs(msp_score(sp(zs), t) - msp_score(sp(z), t)) < 1e-12;
        ok = ok && std::abs(energy_score(sp(zs), t) - (energy_score(sp(z), t) - c / t)) < 1e-9;
        ok = ok &&
             std::abs(maxlogit_score(sp(zs), t) - (maxlogit_score(sp(z), t) - c / t)) < 1e-9;
    }

    // AUROC exactly invariant under a global constant logit shift
    SplitMix64 rng2(89);
    LogitMatrix id(50, 5), ood(40, 5);
    for (auto& v : id.data) v = static_cast<float>(-5.0 + 10.0 * rng2.next_double());
    for (auto& v : ood.data) v = static_cast<float>(-5.0 + 10.0 * rng2.next_double());
    for (ScoreMethod m : {ScoreMethod::energy, ScoreMethod::entropy, ScoreMethod::variance,
                          ScoreMethod::msp, ScoreMethod::maxlogit}) {
        const double base = auroc(score_batch(id, m, 1.0), score_batch(ood, m, 1.0));
        LogitMatrix id2 = id, ood2 = ood;
        for (auto& v : id2.data) v += 4.0f;
        for (auto& v : ood2.data) v += 4.0f;
        const double shifted = auroc(score_batch(id2, m, 1.0), score_batch(ood2, m, 1.0));
        ok = ok && base == shifted;
    }
    report(2, "shift invariance / shift-by-c properties and AUROC invariance", ok);
}

// ---- criterion 3: metric oracles ----
void criterion_3() {
    auto pairwise = [](const ScoreVector& id, const ScoreVector& ood) {
        double tot = 0;
        for (double a : id.values)
            for (double b : ood.values) tot += a < b ? 1.0 : (a == b ? 0.5 : 0.0);
        return tot / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
    };
    auto scan = [](const ScoreVector& id, const ScoreVector& ood, double target) {
        std::vector<double> cand = id.values;
        std::sort(cand.begin(), cand.end());
        for (double lambda : cand) {
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
    };

    SplitMix64 rng(500);
    bool ok = true;
    for (int trial = 0; trial < 100 && ok; ++trial) {
        ScoreVector id, ood;
        const std::size_t n_id = 1 + rng.next_below(200);
        const std::size_t n_ood = 1 + rng.next_below(200);
        for (std::size_t i = 0; i < n_id; ++i)
            id.values.push_back(std::floor(rng.next_double() * 16.0) / 16.0);
        for (std::size_t i = 0; i < n_ood; ++i)
            ood.values.push_back(std::floor(rng.next_double() * 16.0) / 16.0);
        ok = ok && auroc(id, ood) == pairwise(id, ood);
        ok = ok && fpr_at_tpr(id, ood, 0.95) == scan(id, ood, 0.95);
    }

    ScoreVector id20;
    for (int i = 1; i <= 20; ++i) id20.values.push_back(i);
    ScoreVector ood4{{10.0, 18.0, 19.5, 25.0}};
    ok = ok && fpr_at_tpr(id20, ood4, 0.95) == 0.5;
    report(3, "AUROC/FPR oracles on 100 tied instances; worked example == 0.5", ok);
}

// ---- criterion 4: knn contracts ----
void criterion_4() {
    bool ok = true;
    GaussianSource g(777);
    FeatureMatrix train(20, 6);
    for (auto& v : train.data) v = static_cast<float>(g.next());
    KnnIndex index = build_index(train);
    for (std::size_t i = 0; i < train.rows; ++i)
        ok = ok && std::abs(knn_score(index, train.row(i)) + 1.0) < 1e-9;

    FeatureMatrix axes(2, 3, {1, 0, 0, 0, 1, 0});
    KnnIndex axes_idx = build_index(axes);
    std::vector<float> ortho = {0, 0, 1};
    ok = ok && std::abs(knn_score(axes_idx, std::span<const float>(ortho))) < 1e-12;

    KnnIndex pair = build_index(FeatureMatrix(2, 2, {0, 1, 1, 1}));
    std::vector<float> q10 = {1, 0};
    ok = ok && std::abs(knn_score(pair, std::span<const float>(q10)) + 0.707107) < 1e-6;

    // normalize-then-concat per-pair similarity == (s_o + s_ft)/2 on 100 pairs
    GaussianSource g2(778);
    FeatureMatrix to(10, 5), tf(10, 7);
    for (auto& v : to.data) v = static_cast<float>(g2.next());
    for (auto& v : tf.data) v = static_cast<float>(g2.next());
    FusedIndex fused(to, tf);
    KnnIndex io = build_index(to), ift = build_index(tf);
    FeatureMatrix qo(100, 5), qf(100, 7);
    for (auto& v : qo.data) v = static_cast<float>(g2.next());
    for (auto& v : qf.data) v = static_cast<float>(g2.next());
    for (std::size_t i = 0; i < 100; ++i) {
        auto so = io.similarities(qo.row(i));
        auto sf = ift.similarities(qf.row(i));
        double best = -2;
        for (std::size_t j = 0; j < so.size(); ++j) best = std::max(best, 0.5 * (so[j] + sf[j]));
        const double got =
            fused_knn_score(fused, qo.row(i), qf.row(i), FusedVariant::normalize_then_concat);
        ok = ok && std::abs(got + best) < 1e-9;
    }
    report(4, "k-NN self/orthogonal/worked-example and fused-average contracts", ok);
}

// ---- criterion 5: gradient check ----
void criterion_5() {
    SplitMix64 rng(4242);
    bool ok = true;
    for (int trial = 0; trial < 20 && ok; ++trial) {
        const std::size_t n = 1 + rng.next_below(16);
        const std::size_t d = 1 + rng.next_below(8);
        const std::size_t k = 2 + rng.next_below(4);

        GaussianSource g(9000 + static_cast<std::uint64_t>(trial));
        FeatureMatrix x(n, d);
        for (auto& v : x.data) v = static_cast<float>(g.next());
        LabelVector y;
        for (std::size_t i = 0; i < n; ++i)
            y.values.push_back(static_cast<std::int64_t>(rng.next_below(k)));
        LinearHead head(k, d);
        for (auto& w : head.weights) w = 0.4 * g.next();
        for (auto& b : head.bias) b = 0.4 * g.next();

        auto grad = head_gradient(head, x, y, 0.0);
        // loss in pure double, avoiding float32 logit rounding in the quotient
        auto loss_with = [&](const LinearHead& h) {
            double total = 0.0;
            std::vector<double> z(h.num_classes);
            for (std::size_t i = 0; i < x.rows; ++i) {
                auto row = x.row(i);
                double zmax = -std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < h.num_classes; ++c) {
                    z[c] = h.bias[c];
                    for (std::size_t j = 0; j < h.dim; ++j)
                        z[c] += h.w(c, j) * static_cast<double>(row[j]);
                    zmax = std::max(zmax, z[c]);
                }
                double sum = 0.0;
                for (double v : z) sum += std::exp(v - zmax);
                total += zmax + std::log(sum) - z[static_cast<std::size_t>(y.values[i])];
            }
            return total / static_cast<double>(x.rows);
        };
        const double eps = 1e-4;
        for (std::size_t t = 0; t < head.weights.size() + head.bias.size() && ok; ++t) {
            LinearHead plus = head, minus = head;
            double analytic;
            if (t < head.weights.size()) {
                plus.weights[t] += eps;
                minus.weights[t] -= eps;
                analytic = grad.weights[t];
            } else {
                plus.bias[t - head.weights.size()] += eps;
                minus.bias[t - head.weights.size()] -= eps;
                analytic = grad.bias[t - head.weights.size()];
            }
            const double fd = (loss_with(plus) - loss_with(minus)) / (2 * eps);
            ok = ok && std::abs(analytic - fd) / std::max(1.0, std::abs(fd)) < 1e-5;
        }
    }
    report(5, "analytic gradient vs central finite differences (20 instances, 1e-5)", ok);
}

// ---- criterion 6: trainer ----
void criterion_6() {
    const double t0 = now_seconds();
    GaussianSource g(2718);
    FeatureMatrix x(200, 2);
    LabelVector y;
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 100; ++i) {
            auto row = x.row(c * 100 + i);
            row[0] = static_cast<float>((c == 0 ? -3.0 : 3.0) + g.next());
            row[1] = static_cast<float>(g.next());
            y.values.push_back(static_cast<std::int64_t>(c));
        }

    TrainConfig cfg;  // 20 epochs, batch 32, lr 0.1
    LinearHead a = train_head(x, y, cfg);
    LinearHead b = train_head(x, y, cfg);
    const double acc = id_accuracy(head_forward(a, x), y);
    const double elapsed = now_seconds() - t0;
    report(6, "separable fixture accuracy 1.0, bitwise-identical reruns, < 5 s",
           acc == 1.0 && a == b && elapsed < 5.0,
           "accuracy " + std::to_string(acc) + ", runtime " + std::to_string(elapsed) + " s");
}

// ---- criterion 7: desk-scale fusion efficacy ----
void criterion_7() {
    const double t0 = now_seconds();
    DatasetBundle bundle = synth_bundle(SynthConfig{});
    BenchRequest req;
    req.shots = {std::optional<std::size_t>(2), std::optional<std::size_t>(4)};
    BenchReport rep = run_benchmark(bundle, req);

    bool ok = true;
    std::ostringstream detail;
    for (const std::string shot : {"2", "4"}) {
        const auto& row = rep.grid.at(shot);
        const double knn_orig = row.at("baseline-orig").averages.at("knn").auroc;
        const double knn_ft = row.at("baseline-ft").averages.at("knn").auroc;
        const double base_best = std::max(knn_orig, knn_ft);
        for (const char* variant :
             {"knn[concat-then-normalize]", "knn[normalize-then-concat]", "knn[score-sum]"}) {
            const double fused = rep.grid.at(shot).at("dsgf").averages.at(variant).auroc;
            if (fused < base_best - 0.02) {
                ok = false;
                detail << shot << "-shot " << variant << " " << fused << " < " << base_best
                       << "-0.02; ";
            }
        }
        const double acc_dsgf = row.at("dsgf").id_accuracy;
        const double acc_ft = row.at("baseline-ft").id_accuracy;
        if (acc_dsgf < acc_ft - 0.02) {
            ok = false;
            detail << shot << "-shot id-acc " << acc_dsgf << " < " << acc_ft << "-0.02; ";
        }
        if (shot == "2" && !(knn_orig > knn_ft)) {
            ok = false;
            detail << "orig knn AUROC " << knn_orig << " !> ft " << knn_ft << "; ";
        }
    }
    const double elapsed = now_seconds() - t0;
    if (elapsed >= 60.0) ok = false;
    report(7, "fusion efficacy at M in {2,4} and frozen-vs-fine-tuned ordering", ok,
           detail.str() + "runtime " + std::to_string(elapsed) + " s");
}

// ---- criterion 8: round-trips and CLI determinism ----
void criterion_8(const std::string& cli) {
    bool ok = true;
    const fs::path tmp = fs::temp_directory_path() / "oodkit_acceptance";
    fs::remove_all(tmp);
    fs::create_directories(tmp);

    // bit-exact file round-trip for all three dtypes
    GaussianSource g(31415);
    FeatureMatrix f(37, 11);
    for (auto& v : f.data) v = static_cast<float>(g.next());
    save_matrix(f, (tmp / "f.npy").string());
    ok = ok && load_features((tmp / "f.npy").string()) == f;
    LabelVector labels{{0, 5, 3, 9}};
    save_matrix(labels, (tmp / "l.npy").string());
    ok = ok && load_labels((tmp / "l.npy").string()) == labels;
    ScoreVector scores{{-1.5, 2.25e-17, 3.0}};
    save_matrix(scores, (tmp / "s.npy").string());
    ok = ok && load_scores((tmp / "s.npy").string()) == scores;

    // identical CLI invocations produce byte-identical outputs
    auto run = [&](const std::string& cmd) { return std::system(cmd.c_str()) == 0; };
    const std::string b1 = (tmp / "b1").string(), b2 = (tmp / "b2").string();
    ok = ok && run(cli + " synth --seed 11 --train-per-class 20 --test-per-class 8 --n-ood 20 --out " + b1 + " > /dev/null");
    ok = ok && run(cli + " synth --seed 11 --train-per-class 20 --test-per-class 8 --n-ood 20 --out " + b2 + " > /dev/null");
    for (const auto& entry : fs::directory_iterator(b1)) {
        const auto other = fs::path(b2) / entry.path().filename();
        ok = ok && read_file(entry.path()) == read_file(other);
    }
    const std::string r1 = (tmp / "r1.json").string(), r2 = (tmp / "r2.json").string();
    const std::string bench_cmd = " bench --manifest " + b1 + "/manifest.json --shots 2 --seed 3 --epochs 5 --out ";
    ok = ok && run(cli + bench_cmd + r1 + " > /dev/null");
    ok = ok && run(cli + bench_cmd + r2 + " > /dev/null");
    ok = ok && !read_file(r1).empty() && read_file(r1) == read_file(r2);

    fs::remove_all(tmp);
    report(8, "bit-exact file round-trip; byte-identical CLI reruns", ok);
}

// ---- criterion 9: variant report with divergence witness ----
void criterion_9() {
    DatasetBundle bundle = synth_bundle(SynthConfig{});
    BenchRequest req;
    req.shots = {std::optional<std::size_t>(2)};
    req.run.train.epochs = 5;
    BenchReport rep = run_benchmark(bundle, req);
    nlohmann::json j = bench_report_json(rep);

    bool ok = true;
    const auto& dsgf = j.at("grid").at("2").at("dsgf").at("methods");
    for (const char* variant :
         {"knn[concat-then-normalize]", "knn[normalize-then-concat]", "knn[score-sum]"})
        ok = ok && dsgf.contains(variant);
    const auto& witness = j.at("appendix_divergence_witness");
    ok = ok && witness.at("orderings_differ").get<bool>();
    ok = ok && witness.at("more_ood").at("normalize-then-concat") !=
                   witness.at("more_ood").at("score-sum");
    report(9, "all three fused variants reported, divergence witness included", ok);
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "./oodbench";
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8(cli);
    criterion_9();
    if (failures > 0) {
        std::cout << failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all acceptance criteria passed\n";
    return 0;
}
