// End-to-end acceptance run on the synthetic world. Prints one PASS/FAIL line
// per criterion and exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "diffid/evaluate.hpp"
#include "diffid/finetune.hpp"
#include "diffid/quantify.hpp"
#include "diffid/reconstruction.hpp"
#include "diffid/synthetic.hpp"

using namespace diffid;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Bench {
    std::shared_ptr<const SyntheticWorld> world;
    SyntheticBackend backend;
    SyntheticPreprocessor prep;
    explicit Bench(const SyntheticWorldConfig& cfg)
        : world(std::make_shared<const SyntheticWorld>(cfg)), backend(world), prep(world) {}
};

EvalReport evaluate(const CorpusManifest& m, const SyntheticWorldConfig& generator, EvalConfig c = {}) {
    Bench b(generator);
    return run_evaluation(m, b.backend, b.prep, c);
}

std::vector<double> attributes(const SyntheticWorld& w, std::uint64_t seed) {
    Rng rng(seed);
    return w.sample_attributes(rng, 0.0);
}

double flat_angle(const Image& a, const Image& b, const Image& origin, const FaceMask& m) {
    long double uv = 0, uu = 0, vv = 0;
    for (int y = 0; y < origin.height(); ++y)
        for (int x = 0; x < origin.width(); ++x) {
            if (!m.at(y, x)) continue;
            for (int c = 0; c < origin.channels(); ++c) {
                const long double u = a.at(y, x, c) - origin.at(y, x, c);
                const long double v = b.at(y, x, c) - origin.at(y, x, c);
                uv += u * v;
                uu += u * u;
                vv += v * v;
            }
        }
    if (uu == 0 || vv == 0) return 0.0;
    return static_cast<double>(std::acos(std::clamp(uv / std::sqrt(uu * vv), -1.0L, 1.0L)));
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

double pair_count_auc(const std::vector<double>& real, const std::vector<double>& fake) {
    double wins = 0.0;
    for (double f : fake)
        for (double r : real) wins += f > r ? 1.0 : (f == r ? 0.5 : 0.0);
    return wins / static_cast<double>(real.size() * fake.size());
}

struct Outcome {
    bool pass;
    std::string detail;
};

Outcome triangle_identity() {
    const auto t0 = Clock::now();
    Bench b(SyntheticWorldConfig{});
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        const auto mu = b.world->identity_latent(static_cast<int>(s % 50));
        const auto ref = b.world->make_real(mu, attributes(*b.world, 10000 + s), s).image;
        const auto test = s % 2 ? b.world->make_fake(mu, attributes(*b.world, 20000 + s), 0.5, s).image
                                : b.world->make_real(b.world->identity_latent(static_cast<int>(s % 50)),
                                                     attributes(*b.world, 20000 + s), s + 1)
                                      .image;
        const auto q = reconstruct_quad(ref, test, b.backend);
        const auto mref = b.prep.detect_align(ref).mask;
        const auto mtest = b.prep.detect_align(test).mask;
        const auto tr = distance_triple(ref, q, mref, Space::Ref);
        const auto tt = distance_triple(test, q, mtest, Space::Test);
        worst = std::max(worst, std::abs(angle_from_triple(tr) - flat_angle(q.i_rr, q.i_tr, ref, mref)));
        worst = std::max(worst, std::abs(angle_from_triple(tt) - flat_angle(q.i_tt, q.i_rt, test, mtest)));
    }
    const double dt = seconds_since(t0);
    char buf[128];
    std::snprintf(buf, sizeof buf, "max |angle diff| %.3g over 1000 pairs, %.1f s", worst, dt);
    return {worst <= 1e-9 && dt < 30.0, buf};
}

Outcome degeneracies() {
    bool ok = true;
    Bench noisy(SyntheticWorldConfig{});
    SyntheticWorldConfig perfect;
    perfect.encoder_noise = 0.0;
    perfect.generator_leakage = 0.0;
    perfect.generator_blur = 0.0;
    Bench clean(perfect);
    SyntheticWorldConfig quiet;
    quiet.encoder_noise = 0.0;
    Bench exact(quiet);
    int checked = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto mu = noisy.world->identity_latent(static_cast<int>(s));
        const auto a = noisy.world->make_real(mu, attributes(*noisy.world, 100 + s), s).image;
        ok &= detect(a, a, noisy.backend, noisy.prep).score.value == 0.0;

        const auto r = clean.world->make_real(mu, attributes(*clean.world, 200 + s), s).image;
        const auto t = clean.world->make_real(mu, attributes(*clean.world, 300 + s), s + 1).image;
        ok &= detect(r, t, clean.backend, clean.prep).score.value == 0.0;

        const auto x = exact.world->make_real(mu, attributes(*exact.world, 400 + s), s).image;
        const auto y = exact.world->make_fake(mu, attributes(*exact.world, 500 + s), 0.5, s + 2).image;
        ok &= detect(x, y, exact.backend, exact.prep).score.value == detect(y, x, exact.backend, exact.prep).score.value;
        checked += 3;
    }
    return {ok, std::to_string(checked) + " exact-equality checks"};
}

Outcome auc_oracle() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> size(1, 20);
    std::uniform_int_distribution<int> level(0, 6);
    std::normal_distribution<double> n(0.0, 1.0);
    int mismatches = 0;
    for (int t = 0; t < 100; ++t) {
        std::vector<double> real(static_cast<std::size_t>(size(rng))), fake(static_cast<std::size_t>(size(rng)));
        for (double& v : real) v = t % 2 ? n(rng) : level(rng);
        for (double& v : fake) v = t % 2 ? n(rng) + 0.3 : level(rng) + 1;
        if (auc(real, fake) != pair_count_auc(real, fake)) ++mismatches;
    }
    return {mismatches == 0, std::to_string(mismatches) + " mismatches in 100 score sets"};
}

Outcome detection_power() {
    const auto t0 = Clock::now();
    const SyntheticWorldConfig cfg;  // the standard benchmark
    const auto report = evaluate(make_synthetic_corpus(cfg, CorpusSpec{}), cfg);
    const double dt = seconds_since(t0);

    // Threshold from a held-out corpus of the next seed.
    SyntheticWorldConfig held = cfg;
    held.seed = cfg.seed + 1;
    const auto cal_report = evaluate(make_synthetic_corpus(held, CorpusSpec{}), held);
    const auto cal = calibrate_threshold(cal_report.real_scores, cal_report.fake_scores);
    const double ba = balanced_accuracy(report.real_scores, report.fake_scores, cal.threshold);

    char buf[200];
    std::snprintf(buf, sizeof buf, "AUC %.4f (%zu real / %zu fake, %.1f s), threshold %.4f, balanced accuracy %.4f",
                  report.auc, report.real_scores.size(), report.fake_scores.size(), dt, cal.threshold, ba);
    return {report.auc >= 0.95 && ba >= 0.90 && report.failures == 0, buf};
}

Outcome monotonicity() {
    const double deltas[] = {0.0, 0.25, 0.5};
    std::vector<double> scores[3];
    for (int seed = 0; seed < 50; ++seed) {
        SyntheticWorldConfig cfg;
        cfg.encoder_noise = 0.0;
        cfg.seed = 5000 + static_cast<std::uint64_t>(seed);
        Bench b(cfg);
        const auto mu = b.world->identity_latent(0);
        const auto ref = b.world->make_real(mu, attributes(*b.world, 1), 1).image;
        const auto target = attributes(*b.world, 2);
        for (int d = 0; d < 3; ++d) {
            const auto test = b.world->make_fake(mu, target, deltas[d], 2).image;
            scores[d].push_back(detect(ref, test, b.backend, b.prep).score.value);
        }
    }
    const double m0 = median(scores[0]), m1 = median(scores[1]), m2 = median(scores[2]);
    char buf[160];
    std::snprintf(buf, sizeof buf, "median M %.5f < %.5f < %.5f", m0, m1, m2);
    return {m0 < m1 && m1 < m2, buf};
}

Outcome baseline_ordering() {
    SyntheticWorldConfig cfg;
    cfg.attribute_spread = 2.5;
    cfg.encoder_bleed = 0.05;
    const auto report = evaluate(make_synthetic_corpus(cfg, CorpusSpec{}), cfg);
    const double iesim = rescore(report, ScoreKind::IESim, Level::Frame).auc;
    char buf[160];
    std::snprintf(buf, sizeof buf, "Diff-ID %.4f vs IESim %.4f", report.auc, iesim);
    return {report.auc >= iesim, buf};
}

struct TuningRun {
    FinetuneResult result;
    double untuned_nomask = 0.0;
    double untuned_mask = 0.0;
    double tuned_nomask = 0.0;
    double tuned_mask = 0.0;
};

const TuningRun& tuning_run() {
    static const TuningRun run = [] {
        TuningRun r;
        SyntheticWorldConfig cfg;
        cfg.generator_leakage = 0.3;
        cfg.generator_blur = 2.0;
        cfg.clutter = 0.3;
        const auto corpus = make_synthetic_corpus(cfg, CorpusSpec{});
        const SyntheticWorld world(cfg);
        const auto train = make_training_set(world);
        r.result = finetune_synthetic_generator(cfg, train, PyramidL1Distance());
        const auto tuned = r.result.apply(cfg);
        EvalConfig nomask;
        nomask.detect.use_mask = false;
        r.untuned_nomask = evaluate(corpus, cfg, nomask).auc;
        r.untuned_mask = evaluate(corpus, cfg).auc;
        r.tuned_nomask = evaluate(corpus, tuned, nomask).auc;
        r.tuned_mask = evaluate(corpus, tuned).auc;
        return r;
    }();
    return run;
}

Outcome ablation() {
    const auto& r = tuning_run();
    char buf[200];
    std::snprintf(buf, sizeof buf, "untuned: %.4f no mask / %.4f mask; tuned: %.4f no mask / %.4f mask", r.untuned_nomask,
                  r.untuned_mask, r.tuned_nomask, r.tuned_mask);
    return {r.tuned_mask >= r.untuned_nomask, buf};
}

Outcome compression() {
    const SyntheticWorldConfig cfg;
    Bench b(cfg);
    const auto corpus = make_synthetic_corpus(cfg, CorpusSpec{});
    const auto qfs = default_sweep_qfs();
    const auto sweep = jpeg_robustness_sweep(corpus, b.backend, b.prep, qfs, EvalConfig{});
    const auto at = [&](int q) { return static_cast<std::size_t>(std::find(qfs.begin(), qfs.end(), q) - qfs.begin()); };
    const double drop = sweep.reports[at(100)].auc - sweep.reports[at(20)].auc;
    const bool traces = sweep.traces.size() == qfs.size() * corpus.tests().size();
    char buf[200];
    std::snprintf(buf, sizeof buf, "AUC QF100 %.4f, QF20 %.4f, drop %.4f; %zu trace rows", sweep.reports[at(100)].auc,
                  sweep.reports[at(20)].auc, drop, sweep.traces.size());
    return {drop <= 0.05 && traces, buf};
}

Outcome reference_strategy() {
    bool ok = true;
    std::string detail;
    for (std::uint64_t seed : {1234ULL, 1235ULL, 1236ULL}) {
        SyntheticWorldConfig cfg;
        cfg.seed = seed;
        cfg.yaw_occlusion = 1.0;
        cfg.yaw_range_deg = 60.0;
        cfg.occlusion_noise = 4.0;
        CorpusSpec spec;
        spec.reference_pool = 8;
        const auto corpus = make_synthetic_corpus(cfg, spec);
        EvalConfig random, frontal;
        random.seed = frontal.seed = seed;
        frontal.strategy = Strategy::Frontal;
        const double r = evaluate(corpus, cfg, random).auc;
        const double f = evaluate(corpus, cfg, frontal).auc;
        ok &= f >= r;
        char buf[80];
        std::snprintf(buf, sizeof buf, "%sseed %llu frontal %.4f random %.4f", detail.empty() ? "" : "; ",
                      static_cast<unsigned long long>(seed), f, r);
        detail += buf;
    }
    return {ok, detail};
}

Outcome component_ablation() {
    SyntheticWorldConfig cfg;
    cfg.detail_spread = 3.0;
    const auto report = evaluate(make_synthetic_corpus(cfg, CorpusSpec{}), cfg);
    auto a = [&](ScoreKind k) { return rescore(report, k, Level::Frame).auc; };
    const double ratio_ref = a(ScoreKind::RatioRef), raw_ref = a(ScoreKind::RawIdRef);
    const double ratio_test = a(ScoreKind::RatioTest), raw_test = a(ScoreKind::RawIdTest);
    double best = 0.0;
    for (auto k : {ScoreKind::RatioRef, ScoreKind::RatioTest, ScoreKind::ThetaRef, ScoreKind::ThetaTest,
                   ScoreKind::RawIdRef, ScoreKind::RawIdTest})
        best = std::max(best, a(k));
    char buf[240];
    std::snprintf(buf, sizeof buf,
                  "ratio %.4f vs raw %.4f (ref), %.4f vs %.4f (test); full %.4f, best component %.4f", ratio_ref,
                  raw_ref, ratio_test, raw_test, report.auc, best);
    return {ratio_ref > raw_ref && ratio_test > raw_test && report.auc >= best - 0.01, buf};
}

Outcome finetuning() {
    const auto& r = tuning_run();
    char buf[240];
    std::snprintf(buf, sizeof buf, "loss %.5f -> %.5f, (kappa, beta) (0.3, 2) -> (%.4f, %.4f); tuned+mask %.4f >= %.4f",
                  r.result.start.total, r.result.best.total, r.result.kappa, r.result.beta, r.tuned_mask,
                  r.untuned_nomask);
    return {r.result.best.total < r.result.start.total && r.tuned_mask >= r.untuned_nomask, buf};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"triangle identity", triangle_identity},
        {"exact degeneracies", degeneracies},
        {"AUC oracle", auc_oracle},
        {"detection power", detection_power},
        {"monotonicity in identity loss", monotonicity},
        {"Diff-ID vs IESim", baseline_ordering},
        {"mask and tuning ablation", ablation},
        {"JPEG robustness", compression},
        {"reference strategy", reference_strategy},
        {"metric components", component_ablation},
        {"fine-tuning", finetuning},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
