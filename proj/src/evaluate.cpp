#include "diffid/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <thread>

#include "diffid/error.hpp"
#include "diffid/image_io.hpp"
#include "diffid/rng.hpp"
#include "diffid/serialize.hpp"

namespace diffid {

double auc(std::span<const double> real_scores, std::span<const double> fake_scores) {
    if (real_scores.empty() || fake_scores.empty()) throw InvalidArgument("auc: both score lists must be nonempty");
    // Mann-Whitney U from midranks; ranks are multiples of 1/2, so the sums stay exact.
    struct Item {
        double score;
        bool fake;
    };
    std::vector<Item> items;
    items.reserve(real_scores.size() + fake_scores.size());
    for (double s : real_scores) items.push_back({s, false});
    for (double s : fake_scores) items.push_back({s, true});
    for (const auto& it : items) {
        if (std::isnan(it.score)) throw InvalidArgument("auc: NaN score");
    }
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

    double fake_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i;
        while (j < items.size() && items[j].score == items[i].score) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (items[k].fake) fake_rank_sum += midrank;
        }
        i = j;
    }
    const double nf = static_cast<double>(fake_scores.size());
    const double nr = static_cast<double>(real_scores.size());
    const double u = fake_rank_sum - nf * (nf + 1.0) / 2.0;
    return u / (nf * nr);
}

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::Random: return "random";
        case Strategy::Frontal: return "frontal";
        case Strategy::SameOrientation: return "same-orientation";
    }
    return "random";
}

Strategy parse_strategy(std::string_view s) {
    if (s == "random") return Strategy::Random;
    if (s == "frontal") return Strategy::Frontal;
    if (s == "same-orientation") return Strategy::SameOrientation;
    throw InvalidArgument("unknown reference strategy '" + std::string(s) + "'");
}

std::size_t select_reference(std::span<const double> pool_yaws, Strategy strategy, double test_yaw,
                             std::uint64_t seed) {
    if (pool_yaws.empty()) throw InvalidArgument("select_reference: empty reference pool");
    Rng rng(seed);
    auto draw = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    if (strategy == Strategy::Random) return draw(pool_yaws.size());

    const double target = strategy == Strategy::Frontal ? 0.0 : test_yaw;
    constexpr double kTolerance = 5.0;
    std::vector<std::size_t> qualifying;
    for (std::size_t i = 0; i < pool_yaws.size(); ++i) {
        if (std::abs(pool_yaws[i] - target) <= kTolerance) qualifying.push_back(i);
    }
    if (!qualifying.empty()) return qualifying[draw(qualifying.size())];

    std::size_t best = 0;
    for (std::size_t i = 1; i < pool_yaws.size(); ++i) {
        if (std::abs(pool_yaws[i] - target) < std::abs(pool_yaws[best] - target)) best = i;
    }
    return best;
}

double video_score(std::span<const double> frame_scores) {
    if (frame_scores.empty()) throw InvalidArgument("video_score: no frames");
    return std::accumulate(frame_scores.begin(), frame_scores.end(), 0.0) / static_cast<double>(frame_scores.size());
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw InvalidArgument("quantile of an empty list");
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("quantile: q must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Calibration calibrate_threshold(std::span<const double> real_scores, std::span<const double> fake_scores) {
    if (real_scores.empty() || fake_scores.empty()) {
        throw InvalidArgument("calibrate_threshold: both score lists must be nonempty");
    }
    Calibration c;
    c.real_q95 = quantile({real_scores.begin(), real_scores.end()}, 0.95);
    c.fake_q05 = quantile({fake_scores.begin(), fake_scores.end()}, 0.05);
    c.threshold = (c.real_q95 + c.fake_q05) / 2.0;
    return c;
}

double balanced_accuracy(std::span<const double> real_scores, std::span<const double> fake_scores,
                         double threshold) {
    if (real_scores.empty() || fake_scores.empty()) {
        throw InvalidArgument("balanced_accuracy: both score lists must be nonempty");
    }
    const auto tn = std::count_if(real_scores.begin(), real_scores.end(), [&](double s) { return !(s > threshold); });
    const auto tp = std::count_if(fake_scores.begin(), fake_scores.end(), [&](double s) { return s > threshold; });
    return 0.5 * (static_cast<double>(tn) / static_cast<double>(real_scores.size()) +
                  static_cast<double>(tp) / static_cast<double>(fake_scores.size()));
}

std::string_view to_string(Level l) { return l == Level::Frame ? "frame" : "video"; }

std::string_view to_string(ScoreKind k) {
    switch (k) {
        case ScoreKind::DiffId: return "diffid";
        case ScoreKind::IESim: return "iesim";
        case ScoreKind::RawIdRef: return "l_id_ref";
        case ScoreKind::RatioRef: return "ratio_ref";
        case ScoreKind::ThetaRef: return "theta_ref";
        case ScoreKind::RatioTest: return "ratio_test";
        case ScoreKind::ThetaTest: return "theta_test";
        case ScoreKind::RawIdTest: return "l_id_test";
    }
    return "diffid";
}

ScoreKind parse_score_kind(std::string_view s) {
    for (auto k : {ScoreKind::DiffId, ScoreKind::IESim, ScoreKind::RawIdRef, ScoreKind::RatioRef, ScoreKind::ThetaRef,
                   ScoreKind::RatioTest, ScoreKind::ThetaTest, ScoreKind::RawIdTest}) {
        if (to_string(k) == s) return k;
    }
    throw InvalidArgument("unknown score kind '" + std::string(s) + "'");
}

double EntryOutcome::value(ScoreKind kind) const {
    switch (kind) {
        case ScoreKind::DiffId: return score.value;
        case ScoreKind::IESim: return iesim;
        case ScoreKind::RawIdRef: return score.ref.l_id;
        case ScoreKind::RatioRef: return score.ratio_ref;
        case ScoreKind::ThetaRef: return score.theta_ref;
        case ScoreKind::RatioTest: return score.ratio_test;
        case ScoreKind::ThetaTest: return score.theta_test;
        case ScoreKind::RawIdTest: return score.test.l_id;
    }
    return score.value;
}

namespace {

struct ScoredSet {
    std::vector<double> real;
    std::vector<double> fake;
};

// AUC with the degeneracy policy: 0.5 and a flag when a class is missing or all scores tie.
std::pair<double, bool> guarded_auc(const ScoredSet& s) {
    if (s.real.empty() || s.fake.empty()) return {0.5, true};
    const double first = s.real.front();
    const bool all_tie = std::all_of(s.real.begin(), s.real.end(), [&](double v) { return v == first; }) &&
                         std::all_of(s.fake.begin(), s.fake.end(), [&](double v) { return v == first; });
    if (all_tie) return {0.5, true};
    return {auc(s.real, s.fake), false};
}

std::vector<ScoredUnit> make_units(const std::vector<EntryOutcome>& entries, ScoreKind kind, Level level,
                                   std::uint64_t seed, int max_frames) {
    std::vector<ScoredUnit> units;
    if (level == Level::Frame) {
        for (const auto& e : entries) {
            if (e.ok) units.push_back({e.entry_id, e.identity, e.fake, e.value(kind)});
        }
        return units;
    }
    // Videos keep manifest order; a video mixing labels would be a manifest bug.
    std::vector<std::string> order;
    std::map<std::string, std::vector<const EntryOutcome*>> frames;
    for (const auto& e : entries) {
        if (!e.ok) continue;
        auto [it, inserted] = frames.try_emplace(e.video_id);
        if (inserted) order.push_back(e.video_id);
        it->second.push_back(&e);
    }
    for (const auto& vid : order) {
        auto picked = frames[vid];
        if (static_cast<int>(picked.size()) > max_frames) {
            Rng rng(derive_seed(seed, {hash_string("video-frames"), hash_string(vid)}));
            std::shuffle(picked.begin(), picked.end(), rng);
            picked.resize(static_cast<std::size_t>(max_frames));
        }
        std::vector<double> scores;
        for (const auto* f : picked) scores.push_back(f->value(kind));
        units.push_back({vid, picked.front()->identity, picked.front()->fake, video_score(scores)});
    }
    return units;
}

void aggregate(EvalReport& r) {
    r.units = make_units(r.entries, r.config.score, r.config.level, r.config.seed, r.config.max_frames_per_video);
    ScoredSet all;
    std::map<std::string, ScoredSet> per_identity;
    for (const auto& u : r.units) {
        (u.fake ? all.fake : all.real).push_back(u.score);
        auto& s = per_identity[u.identity];
        (u.fake ? s.fake : s.real).push_back(u.score);
    }
    r.real_scores = all.real;
    r.fake_scores = all.fake;
    std::tie(r.auc, r.degenerate) = guarded_auc(all);
    r.per_identity_auc.clear();
    for (const auto& [id, s] : per_identity) {
        if (!s.real.empty() && !s.fake.empty()) r.per_identity_auc[id] = guarded_auc(s).first;
    }
    r.failures = 0;
    r.failure_messages.clear();
    for (const auto& e : r.entries) {
        if (!e.ok) {
            ++r.failures;
            r.failure_messages.push_back(e.entry_id + ": " + e.error);
        }
    }
    r.threshold = r.config.threshold;
    r.balanced_accuracy.reset();
    if (r.threshold && !all.real.empty() && !all.fake.empty()) {
        r.balanced_accuracy = balanced_accuracy(all.real, all.fake, *r.threshold);
    }
}

EntryOutcome evaluate_entry(const CorpusManifest& manifest, const ManifestEntry& test, const SyntheticWorld* world,
                            const GeneratorBackend& backend, const FacePreprocessor& preprocessor,
                            const EvalConfig& config) {
    EntryOutcome out;
    out.entry_id = test.entry_id;
    out.identity = test.identity;
    out.video_id = test.video_id;
    out.fake = test.label == Label::Fake;
    try {
        const auto pool = manifest.reference_pool(test.identity);
        std::vector<double> yaws;
        for (const auto* p : pool) yaws.push_back(p->yaw);
        const auto pick = select_reference(
            yaws, config.strategy, test.yaw,
            derive_seed(config.seed, {hash_string("reference"), hash_string(test.entry_id)}));
        const ManifestEntry& ref = *pool[pick];
        out.reference_id = ref.entry_id;

        const Image ref_image = load_entry_image(manifest, ref, world);
        Image test_image = load_entry_image(manifest, test, world);
        if (config.jpeg_qf) test_image = jpeg_degrade(test_image, *config.jpeg_qf);

        DetectOptions opts = config.detect;
        opts.render_visualizations = false;
        const auto r = detect(ref_image, test_image, backend, preprocessor, opts);
        out.score = r.score;
        out.iesim = r.iesim;
        out.ok = std::isfinite(r.score.value);
        if (!out.ok) out.error = "non-finite score";
    } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
    }
    return out;
}

}  // namespace

std::string config_fingerprint(const CorpusManifest& manifest, const EvalConfig& config) {
    nlohmann::json j{{"config", config}, {"entries", manifest.entries.size()}};
    j["world_config"] = manifest.world ? nlohmann::json(*manifest.world) : nlohmann::json(nullptr);
    std::uint64_t h = hash_string(j.dump());
    for (const auto& e : manifest.entries) h = hash_combine(h, hash_string(nlohmann::json(e).dump()));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

EvalReport run_evaluation(const CorpusManifest& manifest, const GeneratorBackend& backend,
                          const FacePreprocessor& preprocessor, const EvalConfig& config) {
    manifest.validate();
    if (config.max_frames_per_video < 1) throw InvalidArgument("max_frames_per_video must be >= 1");
    if (config.jpeg_qf && (*config.jpeg_qf < 1 || *config.jpeg_qf > 100)) {
        throw InvalidArgument("jpeg quality must lie in [1, 100]");
    }
    std::optional<SyntheticWorld> world;
    if (manifest.world) world.emplace(*manifest.world);
    const SyntheticWorld* world_ptr = world ? &*world : nullptr;

    const auto tests = manifest.tests();
    EvalReport report;
    report.config = config;
    report.fingerprint = config_fingerprint(manifest, config);
    report.entries.resize(tests.size());

    const std::size_t workers =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::max(config.workers, 1)), 1, std::max<std::size_t>(tests.size(), 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < tests.size(); ++i) {
            report.entries[i] = evaluate_entry(manifest, *tests[i], world_ptr, backend, preprocessor, config);
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            std::unique_ptr<GeneratorBackend> own = backend.concurrent() ? nullptr : backend.clone();
            const GeneratorBackend& b = own ? *own : backend;
            for (std::size_t i = next++; i < tests.size(); i = next++) {
                report.entries[i] = evaluate_entry(manifest, *tests[i], world_ptr, b, preprocessor, config);
            }
        };
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    aggregate(report);
    return report;
}

EvalReport rescore(const EvalReport& report, ScoreKind kind, Level level) {
    EvalReport out;
    out.config = report.config;
    out.config.score = kind;
    out.config.level = level;
    out.fingerprint = report.fingerprint;
    out.entries = report.entries;
    aggregate(out);
    return out;
}

std::vector<int> default_sweep_qfs() {
    std::vector<int> qfs;
    for (int q = 20; q <= 100; q += 5) qfs.push_back(q);
    return qfs;
}

SweepResult jpeg_robustness_sweep(const CorpusManifest& manifest, const GeneratorBackend& backend,
                                  const FacePreprocessor& preprocessor, std::span<const int> qfs,
                                  const EvalConfig& config) {
    if (qfs.empty()) throw InvalidArgument("jpeg sweep: no quality factors");
    for (int q : qfs) {
        if (q < 1 || q > 100) throw InvalidArgument("jpeg sweep: quality " + std::to_string(q) + " outside [1, 100]");
    }
    SweepResult out;
    out.qfs.assign(qfs.begin(), qfs.end());
    for (int q : qfs) {
        EvalConfig c = config;
        c.jpeg_qf = q;
        out.reports.push_back(run_evaluation(manifest, backend, preprocessor, c));
        for (const auto& e : out.reports.back().entries) {
            if (e.ok) out.traces.push_back({e.entry_id, q, e.value(c.score), e.fake});
        }
    }
    double baseline = 0.0;
    const auto at100 = std::find(out.qfs.begin(), out.qfs.end(), 100);
    if (at100 != out.qfs.end()) {
        baseline = out.reports[static_cast<std::size_t>(at100 - out.qfs.begin())].auc;
    } else {
        EvalConfig c = config;
        c.jpeg_qf.reset();
        baseline = run_evaluation(manifest, backend, preprocessor, c).auc;
    }
    for (const auto& r : out.reports) out.delta_auc.push_back(r.auc - baseline);
    return out;
}

}  // namespace diffid
