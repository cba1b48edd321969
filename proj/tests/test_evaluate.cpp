#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "diffid/error.hpp"
#include "diffid/evaluate.hpp"
#include "diffid/image_io.hpp"
#include "helpers.hpp"

using namespace diffid;

namespace {

// Brute-force pair counting with half credit for ties.
double pair_count_auc(const std::vector<double>& real, const std::vector<double>& fake) {
    double wins = 0.0;
    for (double f : fake)
        for (double r : real) wins += f > r ? 1.0 : (f == r ? 0.5 : 0.0);
    return wins / static_cast<double>(real.size() * fake.size());
}

CorpusSpec small_spec() {
    return CorpusSpec{.identities = 4, .real_tests = 4, .fake_tests = 4, .frames_per_video = 2};
}

}  // namespace

TEST_SUITE("evaluate") {

TEST_CASE("auc examples") {
    CHECK(auc(std::vector{0.1, 0.2}, std::vector{0.8, 0.9}) == 1.0);
    CHECK(auc(std::vector{0.5}, std::vector{0.5}) == 0.5);
    const std::vector real{0.1, 0.4, 0.35}, fake{0.3, 0.8};
    const double oracle = pair_count_auc(real, fake);
    CHECK(oracle == 4.0 / 6.0);
    CHECK(auc(real, fake) == oracle);
    CHECK_THROWS_AS(auc(std::vector<double>{}, fake), InvalidArgument);
    CHECK_THROWS_AS(auc(real, std::vector<double>{}), InvalidArgument);
}

TEST_CASE("auc agrees with pair counting, is antisymmetric and rank-invariant") {
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<int> size(1, 20);
    std::uniform_int_distribution<int> level(0, 9);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> real(static_cast<std::size_t>(size(rng))), fake(static_cast<std::size_t>(size(rng)));
        const bool ties = t % 2 == 0;
        for (double& v : real) v = ties ? level(rng) * 0.1 : n(rng);
        for (double& v : fake) v = ties ? level(rng) * 0.1 + 0.05 * (t % 4 == 0) : n(rng) + 0.5;
        CHECK(auc(real, fake) == pair_count_auc(real, fake));
        if (!ties) {
            CHECK(auc(real, fake) == doctest::Approx(1.0 - auc(fake, real)).epsilon(1e-15));
            std::vector<double> tr, tf;
            for (double v : real) tr.push_back(std::exp(3.0 * v) + 2.0);
            for (double v : fake) tf.push_back(std::exp(3.0 * v) + 2.0);
            CHECK(auc(tr, tf) == auc(real, fake));
        }
    }
}

TEST_CASE("select_reference examples") {
    const std::vector one{33.0};
    for (auto s : {Strategy::Random, Strategy::Frontal, Strategy::SameOrientation}) CHECK(select_reference(one, s, -40.0, 1) == 0);
    const std::vector pool{-30.0, 2.0, 40.0};
    for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(select_reference(pool, Strategy::Frontal, 0.0, seed) == 1);
    const std::vector pool2{0.0, 18.0, 50.0};
    for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(select_reference(pool2, Strategy::SameOrientation, 20.0, seed) == 1);

    // Nothing qualifies: nearest to the target.
    const std::vector far{-30.0, 12.0, 40.0};
    CHECK(select_reference(far, Strategy::Frontal, 0.0, 3) == 1);
    CHECK(select_reference(far, Strategy::SameOrientation, 33.0, 3) == 2);

    std::set<std::size_t> seen;
    for (std::uint64_t seed = 0; seed < 100; ++seed) seen.insert(select_reference(pool, Strategy::Random, 0.0, seed));
    CHECK(seen.size() == 3);
    CHECK(select_reference(pool, Strategy::Random, 0.0, 9) == select_reference(pool, Strategy::Random, 0.0, 9));
    CHECK_THROWS_AS(select_reference(std::vector<double>{}, Strategy::Random, 0.0, 1), InvalidArgument);
    CHECK(parse_strategy("same-orientation") == Strategy::SameOrientation);
    CHECK_THROWS_AS(parse_strategy("sideways"), InvalidArgument);
}

TEST_CASE("video_score and calibration examples") {
    CHECK(video_score(std::vector<double>(20, 0.4)) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(video_score(std::vector{0.2, 0.4}) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(video_score(std::vector{0.1, 0.2, 0.3, 0.4, 0.5}) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK_THROWS_AS(video_score(std::vector<double>{}), InvalidArgument);

    const auto c = calibrate_threshold(std::vector<double>(10, 0.2), std::vector<double>(10, 1.0));
    CHECK(c.threshold == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(c.real_q95 == 0.2);
    CHECK(c.fake_q05 == 1.0);

    std::mt19937_64 rng(29);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> same(2000);
    for (double& v : same) v = n(rng);
    const auto d = calibrate_threshold(same, same);
    CHECK(d.threshold >= std::min(d.real_q95, d.fake_q05));
    CHECK(d.threshold <= std::max(d.real_q95, d.fake_q05));
    CHECK(balanced_accuracy(same, same, d.threshold) == doctest::Approx(0.5).epsilon(1e-12));

    CHECK(quantile({1, 2, 3, 4, 5}, 0.95) == doctest::Approx(4.8).epsilon(1e-15));
    CHECK_THROWS_AS(calibrate_threshold(std::vector<double>{}, same), InvalidArgument);
}

TEST_CASE("bitwise-copy corpus is degenerate") {
    const auto dir = std::filesystem::temp_directory_path() / "diffid-unit-degenerate";
    std::filesystem::create_directories(dir);
    SyntheticWorldConfig cfg;
    testing::World w(cfg);
    CorpusManifest m;
    m.dataset_root = dir;
    for (int id = 0; id < 3; ++id) {
        Rng rng(static_cast<std::uint64_t>(id));
        const auto img = w.world->render(w.world->identity_latent(id), w.world->sample_attributes(rng, 0.0));
        const std::string stem = "id" + std::to_string(id);
        write_png(dir / (stem + ".png"), img);
        write_latent_sidecar(dir / (stem + ".png"), *img.tag());
        std::filesystem::copy_file(dir / (stem + ".png"), dir / (stem + "-copy.png"),
                                   std::filesystem::copy_options::overwrite_existing);
        std::filesystem::copy_file(latent_sidecar_path(dir / (stem + ".png")), latent_sidecar_path(dir / (stem + "-copy.png")),
                                   std::filesystem::copy_options::overwrite_existing);
        m.entries.push_back({stem + "-ref", stem, Role::ReferencePool, Label::Real, stem + "-ref", 0, 0.0,
                             std::filesystem::path(stem + ".png"), {}});
        m.entries.push_back({stem + "-test", stem, Role::Test, id == 0 ? Label::Fake : Label::Real, stem + "-test", 0,
                             0.0, std::filesystem::path(stem + "-copy.png"), {}});
    }
    const auto r = run_evaluation(m, w.backend, w.prep, EvalConfig{});
    CHECK(r.failures == 0);
    CHECK(r.degenerate);
    CHECK(r.auc == 0.5);
    for (double s : r.real_scores) CHECK(s == 0.0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("evaluation is deterministic and independent of the worker count") {
    SyntheticWorldConfig cfg;
    testing::World w(cfg);
    const auto m = make_synthetic_corpus(cfg, small_spec());
    const auto a = run_evaluation(m, w.backend, w.prep, EvalConfig{});
    const auto b = run_evaluation(m, w.backend, w.prep, EvalConfig{});
    EvalConfig par;
    par.workers = 4;
    const auto c = run_evaluation(m, w.backend, w.prep, par);
    CHECK(a.real_scores == b.real_scores);
    CHECK(a.fake_scores == b.fake_scores);
    CHECK(a.fingerprint == b.fingerprint);
    CHECK(a.real_scores == c.real_scores);
    CHECK(a.fake_scores == c.fake_scores);
    CHECK(a.auc == auc(a.real_scores, a.fake_scores));
    CHECK(a.real_scores.size() == 16);

    EvalConfig other;
    other.seed = 99;
    CHECK(config_fingerprint(m, other) != a.fingerprint);
}

TEST_CASE("video aggregation and frame sampling") {
    SyntheticWorldConfig cfg;
    testing::World w(cfg);
    auto spec = small_spec();
    spec.real_tests = spec.fake_tests = 6;
    spec.frames_per_video = 3;
    const auto m = make_synthetic_corpus(cfg, spec);
    const auto frames = run_evaluation(m, w.backend, w.prep, EvalConfig{});
    const auto videos = rescore(frames, ScoreKind::DiffId, Level::Video);
    CHECK(videos.units.size() == frames.units.size() / 3);
    for (const auto& u : videos.units) {
        double sum = 0.0;
        int n = 0;
        for (const auto& e : frames.entries)
            if (e.video_id == u.id) {
                sum += e.score.value;
                ++n;
            }
        CHECK(n == 3);
        CHECK(u.score == doctest::Approx(sum / n).epsilon(1e-12));
    }

    EvalConfig capped;
    capped.level = Level::Video;
    capped.max_frames_per_video = 2;
    const auto cut = run_evaluation(m, w.backend, w.prep, capped);
    for (const auto& u : cut.units) {
        std::vector<double> s;
        for (const auto& e : cut.entries)
            if (e.video_id == u.id) s.push_back(e.score.value);
        const bool some_pair = std::abs(u.score - (s[0] + s[1]) / 2) < 1e-12 ||
                               std::abs(u.score - (s[0] + s[2]) / 2) < 1e-12 ||
                               std::abs(u.score - (s[1] + s[2]) / 2) < 1e-12;
        CHECK(some_pair);
    }
}

TEST_CASE("per-item failures are counted and excluded") {
    SyntheticWorldConfig cfg;
    testing::World w(cfg);
    auto m = make_synthetic_corpus(cfg, small_spec());
    m.dataset_root = std::filesystem::temp_directory_path();
    ManifestEntry broken = *m.tests().front();
    broken.entry_id = "broken";
    broken.video_id = "broken";
    broken.source = std::filesystem::path("does-not-exist.png");
    m.entries.push_back(broken);
    const auto r = run_evaluation(m, w.backend, w.prep, EvalConfig{});
    CHECK(r.failures == 1);
    CHECK(r.failure_messages.front().starts_with("broken: "));
    CHECK(r.real_scores.size() + r.fake_scores.size() == m.tests().size() - 1);
}

TEST_CASE("jpeg sweep contract") {
    SyntheticWorldConfig cfg;
    testing::World w(cfg);
    const auto m = make_synthetic_corpus(cfg, small_spec());
    const std::vector<int> only100{100};
    const auto s = jpeg_robustness_sweep(m, w.backend, w.prep, only100, EvalConfig{});
    CHECK(s.reports.size() == 1);
    CHECK(s.delta_auc.front() == 0.0);
    CHECK(s.traces.size() == m.tests().size());

    EvalConfig base;
    const auto plain = run_evaluation(m, w.backend, w.prep, base);
    CHECK(s.reports.front().auc == doctest::Approx(plain.auc).epsilon(0.05));

    const std::vector<int> two{60, 30};
    const auto t = jpeg_robustness_sweep(m, w.backend, w.prep, two, EvalConfig{});
    CHECK(t.delta_auc.size() == 2);
    CHECK(t.traces.size() == 2 * m.tests().size());
    CHECK(t.delta_auc[0] == t.reports[0].auc - plain.auc);
    CHECK_THROWS_AS(jpeg_robustness_sweep(m, w.backend, w.prep, std::vector<int>{0}, EvalConfig{}), InvalidArgument);
    CHECK(default_sweep_qfs().size() == 17);
}

}  // TEST_SUITE
