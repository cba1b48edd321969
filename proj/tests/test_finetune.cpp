#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "diffid/error.hpp"
#include "diffid/finetune.hpp"
#include "helpers.hpp"

using namespace diffid;

namespace {

Image random_image(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(0.0, 0.9);
    Image img(n, n, 3);
    for (double& v : img.pixels()) v = u(rng);
    return img;
}

FinetuneLosses loss_at(SyntheticWorldConfig cfg, double kappa, double beta, std::span<const TrainingPair> train) {
    cfg.generator_leakage = kappa;
    cfg.generator_blur = beta;
    return training_loss(SyntheticBackend(cfg), train, PyramidL1Distance());
}

}  // namespace

TEST_SUITE("finetune") {

TEST_CASE("identity constraint examples") {
    const IdentityEmbedding z{{0.3, -1.2, 0.8}};
    CHECK(identity_constraint_loss(z, z) == 0.0);
    CHECK(identity_constraint_loss(IdentityEmbedding{{0.6, -2.4, 1.6}}, z) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(identity_constraint_loss(IdentityEmbedding{{1, 0, 0}}, IdentityEmbedding{{0, 5, 0}}) == 1.0);
    CHECK_THROWS_AS(identity_constraint_loss(IdentityEmbedding{{0, 0, 0}}, z), InvalidArgument);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    for (int i = 0; i < 50; ++i) {
        IdentityEmbedding a{{n(rng), n(rng), n(rng), n(rng)}};
        IdentityEmbedding b{{n(rng), n(rng), n(rng), n(rng)}};
        const double base = identity_constraint_loss(a, b);
        const double s = scale(rng);
        for (double& v : a.values) v *= s;
        CHECK(identity_constraint_loss(a, b) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("attribute constraint examples") {
    PyramidL1Distance perc;
    std::mt19937_64 rng(5);
    const auto target = random_image(rng, 16);
    const auto same = attribute_constraint_loss(target, target, perc);
    CHECK(same.l_att_pixel == 0.0);
    CHECK(same.l_att_perceptual == 0.0);
    CHECK(same.l_id == 0.0);

    Image shifted = target;
    for (double& v : shifted.pixels()) v += 0.1;
    const auto l = attribute_constraint_loss(shifted, target, perc);
    CHECK(l.l_att_pixel == doctest::Approx(0.1).epsilon(1e-12));
    // A uniform offset survives box averaging unchanged at every level.
    CHECK(l.l_att_perceptual == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(l.total == l.l_att_pixel + l.l_att_perceptual);

    for (int i = 0; i < 20; ++i) {
        const auto a = random_image(rng, 12);
        const auto b = random_image(rng, 12);
        CHECK(perc.distance(a, a) == 0.0);
        CHECK(perc.distance(a, b) == perc.distance(b, a));
        CHECK(attribute_constraint_loss(a, b, perc).l_att_pixel == attribute_constraint_loss(b, a, perc).l_att_pixel);
    }
    CHECK_THROWS_AS(attribute_constraint_loss(random_image(rng, 8), target, perc), ShapeError);
}

TEST_CASE("training set follows the same-identity protocol") {
    SyntheticWorld w(SyntheticWorldConfig{});
    const auto train = make_training_set(w, 10, 4, 0);
    CHECK(train.size() == 10 * 4 * 3);
    for (const auto& p : train) {
        CHECK(p.source.tag()->identity == p.target.tag()->identity);
        CHECK(p.source.tag()->attributes != p.target.tag()->attributes);
    }
    CHECK_THROWS_AS(make_training_set(w, 10, 1, 0), InvalidArgument);
}

TEST_CASE("a perfect generator is already optimal") {
    SyntheticWorldConfig cfg = testing::perfect_world();
    SyntheticWorld w(cfg);
    const auto train = make_training_set(w, 10, 2, 0);
    const auto r = finetune_synthetic_generator(cfg, train, PyramidL1Distance());
    CHECK(r.kappa == 0.0);
    CHECK(r.beta == 0.0);
    CHECK(r.best.total == 0.0);
}

TEST_CASE("budget 1 returns the start") {
    SyntheticWorldConfig cfg;
    cfg.generator_leakage = 0.3;
    cfg.generator_blur = 2.0;
    SyntheticWorld w(cfg);
    const auto train = make_training_set(w, 10, 2, 0);
    const auto r = finetune_synthetic_generator(cfg, train, PyramidL1Distance(), {.budget = 1});
    CHECK(r.kappa == 0.3);
    CHECK(r.beta == 2.0);
    CHECK(r.trace.size() == 1);
    CHECK(r.best.total == r.start.total);
    CHECK(r.start.total == loss_at(cfg, 0.3, 2.0, train).total);
    CHECK_THROWS_AS(finetune_synthetic_generator(cfg, {}, PyramidL1Distance()), InvalidArgument);
}

TEST_CASE("loss landscape is monotone in both imperfections on a coarse grid") {
    SyntheticWorldConfig cfg;
    SyntheticWorld w(cfg);
    const auto train = make_training_set(w, 10, 2, 0);
    const double kappas[] = {0.0, 0.15, 0.3};
    const double betas[] = {0.0, 1.0, 2.0};
    double grid[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) grid[i][j] = loss_at(cfg, kappas[i], betas[j], train).total;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            if (i > 0) CHECK(grid[i][j] > grid[i - 1][j]);
            if (j > 0) CHECK(grid[i][j] > grid[i][j - 1]);
        }
}

TEST_CASE("both search methods reduce the loss from (0.3, 2)") {
    SyntheticWorldConfig cfg;
    cfg.generator_leakage = 0.3;
    cfg.generator_blur = 2.0;
    SyntheticWorld w(cfg);
    const auto train = make_training_set(w);
    for (auto method : {SearchMethod::CoordinateDescent, SearchMethod::Grid}) {
        const auto r = finetune_synthetic_generator(cfg, train, PyramidL1Distance(), {.method = method, .budget = 25});
        CHECK(r.kappa <= 0.3);
        CHECK(r.beta <= 2.0);
        CHECK(r.best.total < r.start.total);
        CHECK(static_cast<int>(r.trace.size()) <= 25);
        double incumbent = r.trace.front().losses.total;
        for (const auto& row : r.trace) {
            CHECK(row.losses.total == doctest::Approx(row.losses.l_id + row.losses.l_att_pixel + row.losses.l_att_perceptual));
            if (row.accepted && row.step > 0) {
                CHECK(row.losses.total < incumbent);
                incumbent = row.losses.total;
            }
        }
        CHECK(incumbent == r.best.total);
        CHECK(r.apply(cfg).generator_leakage == r.kappa);
    }
}

TEST_CASE("loss trace CSV") {
    SyntheticWorldConfig cfg;
    SyntheticWorld w(cfg);
    const auto train = make_training_set(w, 10, 2, 0);
    const auto r = finetune_synthetic_generator(cfg, train, PyramidL1Distance(), {.budget = 4});
    const auto path = std::filesystem::temp_directory_path() / "diffid-unit-trace.csv";
    write_loss_trace_csv(path, r);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,kappa,beta,l_id,l_att_pixel,l_att_perceptual,total,accepted");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == static_cast<int>(r.trace.size()));
    std::filesystem::remove(path);
}

}  // TEST_SUITE
