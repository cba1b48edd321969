#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "diffid/corpus.hpp"
#include "diffid/error.hpp"
#include "diffid/image_io.hpp"
#include "diffid/serialize.hpp"

using namespace diffid;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("default corpus layout") {
    const auto m = make_synthetic_corpus(SyntheticWorldConfig{}, CorpusSpec{});
    CHECK(m.entries.size() == 20 * 21);
    CHECK(m.identities().size() == 20);
    CHECK(m.tests().size() == 400);
    std::map<Label, int> labels;
    for (const auto* t : m.tests()) ++labels[t->label];
    CHECK(labels[Label::Real] == 200);
    CHECK(labels[Label::Fake] == 200);
    for (const auto& id : m.identities()) CHECK(m.reference_pool(id).size() == 1);
}

TEST_CASE("zero identity loss produces no fake labels") {
    CorpusSpec spec;
    spec.delta_fake = 0.0;
    const auto m = make_synthetic_corpus(SyntheticWorldConfig{}, spec);
    for (const auto& e : m.entries) CHECK(e.label == Label::Real);
}

TEST_CASE("manifest round trip is exact and deterministic") {
    TempDir dir("diffid-unit-manifest");
    SyntheticWorldConfig cfg;
    cfg.clutter = 0.3;
    const CorpusSpec spec{.identities = 3, .reference_pool = 2, .real_tests = 3, .fake_tests = 3, .frames_per_video = 2};
    const auto m = make_synthetic_corpus(cfg, spec);
    write_manifest(dir.path / "a.jsonl", m);
    write_manifest(dir.path / "b.jsonl", make_synthetic_corpus(cfg, spec));
    CHECK(slurp(dir.path / "a.jsonl") == slurp(dir.path / "b.jsonl"));

    const auto back = read_manifest(dir.path / "a.jsonl");
    REQUIRE(back.entries.size() == m.entries.size());
    REQUIRE(back.world.has_value());
    CHECK(nlohmann::json(*back.world) == nlohmann::json(*m.world));
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        const auto& a = m.entries[i];
        const auto& b = back.entries[i];
        CHECK(a.entry_id == b.entry_id);
        CHECK(a.role == b.role);
        CHECK(a.label == b.label);
        CHECK(a.yaw == b.yaw);
        CHECK(std::get<SyntheticSource>(a.source) == std::get<SyntheticSource>(b.source));
    }
    // Entry records survive a second write byte for byte; only the header root is resolved.
    write_manifest(dir.path / "c.jsonl", back);
    const auto body = [](const std::string& s) { return s.substr(s.find('\n') + 1); };
    CHECK(body(slurp(dir.path / "c.jsonl")) == body(slurp(dir.path / "a.jsonl")));

    cfg.seed = 77;
    write_manifest(dir.path / "d.jsonl", make_synthetic_corpus(cfg, spec));
    CHECK(slurp(dir.path / "a.jsonl") != slurp(dir.path / "d.jsonl"));
}

TEST_CASE("manifest validation") {
    auto m = make_synthetic_corpus(SyntheticWorldConfig{}, CorpusSpec{.identities = 2, .real_tests = 2, .fake_tests = 2, .frames_per_video = 1});
    CHECK_NOTHROW(m.validate());

    auto dup = m;
    dup.entries.push_back(dup.entries.back());
    CHECK_THROWS_AS(dup.validate(), InvalidArgument);

    auto leaked = m;
    auto copy = leaked.entries.front();
    REQUIRE(copy.role == Role::ReferencePool);
    copy.entry_id = "leaked";
    copy.role = Role::Test;
    leaked.entries.push_back(copy);
    CHECK_THROWS_AS(leaked.validate(), InvalidArgument);

    auto orphan = m;
    std::erase_if(orphan.entries, [](const ManifestEntry& e) { return e.role == Role::ReferencePool && e.identity == "id00"; });
    CHECK_THROWS_AS(orphan.validate(), InvalidArgument);

    auto worldless = m;
    worldless.world.reset();
    CHECK_THROWS_AS(worldless.validate(), InvalidArgument);
}

TEST_CASE("balancing floors the per-identity quota") {
    const auto m = make_synthetic_corpus(SyntheticWorldConfig{}, CorpusSpec{.identities = 3, .real_tests = 5, .fake_tests = 5, .frames_per_video = 1});
    const auto b = balance_per_identity(m, 10, 1);
    std::map<std::pair<std::string, Label>, int> counts;
    for (const auto* t : b.tests()) ++counts[{t->identity, t->label}];
    CHECK(counts.size() == 6);
    for (const auto& [k, n] : counts) CHECK(n == 3);
    CHECK(b.entries.size() == 3 + 18);
    CHECK_NOTHROW(b.validate());
    CHECK(balance_per_identity(m, 10, 1).entries.size() == b.entries.size());
}

TEST_CASE("materialised corpus reloads to the same pixels") {
    TempDir dir("diffid-unit-materialise");
    SyntheticWorldConfig cfg;
    const auto m = make_synthetic_corpus(cfg, CorpusSpec{.identities = 2, .real_tests = 1, .fake_tests = 1, .frames_per_video = 1});
    materialize_corpus(m, dir.path);
    CHECK(fs::exists(dir.path / "world_config.json"));
    const auto back = read_manifest(dir.path / "manifest.jsonl");
    CHECK(back.dataset_root == dir.path.lexically_normal());
    const SyntheticWorld world(cfg);
    for (const auto& e : back.entries) {
        CHECK(fs::exists(dir.path / "masks" / (e.entry_id + ".png")));
        const auto rendered = load_entry_image(back, e, &world);
        const auto from_disk = load_entry_image(back, e, nullptr);
        CHECK(mean_abs_diff(rendered, from_disk) < 0.5 / 255.0 + 1e-12);
        REQUIRE(from_disk.tag());
        CHECK(from_disk.tag()->identity == rendered.tag()->identity);
        CHECK(from_disk.tag()->key == rendered.tag()->key);
    }
}

TEST_CASE("world config JSON keeps defaults for missing keys and validates") {
    const auto partial = nlohmann::json::parse(R"({"generator_leakage": 0.3, "clutter": 0.2})");
    const auto cfg = partial.get<SyntheticWorldConfig>();
    CHECK(cfg.generator_leakage == 0.3);
    CHECK(cfg.clutter == 0.2);
    CHECK(cfg.d_id == SyntheticWorldConfig{}.d_id);
    CHECK_THROWS_AS(nlohmann::json::parse(R"({"generator_leakage": 2})").get<SyntheticWorldConfig>(), InvalidArgument);
    CHECK_THROWS_AS(nlohmann::json::parse("[1]").get<SyntheticWorldConfig>(), InvalidArgument);

    SyntheticWorldConfig odd;
    odd.entanglement = 0.1 + 0.2;
    odd.seed = 0xFFFFFFFFFFFFFFFFULL;
    CHECK(nlohmann::json(nlohmann::json(odd).get<SyntheticWorldConfig>()) == nlohmann::json(odd));
}

TEST_CASE("role and label names") {
    CHECK(parse_role(to_string(Role::ReferencePool)) == Role::ReferencePool);
    CHECK(parse_label(to_string(Label::Fake)) == Label::Fake);
    CHECK_THROWS_AS(parse_label("maybe"), InvalidArgument);
}

}  // TEST_SUITE
