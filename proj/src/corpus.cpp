#include "diffid/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "diffid/error.hpp"
#include "diffid/image_io.hpp"
#include "diffid/rng.hpp"
#include "diffid/serialize.hpp"

namespace diffid {

std::string_view to_string(Role r) { return r == Role::ReferencePool ? "reference-pool" : "test"; }
std::string_view to_string(Label l) { return l == Label::Real ? "real" : "fake"; }

Role parse_role(std::string_view s) {
    if (s == "reference-pool") return Role::ReferencePool;
    if (s == "test") return Role::Test;
    throw InvalidArgument("unknown role '" + std::string(s) + "'");
}

Label parse_label(std::string_view s) {
    if (s == "real") return Label::Real;
    if (s == "fake") return Label::Fake;
    throw InvalidArgument("unknown label '" + std::string(s) + "'");
}

namespace {

std::string identity_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "id%02d", i);
    return buf;
}

// Two entries that would produce the same pixels.
bool same_source(const ManifestEntry& a, const ManifestEntry& b) { return a.source == b.source; }

}  // namespace

void CorpusManifest::validate() const {
    std::set<std::string> ids;
    for (const auto& e : entries) {
        if (e.entry_id.empty()) throw InvalidArgument("manifest entry without an id");
        if (!ids.insert(e.entry_id).second) throw InvalidArgument("duplicate manifest entry id " + e.entry_id);
        if (std::holds_alternative<SyntheticSource>(e.source) && !world) {
            throw InvalidArgument("synthetic entry " + e.entry_id + " in a manifest without a world config");
        }
    }
    std::set<std::string> with_reference;
    for (const auto& e : entries) {
        if (e.role == Role::ReferencePool && e.label == Label::Real) with_reference.insert(e.identity);
    }
    for (const auto* t : tests()) {
        if (!with_reference.contains(t->identity)) {
            throw InvalidArgument("test identity " + t->identity + " has no real reference-pool entry");
        }
        for (const auto& e : entries) {
            if (e.role == Role::ReferencePool && same_source(e, *t)) {
                throw InvalidArgument("test entry " + t->entry_id + " duplicates reference entry " + e.entry_id);
            }
        }
    }
}

std::vector<const ManifestEntry*> CorpusManifest::tests() const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries) {
        if (e.role == Role::Test) out.push_back(&e);
    }
    return out;
}

std::vector<const ManifestEntry*> CorpusManifest::reference_pool(const std::string& identity) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries) {
        if (e.role == Role::ReferencePool && e.label == Label::Real && e.identity == identity) out.push_back(&e);
    }
    return out;
}

std::vector<std::string> CorpusManifest::identities() const {
    std::set<std::string> s;
    for (const auto& e : entries) s.insert(e.identity);
    return {s.begin(), s.end()};
}

void CorpusSpec::validate() const {
    if (identities < 1) throw InvalidArgument("corpus: identities must be >= 1");
    if (reference_pool < 1) throw InvalidArgument("corpus: reference_pool must be >= 1");
    if (real_tests < 0 || fake_tests < 0) throw InvalidArgument("corpus: test counts must be >= 0");
    if (frames_per_video < 1) throw InvalidArgument("corpus: frames_per_video must be >= 1");
    for (double v : {delta_fake, frame_jitter, yaw_jitter_deg}) {
        if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("corpus: delta and jitters must be finite and >= 0");
    }
}

CorpusManifest make_synthetic_corpus(const SyntheticWorldConfig& world_config, const CorpusSpec& spec) {
    spec.validate();
    const SyntheticWorld world(world_config);
    const auto& cfg = world.config();
    const std::uint64_t root = cfg.seed;

    CorpusManifest m;
    m.world = cfg;
    for (int i = 0; i < spec.identities; ++i) {
        const std::string id = identity_name(i);
        const double log_detail = world.identity_log_detail(i);
        const auto ui = static_cast<std::uint64_t>(i);

        for (int r = 0; r < spec.reference_pool; ++r) {
            const auto ur = static_cast<std::uint64_t>(r);
            Rng rng(derive_seed(root, {hash_string("ref-attributes"), ui, ur}));
            ManifestEntry e;
            e.entry_id = id + "-ref-" + std::to_string(r);
            e.identity = id;
            e.role = Role::ReferencePool;
            e.label = Label::Real;
            e.video_id = id + "-ref";
            e.frame_index = r;
            SyntheticSource src{i, world.sample_attributes(rng, log_detail), 0.0,
                                derive_seed(root, {hash_string("ref-sample"), ui, ur})};
            e.yaw = src.attributes[kYawIndex];
            e.source = std::move(src);
            m.entries.push_back(std::move(e));
        }

        const bool fakes_are_fake = spec.delta_fake > 0.0;
        for (int cls = 0; cls < 2; ++cls) {
            const bool fake = cls == 1;
            const int count = fake ? spec.fake_tests : spec.real_tests;
            const char* tag = fake ? "fake" : "real";
            const int videos = (count + spec.frames_per_video - 1) / spec.frames_per_video;
            for (int v = 0; v < videos; ++v) {
                const auto uv = static_cast<std::uint64_t>(v);
                Rng rng(derive_seed(root, {hash_string("video"), hash_string(tag), ui, uv}));
                const auto base = world.sample_attributes(rng, log_detail);
                std::normal_distribution<double> normal(0.0, 1.0);
                const std::string video = id + "-" + tag + "-v" + std::to_string(v);
                const int frames = std::min(spec.frames_per_video, count - v * spec.frames_per_video);
                for (int f = 0; f < frames; ++f) {
                    auto attr = base;
                    attr[kYawIndex] = std::clamp(attr[kYawIndex] + spec.yaw_jitter_deg * normal(rng), -90.0, 90.0);
                    for (std::size_t k = kFirstFreeIndex; k < attr.size(); ++k) {
                        attr[k] += spec.frame_jitter * cfg.attribute_spread * normal(rng);
                    }
                    ManifestEntry e;
                    e.entry_id = video + "-f" + std::to_string(f);
                    e.identity = id;
                    e.role = Role::Test;
                    e.label = fake && fakes_are_fake ? Label::Fake : Label::Real;
                    e.video_id = video;
                    e.frame_index = f;
                    e.yaw = attr[kYawIndex];
                    e.source = SyntheticSource{
                        i, std::move(attr), fake ? spec.delta_fake : 0.0,
                        derive_seed(root, {hash_string("test-sample"), hash_string(tag), ui, uv,
                                           static_cast<std::uint64_t>(f)})};
                    m.entries.push_back(std::move(e));
                }
            }
        }
    }
    m.validate();
    return m;
}

Image load_entry_image(const CorpusManifest& manifest, const ManifestEntry& entry, const SyntheticWorld* world) {
    if (const auto* src = std::get_if<SyntheticSource>(&entry.source)) {
        if (world) {
            const auto mu = world->identity_latent(src->identity_index);
            return world->make_fake(mu, src->attributes, src->delta, src->sample_seed, entry.identity).image;
        }
        if (entry.image_path.empty()) {
            throw InvalidArgument("synthetic entry " + entry.entry_id + " needs a world to be rendered");
        }
        return read_image(manifest.dataset_root / entry.image_path);
    }
    return read_image(manifest.dataset_root / std::get<std::filesystem::path>(entry.source));
}

CorpusManifest balance_per_identity(const CorpusManifest& manifest, int per_class_total, std::uint64_t seed) {
    const auto ids = manifest.identities();
    if (ids.empty() || per_class_total < 0) throw InvalidArgument("balance_per_identity: nothing to balance");
    const std::size_t quota = static_cast<std::size_t>(per_class_total) / ids.size();

    std::map<std::pair<std::string, Label>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        if (e.role == Role::Test) groups[{e.identity, e.label}].push_back(i);
    }
    std::vector<bool> keep(manifest.entries.size(), false);
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        keep[i] = manifest.entries[i].role == Role::ReferencePool;
    }
    for (auto& [key, idx] : groups) {
        Rng rng(derive_seed(seed, {hash_string(key.first), static_cast<std::uint64_t>(key.second)}));
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t k = 0; k < std::min(quota, idx.size()); ++k) keep[idx[k]] = true;
    }
    CorpusManifest out;
    out.world = manifest.world;
    out.dataset_root = manifest.dataset_root;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        if (keep[i]) out.entries.push_back(manifest.entries[i]);
    }
    return out;
}

void write_manifest(const std::filesystem::path& path, const CorpusManifest& manifest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest " + path.string());
    nlohmann::json header{{"format", "diffid-manifest"}, {"version", 1}};
    header["world_config"] = manifest.world ? nlohmann::json(*manifest.world) : nlohmann::json(nullptr);
    header["dataset_root"] = manifest.dataset_root.generic_string();
    out << header.dump() << '\n';
    for (const auto& e : manifest.entries) out << nlohmann::json(e).dump() << '\n';
    if (!out) throw IoError("failed writing manifest " + path.string());
}

CorpusManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    CorpusManifest m;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    try {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            const auto j = nlohmann::json::parse(line);
            if (!header_seen) {
                header_seen = true;
                if (j.value("format", "") != "diffid-manifest") {
                    throw IoError(path.string() + ": first line is not a manifest header");
                }
                if (j.contains("world_config") && !j["world_config"].is_null()) {
                    m.world = j["world_config"].get<SyntheticWorldConfig>();
                }
                std::filesystem::path root = j.value("dataset_root", std::string{});
                m.dataset_root = root.is_absolute() ? root : (path.parent_path() / root).lexically_normal();
                if (!m.dataset_root.has_filename()) m.dataset_root = m.dataset_root.parent_path();
                continue;
            }
            m.entries.push_back(j.get<ManifestEntry>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!header_seen) throw IoError(path.string() + ": empty manifest");
    m.validate();
    return m;
}

CorpusManifest materialize_corpus(const CorpusManifest& manifest, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir / "images", ec);
    if (!ec) fs::create_directories(out_dir / "masks", ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    std::optional<SyntheticWorld> world;
    if (manifest.world) world.emplace(*manifest.world);
    CorpusManifest out = manifest;
    out.dataset_root = out_dir;
    for (auto& e : out.entries) {
        const Image img = load_entry_image(manifest, e, world ? &*world : nullptr);
        const fs::path rel = fs::path("images") / (e.entry_id + ".png");
        write_png(out_dir / rel, img);
        if (img.tag()) {
            write_latent_sidecar(out_dir / rel, *img.tag());
            if (world) write_mask_png(out_dir / "masks" / (e.entry_id + ".png"), world->face_mask(img.tag()->attributes));
        }
        e.image_path = rel;
    }
    if (manifest.world) {
        std::ofstream cfg(out_dir / "world_config.json");
        cfg << nlohmann::json(*manifest.world).dump(2) << '\n';
        if (!cfg) throw IoError("cannot write " + (out_dir / "world_config.json").string());
    }
    CorpusManifest on_disk = out;
    on_disk.dataset_root = ".";
    write_manifest(out_dir / "manifest.jsonl", on_disk);
    return out;
}

}  // namespace diffid
