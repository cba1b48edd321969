#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "diffid/image.hpp"
#include "diffid/synthetic.hpp"

namespace diffid {

enum class Role { ReferencePool, Test };
enum class Label { Real, Fake };

std::string_view to_string(Role r);
std::string_view to_string(Label l);
Role parse_role(std::string_view s);
Label parse_label(std::string_view s);

/// Everything needed to regenerate a synthetic entry bit-exactly.
struct SyntheticSource {
    int identity_index = 0;
    std::vector<double> attributes;
    double delta = 0.0;
    std::uint64_t sample_seed = 0;

    friend bool operator==(const SyntheticSource&, const SyntheticSource&) = default;
};

struct ManifestEntry {
    std::string entry_id;
    std::string identity;
    Role role = Role::Test;
    Label label = Label::Real;
    std::string video_id;
    int frame_index = 0;
    double yaw = 0.0;
    /// Image path (relative to the dataset root) or synthetic recipe.
    std::variant<std::filesystem::path, SyntheticSource> source;
    /// Materialised copy of a synthetic entry, relative to the dataset root.
    std::filesystem::path image_path;
};

struct CorpusManifest {
    std::optional<SyntheticWorldConfig> world;
    std::filesystem::path dataset_root;
    std::vector<ManifestEntry> entries;

    /// Throws InvalidArgument when ids collide, a test identity has no real
    /// reference, a reference entry reappears in the test set, or synthetic
    /// entries lack a world config.
    void validate() const;

    std::vector<const ManifestEntry*> tests() const;
    std::vector<const ManifestEntry*> reference_pool(const std::string& identity) const;
    std::vector<std::string> identities() const;
};

/// Layout of a generated corpus. Test images come in videos of
/// `frames_per_video` frames sharing base attributes.
struct CorpusSpec {
    int identities = 20;
    int reference_pool = 1;
    int real_tests = 10;
    int fake_tests = 10;
    int frames_per_video = 5;
    double delta_fake = 0.5;
    /// Per-frame jitter of the free attributes, relative to attribute_spread.
    double frame_jitter = 0.1;
    double yaw_jitter_deg = 2.0;

    void validate() const;
};

/// Deterministic in (world config, spec). Fake entries are labelled fake only
/// when delta_fake > 0.
CorpusManifest make_synthetic_corpus(const SyntheticWorldConfig& world, const CorpusSpec& spec);

/// Loads or renders the image of an entry. `world` must be provided for synthetic entries.
Image load_entry_image(const CorpusManifest& manifest, const ManifestEntry& entry, const SyntheticWorld* world);

/// Keeps the same number of test entries per identity and class:
/// floor(per_class_total / identities), drawn with `seed`. Reference entries are kept.
CorpusManifest balance_per_identity(const CorpusManifest& manifest, int per_class_total, std::uint64_t seed);

/// Line-delimited JSON: one header record followed by one record per entry.
void write_manifest(const std::filesystem::path& path, const CorpusManifest& manifest);
CorpusManifest read_manifest(const std::filesystem::path& path);

/// Writes images, masks, latent sidecars, the manifest and the world config
/// under `out_dir`. Entries keep their synthetic recipe and gain an image_path.
CorpusManifest materialize_corpus(const CorpusManifest& manifest, const std::filesystem::path& out_dir);

}  // namespace diffid
