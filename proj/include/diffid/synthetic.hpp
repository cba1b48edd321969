#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "diffid/backend.hpp"
#include "diffid/image.hpp"
#include "diffid/rng.hpp"

namespace diffid {

/// Parameters of the synthetic face world. Attribute latents use a fixed
/// layout: [0] yaw in degrees, [1] log rendering-detail scale, [2..] free
/// scene coordinates (lighting, expression, background, clutter phase).
struct SyntheticWorldConfig {
    int d_id = 16;
    int d_att = 8;
    int image_size = 64;
    /// λ: how strongly free attributes move and rescale identity features.
    double entanglement = 0.5;
    /// σ: std-dev of the identity encoder noise.
    double encoder_noise = 0.05;
    /// κ in [0, 1]: fraction of the attribute vector leaking into the rendered identity.
    double generator_leakage = 0.1;
    /// β: generator blur radius in pixels.
    double generator_blur = 1.0;
    std::uint64_t seed = 1234;

    /// Std-dev of the free attribute coordinates.
    double attribute_spread = 1.0;
    double yaw_range_deg = 30.0;
    /// Strength of feature attenuation on the averted side of a turned head.
    double yaw_occlusion = 0.5;
    /// Amplitude of high-frequency background texture.
    double clutter = 0.0;
    /// Per-identity detail scale is drawn log-uniformly from [1/s, s].
    double detail_spread = 1.0;
    /// Attribute factors picked up by the identity encoder (ε in Φ_id = μ + ε).
    double encoder_bleed = 0.0;
    /// Extra identity-encoder noise on partly hidden features: coordinate k gets
    /// σ·(1 + occlusion_noise·(1 − visibility_k)). 0 keeps the noise isotropic.
    double occlusion_noise = 0.0;
    /// Pixel amplitude of a unit identity coordinate.
    double feature_gain = 0.1;
    /// Face-mask dilation radius in pixels (4 px at 224 scaled to 64).
    double mask_dilation_px = 4.0 * 64.0 / 224.0;

    /// Throws InvalidArgument on a non-finite or out-of-domain parameter.
    void validate() const;
    int free_attributes() const { return d_att - 2; }
};

inline constexpr int kYawIndex = 0;
inline constexpr int kDetailIndex = 1;
inline constexpr int kFirstFreeIndex = 2;

struct FeatureGeometry {
    double cx = 0.0;      // normalised [0, 1] coordinates
    double cy = 0.0;
    double radius = 0.0;  // normalised support radius
    double amplitude = 0.0;
    double visibility = 1.0;
};

struct SyntheticSample {
    Image image;
    std::vector<double> mu;    // identity the sample claims
    std::vector<double> attr;
    double delta = 0.0;        // injected identity loss
    bool is_fake = false;
    std::string identity_label;
    std::uint64_t sample_seed = 0;
};

/// Deterministic renderer and latent oracle. Immutable after construction and
/// safe to share across threads.
class SyntheticWorld {
public:
    explicit SyntheticWorld(SyntheticWorldConfig config);

    const SyntheticWorldConfig& config() const { return config_; }
    Resolution resolution() const { return {config_.image_size, config_.image_size}; }

    /// Ground-truth identity latent μ of identity `index`.
    std::vector<double> identity_latent(int index) const;
    /// Log detail scale of identity `index` (0 when detail_spread == 1).
    double identity_log_detail(int index) const;
    /// Draws an attribute latent: uniform yaw, Gaussian free coordinates.
    std::vector<double> sample_attributes(Rng& rng, double log_detail) const;

    /// Renders identity latent `mu` under attributes `attr`. The result is tagged.
    Image render(std::span<const double> mu, std::span<const double> attr) const;
    Image render(std::span<const double> mu, std::span<const double> attr, std::uint64_t key) const;

    std::vector<FeatureGeometry> layout(std::span<const double> mu, std::span<const double> attr) const;
    /// Union of feature supports, dilated by mask_dilation_px.
    FaceMask face_mask(std::span<const double> attr) const;
    /// Number of features with full visibility.
    int unattenuated_features(std::span<const double> attr) const;

    SyntheticSample make_real(std::span<const double> mu, std::span<const double> attr,
                              std::uint64_t sample_seed, std::string label = {}) const;
    /// Renders μ + δ·u with u a unit direction drawn from `sample_seed`.
    SyntheticSample make_fake(std::span<const double> source_mu, std::span<const double> target_attr,
                              double delta, std::uint64_t sample_seed, std::string label = {}) const;
    std::vector<double> fake_direction(std::uint64_t sample_seed) const;

    /// ε(attr): attribute factors the identity encoder mixes in.
    std::vector<double> attribute_bleed(std::span<const double> attr) const;
    /// Removes the attribute-factor subspace from an identity embedding.
    std::vector<double> strip_bleed(std::span<const double> z) const;
    /// L·a: the direction in which attributes leak into the generated identity.
    std::vector<double> leakage_direction(std::span<const double> attr) const;
    /// Unit-variance encoder noise for (key, draw).
    std::vector<double> encoder_noise(std::uint64_t key, std::uint64_t draw) const;

    void check_identity_dim(std::size_t n, const char* what) const;
    void check_attribute_dim(std::size_t n, const char* what) const;

private:
    double face_alpha(double x, double y, double yaw) const;

    SyntheticWorldConfig config_;
    // Fixed structure drawn from the seed.
    std::vector<double> base_u_, base_v_;           // feature offsets in face units
    std::vector<std::array<double, 3>> colors_;     // per-feature RGB direction
    std::vector<std::vector<double>> shift_x_, shift_y_, scale_w_;  // entanglement projections
    std::vector<std::vector<double>> bleed_basis_;  // orthonormal k x d_id
    std::vector<std::vector<double>> bleed_mix_;    // k x (1 + free)
    std::vector<std::vector<double>> leak_;         // d_id x free
    std::vector<std::vector<double>> background_w_;  // 5 x free (rgb, gx, gy)
    std::vector<double> clutter_w_;
    std::vector<std::array<double, 3>> clutter_waves_;  // fx, fy, phase weight index
    std::vector<std::vector<double>> clutter_phase_w_;
    std::vector<std::array<double, 3>> texture_waves_;  // fx, fy, phase
};

/// Generator backend over the synthetic world: encoders read the latent tag,
/// the generator renders and then applies leakage κ and blur β.
class SyntheticBackend : public GeneratorBackend {
public:
    explicit SyntheticBackend(std::shared_ptr<const SyntheticWorld> world) : world_(std::move(world)) {}
    explicit SyntheticBackend(const SyntheticWorldConfig& config)
        : world_(std::make_shared<const SyntheticWorld>(config)) {}

    IdentityEmbedding encode_identity(const Image& image) const override;
    /// Noise draw `draw` for the same image; draw 0 is what encode_identity returns.
    IdentityEmbedding encode_identity(const Image& image, std::uint64_t draw) const;
    AttributeEmbedding encode_attributes(const Image& image) const override;
    Image generate(const IdentityEmbedding& identity, const AttributeEmbedding& attributes) const override;
    Resolution working_resolution() const override { return world_->resolution(); }
    std::unique_ptr<GeneratorBackend> clone() const override {
        return std::make_unique<SyntheticBackend>(world_);
    }
    std::string name() const override { return "synthetic"; }

    const SyntheticWorld& world() const { return *world_; }
    std::shared_ptr<const SyntheticWorld> world_ptr() const { return world_; }

private:
    const LatentTag& require_tag(const Image& image) const;
    std::shared_ptr<const SyntheticWorld> world_;
};

/// Analytic preprocessor: faces are already aligned, masks come from the
/// latent tag. Untagged images are reported as "no face found".
class SyntheticPreprocessor : public FacePreprocessor {
public:
    explicit SyntheticPreprocessor(std::shared_ptr<const SyntheticWorld> world) : world_(std::move(world)) {}
    AlignedFace detect_align(const Image& image) const override;
    std::string name() const override { return "synthetic"; }

private:
    std::shared_ptr<const SyntheticWorld> world_;
};

// Free-function forms of the synthetic-world operations.
Image synth_render(std::span<const double> mu, std::span<const double> attr, const SyntheticWorldConfig& cfg);
SyntheticSample synth_make_fake(std::span<const double> source_mu, std::span<const double> target_attr,
                                double delta, const SyntheticWorldConfig& cfg, std::uint64_t sample_seed);
IdentityEmbedding synth_encode_identity(const Image& image, const SyntheticWorldConfig& cfg,
                                        std::uint64_t draw = 0);
Image synth_generate(const IdentityEmbedding& zid, const AttributeEmbedding& zatt,
                     const SyntheticWorldConfig& cfg);

}  // namespace diffid
