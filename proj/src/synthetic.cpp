#include "diffid/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "diffid/error.hpp"

namespace diffid {

namespace {

constexpr double kFeatureRadius = 0.085;
constexpr double kFeatureSpread = 0.72;
constexpr double kFaceCy = 0.52;
constexpr double kFaceRx = 0.30;
constexpr double kFaceRy = 0.36;
constexpr double kFaceEdge = 0.08;
constexpr double kTextureAmplitude = 0.015;
constexpr std::array<double, 3> kSkin = {0.78, 0.60, 0.50};

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

std::vector<double> gaussian_vector(Rng& rng, std::size_t n, double scale) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = scale * normal(rng);
    return v;
}

std::vector<std::vector<double>> gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    std::vector<std::vector<double>> m(rows);
    const double scale = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(cols, 1)));
    for (auto& row : m) row = gaussian_vector(rng, cols, scale);
    return m;
}

void normalize(std::vector<double>& v) {
    const double n = std::sqrt(dot(v, v));
    if (n > 0.0) {
        for (double& x : v) x /= n;
    }
}

std::span<const double> free_part(std::span<const double> attr) { return attr.subspan(kFirstFreeIndex); }

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) throw InvalidArgument(std::string("synthetic config: ") + name + " is not finite");
}

}  // namespace

void SyntheticWorldConfig::validate() const {
    if (d_id < 2) throw InvalidArgument("synthetic config: d_id must be >= 2");
    if (d_att < 3) throw InvalidArgument("synthetic config: d_att must be >= 3 (yaw, detail, free)");
    if (image_size < 8) throw InvalidArgument("synthetic config: image_size must be >= 8");
    for (auto [v, n] : {std::pair{entanglement, "entanglement"}, {encoder_noise, "encoder_noise"},
                        {generator_leakage, "generator_leakage"}, {generator_blur, "generator_blur"},
                        {attribute_spread, "attribute_spread"}, {yaw_range_deg, "yaw_range_deg"},
                        {yaw_occlusion, "yaw_occlusion"}, {clutter, "clutter"},
                        {detail_spread, "detail_spread"}, {encoder_bleed, "encoder_bleed"},
                        {occlusion_noise, "occlusion_noise"}, {feature_gain, "feature_gain"}, {mask_dilation_px, "mask_dilation_px"}}) {
        require_finite(v, n);
        if (v < 0.0) throw InvalidArgument(std::string("synthetic config: ") + n + " must be >= 0");
    }
    if (generator_leakage > 1.0) throw InvalidArgument("synthetic config: generator_leakage must lie in [0, 1]");
    if (yaw_range_deg > 90.0) throw InvalidArgument("synthetic config: yaw_range_deg must be <= 90");
    if (detail_spread < 1.0) throw InvalidArgument("synthetic config: detail_spread must be >= 1");
    if (!(feature_gain > 0.0)) throw InvalidArgument("synthetic config: feature_gain must be > 0");
}

SyntheticWorld::SyntheticWorld(SyntheticWorldConfig config) : config_(config) {
    config_.validate();
    const auto d = static_cast<std::size_t>(config_.d_id);
    const auto nfree = static_cast<std::size_t>(config_.free_attributes());
    Rng rng(derive_seed(config_.seed, {hash_string("world-structure")}));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    // Sunflower layout of the identity features inside the face ellipse.
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t k = 0; k < d; ++k) {
        const double r = kFeatureSpread * std::sqrt((k + 0.5) / static_cast<double>(d));
        base_u_.push_back(r * std::cos(k * golden));
        base_v_.push_back(r * std::sin(k * golden));
        auto c = gaussian_vector(rng, 3, 1.0);
        normalize(c);
        colors_.push_back({c[0], c[1], c[2]});
    }
    shift_x_ = gaussian_matrix(rng, d, nfree);
    shift_y_ = gaussian_matrix(rng, d, nfree);
    scale_w_ = gaussian_matrix(rng, d, nfree);

    // Orthonormal basis of the attribute-factor subspace (Gram-Schmidt).
    const std::size_t k = std::min<std::size_t>(4, d / 2);
    for (std::size_t i = 0; i < k; ++i) {
        auto v = gaussian_vector(rng, d, 1.0);
        for (const auto& b : bleed_basis_) {
            const double p = dot(v, b);
            for (std::size_t j = 0; j < d; ++j) v[j] -= p * b[j];
        }
        normalize(v);
        bleed_basis_.push_back(std::move(v));
    }
    bleed_mix_ = gaussian_matrix(rng, k, nfree + 1);
    leak_ = gaussian_matrix(rng, d, nfree);
    background_w_ = gaussian_matrix(rng, 5, nfree);
    clutter_w_ = gaussian_vector(rng, nfree, 1.0 / std::sqrt(static_cast<double>(nfree)));
    for (int i = 0; i < 3; ++i) {
        const double f = 0.30 + 0.12 * uniform(rng);
        const double a = std::numbers::pi * uniform(rng);
        clutter_waves_.push_back({f * std::cos(a), f * std::sin(a), 0.0});
    }
    clutter_phase_w_ = gaussian_matrix(rng, 3, nfree);
    for (int i = 0; i < 4; ++i) {
        const double f = 0.22 + 0.10 * uniform(rng);
        const double a = std::numbers::pi * uniform(rng);
        texture_waves_.push_back({f * std::cos(a), f * std::sin(a), 2.0 * std::numbers::pi * uniform(rng)});
    }
}

void SyntheticWorld::check_identity_dim(std::size_t n, const char* what) const {
    if (n != static_cast<std::size_t>(config_.d_id)) {
        throw ShapeError(std::string(what) + ": identity latent has dimension " + std::to_string(n) +
                         ", expected " + std::to_string(config_.d_id));
    }
}

void SyntheticWorld::check_attribute_dim(std::size_t n, const char* what) const {
    if (n != static_cast<std::size_t>(config_.d_att)) {
        throw ShapeError(std::string(what) + ": attribute latent has dimension " + std::to_string(n) +
                         ", expected " + std::to_string(config_.d_att));
    }
}

std::vector<double> SyntheticWorld::identity_latent(int index) const {
    Rng rng(derive_seed(config_.seed, {hash_string("identity"), static_cast<std::uint64_t>(index)}));
    auto mu = gaussian_vector(rng, static_cast<std::size_t>(config_.d_id), 1.0);
    return strip_bleed(mu);
}

double SyntheticWorld::identity_log_detail(int index) const {
    if (config_.detail_spread == 1.0) return 0.0;
    Rng rng(derive_seed(config_.seed, {hash_string("detail"), static_cast<std::uint64_t>(index)}));
    const double r = std::log(config_.detail_spread);
    return std::uniform_real_distribution<double>(-r, r)(rng);
}

std::vector<double> SyntheticWorld::sample_attributes(Rng& rng, double log_detail) const {
    std::vector<double> attr(static_cast<std::size_t>(config_.d_att));
    attr[kYawIndex] =
        std::uniform_real_distribution<double>(-config_.yaw_range_deg, config_.yaw_range_deg)(rng);
    attr[kDetailIndex] = log_detail;
    std::normal_distribution<double> normal(0.0, config_.attribute_spread);
    for (std::size_t i = kFirstFreeIndex; i < attr.size(); ++i) attr[i] = normal(rng);
    return attr;
}

double SyntheticWorld::face_alpha(double x, double y, double yaw) const {
    const double cx = 0.5 + 0.1 * std::sin(yaw);
    const double rx = kFaceRx * (0.85 + 0.15 * std::cos(yaw));
    const double dx = (x - cx) / rx;
    const double dy = (y - kFaceCy) / kFaceRy;
    const double r = std::sqrt(dx * dx + dy * dy);
    return 1.0 / (1.0 + std::exp((r - 1.0) / kFaceEdge));
}

std::vector<FeatureGeometry> SyntheticWorld::layout(std::span<const double> mu,
                                                    std::span<const double> attr) const {
    check_identity_dim(mu.size(), "layout");
    check_attribute_dim(attr.size(), "layout");
    const double yaw = deg2rad(attr[kYawIndex]);
    const double detail = std::exp(attr[kDetailIndex]);
    const auto free = free_part(attr);
    const double lambda = config_.entanglement;
    const double face_cx = 0.5 + 0.1 * std::sin(yaw);
    const double rx = kFaceRx * (0.85 + 0.15 * std::cos(yaw));

    std::vector<FeatureGeometry> out(mu.size());
    for (std::size_t k = 0; k < mu.size(); ++k) {
        FeatureGeometry& g = out[k];
        g.cx = face_cx + base_u_[k] * rx * std::cos(yaw);
        g.cy = kFaceCy + base_v_[k] * kFaceRy;
        g.radius = kFeatureRadius;
        if (lambda > 0.0) {
            g.cx += lambda * 0.02 * std::tanh(dot(shift_x_[k], free));
            g.cy += lambda * 0.02 * std::tanh(dot(shift_y_[k], free));
            g.radius *= std::exp(lambda * 0.15 * std::tanh(dot(scale_w_[k], free)));
        }
        const double side = base_u_[k] / kFeatureSpread;
        g.visibility = std::clamp(1.0 - 2.0 * config_.yaw_occlusion * std::max(0.0, -side * std::sin(yaw)),
                                  0.0, 1.0);
        g.amplitude = detail * config_.feature_gain * mu[k] * g.visibility;
    }
    return out;
}

Image SyntheticWorld::render(std::span<const double> mu, std::span<const double> attr) const {
    const std::uint64_t key = hash_doubles(hash_doubles(derive_seed(config_.seed, {hash_string("render")}), mu), attr);
    return render(mu, attr, key);
}

Image SyntheticWorld::render(std::span<const double> mu, std::span<const double> attr,
                             std::uint64_t key) const {
    const auto features = layout(mu, attr);
    const int n = config_.image_size;
    const double yaw = deg2rad(attr[kYawIndex]);
    const double detail = std::exp(attr[kDetailIndex]);
    const auto free = free_part(attr);

    std::array<double, 3> base{};
    for (int c = 0; c < 3; ++c) base[c] = 0.45 + 0.2 * std::tanh(dot(background_w_[c], free));
    const double grad_x = 0.25 * std::tanh(dot(background_w_[3], free));
    const double grad_y = 0.25 * std::tanh(dot(background_w_[4], free));
    const double light = 1.0 + 0.08 * std::tanh(free[0]);
    const double clutter_amp =
        config_.clutter > 0.0 ? config_.clutter * (0.5 + 0.5 * std::tanh(dot(clutter_w_, free))) : 0.0;
    std::array<double, 3> clutter_phase{};
    for (int j = 0; j < 3; ++j) clutter_phase[j] = 3.0 * std::tanh(dot(clutter_phase_w_[j], free));

    Image img(n, n, 3);
    for (int i = 0; i < n; ++i) {
        const double y = (i + 0.5) / n;
        for (int j = 0; j < n; ++j) {
            const double x = (j + 0.5) / n;
            double clutter_term = 0.0;
            if (clutter_amp > 0.0) {
                for (int w = 0; w < 3; ++w) {
                    const auto& wave = clutter_waves_[w];
                    clutter_term += std::sin(2.0 * std::numbers::pi * (wave[0] * j + wave[1] * i) + clutter_phase[w]);
                }
                clutter_term *= clutter_amp / 3.0;
            }
            double texture = 0.0;
            for (const auto& wave : texture_waves_) {
                texture += std::sin(2.0 * std::numbers::pi * (wave[0] * j + wave[1] * i) + wave[2]);
            }
            texture *= 0.5 * kTextureAmplitude * detail;
            const double alpha = face_alpha(x, y, yaw);
            for (int c = 0; c < 3; ++c) {
                const double bg = base[c] + grad_x * (x - 0.5) + grad_y * (y - 0.5) + clutter_term;
                const double skin = kSkin[c] * light + texture;
                img.at(i, j, c) = (1.0 - alpha) * bg + alpha * skin;
            }
        }
    }

    // Identity features: compact C1 bumps, exactly zero outside their support.
    for (std::size_t k = 0; k < features.size(); ++k) {
        const auto& g = features[k];
        if (g.amplitude == 0.0) continue;
        const int i0 = std::max(0, static_cast<int>(std::floor((g.cy - g.radius) * n)));
        const int i1 = std::min(n - 1, static_cast<int>(std::ceil((g.cy + g.radius) * n)));
        const int j0 = std::max(0, static_cast<int>(std::floor((g.cx - g.radius) * n)));
        const int j1 = std::min(n - 1, static_cast<int>(std::ceil((g.cx + g.radius) * n)));
        const double r2 = g.radius * g.radius;
        for (int i = i0; i <= i1; ++i) {
            const double dy = (i + 0.5) / n - g.cy;
            for (int j = j0; j <= j1; ++j) {
                const double dx = (j + 0.5) / n - g.cx;
                const double d2 = dx * dx + dy * dy;
                if (d2 >= r2) continue;
                const double t = 1.0 - d2 / r2;
                const double bump = t * t;
                for (int c = 0; c < 3; ++c) img.at(i, j, c) += g.amplitude * bump * colors_[k][c];
            }
        }
    }
    img.clamp();

    auto tag = std::make_shared<LatentTag>();
    tag->identity.assign(mu.begin(), mu.end());
    tag->attributes.assign(attr.begin(), attr.end());
    tag->key = key;
    img.set_tag(std::move(tag));
    return img;
}

FaceMask SyntheticWorld::face_mask(std::span<const double> attr) const {
    const std::vector<double> ones(static_cast<std::size_t>(config_.d_id), 1.0);
    const auto features = layout(ones, attr);
    const int n = config_.image_size;
    FaceMask mask(n, n);
    for (const auto& g : features) {
        const double r2 = g.radius * g.radius;
        for (int i = 0; i < n; ++i) {
            const double dy = (i + 0.5) / n - g.cy;
            for (int j = 0; j < n; ++j) {
                const double dx = (j + 0.5) / n - g.cx;
                if (dx * dx + dy * dy < r2) mask.set(i, j, true);
            }
        }
    }
    return dilate_mask(mask, config_.mask_dilation_px);
}

int SyntheticWorld::unattenuated_features(std::span<const double> attr) const {
    const std::vector<double> ones(static_cast<std::size_t>(config_.d_id), 1.0);
    const auto features = layout(ones, attr);
    return static_cast<int>(std::count_if(features.begin(), features.end(),
                                          [](const FeatureGeometry& g) { return g.visibility >= 1.0; }));
}

SyntheticSample SyntheticWorld::make_real(std::span<const double> mu, std::span<const double> attr,
                                          std::uint64_t sample_seed, std::string label) const {
    SyntheticSample s;
    s.image = render(mu, attr, derive_seed(config_.seed, {hash_string("sample"), sample_seed}));
    s.mu.assign(mu.begin(), mu.end());
    s.attr.assign(attr.begin(), attr.end());
    s.delta = 0.0;
    s.is_fake = false;
    s.identity_label = std::move(label);
    s.sample_seed = sample_seed;
    return s;
}

std::vector<double> SyntheticWorld::fake_direction(std::uint64_t sample_seed) const {
    Rng rng(derive_seed(config_.seed, {hash_string("fake-direction"), sample_seed}));
    auto u = strip_bleed(gaussian_vector(rng, static_cast<std::size_t>(config_.d_id), 1.0));
    normalize(u);
    return u;
}

SyntheticSample SyntheticWorld::make_fake(std::span<const double> source_mu, std::span<const double> target_attr,
                                          double delta, std::uint64_t sample_seed, std::string label) const {
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw InvalidArgument("make_fake: delta must be >= 0");
    check_identity_dim(source_mu.size(), "make_fake");
    if (delta == 0.0) return make_real(source_mu, target_attr, sample_seed, std::move(label));
    const auto u = fake_direction(sample_seed);
    std::vector<double> z(source_mu.begin(), source_mu.end());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += delta * u[i];
    SyntheticSample s;
    s.image = render(z, target_attr, derive_seed(config_.seed, {hash_string("sample"), sample_seed}));
    s.mu.assign(source_mu.begin(), source_mu.end());
    s.attr.assign(target_attr.begin(), target_attr.end());
    s.delta = delta;
    s.is_fake = true;
    s.identity_label = std::move(label);
    s.sample_seed = sample_seed;
    return s;
}

std::vector<double> SyntheticWorld::attribute_bleed(std::span<const double> attr) const {
    check_attribute_dim(attr.size(), "attribute_bleed");
    std::vector<double> eps(static_cast<std::size_t>(config_.d_id), 0.0);
    if (config_.encoder_bleed == 0.0) return eps;
    std::vector<double> a;
    a.push_back(attr[kYawIndex] / 30.0);
    for (double v : free_part(attr)) a.push_back(v);
    for (std::size_t b = 0; b < bleed_basis_.size(); ++b) {
        const double coef = config_.encoder_bleed * dot(bleed_mix_[b], a);
        for (std::size_t i = 0; i < eps.size(); ++i) eps[i] += coef * bleed_basis_[b][i];
    }
    return eps;
}

std::vector<double> SyntheticWorld::strip_bleed(std::span<const double> z) const {
    std::vector<double> out(z.begin(), z.end());
    if (config_.encoder_bleed == 0.0) return out;
    for (const auto& b : bleed_basis_) {
        const double p = dot(out, b);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] -= p * b[i];
    }
    return out;
}

std::vector<double> SyntheticWorld::leakage_direction(std::span<const double> attr) const {
    check_attribute_dim(attr.size(), "leakage_direction");
    const auto free = free_part(attr);
    std::vector<double> out(leak_.size());
    for (std::size_t i = 0; i < leak_.size(); ++i) out[i] = dot(leak_[i], free);
    return out;
}

std::vector<double> SyntheticWorld::encoder_noise(std::uint64_t key, std::uint64_t draw) const {
    Rng rng(derive_seed(config_.seed, {hash_string("encoder-noise"), key, draw}));
    return gaussian_vector(rng, static_cast<std::size_t>(config_.d_id), 1.0);
}

const LatentTag& SyntheticBackend::require_tag(const Image& image) const {
    const auto& tag = image.tag();
    if (!tag) throw BackendError("synthetic encoder: image carries no latent metadata (foreign image)");
    world_->check_identity_dim(tag->identity.size(), "synthetic encoder");
    world_->check_attribute_dim(tag->attributes.size(), "synthetic encoder");
    return *tag;
}

IdentityEmbedding SyntheticBackend::encode_identity(const Image& image) const {
    return encode_identity(image, 0);
}

IdentityEmbedding SyntheticBackend::encode_identity(const Image& image, std::uint64_t draw) const {
    const LatentTag& tag = require_tag(image);
    const auto& cfg = world_->config();
    IdentityEmbedding z{tag.identity};
    if (cfg.encoder_bleed > 0.0) {
        const auto eps = world_->attribute_bleed(tag.attributes);
        for (std::size_t i = 0; i < z.values.size(); ++i) z.values[i] += eps[i];
    }
    if (cfg.encoder_noise > 0.0) {
        const auto noise = world_->encoder_noise(tag.key, draw);
        std::vector<double> scale(z.values.size(), cfg.encoder_noise);
        if (cfg.occlusion_noise > 0.0) {
            const auto features = world_->layout(tag.identity, tag.attributes);
            for (std::size_t i = 0; i < scale.size(); ++i) {
                scale[i] *= 1.0 + cfg.occlusion_noise * (1.0 - features[i].visibility);
            }
        }
        for (std::size_t i = 0; i < z.values.size(); ++i) z.values[i] += scale[i] * noise[i];
    }
    return z;
}

AttributeEmbedding SyntheticBackend::encode_attributes(const Image& image) const {
    const LatentTag& tag = require_tag(image);
    return AttributeEmbedding{tag.attributes, tag.attributes[kYawIndex]};
}

Image SyntheticBackend::generate(const IdentityEmbedding& identity, const AttributeEmbedding& attributes) const {
    world_->check_identity_dim(identity.dim(), "synthetic generator");
    world_->check_attribute_dim(attributes.values.size(), "synthetic generator");
    const auto& cfg = world_->config();
    auto z = world_->strip_bleed(identity.values);
    if (cfg.generator_leakage > 0.0) {
        const auto leak = world_->leakage_direction(attributes.values);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += cfg.generator_leakage * leak[i];
    }
    Image out = world_->render(z, attributes.values);
    if (cfg.generator_blur > 0.0) {
        Image blurred = gaussian_blur(out, cfg.generator_blur);
        blurred.set_tag(out.tag());
        return blurred;
    }
    return out;
}

AlignedFace SyntheticPreprocessor::detect_align(const Image& image) const {
    const auto& tag = image.tag();
    if (!tag) throw PreprocessError("no face found: image carries no synthetic latent metadata");
    const auto res = world_->resolution();
    if (image.height() != res.height || image.width() != res.width || image.channels() != 3) {
        throw PreprocessError("synthetic preprocessor: image is not an aligned " + std::to_string(res.height) +
                              "x" + std::to_string(res.width) + " RGB face");
    }
    world_->check_attribute_dim(tag->attributes.size(), "synthetic preprocessor");
    return AlignedFace{image, world_->face_mask(tag->attributes), tag->attributes[kYawIndex]};
}

Image synth_render(std::span<const double> mu, std::span<const double> attr, const SyntheticWorldConfig& cfg) {
    return SyntheticWorld(cfg).render(mu, attr);
}

SyntheticSample synth_make_fake(std::span<const double> source_mu, std::span<const double> target_attr,
                                double delta, const SyntheticWorldConfig& cfg, std::uint64_t sample_seed) {
    return SyntheticWorld(cfg).make_fake(source_mu, target_attr, delta, sample_seed);
}

IdentityEmbedding synth_encode_identity(const Image& image, const SyntheticWorldConfig& cfg, std::uint64_t draw) {
    return SyntheticBackend(cfg).encode_identity(image, draw);
}

Image synth_generate(const IdentityEmbedding& zid, const AttributeEmbedding& zatt, const SyntheticWorldConfig& cfg) {
    return SyntheticBackend(cfg).generate(zid, zatt);
}

}  // namespace diffid
