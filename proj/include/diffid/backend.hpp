#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "diffid/image.hpp"

namespace diffid {

/// Output of a face-recognition style identity encoder. Not normalised.
struct IdentityEmbedding {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
    double norm() const;
    /// Throws InvalidArgument unless all entries are finite and the norm is positive.
    void validate() const;

    friend bool operator==(const IdentityEmbedding&, const IdentityEmbedding&) = default;
};

/// Identity-independent scene description consumed by the generator.
struct AttributeEmbedding {
    std::vector<double> values;
    std::optional<double> yaw_deg;

    friend bool operator==(const AttributeEmbedding&, const AttributeEmbedding&) = default;
};

struct Resolution {
    int height = 0;
    int width = 0;
    friend bool operator==(const Resolution&, const Resolution&) = default;
};

/// A face-swap generator G(Z_id, Z_att) together with its two encoders.
class GeneratorBackend {
public:
    virtual ~GeneratorBackend() = default;

    virtual IdentityEmbedding encode_identity(const Image& image) const = 0;
    virtual AttributeEmbedding encode_attributes(const Image& image) const = 0;
    /// Deterministic: identical inputs give bitwise-identical outputs.
    virtual Image generate(const IdentityEmbedding& identity,
                           const AttributeEmbedding& attributes) const = 0;
    virtual Resolution working_resolution() const = 0;

    /// Whether the identity encoder L2-normalises its output.
    virtual bool normalizes_identity() const { return false; }
    /// Whether the instance may serve concurrent calls. Single-threaded
    /// backends are cloned once per worker by the evaluation harness.
    virtual bool concurrent() const { return true; }
    virtual std::unique_ptr<GeneratorBackend> clone() const = 0;
    virtual std::string name() const = 0;
};

struct AlignedFace {
    Image image;
    FaceMask mask;
    double yaw_deg = 0.0;
};

/// Face detection, alignment and parsing in front of the generator.
class FacePreprocessor {
public:
    virtual ~FacePreprocessor() = default;
    /// Throws PreprocessError when no face can be found.
    virtual AlignedFace detect_align(const Image& image) const = 0;
    virtual std::string name() const = 0;
};

/// Accepts images that are already aligned at the working resolution and
/// masks the whole frame. Yaw is unknown and reported as 0.
class PassthroughPreprocessor : public FacePreprocessor {
public:
    explicit PassthroughPreprocessor(Resolution resolution) : resolution_(resolution) {}
    AlignedFace detect_align(const Image& image) const override;
    std::string name() const override { return "passthrough"; }

private:
    Resolution resolution_;
};

/// 1 - cos(a, b); zero-norm inputs are rejected.
double cosine_distance(const IdentityEmbedding& a, const IdentityEmbedding& b);

}  // namespace diffid
