#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace diffid {

/// Ground-truth provenance carried by images rendered in the synthetic world.
/// `identity` is the identity latent that was actually rendered (after any
/// injected identity loss or generator leakage), `attributes` the attribute
/// latent, and `key` seeds the encoder noise for this image.
struct LatentTag {
    std::vector<double> identity;
    std::vector<double> attributes;
    std::uint64_t key = 0;
};

/// Row-major H x W x C raster of reals in [0, 1]. C is 3 for faces; single
/// channel rasters are accepted by the arithmetic helpers.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0);

    /// Validating constructor: rejects non-finite or out-of-range values.
    static Image from_pixels(int height, int width, int channels, std::vector<double> pixels);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t size() const { return pixels_.size(); }
    bool empty() const { return pixels_.empty(); }

    double at(int y, int x, int c) const { return pixels_[index(y, x, c)]; }
    double& at(int y, int x, int c) { return pixels_[index(y, x, c)]; }

    std::span<const double> pixels() const { return pixels_; }
    std::span<double> pixels() { return pixels_; }

    const std::shared_ptr<const LatentTag>& tag() const { return tag_; }
    void set_tag(std::shared_ptr<const LatentTag> tag) { tag_ = std::move(tag); }

    bool same_shape(const Image& other) const;

    /// Clamp every value into [0, 1].
    void clamp();

    /// Throws InvalidArgument if any value is non-finite or outside [0, 1].
    void validate() const;

    /// Pixel equality; the provenance tag is ignored.
    friend bool operator==(const Image& a, const Image& b);

private:
    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> pixels_;
    std::shared_ptr<const LatentTag> tag_;
};

/// Binary H x W face-region mask.
class FaceMask {
public:
    FaceMask() = default;
    FaceMask(int height, int width, bool fill = false);

    static FaceMask full(int height, int width) { return FaceMask(height, width, true); }

    int height() const { return height_; }
    int width() const { return width_; }
    bool at(int y, int x) const { return values_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    void set(int y, int x, bool v) { values_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
    std::span<const std::uint8_t> values() const { return values_; }

    std::size_t count() const;
    bool matches(const Image& image) const {
        return image.height() == height_ && image.width() == width_;
    }

    friend bool operator==(const FaceMask&, const FaceMask&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> values_;
};

/// Elementwise |a - b| of two images.
class DiffImage {
public:
    explicit DiffImage(Image values) : values_(std::move(values)) {}
    const Image& values() const { return values_; }

private:
    Image values_;
};

DiffImage pixel_diff(const Image& a, const Image& b);

/// Euclidean norm of m ⊙ (a − b) over all masked pixel-channels.
double masked_l2(const Image& a, const Image& b, const FaceMask& mask);

/// Default mask threshold after blurring.
inline constexpr double kDilationThreshold = 0.1;

/// Gaussian-kernel dilation: the binary field is convolved with a
/// peak-normalised Gaussian whose 0.1 level sits at `radius` pixels, then
/// thresholded. An isolated pixel therefore grows to the disc of that radius.
FaceMask dilate_mask(const FaceMask& mask, double radius, double threshold = kDilationThreshold);

/// clip(gain * d, 0, 1).
Image render_diff_visualization(const DiffImage& diff, double gain);

/// Separable Gaussian blur with replicated borders; sigma <= 0 returns a copy.
Image gaussian_blur(const Image& image, double sigma);

/// Mean absolute difference over all pixel-channels.
double mean_abs_diff(const Image& a, const Image& b);

/// 2x box downsampling (odd trailing rows/columns are dropped).
Image downsample2(const Image& image);

/// Tiles four equally sized images as [a b; c d].
Image contact_sheet(const Image& a, const Image& b, const Image& c, const Image& d);

}  // namespace diffid
