#include "diffid/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "diffid/error.hpp"

namespace diffid {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": image shapes differ (" + std::to_string(a.height()) +
                         "x" + std::to_string(a.width()) + "x" + std::to_string(a.channels()) +
                         " vs " + std::to_string(b.height()) + "x" + std::to_string(b.width()) +
                         "x" + std::to_string(b.channels()) + ")");
    }
}

std::vector<double> gaussian_taps(double sigma, int half) {
    std::vector<double> taps(2 * half + 1);
    for (int i = -half; i <= half; ++i) {
        taps[i + half] = std::exp(-0.5 * i * i / (sigma * sigma));
    }
    return taps;
}

// Separable correlation of a single-plane field with replicated borders.
std::vector<double> separable_filter(const std::vector<double>& field, int h, int w, int c,
                                     const std::vector<double>& taps) {
    const int half = static_cast<int>(taps.size() / 2);
    std::vector<double> tmp(field.size(), 0.0);
    std::vector<double> out(field.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int k = -half; k <= half; ++k) {
                    const int xx = std::clamp(x + k, 0, w - 1);
                    acc += taps[k + half] * field[(static_cast<std::size_t>(y) * w + xx) * c + ch];
                }
                tmp[(static_cast<std::size_t>(y) * w + x) * c + ch] = acc;
            }
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int k = -half; k <= half; ++k) {
                    const int yy = std::clamp(y + k, 0, h - 1);
                    acc += taps[k + half] * tmp[(static_cast<std::size_t>(yy) * w + x) * c + ch];
                }
                out[(static_cast<std::size_t>(y) * w + x) * c + ch] = acc;
            }
        }
    }
    return out;
}

}  // namespace

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
    if (height <= 0 || width <= 0 || channels <= 0) {
        throw InvalidArgument("image dimensions must be positive");
    }
    pixels_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image Image::from_pixels(int height, int width, int channels, std::vector<double> pixels) {
    Image img(height, width, channels);
    if (pixels.size() != img.pixels_.size()) {
        throw ShapeError("pixel buffer size does not match " + std::to_string(height) + "x" +
                         std::to_string(width) + "x" + std::to_string(channels));
    }
    img.pixels_ = std::move(pixels);
    img.validate();
    return img;
}

bool Image::same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
}

void Image::clamp() {
    for (double& v : pixels_) v = std::clamp(v, 0.0, 1.0);
}

void Image::validate() const {
    for (double v : pixels_) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw InvalidArgument("pixel value outside [0, 1]: " + std::to_string(v));
        }
    }
}

bool operator==(const Image& a, const Image& b) {
    return a.same_shape(b) && a.pixels_ == b.pixels_;
}

FaceMask::FaceMask(int height, int width, bool fill) : height_(height), width_(width) {
    if (height <= 0 || width <= 0) throw InvalidArgument("mask dimensions must be positive");
    values_.assign(static_cast<std::size_t>(height) * width, fill ? 1 : 0);
}

std::size_t FaceMask::count() const {
    return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

DiffImage pixel_diff(const Image& a, const Image& b) {
    require_same_shape(a, b, "pixel_diff");
    Image out(a.height(), a.width(), a.channels());
    auto pa = a.pixels();
    auto pb = b.pixels();
    auto po = out.pixels();
    for (std::size_t i = 0; i < po.size(); ++i) po[i] = std::abs(pa[i] - pb[i]);
    return DiffImage(std::move(out));
}

double masked_l2(const Image& a, const Image& b, const FaceMask& mask) {
    require_same_shape(a, b, "masked_l2");
    if (!mask.matches(a)) throw ShapeError("masked_l2: mask does not match image dimensions");
    if (mask.count() == 0) throw InvalidArgument("masked_l2: mask has empty support");
    const int c = a.channels();
    auto pa = a.pixels();
    auto pb = b.pixels();
    auto m = mask.values();
    long double acc = 0.0L;
    for (std::size_t p = 0; p < m.size(); ++p) {
        if (!m[p]) continue;
        for (int ch = 0; ch < c; ++ch) {
            const long double d = static_cast<long double>(pa[p * c + ch]) - pb[p * c + ch];
            acc += d * d;
        }
    }
    return static_cast<double>(std::sqrt(acc));
}

FaceMask dilate_mask(const FaceMask& mask, double radius, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw InvalidArgument("dilate_mask: threshold must lie in (0, 1]");
    }
    if (!(radius > 0.0)) return mask;
    const double sigma = radius / std::sqrt(2.0 * std::log(1.0 / kDilationThreshold));
    const int half = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    const auto taps = gaussian_taps(sigma, half);

    const int h = mask.height();
    const int w = mask.width();
    std::vector<double> field(mask.values().begin(), mask.values().end());
    const auto blurred = separable_filter(field, h, w, 1, taps);

    FaceMask out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            out.set(y, x, mask.at(y, x) || blurred[i] >= threshold);
        }
    }
    return out;
}

Image render_diff_visualization(const DiffImage& diff, double gain) {
    if (!(gain >= 1.0)) throw InvalidArgument("render_diff_visualization: gain must be >= 1");
    const Image& d = diff.values();
    Image out(d.height(), d.width(), d.channels());
    auto pd = d.pixels();
    auto po = out.pixels();
    for (std::size_t i = 0; i < po.size(); ++i) po[i] = std::clamp(gain * pd[i], 0.0, 1.0);
    return out;
}

Image gaussian_blur(const Image& image, double sigma) {
    if (!(sigma > 0.0)) return image;
    const int half = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    auto taps = gaussian_taps(sigma, half);
    const double total = std::accumulate(taps.begin(), taps.end(), 0.0);
    for (double& t : taps) t /= total;
    std::vector<double> field(image.pixels().begin(), image.pixels().end());
    auto blurred = separable_filter(field, image.height(), image.width(), image.channels(), taps);
    Image out(image.height(), image.width(), image.channels());
    std::copy(blurred.begin(), blurred.end(), out.pixels().begin());
    out.clamp();
    return out;
}

double mean_abs_diff(const Image& a, const Image& b) {
    require_same_shape(a, b, "mean_abs_diff");
    auto pa = a.pixels();
    auto pb = b.pixels();
    long double acc = 0.0L;
    for (std::size_t i = 0; i < pa.size(); ++i) acc += std::abs(pa[i] - pb[i]);
    return static_cast<double>(acc / static_cast<long double>(pa.size()));
}

Image downsample2(const Image& image) {
    const int h = std::max(1, image.height() / 2);
    const int w = std::max(1, image.width() / 2);
    if (image.height() < 2 || image.width() < 2) return image;
    Image out(h, w, image.channels());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < image.channels(); ++c) {
                out.at(y, x, c) = 0.25 * (image.at(2 * y, 2 * x, c) + image.at(2 * y + 1, 2 * x, c) +
                                          image.at(2 * y, 2 * x + 1, c) +
                                          image.at(2 * y + 1, 2 * x + 1, c));
            }
        }
    }
    return out;
}

Image contact_sheet(const Image& a, const Image& b, const Image& c, const Image& d) {
    require_same_shape(a, b, "contact_sheet");
    require_same_shape(a, c, "contact_sheet");
    require_same_shape(a, d, "contact_sheet");
    const int h = a.height();
    const int w = a.width();
    const int ch = a.channels();
    Image out(2 * h, 2 * w, ch);
    const Image* tiles[2][2] = {{&a, &b}, {&c, &d}};
    for (int ty = 0; ty < 2; ++ty) {
        for (int tx = 0; tx < 2; ++tx) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    for (int k = 0; k < ch; ++k) {
                        out.at(ty * h + y, tx * w + x, k) = tiles[ty][tx]->at(y, x, k);
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace diffid
