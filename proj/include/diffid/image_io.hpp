#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "diffid/image.hpp"

namespace diffid {

/// Reads an 8-bit PNG (gray, gray+alpha, RGB or RGBA) into an RGB image scaled by 1/255.
/// A `<path>.latent.json` sidecar, when present, is attached as the image tag.
Image read_png(const std::filesystem::path& path);

/// Writes an RGB or gray image as 8-bit PNG (values rounded from [0, 1] to [0, 255]).
void write_png(const std::filesystem::path& path, const Image& image);

/// Masks are single-channel PNGs holding {0, 255}; any nonzero value reads as set.
FaceMask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const FaceMask& mask);

/// In-memory JPEG codec (libjpeg defaults, i.e. 4:2:0 chroma subsampling).
std::vector<std::uint8_t> encode_jpeg(const Image& image, int quality);
Image decode_jpeg(const std::vector<std::uint8_t>& bytes);

Image read_jpeg(const std::filesystem::path& path);

/// Round trip through JPEG at quality `qf` in [1, 100]. Dimensions and the
/// provenance tag are preserved.
Image jpeg_degrade(const Image& image, int qf);

/// Reads PNG or JPEG by extension.
Image read_image(const std::filesystem::path& path);

std::filesystem::path latent_sidecar_path(const std::filesystem::path& image_path);
void write_latent_sidecar(const std::filesystem::path& image_path, const LatentTag& tag);

}  // namespace diffid
