#include "diffid/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

// jpeglib.h expects FILE and size_t to be declared first.
#include <jpeglib.h>

#include <nlohmann/json.hpp>

#include "diffid/error.hpp"

namespace diffid {

namespace {

using FilePtr = std::unique_ptr<std::FILE, decltype(&std::fclose)>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode), &std::fclose);
    if (!f) throw IoError("cannot open " + path.string());
    return f;
}

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void attach_sidecar(const std::filesystem::path& path, Image& image) {
    const auto sidecar = latent_sidecar_path(path);
    if (!std::filesystem::exists(sidecar)) return;
    std::ifstream in(sidecar);
    nlohmann::json j;
    try {
        in >> j;
        auto tag = std::make_shared<LatentTag>();
        tag->identity = j.at("identity").get<std::vector<double>>();
        tag->attributes = j.at("attributes").get<std::vector<double>>();
        tag->key = j.at("key").get<std::uint64_t>();
        image.set_tag(std::move(tag));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed latent sidecar " + sidecar.string() + ": " + e.what());
    }
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw IoError("cannot read PNG " + path.string() + ": " + img.message);
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
        png_image_free(&img);
        throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
    }
    Image out(static_cast<int>(img.height), static_cast<int>(img.width), 3);
    auto px = out.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = buffer[i] / 255.0;
    attach_sidecar(path, out);
    return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
    if (image.channels() != 1 && image.channels() != 3) {
        throw InvalidArgument("write_png: only gray or RGB images are supported");
    }
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width());
    img.height = static_cast<png_uint_32>(image.height());
    img.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> buffer(image.size());
    auto px = image.pixels();
    std::transform(px.begin(), px.end(), buffer.begin(), to_byte);
    if (!png_image_write_to_file(&img, path.c_str(), 0, buffer.data(), 0, nullptr)) {
        throw IoError("cannot write PNG " + path.string() + ": " + img.message);
    }
}

FaceMask read_mask_png(const std::filesystem::path& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw IoError("cannot read mask " + path.string() + ": " + img.message);
    }
    img.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
        png_image_free(&img);
        throw IoError("cannot decode mask " + path.string() + ": " + img.message);
    }
    FaceMask mask(static_cast<int>(img.height), static_cast<int>(img.width));
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            mask.set(y, x, buffer[static_cast<std::size_t>(y) * mask.width() + x] != 0);
        }
    }
    return mask;
}

void write_mask_png(const std::filesystem::path& path, const FaceMask& mask) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(mask.width());
    img.height = static_cast<png_uint_32>(mask.height());
    img.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> buffer(mask.values().size());
    std::transform(mask.values().begin(), mask.values().end(), buffer.begin(),
                   [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
    if (!png_image_write_to_file(&img, path.c_str(), 0, buffer.data(), 0, nullptr)) {
        throw IoError("cannot write mask " + path.string() + ": " + img.message);
    }
}

std::vector<std::uint8_t> encode_jpeg(const Image& image, int quality) {
    if (quality < 1 || quality > 100) throw InvalidArgument("JPEG quality must lie in [1, 100]");
    if (image.channels() != 3) throw InvalidArgument("JPEG encoding expects an RGB image");

    std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width()) * 3);
    jpeg_compress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    unsigned char* out_buf = nullptr;
    unsigned long out_size = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        std::free(out_buf);
        throw IoError(std::string("JPEG encode failed: ") + err.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &out_buf, &out_size);
    cinfo.image_width = static_cast<JDIMENSION>(image.width());
    cinfo.image_height = static_cast<JDIMENSION>(image.height());
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    auto px = image.pixels();
    while (cinfo.next_scanline < cinfo.image_height) {
        const std::size_t offset = static_cast<std::size_t>(cinfo.next_scanline) * row.size();
        for (std::size_t i = 0; i < row.size(); ++i) row[i] = to_byte(px[offset + i]);
        JSAMPROW ptr = row.data();
        jpeg_write_scanlines(&cinfo, &ptr, 1);
    }
    jpeg_finish_compress(&cinfo);
    std::vector<std::uint8_t> bytes(out_buf, out_buf + out_size);
    jpeg_destroy_compress(&cinfo);
    std::free(out_buf);
    return bytes;
}

Image decode_jpeg(const std::vector<std::uint8_t>& bytes) {
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw IoError(std::string("JPEG decode failed: ") + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const int w = static_cast<int>(cinfo.output_width);
    const int h = static_cast<int>(cinfo.output_height);
    Image out(h, w, 3);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    auto px = out.pixels();
    while (cinfo.output_scanline < cinfo.output_height) {
        const std::size_t offset = static_cast<std::size_t>(cinfo.output_scanline) * row.size();
        JSAMPROW ptr = row.data();
        jpeg_read_scanlines(&cinfo, &ptr, 1);
        for (std::size_t i = 0; i < row.size(); ++i) px[offset + i] = row[i] / 255.0;
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return out;
}

Image read_jpeg(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    Image out = decode_jpeg(bytes);
    attach_sidecar(path, out);
    return out;
}

Image jpeg_degrade(const Image& image, int qf) {
    if (qf < 1 || qf > 100) throw InvalidArgument("JPEG quality factor must lie in [1, 100]");
    Image out = decode_jpeg(encode_jpeg(image, qf));
    out.set_tag(image.tag());
    return out;
}

Image read_image(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".jpg" || ext == ".jpeg") return read_jpeg(path);
    return read_png(path);
}

std::filesystem::path latent_sidecar_path(const std::filesystem::path& image_path) {
    return std::filesystem::path(image_path.string() + ".latent.json");
}

void write_latent_sidecar(const std::filesystem::path& image_path, const LatentTag& tag) {
    nlohmann::json j;
    j["identity"] = tag.identity;
    j["attributes"] = tag.attributes;
    j["key"] = tag.key;
    std::ofstream out(latent_sidecar_path(image_path));
    if (!out) throw IoError("cannot write " + latent_sidecar_path(image_path).string());
    out << j.dump(2) << '\n';
}

}  // namespace diffid
