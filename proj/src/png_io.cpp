#include "rpnet/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "rpnet/errors.hpp"

namespace rpnet {

namespace {

std::uint8_t to_u8(float v) {
    float scaled = v * 255.0f;
    if (scaled <= 0.0f) return 0;
    if (scaled >= 255.0f) return 255;
    return static_cast<std::uint8_t>(std::lround(scaled));
}

} // namespace

void write_png_rgb8(const std::string& path, const Image& image) {
    if (image.channels != 3) throw DataError("write_png_rgb8 expects a 3-channel image");
    std::vector<std::uint8_t> bytes(image.data.size());
    for (std::size_t i = 0; i < image.data.size(); ++i) bytes[i] = to_u8(image.data[i]);

    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr)) {
        throw DataError("failed to write PNG " + path + ": " + png.message);
    }
}

void write_png_gray8(const std::string& path, const Mask& mask) {
    std::vector<std::uint8_t> bytes(mask.data.size());
    for (std::size_t i = 0; i < mask.data.size(); ++i) bytes[i] = mask.data[i] ? 255 : 0;

    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(mask.width);
    png.height = static_cast<png_uint_32>(mask.height);
    png.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr)) {
        throw DataError("failed to write PNG " + path + ": " + png.message);
    }
}

Image read_png_rgb(const std::string& path) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str())) {
        throw DataError("failed to read PNG " + path + ": " + png.message);
    }
    png.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr)) {
        throw DataError("failed to decode PNG " + path + ": " + png.message);
    }

    Image img(static_cast<int>(png.width), static_cast<int>(png.height), 3);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        img.data[i] = static_cast<float>(bytes[i]) / 255.0f;
    }
    return img;
}

Mask read_png_gray(const std::string& path) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str())) {
        throw DataError("failed to read PNG " + path + ": " + png.message);
    }
    png.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr)) {
        throw DataError("failed to decode PNG " + path + ": " + png.message);
    }

    Mask mask(static_cast<int>(png.width), static_cast<int>(png.height));
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        mask.data[i] = bytes[i] ? 1 : 0;
    }
    return mask;
}

} // namespace rpnet
