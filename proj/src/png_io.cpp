#include "tyche/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace tyche {

namespace {

struct FileCloser {
    void operator()(FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

void write_png_rows(const std::string& path, int h, int w, int bit_depth, int color_type,
                    png_bytep* rows, bool pack_bits) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng write error: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, w, h, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (pack_bits) png_set_packing(png);
    if (bit_depth == 16) png_set_swap(png);
    png_write_image(png, rows);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Reads any grayscale PNG into one byte or uint16 per pixel.
void read_png_gray(const std::string& path, int& h, int& w, int& bit_depth,
                   std::vector<uint8_t>& bytes) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open for reading: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng read error: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    w = png_get_image_width(png, info);
    h = png_get_image_height(png, info);
    bit_depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY)
        throw std::runtime_error("expected grayscale PNG: " + path);
    if (bit_depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (bit_depth == 16) png_set_swap(png);
    png_read_update_info(png, info);

    const int bpp = bit_depth == 16 ? 2 : 1;
    bytes.assign(static_cast<size_t>(h) * w * bpp, 0);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = bytes.data() + static_cast<size_t>(y) * w * bpp;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
}

}  // namespace

void write_gray_png(const std::string& path, const GrayImage& img) {
    std::vector<uint8_t> bytes(img.size());
    for (size_t i = 0; i < img.size(); ++i)
        bytes[i] = static_cast<uint8_t>(std::lround(std::min(1.0, std::max(0.0, img.v[i])) * 255.0));
    std::vector<png_bytep> rows(img.h);
    for (int y = 0; y < img.h; ++y) rows[y] = bytes.data() + static_cast<size_t>(y) * img.w;
    write_png_rows(path, img.h, img.w, 8, PNG_COLOR_TYPE_GRAY, rows.data(), false);
}

GrayImage read_gray_png(const std::string& path) {
    int h = 0, w = 0, depth = 0;
    std::vector<uint8_t> bytes;
    read_png_gray(path, h, w, depth, bytes);
    if (depth > 8) throw std::runtime_error("expected 8-bit PNG: " + path);
    GrayImage img(h, w);
    for (size_t i = 0; i < img.size(); ++i) img.v[i] = bytes[i] / 255.0;
    return img;
}

void write_mask_png(const std::string& path, const LabelMask& mask) {
    std::vector<uint8_t> bytes(mask.size());
    for (size_t i = 0; i < mask.size(); ++i) bytes[i] = mask.v[i] ? 1 : 0;
    std::vector<png_bytep> rows(mask.h);
    for (int y = 0; y < mask.h; ++y) rows[y] = bytes.data() + static_cast<size_t>(y) * mask.w;
    write_png_rows(path, mask.h, mask.w, 1, PNG_COLOR_TYPE_GRAY, rows.data(), true);
}

LabelMask read_mask_png(const std::string& path) {
    int h = 0, w = 0, depth = 0;
    std::vector<uint8_t> bytes;
    read_png_gray(path, h, w, depth, bytes);
    if (depth > 8) throw std::runtime_error("expected 1- or 8-bit mask PNG: " + path);
    LabelMask mask(h, w);
    for (size_t i = 0; i < mask.size(); ++i) mask.v[i] = bytes[i] ? 1 : 0;
    return mask;
}

void write_prob_png(const std::string& path, const GrayImage& img) {
    std::vector<uint8_t> bytes(img.size() * 2);
    auto* u16 = reinterpret_cast<uint16_t*>(bytes.data());
    for (size_t i = 0; i < img.size(); ++i)
        u16[i] = static_cast<uint16_t>(std::lround(std::min(1.0, std::max(0.0, img.v[i])) * 65535.0));
    std::vector<png_bytep> rows(img.h);
    for (int y = 0; y < img.h; ++y) rows[y] = bytes.data() + static_cast<size_t>(y) * img.w * 2;
    write_png_rows(path, img.h, img.w, 16, PNG_COLOR_TYPE_GRAY, rows.data(), false);
}

GrayImage read_prob_png(const std::string& path) {
    int h = 0, w = 0, depth = 0;
    std::vector<uint8_t> bytes;
    read_png_gray(path, h, w, depth, bytes);
    if (depth != 16) throw std::runtime_error("expected 16-bit PNG: " + path);
    GrayImage img(h, w);
    const auto* u16 = reinterpret_cast<const uint16_t*>(bytes.data());
    for (size_t i = 0; i < img.size(); ++i) img.v[i] = u16[i] / 65535.0;
    return img;
}

void write_rgb_png(const std::string& path, int h, int w, const std::vector<uint8_t>& rgb) {
    if (rgb.size() != static_cast<size_t>(h) * w * 3) throw std::invalid_argument("write_rgb_png: bad buffer size");
    std::vector<png_bytep> rows(h);
    auto* data = const_cast<uint8_t*>(rgb.data());
    for (int y = 0; y < h; ++y) rows[y] = data + static_cast<size_t>(y) * w * 3;
    write_png_rows(path, h, w, 8, PNG_COLOR_TYPE_RGB, rows.data(), false);
}

}  // namespace tyche
