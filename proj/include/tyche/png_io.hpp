#pragma once

#include <string>

#include "tyche/types.hpp"

namespace tyche {

// 8-bit grayscale, intensity quantized x255. Round-trips within 1/255.
void write_gray_png(const std::string& path, const GrayImage& img);
GrayImage read_gray_png(const std::string& path);

// 1-bit grayscale mask. Round-trips exactly.
void write_mask_png(const std::string& path, const LabelMask& mask);
LabelMask read_mask_png(const std::string& path);

// 16-bit grayscale, probability quantized x65535.
void write_prob_png(const std::string& path, const GrayImage& img);
GrayImage read_prob_png(const std::string& path);

// 8-bit RGB buffer (row-major, 3 bytes per pixel), used by the plot renderer.
void write_rgb_png(const std::string& path, int h, int w, const std::vector<uint8_t>& rgb);

}  // namespace tyche
