#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "maskforge/image.hpp"

namespace maskforge {

/// 8-bit interleaved pixels exactly as stored in a PNG (1, 3 or 4 channels).
struct RawImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> data;
};

RawImage decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const RawImage& raw);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// 8-bit <-> [0,1] conversions: read as v/255, write as floor(v*255 + 0.5).
std::uint8_t quantize(double v);

ImageRgb to_rgb(const RawImage& raw);
RgbaMask to_rgba(const RawImage& raw);
LabelMap to_labels(const RawImage& raw);

RawImage to_raw(const ImageRgb& img);
RawImage to_raw(const RgbaMask& mask);
RawImage to_raw(const LabelMap& labels);
RawImage to_raw(const AlphaMap& alpha);

/// Round-trips a value image through 8-bit storage.
ImageRgb quantized(const ImageRgb& img);
RgbaMask quantized(const RgbaMask& mask);

ImageRgb read_png_rgb(const std::filesystem::path& path);
RgbaMask read_png_rgba(const std::filesystem::path& path);
LabelMap read_png_labels(const std::filesystem::path& path);

template <typename Pixel>
void write_png(const std::filesystem::path& path, const Image<Pixel>& img) {
    const auto bytes = encode_png(to_raw(img));
    write_file(path, bytes);
}

}  // namespace maskforge
