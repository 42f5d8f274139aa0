#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "maskforge/error.hpp"

namespace maskforge {

struct Rgb {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct Rgba {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
    double a = 0.0;

    Rgb rgb() const { return {r, g, b}; }
    friend bool operator==(const Rgba&, const Rgba&) = default;
};

struct Lab {
    double l = 0.0;
    double a = 0.0;
    double b = 0.0;

    friend bool operator==(const Lab&, const Lab&) = default;
};

struct Size {
    int width = 0;
    int height = 0;

    friend bool operator==(const Size&, const Size&) = default;
};

std::string to_string(Size size);

/// Dense row-major image with value semantics. Pixel (x, y) lives at index
/// y * width + x; coordinates refer to pixel centres at integer positions.
template <typename Pixel>
class Image {
public:
    using pixel_type = Pixel;

    Image() = default;
    Image(int width, int height, Pixel fill = Pixel{})
        : width_(width), height_(height) {
        if (width < 0 || height < 0) {
            throw Error(ErrorCode::invalid_argument, "negative image dimensions");
        }
        pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }
    explicit Image(Size size, Pixel fill = Pixel{}) : Image(size.width, size.height, fill) {}

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    Size size() const noexcept { return {width_, height_}; }
    std::size_t pixel_count() const noexcept { return pixels_.size(); }
    bool empty() const noexcept { return pixels_.empty(); }

    bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    Pixel& at(int x, int y) { return pixels_[index(x, y)]; }
    const Pixel& at(int x, int y) const { return pixels_[index(x, y)]; }

    Pixel& operator[](std::size_t i) { return pixels_[i]; }
    const Pixel& operator[](std::size_t i) const { return pixels_[i]; }

    std::span<Pixel> pixels() noexcept { return pixels_; }
    std::span<const Pixel> pixels() const noexcept { return pixels_; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<Pixel> pixels_;
};

/// sRGB-encoded colour image, channels in [0,1].
using ImageRgb = Image<Rgb>;
/// CIELAB image (D65, 2 degree observer).
using ImageLab = Image<Lab>;
/// Straight-alpha RGBA makeup mask, channels in [0,1].
using RgbaMask = Image<Rgba>;
/// Single-channel scalar map, typically an opacity in [0,1].
using AlphaMap = Image<double>;
/// Integer label image (face parsing) or binary selection.
using LabelMap = Image<std::uint8_t>;

template <typename A, typename B>
void require_same_size(const Image<A>& a, const Image<B>& b, std::string_view what) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::dimension_mismatch,
                    std::string(what) + ": dimension mismatch " + to_string(a.size()) + " vs " +
                        to_string(b.size()));
    }
}

AlphaMap alpha_channel(const RgbaMask& mask);

/// Replaces the alpha channel; RGB is kept.
RgbaMask with_alpha(const RgbaMask& mask, const AlphaMap& alpha);

/// True when every channel lies in [0,1].
bool channels_in_unit_range(const ImageRgb& img);
bool channels_in_unit_range(const RgbaMask& mask);

/// 64-bit FNV-1a over the IEEE-754 little-endian bytes of every channel.
std::uint64_t content_hash(const RgbaMask& mask);
std::uint64_t content_hash(const ImageRgb& img);
std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace maskforge
