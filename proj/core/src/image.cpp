#include "maskforge/image.hpp"

#include <bit>
#include <cstring>

namespace maskforge {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::dimension_mismatch: return "dimension_mismatch";
        case ErrorCode::degenerate_geometry: return "degenerate_geometry";
        case ErrorCode::empty_mask: return "empty_mask";
        case ErrorCode::missing_region: return "missing_region";
        case ErrorCode::io: return "io";
        case ErrorCode::decode: return "decode";
        case ErrorCode::not_found: return "not_found";
    }
    return "unknown";
}

std::string to_string(Size size) {
    return std::to_string(size.width) + "x" + std::to_string(size.height);
}

AlphaMap alpha_channel(const RgbaMask& mask) {
    AlphaMap out(mask.size());
    for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
        out[i] = mask[i].a;
    }
    return out;
}

RgbaMask with_alpha(const RgbaMask& mask, const AlphaMap& alpha) {
    require_same_size(mask, alpha, "with_alpha");
    RgbaMask out = mask;
    for (std::size_t i = 0; i < out.pixel_count(); ++i) {
        out[i].a = alpha[i];
    }
    return out;
}

namespace {

bool unit(double v) { return v >= 0.0 && v <= 1.0; }

constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t mix_double(std::uint64_t h, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xffU;
        h *= kFnvPrime;
    }
    return h;
}

}  // namespace

bool channels_in_unit_range(const ImageRgb& img) {
    for (const auto& p : img.pixels()) {
        if (!unit(p.r) || !unit(p.g) || !unit(p.b)) {
            return false;
        }
    }
    return true;
}

bool channels_in_unit_range(const RgbaMask& mask) {
    for (const auto& p : mask.pixels()) {
        if (!unit(p.r) || !unit(p.g) || !unit(p.b) || !unit(p.a)) {
            return false;
        }
    }
    return true;
}

std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (auto b : bytes) {
        h ^= static_cast<std::uint64_t>(b);
        h *= kFnvPrime;
    }
    return h;
}

std::uint64_t content_hash(const RgbaMask& mask) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = mix_double(h, mask.width());
    h = mix_double(h, mask.height());
    for (const auto& p : mask.pixels()) {
        h = mix_double(mix_double(mix_double(mix_double(h, p.r), p.g), p.b), p.a);
    }
    return h;
}

std::uint64_t content_hash(const ImageRgb& img) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = mix_double(h, img.width());
    h = mix_double(h, img.height());
    for (const auto& p : img.pixels()) {
        h = mix_double(mix_double(mix_double(h, p.r), p.g), p.b);
    }
    return h;
}

}  // namespace maskforge
