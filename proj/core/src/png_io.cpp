#include "maskforge/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace maskforge {
namespace {

struct ReadCursor {
    std::span<const std::uint8_t> bytes;
    std::size_t offset = 0;
};

void read_callback(png_structp png, png_bytep out, png_size_t length) {
    auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cursor->offset + length > cursor->bytes.size()) {
        png_error(png, "truncated PNG stream");
    }
    std::memcpy(out, cursor->bytes.data() + cursor->offset, length);
    cursor->offset += length;
}

void write_callback(png_structp png, png_bytep data, png_size_t length) {
    auto* sink = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    sink->insert(sink->end(), data, data + length);
}

void flush_callback(png_structp) {}

[[noreturn]] void error_callback(png_structp, png_const_charp message) {
    throw Error(ErrorCode::decode, std::string("png: ") + message);
}

void warning_callback(png_structp, png_const_charp) {}

struct ReadGuard {
    png_structp png;
    png_infop info;
    ~ReadGuard() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct WriteGuard {
    png_structp png;
    png_infop info;
    ~WriteGuard() { png_destroy_write_struct(&png, &info); }
};

}  // namespace

RawImage decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw Error(ErrorCode::decode, "not a PNG stream");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, error_callback,
                                             warning_callback);
    if (png == nullptr) {
        throw Error(ErrorCode::decode, "png_create_read_struct failed");
    }
    png_infop info = png_create_info_struct(png);
    const ReadGuard guard{png, info};

    ReadCursor cursor{bytes, 0};
    png_set_read_fn(png, &cursor, read_callback);
    png_read_info(png, info);

    const png_byte color_type = png_get_color_type(png, info);
    const png_byte bit_depth = png_get_bit_depth(png, info);
    if (bit_depth == 16) {
        png_set_strip_16(png);
    }
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) {
        png_set_tRNS_to_alpha(png);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    png_read_update_info(png, info);

    RawImage raw;
    raw.width = static_cast<int>(png_get_image_width(png, info));
    raw.height = static_cast<int>(png_get_image_height(png, info));
    raw.channels = png_get_channels(png, info);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    raw.data.resize(row_bytes * static_cast<std::size_t>(raw.height));
    std::vector<png_bytep> rows(static_cast<std::size_t>(raw.height));
    for (int y = 0; y < raw.height; ++y) {
        rows[static_cast<std::size_t>(y)] = raw.data.data() + row_bytes * static_cast<std::size_t>(y);
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    return raw;
}

std::vector<std::uint8_t> encode_png(const RawImage& raw) {
    int color_type = 0;
    switch (raw.channels) {
        case 1: color_type = PNG_COLOR_TYPE_GRAY; break;
        case 3: color_type = PNG_COLOR_TYPE_RGB; break;
        case 4: color_type = PNG_COLOR_TYPE_RGBA; break;
        default: throw Error(ErrorCode::invalid_argument, "encode_png: unsupported channel count");
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, error_callback,
                                              warning_callback);
    if (png == nullptr) {
        throw Error(ErrorCode::io, "png_create_write_struct failed");
    }
    png_infop info = png_create_info_struct(png);
    const WriteGuard guard{png, info};

    std::vector<std::uint8_t> out;
    png_set_write_fn(png, &out, write_callback, flush_callback);
    png_set_IHDR(png, info, static_cast<png_uint_32>(raw.width),
                 static_cast<png_uint_32>(raw.height), 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t row_bytes =
        static_cast<std::size_t>(raw.width) * static_cast<std::size_t>(raw.channels);
    for (int y = 0; y < raw.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(raw.data.data() + row_bytes * static_cast<std::size_t>(y)));
    }
    png_write_end(png, nullptr);
    return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::io, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::io, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(ErrorCode::io, "short write to " + path.string());
    }
}

std::uint8_t quantize(double v) {
    const double scaled = std::floor(v * 255.0 + 0.5);
    return static_cast<std::uint8_t>(scaled < 0.0 ? 0.0 : (scaled > 255.0 ? 255.0 : scaled));
}

namespace {

double unit(std::uint8_t v) { return static_cast<double>(v) / 255.0; }

}  // namespace

ImageRgb to_rgb(const RawImage& raw) {
    ImageRgb img(raw.width, raw.height);
    const auto c = static_cast<std::size_t>(raw.channels);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const auto* p = raw.data.data() + i * c;
        img[i] = c >= 3 ? Rgb{unit(p[0]), unit(p[1]), unit(p[2])}
                        : Rgb{unit(p[0]), unit(p[0]), unit(p[0])};
    }
    return img;
}

RgbaMask to_rgba(const RawImage& raw) {
    RgbaMask mask(raw.width, raw.height);
    const auto c = static_cast<std::size_t>(raw.channels);
    for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
        const auto* p = raw.data.data() + i * c;
        if (c == 4) {
            mask[i] = {unit(p[0]), unit(p[1]), unit(p[2]), unit(p[3])};
        } else if (c == 3) {
            mask[i] = {unit(p[0]), unit(p[1]), unit(p[2]), 1.0};
        } else {
            mask[i] = {unit(p[0]), unit(p[0]), unit(p[0]), 1.0};
        }
    }
    return mask;
}

LabelMap to_labels(const RawImage& raw) {
    if (raw.channels != 1 && raw.channels != 3) {
        throw Error(ErrorCode::decode, "label PNG must be single-channel (or replicated RGB)");
    }
    LabelMap labels(raw.width, raw.height);
    const auto c = static_cast<std::size_t>(raw.channels);
    for (std::size_t i = 0; i < labels.pixel_count(); ++i) {
        labels[i] = raw.data[i * c];
    }
    return labels;
}

RawImage to_raw(const ImageRgb& img) {
    RawImage raw{img.width(), img.height(), 3, {}};
    raw.data.reserve(img.pixel_count() * 3);
    for (const auto& p : img.pixels()) {
        raw.data.push_back(quantize(p.r));
        raw.data.push_back(quantize(p.g));
        raw.data.push_back(quantize(p.b));
    }
    return raw;
}

RawImage to_raw(const RgbaMask& mask) {
    RawImage raw{mask.width(), mask.height(), 4, {}};
    raw.data.reserve(mask.pixel_count() * 4);
    for (const auto& p : mask.pixels()) {
        raw.data.push_back(quantize(p.r));
        raw.data.push_back(quantize(p.g));
        raw.data.push_back(quantize(p.b));
        raw.data.push_back(quantize(p.a));
    }
    return raw;
}

RawImage to_raw(const LabelMap& labels) {
    RawImage raw{labels.width(), labels.height(), 1, {}};
    raw.data.assign(labels.pixels().begin(), labels.pixels().end());
    return raw;
}

RawImage to_raw(const AlphaMap& alpha) {
    RawImage raw{alpha.width(), alpha.height(), 1, {}};
    raw.data.reserve(alpha.pixel_count());
    for (double v : alpha.pixels()) {
        raw.data.push_back(quantize(v));
    }
    return raw;
}

ImageRgb quantized(const ImageRgb& img) { return to_rgb(to_raw(img)); }
RgbaMask quantized(const RgbaMask& mask) { return to_rgba(to_raw(mask)); }

ImageRgb read_png_rgb(const std::filesystem::path& path) { return to_rgb(decode_png(read_file(path))); }
RgbaMask read_png_rgba(const std::filesystem::path& path) { return to_rgba(decode_png(read_file(path))); }
LabelMap read_png_labels(const std::filesystem::path& path) {
    return to_labels(decode_png(read_file(path)));
}

}  // namespace maskforge
