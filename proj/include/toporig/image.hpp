#pragma once

#include "toporig/common.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace toporig {

/// Interleaved 8-bit image, row-major, `channels` ∈ {1, 3, 4}.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> data;

    Image() = default;
    Image(int w, int h, int c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), data(std::size_t(w) * h * c, fill) {}

    bool empty() const { return data.empty(); }
    std::size_t index(int x, int y) const { return (std::size_t(y) * width + x) * channels; }
    std::uint8_t* pixel(int x, int y) { return data.data() + index(x, y); }
    const std::uint8_t* pixel(int x, int y) const { return data.data() + index(x, y); }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

    bool operator==(const Image&) const = default;
};

/// Drops or synthesizes the alpha channel (alpha 255 when adding).
Image to_rgb(const Image& img);
Image to_rgba(const Image& img);

/// Lossless PNG encode; output bytes depend only on the pixels.
std::vector<std::uint8_t> encode_png(const Image& img);

/// Decodes PNG or JPEG (detected by signature) to 8-bit RGB or RGBA.
Image decode_image(std::span<const std::uint8_t> bytes);

struct ImageInfo {
    int width = 0;
    int height = 0;
};
/// Reads dimensions from the header only.
ImageInfo probe_image(const std::filesystem::path& path);

Image read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename so readers never see partial files.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

} // namespace toporig
