#pragma once

#include "toporig/geometry.hpp"
#include "toporig/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

namespace toporig {

struct TextureRecord {
    std::string path;  ///< relative to the pool root; "#<i>" for in-memory images
    int width = 0;
    int height = 0;
};

/// Read-only collection of texture images. Safe to share across threads.
class TexturePool {
public:
    /// Indexes PNG/JPEG files under `root` (recursive, sorted by path). The
    /// index is cached in `root/.toporig_pool.json` when the directory is
    /// writable; files whose headers cannot be read are skipped.
    static TexturePool from_directory(const std::filesystem::path& root, bool use_cache = true);
    static TexturePool from_images(std::vector<Image> images);

    std::size_t size() const { return records_.size(); }
    const TextureRecord& record(std::size_t i) const { return records_.at(i); }
    const std::filesystem::path& root() const { return root_; }

    /// Decoded RGB pixels of texture `i`; throws Decode/Io on failure.
    Image load(std::size_t i) const;

private:
    std::filesystem::path root_;
    std::vector<TextureRecord> records_;
    std::shared_ptr<const std::vector<Image>> memory_;
};

/// A part's texture-filled, hard-masked sprite. `sprite` is premultiplied
/// RGBA whose top-left pixel sits at canvas pixel (origin_x, origin_y).
struct TexturedPart {
    int bone = -1;
    int layer = 0;  ///< 1 = back-most
    std::size_t texture_id = 0;
    int crop_x = 0;  ///< texture pixel under the sprite's top-left pixel
    int crop_y = 0;
    int origin_x = 0;
    int origin_y = 0;
    Image sprite;
};

using Rgba = std::array<std::uint8_t, 4>;
inline constexpr Rgba kWhite{255, 255, 255, 255};
inline constexpr Rgba kTransparent{0, 0, 0, 0};

/// Pixel-center inclusion mask of a polygon over the window
/// [x0, x0+w) × [y0, y0+h); even-odd scanline fill.
std::vector<std::uint8_t> rasterize_polygon(const std::vector<Vec2>& poly, int x0, int y0, int w, int h);

/// Builds the sprite for one part from a texture (tiled when smaller than the
/// part's bounding box) at the given crop offset.
TexturedPart make_textured_part(const PartShape& shape, const Image& texture, std::size_t texture_id, int crop_x,
                                int crop_y);

/// Independent random texture and crop per part; deterministic per seed.
/// Undecodable textures are skipped (logged); throws once none remain.
std::vector<TexturedPart> assign_textures(const std::vector<PartShape>& parts, const TexturePool& pool,
                                          std::uint64_t seed);

/// Uniformly random permutation of 1..n; entry i is the layer of part i.
std::vector<int> sample_layer_order(int n_parts, std::uint64_t seed);

/// Back-to-front premultiplied "over" compositing onto an opaque background.
/// Layer indices must form a permutation of 1..n. Returns RGBA.
Image composite(const std::vector<TexturedPart>& parts, const Extent& canvas, const Rgba& background = kWhite);

/// Throws InvalidInput unless the parts' layers are a permutation of 1..n.
void require_layer_permutation(const std::vector<TexturedPart>& parts);

} // namespace toporig
