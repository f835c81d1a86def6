#pragma once

#include "toporig/common.hpp"
#include "toporig/image.hpp"

#include <vector>

namespace toporig {

/// Skeleton raster channel semantics (8-bit RGB, image size A × B):
///   R = round(c · x / A), G = round(c · y / B) where (x, y) is the rest-pose
///   point of the bone centerline closest to the pixel;
///   B = round(255 · k / N) for the bone's layer k ∈ 1..N (N front-most);
///   background (0, 0, 0).
struct CodecParams {
    double scale = 255.0;  ///< c
    double stroke_width = 4.0;
    /// Denominator N of the blue levels; 0 means "number of bones".
    int layer_levels = 0;
};

struct BoneSegment {
    Vec2 start = Vec2::Zero();
    Vec2 end = Vec2::Zero();
};

/// Blue level of layer k out of n.
int blue_level(int k, int n);

/// Rest-pose raster. `layers[i]` is the 1-based layer of bone i.
Image encode_rest(const std::vector<BoneSegment>& bones, const std::vector<int>& layers, const Extent& canvas,
                  const CodecParams& params = {});

/// Bones drawn at `transforms[i]`-posed positions, each pixel carrying the
/// rest-pose coordinate it came from.
Image encode_posed(const std::vector<BoneSegment>& rest_bones, const std::vector<RigidTransform>& transforms,
                   const std::vector<int>& layers, const Extent& canvas, const CodecParams& params = {});

struct DecodedSample {
    int x = 0;
    int y = 0;
    Vec2 rest = Vec2::Zero();
    int layer = 0;
};

/// Every non-background pixel with its rest coordinate and layer. Throws
/// MalformedRaster when a blue value is farther than `blue_tolerance` from
/// every level.
std::vector<DecodedSample> decode(const Image& raster, int levels, double scale = 255.0, int blue_tolerance = 2);

/// Worst-case distance between a decoded rest coordinate and the true
/// centerline point for this canvas and scale.
double quantization_bound(const Extent& canvas, double scale);

namespace codec_detail {

struct PreparedBone {
    Vec2 start, end;           // posed
    RigidTransform to_rest;    // posed -> rest
    std::uint8_t blue = 0;
    int x0, y0, x1, y1;        // inclusive pixel bbox clipped to canvas
};

/// Validates inputs and orders bones front-most first.
std::vector<PreparedBone> prepare(const std::vector<BoneSegment>& rest_bones, const std::vector<RigidTransform>* transforms,
                                  const std::vector<int>& layers, const Extent& canvas, const CodecParams& params);

/// Writes the color of `bone` at integer pixel (x, y) if the stroke covers it.
bool shade(const PreparedBone& bone, int x, int y, const Extent& canvas, const CodecParams& params, std::uint8_t* rgb);

} // namespace codec_detail

} // namespace toporig
