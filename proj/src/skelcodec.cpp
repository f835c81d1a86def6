#include "toporig/skelcodec.hpp"

#include <algorithm>

namespace toporig {

int blue_level(int k, int n) { return int(std::lround(255.0 * double(k) / double(n))); }

double quantization_bound(const Extent& canvas, double scale) {
    // half a code step per axis
    const double hx = 0.5 * canvas.width / scale, hy = 0.5 * canvas.height / scale;
    return std::hypot(hx, hy);
}

namespace codec_detail {

namespace {
bool inside_canvas(const Vec2& p, const Extent& canvas) {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= canvas.width && p.y() <= canvas.height;
}
} // namespace

std::vector<PreparedBone> prepare(const std::vector<BoneSegment>& rest_bones, const std::vector<RigidTransform>* transforms,
                                  const std::vector<int>& layers, const Extent& canvas, const CodecParams& params) {
    const int n = int(rest_bones.size());
    if (canvas.width <= 0 || canvas.height <= 0) throw Error(ErrorCode::InvalidInput, "skeleton canvas is empty");
    if (!(params.scale > 0.0) || params.scale > 255.0 || !(params.stroke_width > 0.0))
        throw Error(ErrorCode::InvalidInput, "codec scale must be in (0, 255] and stroke width positive");
    if (int(layers.size()) != n) throw Error(ErrorCode::InvalidInput, "one layer per bone required");
    if (transforms && int(transforms->size()) != n) throw Error(ErrorCode::InvalidInput, "one transform per bone required");
    const int levels = params.layer_levels > 0 ? params.layer_levels : n;
    if (levels < n) throw Error(ErrorCode::InvalidInput, "fewer layer levels than bones");
    std::vector<char> seen(std::size_t(n) + 1, 0);
    for (int k : layers) {
        if (k < 1 || k > n || seen[std::size_t(k)]) throw Error(ErrorCode::InvalidInput, "layers must be a permutation of 1..N");
        seen[std::size_t(k)] = 1;
    }

    std::vector<PreparedBone> out(static_cast<std::size_t>(n));
    const double r = 0.5 * params.stroke_width;
    for (int i = 0; i < n; ++i) {
        const auto& rb = rest_bones[std::size_t(i)];
        if (!inside_canvas(rb.start, canvas) || !inside_canvas(rb.end, canvas))
            throw Error(ErrorCode::InvalidInput, "bone " + std::to_string(i) + " has an endpoint outside the canvas");
        PreparedBone pb;
        if (transforms) {
            const auto& t = (*transforms)[std::size_t(i)];
            pb.start = t(rb.start);
            pb.end = t(rb.end);
            pb.to_rest = t.inverse();
            if (!inside_canvas(pb.start, canvas) || !inside_canvas(pb.end, canvas))
                throw Error(ErrorCode::InvalidInput, "posed bone " + std::to_string(i) + " leaves the canvas");
        } else {
            pb.start = rb.start;
            pb.end = rb.end;
        }
        pb.blue = std::uint8_t(blue_level(layers[std::size_t(i)], levels));
        pb.x0 = std::max(0, int(std::floor(std::min(pb.start.x(), pb.end.x()) - r)));
        pb.y0 = std::max(0, int(std::floor(std::min(pb.start.y(), pb.end.y()) - r)));
        pb.x1 = std::min(canvas.width - 1, int(std::ceil(std::max(pb.start.x(), pb.end.x()) + r)));
        pb.y1 = std::min(canvas.height - 1, int(std::ceil(std::max(pb.start.y(), pb.end.y()) + r)));
        out[std::size_t(layers[std::size_t(i)] - 1)] = pb;
    }
    std::reverse(out.begin(), out.end());  // front-most first
    return out;
}

bool shade(const PreparedBone& bone, int x, int y, const Extent& canvas, const CodecParams& params, std::uint8_t* rgb) {
    if (x < bone.x0 || x > bone.x1 || y < bone.y0 || y > bone.y1) return false;
    const Vec2 p(x, y);
    const Vec2 ab = bone.end - bone.start;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - bone.start).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const Vec2 q = bone.start + t * ab;
    const double r = 0.5 * params.stroke_width;
    if ((p - q).squaredNorm() > r * r) return false;
    const Vec2 rest = bone.to_rest(q);
    rgb[0] = std::uint8_t(std::clamp(std::lround(params.scale * rest.x() / canvas.width), 0L, 255L));
    rgb[1] = std::uint8_t(std::clamp(std::lround(params.scale * rest.y() / canvas.height), 0L, 255L));
    rgb[2] = bone.blue;
    return true;
}

} // namespace codec_detail

namespace {

Image encode(const std::vector<BoneSegment>& bones, const std::vector<RigidTransform>* transforms,
             const std::vector<int>& layers, const Extent& canvas, const CodecParams& params) {
    const auto prepared = codec_detail::prepare(bones, transforms, layers, canvas, params);
    Image out(canvas.width, canvas.height, 3, 0);
    if (prepared.empty()) return out;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < canvas.height; ++y)
        for (int x = 0; x < canvas.width; ++x)
            for (const auto& b : prepared)
                if (codec_detail::shade(b, x, y, canvas, params, out.pixel(x, y))) break;
    return out;
}

} // namespace

Image encode_rest(const std::vector<BoneSegment>& bones, const std::vector<int>& layers, const Extent& canvas,
                  const CodecParams& params) {
    return encode(bones, nullptr, layers, canvas, params);
}

Image encode_posed(const std::vector<BoneSegment>& rest_bones, const std::vector<RigidTransform>& transforms,
                   const std::vector<int>& layers, const Extent& canvas, const CodecParams& params) {
    return encode(rest_bones, &transforms, layers, canvas, params);
}

std::vector<DecodedSample> decode(const Image& raster, int levels, double scale, int blue_tolerance) {
    if (raster.channels < 3) throw Error(ErrorCode::MalformedRaster, "skeleton raster must be RGB");
    if (levels < 1) throw Error(ErrorCode::InvalidInput, "decode needs at least one layer level");
    std::vector<DecodedSample> out;
    for (int y = 0; y < raster.height; ++y)
        for (int x = 0; x < raster.width; ++x) {
            const std::uint8_t* p = raster.pixel(x, y);
            if (p[0] == 0 && p[1] == 0 && p[2] == 0) continue;
            const int k = int(std::lround(double(p[2]) * levels / 255.0));
            if (k < 1 || k > levels || std::abs(int(p[2]) - blue_level(k, levels)) > blue_tolerance)
                throw Error(ErrorCode::MalformedRaster, "pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                                                            ") has blue " + std::to_string(p[2]) +
                                                            " which is not a layer level");
            out.push_back({x, y, Vec2(p[0] * double(raster.width) / scale, p[1] * double(raster.height) / scale), k});
        }
    return out;
}

} // namespace toporig
