#include "reference.hpp"

namespace toporig::reference {

Image composite(const std::vector<TexturedPart>& parts, const Extent& canvas, const Rgba& background) {
    require_layer_permutation(parts);
    std::vector<const TexturedPart*> order(parts.size());
    for (const auto& p : parts) order[std::size_t(p.layer - 1)] = &p;
    Image out(canvas.width, canvas.height, 4);
    for (int y = 0; y < canvas.height; ++y)
        for (int x = 0; x < canvas.width; ++x) {
            std::uint8_t* d = out.pixel(x, y);
            std::copy(background.begin(), background.end(), d);
            for (const TexturedPart* p : order) {
                const int sx = x - p->origin_x, sy = y - p->origin_y;
                if (!p->sprite.contains(sx, sy)) continue;
                const std::uint8_t* s = p->sprite.pixel(sx, sy);
                const unsigned a = s[3];
                for (int c = 0; c < 4; ++c) d[c] = std::uint8_t(s[c] + (d[c] * (255u - a) + 127u) / 255u);
            }
        }
    return out;
}

namespace {

Image encode(const std::vector<BoneSegment>& bones, const std::vector<RigidTransform>* transforms,
             const std::vector<int>& layers, const Extent& canvas, const CodecParams& params) {
    const auto prepared = codec_detail::prepare(bones, transforms, layers, canvas, params);
    Image out(canvas.width, canvas.height, 3, 0);
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

Image render_deformed(const Image& sprite, const std::vector<Vec2>& rest, const std::vector<Vec2>& deformed,
                      const std::vector<Triangle>& triangles, const Extent& canvas, Resampling mode,
                      const Rgba& background) {
    using namespace deform_detail;
    Image out(canvas.width, canvas.height, 4);
    for (int y = 0; y < canvas.height; ++y)
        for (int x = 0; x < canvas.width; ++x) std::copy(background.begin(), background.end(), out.pixel(x, y));
    std::uint8_t sample[4];
    for (const auto& t : triangles) {
        const auto i0 = std::size_t(t[0]), i1 = std::size_t(t[1]), i2 = std::size_t(t[2]);
        WarpTriangle w;
        bool inverted = false;
        if (!prepare_triangle(rest[i0], rest[i1], rest[i2], deformed[i0], deformed[i1], deformed[i2], canvas, w, inverted))
            continue;
        for (int y = w.y0; y <= w.y1; ++y)
            for (int x = w.x0; x <= w.x1; ++x) {
                Vec2 s;
                if (!warp_source(w, x, y, s)) continue;
                sample_sprite(sprite, s, mode, sample);
                put_pixel(out.pixel(x, y), sample, background);
            }
    }
    return out;
}

double mse(const Image& a, const Image& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = (double(a.data[i]) - double(b.data[i])) / 255.0;
        acc += d * d;
    }
    return acc / double(a.data.size());
}

} // namespace toporig::reference
