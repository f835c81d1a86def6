#pragma once

// Single-threaded, unoptimized versions of the parallel kernels. Used by the
// tests as equality oracles and by the benchmarks as baselines.

#include "toporig/appearance.hpp"
#include "toporig/deform.hpp"
#include "toporig/kinematics.hpp"
#include "toporig/skelcodec.hpp"

namespace toporig::reference {

/// Per pixel, every part in layer order with the same integer "over".
Image composite(const std::vector<TexturedPart>& parts, const Extent& canvas, const Rgba& background = kWhite);

Image encode_rest(const std::vector<BoneSegment>& bones, const std::vector<int>& layers, const Extent& canvas,
                  const CodecParams& params = {});
Image encode_posed(const std::vector<BoneSegment>& rest_bones, const std::vector<RigidTransform>& transforms,
                   const std::vector<int>& layers, const Extent& canvas, const CodecParams& params = {});

/// Triangle by triangle over each bounding box, no row binning.
Image render_deformed(const Image& sprite, const std::vector<Vec2>& rest, const std::vector<Vec2>& deformed,
                      const std::vector<Triangle>& triangles, const Extent& canvas,
                      Resampling mode = Resampling::Nearest, const Rgba& background = kTransparent);

/// Plain double accumulation over all samples, normalized to [0, 1] pixels.
double mse(const Image& a, const Image& b);

} // namespace toporig::reference
