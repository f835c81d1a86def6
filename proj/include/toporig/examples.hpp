#pragma once

#include "toporig/annotations.hpp"
#include "toporig/deform.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace toporig {

/// The bar scene used by `toporig examples`: a 400 × 100 textured rectangle
/// on a 512 × 512 canvas meshed as a 41 × 11 grid, two bones along its axis
/// and handles on its left and right vertex columns. Frames bend the second
/// bone about the middle joint.
struct BarScene {
    Extent canvas{512, 512};
    Image sprite;  ///< RGBA, transparent outside the bar
    DeformMesh mesh;
    AnnotationSet annotations;  ///< rest frame followed by the bent frames
    std::vector<double> bend_angles;
};

BarScene make_bar_scene(const std::vector<double>& bend_angles = {kPi / 4, kPi / 2});

struct ExampleFrame {
    Image image;
    Image skeleton;
    std::vector<Vec2> vertices;
};

/// Rest frame plus one deformed frame per bend angle.
std::vector<ExampleFrame> render_bar_examples(const BarScene& scene, Backend backend);

/// Writes rest.png, frame_<k>.png, the matching *_skeleton.png rasters,
/// annotations.json and examples.json (scene and handle placement) to `dir`.
void write_bar_examples(const BarScene& scene, Backend backend, const std::filesystem::path& dir);

} // namespace toporig
