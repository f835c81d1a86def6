// Parallel kernels against their serial references, plus one whole sample.
// Run with --benchmark_filter=... to pick a kernel.

#include "toporig/dataset.hpp"
#include "toporig/deform.hpp"
#include "toporig/metrics.hpp"

#include "reference.hpp"

#include <benchmark/benchmark.h>

using namespace toporig;

namespace {

const Extent kCanvas{512, 512};

struct Scene {
    TreeSkeleton tree;
    std::vector<TexturedPart> parts;
    std::vector<BoneSegment> bones;
    std::vector<int> layers;
    std::vector<RigidTransform> pose;
};

const Scene& scene() {
    static const Scene s = [] {
        Scene s;
        s.tree = layout_rest_pose(sample_topology(4, 10, {}, kCanvas), kCanvas, 4);
        std::vector<PartShape> shapes;
        for (int b = 0; b < s.tree.bone_count(); ++b) {
            const Vec2 a = s.tree.rest_position[std::size_t(s.tree.parent_node(b))];
            const Vec2 e = s.tree.rest_position[std::size_t(b + 1)];
            shapes.push_back(sample_part_shape(b, a, e, derive_seed(4, std::uint64_t(b))));
            s.bones.push_back({a, e});
        }
        s.parts = assign_textures(shapes, TexturePool::from_images(procedural_textures(8, 1)), 4);
        s.layers = sample_layer_order(int(s.parts.size()), 4);
        for (std::size_t i = 0; i < s.parts.size(); ++i) s.parts[i].layer = s.layers[i];
        s.pose = forward_kinematics(s.tree, sample_pose(s.tree, 4, {}, kCanvas));
        return s;
    }();
    return s;
}

struct Warp {
    Image sprite;
    Triangulation rest;
    std::vector<Vec2> deformed;
};

const Warp& warp() {
    static const Warp w = [] {
        Warp w;
        w.sprite = composite(scene().parts, kCanvas, kTransparent);
        w.rest = make_grid({56, 206}, {400, 100}, 41, 11);
        const auto bend = RigidTransform::rotation_about(0.6, {256, 256});
        for (const auto& v : w.rest.vertices) w.deformed.push_back(v.x() > 256 ? bend(v) : v);
        return w;
    }();
    return w;
}

void BM_composite(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(composite(scene().parts, kCanvas));
}
void BM_composite_reference(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(reference::composite(scene().parts, kCanvas));
}

void BM_encode_posed(benchmark::State& st) {
    const auto& s = scene();
    for (auto _ : st) benchmark::DoNotOptimize(encode_posed(s.bones, s.pose, s.layers, kCanvas));
}
void BM_encode_posed_reference(benchmark::State& st) {
    const auto& s = scene();
    for (auto _ : st) benchmark::DoNotOptimize(reference::encode_posed(s.bones, s.pose, s.layers, kCanvas));
}

void BM_render_deformed(benchmark::State& st) {
    const auto& w = warp();
    for (auto _ : st)
        benchmark::DoNotOptimize(render_deformed(w.sprite, w.rest.vertices, w.deformed, w.rest.triangles, kCanvas, Resampling::Bilinear));
}
void BM_render_deformed_reference(benchmark::State& st) {
    const auto& w = warp();
    for (auto _ : st)
        benchmark::DoNotOptimize(
            reference::render_deformed(w.sprite, w.rest.vertices, w.deformed, w.rest.triangles, kCanvas, Resampling::Bilinear));
}

void BM_mse(benchmark::State& st) {
    const Image a = composite(scene().parts, kCanvas), b = pose_character(scene().parts, scene().pose, kCanvas);
    for (auto _ : st) benchmark::DoNotOptimize(mse(a, b));
}
void BM_mse_reference(benchmark::State& st) {
    const Image a = composite(scene().parts, kCanvas), b = pose_character(scene().parts, scene().pose, kCanvas);
    for (auto _ : st) benchmark::DoNotOptimize(reference::mse(a, b));
}

void BM_generate_sample(benchmark::State& st) {
    const DatasetConfig c;
    const TexturePool pool = TexturePool::from_images(procedural_textures(c.procedural_textures, c.procedural_seed));
    std::uint64_t i = 0;
    for (auto _ : st) benchmark::DoNotOptimize(generate_sample(1, i++, c, pool));
}

} // namespace

BENCHMARK(BM_composite)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_composite_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_encode_posed)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_encode_posed_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_render_deformed)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_render_deformed_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mse)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mse_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_generate_sample)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
