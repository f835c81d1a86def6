// Acceptance runner: one PASS/FAIL line per criterion. Pass criterion names
// as arguments to run a subset. Exit status is the number of failures that
// are not explained by the host (see "host-limited" in the output).

#include "toporig/dataset.hpp"
#include "toporig/deform.hpp"
#include "toporig/metrics.hpp"

#include "oracles.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

using namespace toporig;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    bool host_limited = false;  // failed only because the machine cannot measure it
};

struct Criterion {
    const char* name;
    std::function<Outcome()> run;
};

class Timer {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("toporig_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<BoneSegment> rest_bones(const TreeSkeleton& t) {
    std::vector<BoneSegment> out;
    for (int b = 0; b < t.bone_count(); ++b)
        out.push_back({t.rest_position[std::size_t(t.parent_node(b))], t.rest_position[std::size_t(b + 1)]});
    return out;
}

std::map<std::string, std::vector<std::uint8_t>> read_tree(const fs::path& root) {
    std::map<std::string, std::vector<std::uint8_t>> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
    return out;
}

const TexturePool& default_pool() {
    static const TexturePool p = [] {
        const DatasetConfig c;
        return TexturePool::from_images(procedural_textures(c.procedural_textures, c.procedural_seed));
    }();
    return p;
}

Triangulation blob(std::uint64_t seed, double edge) {
    const auto shape = sample_part_shape(0, Vec2(80, 200), Vec2(420, 300), seed);
    return triangulate(resample_polygon(shape.boundary, edge), edge);
}

std::vector<int> distinct_vertices(Rng& rng, int n, std::size_t count) {
    std::vector<int> out;
    while (out.size() < count) {
        const int v = int(rng.uniform_int(0, n - 1));
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    return out;
}

double max_dist(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, (a[i] - b[i]).norm());
    return d;
}

// ---------------------------------------------------------------------------

Outcome codec_constants() {
    const Extent canvas{128, 128};
    std::vector<BoneSegment> bones;
    for (int i = 0; i < 5; ++i) bones.push_back({Vec2(12 + 24 * i, 10), Vec2(12 + 24 * i, 118)});
    const Image img = encode_rest(bones, {3, 1, 5, 2, 4}, canvas);
    std::set<int> blues;
    for (int y = 0; y < canvas.height; ++y)
        for (int x = 0; x < canvas.width; ++x) {
            const auto* p = img.pixel(x, y);
            double d = 1e9;
            for (const auto& b : bones) d = std::min(d, oracle::segment_distance(Vec2(x, y), b));
            if (d > 2.0) {
                if (p[0] | p[1] | p[2]) return {false, "background pixel not (0,0,0)"};
            } else {
                blues.insert(p[2]);
            }
        }
    if (blues != std::set<int>{51, 102, 153, 204, 255}) return {false, "blue levels differ from {51,...,255}"};
    if (img.pixel(36, 64)[2] != 51) return {false, "back-most bone is not blue 51"};
    if (img.pixel(60, 64)[2] != 255) return {false, "front-most bone is not blue 255"};

    // random five-bone skeletons: background exact, blue only on the five levels
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const auto tree = layout_rest_pose(sample_topology(rng.next(), 5, {}, {256, 256}), {256, 256}, rng.next());
        if (tree.bone_count() != 5) continue;
        const auto segs = rest_bones(tree);
        const Image r = encode_rest(segs, sample_layer_order(5, rng.next()), {256, 256});
        for (int y = 0; y < 256; ++y)
            for (int x = 0; x < 256; ++x) {
                const auto* p = r.pixel(x, y);
                if (!(p[0] | p[1] | p[2])) continue;
                if (p[2] % 51 != 0 || p[2] == 0) return {false, "blue off the level grid"};
            }
    }
    return {true, "levels {51,102,153,204,255}, back-most 51, background (0,0,0)"};
}

Outcome codec_roundtrip() {
    Timer timer;
    const Extent canvas{512, 512};
    const double bound = quantization_bound(canvas, 255.0);
    if (bound > 1.51) return {false, fmt("quantization bound %.3f > 1.51", bound)};
    Rng rng(2);
    double worst = 0;
    long checked = 0, skipped = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto tree = layout_rest_pose(sample_topology(rng.next(), 10, {}, canvas), canvas, rng.next());
        const int n = tree.bone_count();
        const auto segs = rest_bones(tree);
        const auto layers = sample_layer_order(n, rng.next());
        std::vector<int> bone_of(std::size_t(n) + 1);
        for (int i = 0; i < n; ++i) bone_of[std::size_t(layers[std::size_t(i)])] = i;

        for (const auto& s : decode(encode_rest(segs, layers, canvas), n))
            worst = std::max(worst, oracle::segment_distance(s.rest, segs[std::size_t(bone_of[std::size_t(s.layer)])]));

        const PoseSpec pose = sample_pose(tree, rng.next(), {}, canvas);
        const auto t = forward_kinematics(tree, pose);
        const CodecParams params;
        const Image posed = encode_posed(segs, t, layers, canvas, params);
        // the oracle runs inside each posed stroke's box; everything else must be background
        std::vector<std::uint8_t> near(std::size_t(canvas.width * canvas.height), 0);
        for (int i = 0; i < n; ++i) {
            const Vec2 a = t[std::size_t(i)](segs[std::size_t(i)].start), b = t[std::size_t(i)](segs[std::size_t(i)].end);
            const int x0 = std::max(0, int(std::floor(std::min(a.x(), b.x()) - 3))), x1 = std::min(511, int(std::ceil(std::max(a.x(), b.x()) + 3)));
            const int y0 = std::max(0, int(std::floor(std::min(a.y(), b.y()) - 3))), y1 = std::min(511, int(std::ceil(std::max(a.y(), b.y()) + 3)));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) near[std::size_t(y * 512 + x)] = 1;
        }
        for (int y = 0; y < 512; ++y)
            for (int x = 0; x < 512; ++x) {
                const auto* p = posed.pixel(x, y);
                if (!near[std::size_t(y * 512 + x)]) {
                    if (p[0] | p[1] | p[2]) return {false, "posed stroke outside its box"};
                    continue;
                }
                const auto e = oracle::codec_pixel(segs, t, layers, canvas, params, x, y);
                if (e.ambiguous) {
                    ++skipped;
                    continue;
                }
                ++checked;
                const bool ok = e.covered ? (p[0] == e.rgb[0] && p[1] == e.rgb[1] && p[2] == e.rgb[2]) : !(p[0] | p[1] | p[2]);
                if (!ok) return {false, fmt("posed pixel (%g, %g) differs from the transport oracle", x, y)};
            }
    }
    const double secs = timer.seconds();
    if (worst > bound + 1e-9) return {false, fmt("decoded point %.3f px from its segment (bound %.3f)", worst, bound)};
    if (skipped * 1000 > checked) return {false, "too many boundary-ambiguous pixels"};
    if (secs >= 60) return {false, fmt("took %.1f s", secs)};
    return {true, fmt("1000 skeletons, worst rest error %.4f px <= bound %.4f, posed pixels exact; %.1f s", worst, bound, secs)};
}

bool tree_oracle(const TreeSkeleton& t) {
    // every non-root node has exactly one earlier parent: connected and acyclic
    if (t.parent.empty() || t.parent[0] != -1) return false;
    for (int i = 1; i < t.node_count(); ++i)
        if (t.parent[std::size_t(i)] < 0 || t.parent[std::size_t(i)] >= i) return false;
    return int(t.edge_length.size()) == t.bone_count();
}

double aspect_oracle(const std::vector<Vec2>& poly, const Vec2& a, const Vec2& b) {
    const double th = std::atan2(b.y() - a.y(), b.x() - a.x());
    double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
    for (const auto& p : poly) {
        const double dx = p.x() - a.x(), dy = p.y() - a.y();
        const double u = std::cos(th) * dx + std::sin(th) * dy, v = -std::sin(th) * dx + std::cos(th) * dy;
        umin = std::min(umin, u), umax = std::max(umax, u), vmin = std::min(vmin, v), vmax = std::max(vmax, v);
    }
    return (vmax - vmin) / (umax - umin);
}

Outcome data_guarantees() {
    Timer timer;
    const DatasetConfig config;
    long violations = 0, parts = 0;
    std::string first;
    auto flag = [&](std::uint64_t i, const std::string& what) {
        if (violations++ == 0) first = "sample " + std::to_string(i) + ": " + what;
    };
    for (std::uint64_t i = 0; i < 10000; ++i) {
        const SampleMeta m = plan_sample(7, i, config, default_pool());
        const auto& t = m.tree;
        if (t.bone_count() < 1 || t.bone_count() > 10) flag(i, "bone count");
        if (!tree_oracle(t) || !check_tree(t, 10).empty()) flag(i, "not a tree");
        const auto segs = rest_bones(t);
        for (int b = 0; b < t.bone_count(); ++b) {
            ++parts;
            PartShape s;
            s.owner_bone = b;
            s.control_points = m.parts[std::size_t(b)].control_points;
            s.boundary = bezier_loop(s.control_points, config.shape.samples_per_segment);
            const auto& seg = segs[std::size_t(b)];
            s.bone_start = seg.start;
            s.bone_end = seg.end;
            if (s.boundary.size() < 3 || oracle::shoelace(s.boundary) <= 0) flag(i, "part not a closed loop");
            if (!is_simple_polygon(s.boundary)) flag(i, "part not simple");
            if (!oracle::inside_polygon(s.boundary, seg.start) || !oracle::inside_polygon(s.boundary, seg.end))
                flag(i, "part does not span its bone");
            if (aspect_oracle(s.boundary, seg.start, seg.end) > config.shape.max_aspect + 1e-12) flag(i, "aspect bound");
            if (!check_part_shape(s, config.shape).empty()) flag(i, "shape checker");
        }
    }
    if (violations) return {false, std::to_string(violations) + " violations; first " + first};
    return {true, fmt("10000 samples, %.0f parts, 0 violations; %.1f s", double(parts), timer.seconds())};
}

Outcome ordering() {
    DatasetConfig c;
    c.canvas = {64, 64};
    c.variants = 1;
    c.orderings = 2;
    c.procedural_textures = 8;
    c.resampling = Resampling::Nearest;
    const TexturePool pool = TexturePool::from_images(procedural_textures(8, 3, 64));
    int instances = 0;
    long overlap_pixels = 0, differing = 0;
    for (std::uint64_t i = 0; instances < 100 && i < 5000; ++i) {
        Sample s;
        try {
            s = generate_sample(11, i, c, pool);
        } catch (const Error&) {
            continue;  // too small a canvas for this character
        }
        const auto& m = s.meta;
        const int n = int(m.parts.size());
        if (n < 2) continue;
        const auto t = forward_kinematics(m.tree, m.poses[0]);
        std::vector<TexturedPart> posed;
        for (int b = 0; b < n; ++b) {
            const auto& rec = m.parts[std::size_t(b)];
            PartShape shape;
            shape.owner_bone = b;
            shape.control_points = rec.control_points;
            shape.boundary = bezier_loop(rec.control_points, c.shape.samples_per_segment);
            posed.push_back(transform_part(make_textured_part(shape, pool.load(rec.texture_id), rec.texture_id, rec.crop_x, rec.crop_y),
                                           t[std::size_t(b)], c.canvas, c.resampling));
        }
        auto front = [&](const std::vector<int>& layers, int x, int y) {
            int best = -1;
            for (int b = 0; b < n; ++b) {
                const auto& p = posed[std::size_t(b)];
                const int sx = x - p.origin_x, sy = y - p.origin_y;
                if (!p.sprite.contains(sx, sy) || p.sprite.pixel(sx, sy)[3] == 0) continue;
                if (best < 0 || layers[std::size_t(b)] > layers[std::size_t(best)]) best = b;
            }
            return best;
        };
        std::vector<Image> rendered;
        for (int o = 0; o < 2; ++o) {
            for (int b = 0; b < n; ++b) posed[std::size_t(b)].layer = m.orderings[std::size_t(o)][std::size_t(b)];
            const Image oracle_img = oracle::painter(posed, c.canvas, kWhite);
            if (oracle_img != s.pairs[std::size_t(o)].target_appearance)
                return {false, "sample " + std::to_string(i) + " ordering " + std::to_string(o) + " differs from the painter"};
            rendered.push_back(oracle_img);
        }
        long diff_here = 0;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                int cover = 0;
                for (const auto& p : posed) {
                    const int sx = x - p.origin_x, sy = y - p.origin_y;
                    cover += p.sprite.contains(sx, sy) && p.sprite.pixel(sx, sy)[3] > 0;
                }
                const auto* a = s.pairs[0].target_appearance.pixel(x, y);
                const auto* b = s.pairs[1].target_appearance.pixel(x, y);
                const bool differs = !std::equal(a, a + 4, b);
                if (differs && cover < 2) return {false, "ordering variants differ off the overlap"};
                // exactly: the images differ wherever the front part changes and its color does
                const int fa = front(m.orderings[0], x, y), fb = front(m.orderings[1], x, y);
                bool expect = false;
                if (fa != fb) {
                    const auto& pa = posed[std::size_t(fa)];
                    const auto& pb = posed[std::size_t(fb)];
                    expect = !std::equal(pa.sprite.pixel(x - pa.origin_x, y - pa.origin_y), pa.sprite.pixel(x - pa.origin_x, y - pa.origin_y) + 4,
                                         pb.sprite.pixel(x - pb.origin_x, y - pb.origin_y));
                }
                if (differs != expect) return {false, "ordering difference does not match the front-part change"};
                overlap_pixels += cover >= 2;
                diff_here += differs;
            }
        if (diff_here == 0) continue;  // the orderings do not occlude differently
        differing += diff_here;
        ++instances;
    }
    if (instances < 100) return {false, fmt("only %.0f occluding instances found", instances)};
    return {true, fmt("100 instances at 64x64, %.0f differing pixels all on %.0f overlap pixels, painter exact",
                      double(differing), double(overlap_pixels))};
}

Outcome determinism() {
    Timer timer;
    const DatasetConfig config;
    const auto& pool = default_pool();
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    const auto manifest = generate_dataset(config, 42, 100, a, pool);
    // regenerate every sample from the manifest seeds
    for (const auto& e : manifest.samples) {
        const Sample s = generate_sample(manifest.master_seed, e.index, manifest.config, pool);
        if (s.meta.seed != e.seed) return {false, "seed mismatch at sample " + std::to_string(e.index)};
        for (const auto& [name, bytes] : s.encode_files())
            if (read_file(a / e.dir / name) != bytes) return {false, "sample " + std::to_string(e.index) + " " + name + " differs"};
    }
    const auto report = validate_dataset(a, pool);
    if (!report.ok()) return {false, report.errors.front()};

    GenerateOptions stop;
    stop.stop_after = 37;
    try {
        generate_dataset(config, 42, 100, b, pool, stop);
        return {false, "interrupted run did not report the interruption"};
    } catch (const Error&) {
    }
    if (fs::exists(b / kManifestName)) return {false, "interrupted run left a manifest"};
    generate_dataset(config, 42, 100, b, pool);
    if (read_tree(a) != read_tree(b)) return {false, "resumed dataset differs from the uninterrupted one"};
    fs::remove_all(a);
    fs::remove_all(b);
    return {true, fmt("100 samples regenerated byte-identical; resume after 37 identical; %.1f s", timer.seconds())};
}

Outcome arap() {
    Rng rng(5);
    double worst_rigid = 0, worst_energy = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto t = blob(100 + std::uint64_t(trial), 20);
        const auto mesh = make_deform_mesh(t, {{0}});
        const RigidTransform g = RigidTransform::translate(Vec2(rng.uniform(-50, 50), rng.uniform(-50, 50))) *
                                 RigidTransform::rotation_about(rng.uniform(-kPi, kPi), Vec2(256, 256));
        const auto pins = distinct_vertices(rng, int(t.vertices.size()), std::size_t(2 + trial % 3));
        std::vector<Vec2> pos, expect;
        for (int p : pins) pos.push_back(g(t.vertices[std::size_t(p)]));
        for (const auto& v : t.vertices) expect.push_back(g(v));
        const ArapSolver solver(mesh, pins);
        const auto res = solver.solve(pos);
        worst_rigid = std::max(worst_rigid, max_dist(res.vertices, expect));
        worst_energy = std::max(worst_energy, solver.energy(res.vertices));
    }
    if (worst_rigid > 1e-6 || worst_energy > 1e-10)
        return {false, fmt("rigid motion error %.2e, energy %.2e", worst_rigid, worst_energy)};

    for (int trial = 0; trial < 100; ++trial) {
        const auto t = blob(200 + std::uint64_t(trial), rng.uniform(16, 32));
        const auto mesh = make_deform_mesh(t, {{0}});
        const auto pins = distinct_vertices(rng, int(t.vertices.size()), std::size_t(2 + trial % 4));
        std::vector<Vec2> pos;
        for (int p : pins) pos.push_back(t.vertices[std::size_t(p)] + Vec2(rng.uniform(-30, 30), rng.uniform(-30, 30)));
        ArapOptions opt;
        opt.max_iters = 40;
        opt.tol = 0;
        const auto res = solve_arap(mesh, pins, pos, opt);
        for (std::size_t k = 1; k < res.energy.size(); ++k)
            if (res.energy[k] > res.energy[k - 1] * (1 + 1e-12) + 1e-12)
                return {false, fmt("energy rose at iteration %.0f of instance %.0f", double(k), trial)};
    }

    // global step against the dense solve, on meshes of at most 500 vertices
    double worst_rel = 0;
    std::size_t largest = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const auto t = trial == 0 ? make_grid({56, 206}, {400, 100}, 40, 10) : blob(400 + std::uint64_t(trial), rng.uniform(11, 20));
        if (t.vertices.size() > 500) continue;
        largest = std::max(largest, t.vertices.size());
        const auto mesh = make_deform_mesh(t, {{0}});
        const auto pins = distinct_vertices(rng, int(t.vertices.size()), 4);
        std::vector<Vec2> pos;
        for (int p : pins) pos.push_back(t.vertices[std::size_t(p)] + Vec2(rng.uniform(-40, 40), rng.uniform(-40, 40)));
        const ArapSolver solver(mesh, pins);
        const oracle::DenseArap dense(t.vertices, mesh.triangles, pins);
        auto cur = t.vertices;
        for (std::size_t k = 0; k < pins.size(); ++k) cur[std::size_t(pins[k])] = pos[k];
        for (int it = 0; it < 5; ++it) {
            const auto r = dense.rotations(cur);
            const auto ours = solver.global_step(r, pos);
            const auto ref = dense.global(r, pos);
            double scale = 0;
            for (const auto& v : ref) scale = std::max(scale, v.norm());
            worst_rel = std::max(worst_rel, max_dist(ours, ref) / scale);
            cur = ref;
        }
    }
    if (worst_rel > 1e-6) return {false, fmt("global step off the dense solve by %.2e relative", worst_rel)};
    return {true, fmt("rigid error %.1e, energy %.1e; monotone over 100 instances", worst_rigid, worst_energy) +
                      fmt("; global step within %.1e relative of the dense solve (<= %.0f vertices)", worst_rel, double(largest))};
}

Outcome bbw() {
    Rng rng(6);
    double worst = 0, worst_sum = 0;
    std::size_t largest = 0;
    for (int trial = 0; trial < 12; ++trial) {
        Triangulation t;
        std::vector<std::vector<int>> handles;
        if (trial == 0) {
            t = make_grid({0, 0}, {140, 60}, 15, 10);
            for (int j = 0; j < 10; ++j) {
                if (handles.empty()) handles.resize(3);
                handles[0].push_back(j * 15);
                handles[1].push_back(j * 15 + 14);
            }
            handles[2] = {5 * 15 + 7};
        } else {
            t = blob(300 + std::uint64_t(trial), rng.uniform(20, 32));
            for (int v : distinct_vertices(rng, int(t.vertices.size()), std::size_t(2 + trial % 4))) handles.push_back({v});
        }
        if (t.vertices.size() > 200) continue;
        largest = std::max(largest, t.vertices.size());
        const auto mesh = make_deform_mesh(t, handles);
        const auto w = compute_bbw(mesh).weights;
        if ((w.array() < 0.0).any() || (w.array() > 1.0).any()) return {false, "weight outside [0, 1]"};
        for (Eigen::Index v = 0; v < w.rows(); ++v) worst_sum = std::max(worst_sum, std::abs(w.row(v).sum() - 1.0));
        for (std::size_t h = 0; h < handles.size(); ++h)
            for (int v : handles[h])
                for (Eigen::Index k = 0; k < w.cols(); ++k)
                    if (w(v, k) != (k == Eigen::Index(h) ? 1.0 : 0.0)) return {false, "handle weight not exactly 0 or 1"};
        worst = std::max(worst, (w - oracle::dense_bbw(t.vertices, mesh.triangles, handles)).cwiseAbs().maxCoeff());
    }
    if (worst_sum > 1e-6) return {false, fmt("partition of unity off by %.2e", worst_sum)};
    if (worst > 1e-4) return {false, fmt("dense oracle difference %.2e", worst)};
    return {true, fmt("bounds exact, unity within %.1e, handles exact, dense QP within %.1e (<= %.0f vertices)", worst_sum, worst,
                      double(largest))};
}

Outcome fk() {
    Rng rng(7);
    double worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        TreeSkeleton t;
        t.parent = {-1, 0, 1, 2};
        std::vector<Vec2> d;
        t.rest_position.push_back(Vec2(rng.uniform(100, 400), rng.uniform(100, 400)));
        for (int k = 0; k < 3; ++k) {
            const double th = rng.uniform(-kPi, kPi), len = rng.uniform(10, 60);
            d.emplace_back(len * std::cos(th), len * std::sin(th));
            t.rest_position.push_back(t.rest_position.back() + d.back());
            t.edge_length.push_back(len);
        }
        PoseSpec p = PoseSpec::identity(3, Vec2(256, 256));
        for (auto& a : p.bone_rotation) a = rng.uniform(-kPi, kPi);
        p.global_rotation = rng.uniform(-1, 1);
        p.global_translation = Vec2(rng.uniform(-30, 30), rng.uniform(-30, 30));
        const Vec2 local = oracle::planar_arm_tip(t.rest_position[0], d, p.bone_rotation) - p.global_pivot;
        const double g = p.global_rotation;
        const Vec2 expect = p.global_pivot + Vec2(std::cos(g) * local.x() - std::sin(g) * local.y(),
                                                  std::sin(g) * local.x() + std::cos(g) * local.y()) + p.global_translation;
        worst = std::max(worst, (forward_kinematics(t, p)[2](t.rest_position[3]) - expect).norm());
    }
    if (worst > 1e-9) return {false, fmt("3-bone tip error %.2e", worst)};

    DatasetConfig c;
    c.variants = 1;
    c.orderings = 1;
    c.resampling = Resampling::Nearest;
    c.pose.max_branch_angle = c.pose.max_global_angle = c.pose.max_translation = 0;
    for (std::uint64_t i = 0; i < 50; ++i) {
        const Sample s = generate_sample(3, i, c, default_pool());
        const auto& p = s.pairs[0];
        if (p.target_appearance != p.ref_appearance || p.target_skeleton != p.ref_skeleton)
            return {false, "identity pose changed sample " + std::to_string(i)};
    }
    return {true, fmt("3-bone tip error %.1e over 1000 chains; identity pose byte-identical on 50 samples", worst)};
}

Outcome metrics() {
    Rng rng(8);
    std::vector<double> a(10000), b(10000);
    for (auto& v : a) v = rng.uniform(0.0, 0.9);
    for (std::size_t i = 0; i < a.size(); ++i) b[i] = a[i] + 0.1;
    const double same = mse(a, a), off = mse(a, b);
    const double p = psnr_from_mse(off);
    Image img(32, 32, 3);
    for (auto& v : img.data) v = std::uint8_t(rng.uniform_int(0, 255));
    if (same != 0.0 || mse(img, img) != 0.0) return {false, "identical frames give nonzero MSE"};
    if (psnr_from_mse(0.0) != 99.0) return {false, "PSNR of identical frames is not the cap"};
    if (std::abs(off - 0.01) > 1e-12) return {false, fmt("offset MSE %.6f", off)};
    if (std::abs(p - 20.0) > 0.01) return {false, fmt("offset PSNR %.4f dB", p)};
    return {true, fmt("identical MSE 0 / PSNR 99 (cap); offset 0.1 MSE %.6f, PSNR %.4f dB", off, p)};
}

double generate_seconds(std::uint64_t count, int threads, const std::string& tag) {
    const fs::path dir = scratch(tag);
    omp_set_num_threads(threads);
    Timer timer;
    generate_dataset(DatasetConfig{}, 9, count, dir, default_pool());
    const double s = timer.seconds();
    fs::remove_all(dir);
    return s;
}

Outcome throughput() {
    const int saved = omp_get_max_threads();
    const double single = generate_seconds(1000, 1, "throughput");
    std::string detail = fmt("1000 samples at 512x512 on one core in %.1f s", single);
    if (single >= 600) {
        omp_set_num_threads(saved);
        return {false, detail + " (limit 600 s)"};
    }
    const unsigned hw = std::thread::hardware_concurrency();
    if (hw < 4) {
        omp_set_num_threads(saved);
        return {false, detail + "; 4-worker speedup not measurable with " + std::to_string(hw) + " hardware thread(s)", true};
    }
    const double one = generate_seconds(200, 1, "speedup1"), four = generate_seconds(200, 4, "speedup4");
    omp_set_num_threads(saved);
    const double speedup = one / four;
    detail += fmt("; 4 workers %.2fx", speedup);
    return {speedup >= 3.0, detail + (speedup >= 3.0 ? "" : " (need >= 3.0)")};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {"codec-constants", codec_constants}, {"codec-roundtrip", codec_roundtrip}, {"data-guarantees", data_guarantees},
        {"ordering", ordering},               {"determinism", determinism},         {"arap", arap},
        {"bbw", bbw},                         {"fk", fk},                           {"metrics", metrics},
        {"throughput", throughput}};
    std::set<std::string> only(argv + 1, argv + argc);
    int failed = 0, limited = 0, passed = 0;
    for (const auto& c : all) {
        if (!only.empty() && !only.count(c.name)) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << (o.host_limited ? " [host-limited]" : "")
                  << std::endl;
        if (o.pass) ++passed;
        else if (o.host_limited) ++limited;
        else ++failed;
    }
    std::cout << passed << " passed, " << failed + limited << " failed";
    if (limited) std::cout << " (" << limited << " host-limited)";
    std::cout << std::endl;
    return failed;
}
