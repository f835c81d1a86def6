#include "toporig/examples.hpp"

#include <json.hpp>

#include <cstdio>

namespace toporig {

namespace {

constexpr int kNx = 41, kNy = 11;
const Vec2 kOrigin(56.0, 206.0);
const Vec2 kSize(400.0, 100.0);

std::vector<int> grid_column(int i) {
    std::vector<int> out;
    for (int j = 0; j < kNy; ++j) out.push_back(j * kNx + i);
    return out;
}

// two-tone checker with a horizontal stripe so bends read clearly
Image bar_sprite(const Extent& canvas) {
    Image img(canvas.width, canvas.height, 4, 0);
    const int x0 = int(kOrigin.x()), y0 = int(kOrigin.y());
    for (int y = y0; y < y0 + int(kSize.y()); ++y)
        for (int x = x0; x < x0 + int(kSize.x()); ++x) {
            const bool dark = ((x - x0) / 20 + (y - y0) / 20) % 2;
            const bool stripe = std::abs(y - (y0 + int(kSize.y()) / 2)) < 4;
            std::uint8_t* p = img.pixel(x, y);
            if (stripe) {
                p[0] = 200, p[1] = 40, p[2] = 40;
            } else if (dark) {
                p[0] = 40, p[1] = 70, p[2] = 150;
            } else {
                p[0] = 235, p[1] = 225, p[2] = 190;
            }
            p[3] = 255;
        }
    return img;
}

std::string frame_id(double angle) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "bend_%d", int(std::lround(angle * 180.0 / kPi)));
    return buf;
}

} // namespace

BarScene make_bar_scene(const std::vector<double>& bend_angles) {
    BarScene s;
    s.bend_angles = bend_angles;
    s.sprite = bar_sprite(s.canvas);
    s.mesh = make_deform_mesh(make_grid(kOrigin, kSize, kNx, kNy), {grid_column(0), grid_column(kNx - 1)});

    const double cy = kOrigin.y() + kSize.y() / 2;
    const Vec2 j0(kOrigin.x(), cy), j1(kOrigin.x() + kSize.x() / 2, cy), j2(kOrigin.x() + kSize.x(), cy);
    AnnotationFrame rest{"rest", {{"j0", j0}, {"j1", j1}, {"j2", j2}}, {{"j0", "j1"}, {"j1", "j2"}}, {0, 1}};
    s.annotations.canvas = s.canvas;
    s.annotations.reference_frame = rest.id;
    s.annotations.frames.push_back(rest);
    for (double a : bend_angles) {
        AnnotationFrame f = rest;
        f.id = frame_id(a);
        f.joints[2].position = RigidTransform::rotation_about(a, j1)(j2);
        s.annotations.frames.push_back(f);
    }
    validate(s.annotations);
    return s;
}

std::vector<ExampleFrame> render_bar_examples(const BarScene& scene, Backend backend) {
    const auto& mesh = scene.mesh;
    const auto& rest = mesh.vertices;
    const auto skeletons = annotations_to_rasters(scene.annotations);
    const auto& ref = scene.annotations.reference();
    const Vec2 pivot = ref.joints[1].position;

    std::vector<int> pinned;
    for (const auto& h : mesh.handles) pinned.insert(pinned.end(), h.begin(), h.end());
    std::vector<int> assignment;
    std::unique_ptr<ArapSolver> arap;
    WeightField weights;
    switch (backend) {
    case Backend::Rigid: assignment = assign_nearest_segment(rest, frame_segments(ref)); break;
    case Backend::Arap: arap = std::make_unique<ArapSolver>(mesh, pinned); break;
    case Backend::Bbw: weights = compute_bbw(mesh); break;
    }

    std::vector<ExampleFrame> out;
    out.push_back({render_deformed(scene.sprite, rest, rest, mesh.triangles, scene.canvas, Resampling::Bilinear),
                   skeletons[0], rest});
    for (std::size_t k = 0; k < scene.bend_angles.size(); ++k) {
        const std::vector<RigidTransform> transforms{RigidTransform::identity(),
                                                     RigidTransform::rotation_about(scene.bend_angles[k], pivot)};
        std::vector<Vec2> v;
        if (backend == Backend::Rigid) {
            v = deform_rigid(rest, assignment, transforms);
        } else if (backend == Backend::Arap) {
            std::vector<Vec2> targets;
            for (std::size_t h = 0; h < mesh.handles.size(); ++h)
                for (int i : mesh.handles[h]) targets.push_back(transforms[h](rest[std::size_t(i)]));
            v = arap->solve(targets).vertices;
        } else {
            v = deform_lbs(rest, weights, transforms);
        }
        Image img = render_deformed(scene.sprite, rest, v, mesh.triangles, scene.canvas, Resampling::Bilinear);
        out.push_back({std::move(img), skeletons[k + 1], std::move(v)});
    }
    return out;
}

void write_bar_examples(const BarScene& scene, Backend backend, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto frames = render_bar_examples(scene, backend);
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t k = 0; k < frames.size(); ++k) {
        const std::string stem = k == 0 ? "rest" : "frame_" + std::to_string(k);
        write_png(dir / (stem + ".png"), frames[k].image);
        write_png(dir / (stem + "_skeleton.png"), frames[k].skeleton);
        files.push_back({{"frame", scene.annotations.frames[k].id},
                         {"image", stem + ".png"},
                         {"skeleton", stem + "_skeleton.png"},
                         {"bend_angle_rad", k == 0 ? 0.0 : scene.bend_angles[k - 1]}});
    }
    write_annotations(scene.annotations, dir / "annotations.json");

    const Vec2 pivot = scene.annotations.reference().joints[1].position;
    nlohmann::json handles = nlohmann::json::array();
    const char* names[] = {"left_column", "right_column"};
    for (std::size_t h = 0; h < scene.mesh.handles.size(); ++h)
        handles.push_back({{"name", names[h]},
                           {"vertices", scene.mesh.handles[h]},
                           {"transform", h == 0 ? "identity" : "rotation about j1 by bend_angle_rad"}});
    const nlohmann::json doc = {
        {"version", 1},
        {"backend", to_string(backend)},
        {"canvas", {{"width", scene.canvas.width}, {"height", scene.canvas.height}}},
        {"grid", {{"origin", {kOrigin.x(), kOrigin.y()}}, {"size", {kSize.x(), kSize.y()}}, {"nx", kNx}, {"ny", kNy},
                  {"vertex_index", "j * nx + i"}}},
        {"pivot", {pivot.x(), pivot.y()}},
        {"handles", handles},
        {"rigid_assignment", "nearest bone segment"},
        {"arap_pins", "all vertices of both handle columns"},
        {"frames", files}};
    write_file_atomic(dir / "examples.json", doc.dump(2) + "\n");
}

} // namespace toporig
