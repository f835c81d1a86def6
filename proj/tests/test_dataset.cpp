#include "toporig/dataset.hpp"

#include "error_code.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>

using namespace toporig;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("toporig_dataset_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

DatasetConfig small_config() {
    DatasetConfig c;
    c.canvas = {256, 256};
    c.procedural_textures = 16;
    return c;
}

const TexturePool& pool() {
    static const TexturePool p = TexturePool::from_images(procedural_textures(16, 1));
    return p;
}

std::map<std::string, std::vector<std::uint8_t>> read_tree(const fs::path& root) {
    std::map<std::string, std::vector<std::uint8_t>> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
    return out;
}

} // namespace

TEST_CASE("identity-pose variants reproduce the reference rasters") {
    DatasetConfig c = small_config();
    c.pose.max_branch_angle = c.pose.max_global_angle = c.pose.max_translation = 0;
    for (auto mode : {Resampling::Nearest, Resampling::Bilinear}) {
        c.resampling = mode;
        for (std::uint64_t i = 0; i < 10; ++i) {
            const Sample s = generate_sample(5, i, c, pool());
            REQUIRE(s.pairs.size() == 4);
            for (const auto& p : s.pairs) {
                REQUIRE(p.target_skeleton == p.ref_skeleton);
                REQUIRE(p.target_appearance == p.ref_appearance);
            }
        }
    }
}

TEST_CASE("samples are deterministic and laid out ordering-major") {
    const auto c = small_config();
    const Sample a = generate_sample(9, 3, c, pool());
    const Sample b = generate_sample(9, 3, c, pool());
    CHECK(a.encode_files() == b.encode_files());
    CHECK(a.meta.to_json() == b.meta.to_json());
    CHECK(generate_sample(9, 4, c, pool()).meta.seed != a.meta.seed);
    CHECK(a.meta.seed == sample_seed(9, 3));

    std::vector<std::string> names;
    for (const auto& [n, bytes] : a.encode_files()) names.push_back(n);
    CHECK(names == std::vector<std::string>{"o0_ref_appearance.png", "o0_ref_skeleton.png", "o0_v0_target_skeleton.png",
                                            "o0_v0_target_appearance.png", "o0_v1_target_skeleton.png",
                                            "o0_v1_target_appearance.png", "o1_ref_appearance.png", "o1_ref_skeleton.png",
                                            "o1_v0_target_skeleton.png", "o1_v0_target_appearance.png",
                                            "o1_v1_target_skeleton.png", "o1_v1_target_appearance.png"});
    for (const auto& p : a.pairs)
        for (const Image* img : {&p.ref_appearance, &p.ref_skeleton, &p.target_skeleton, &p.target_appearance}) {
            CHECK(img->width == 256);
            CHECK(img->height == 256);
        }
}

TEST_CASE("metadata alone re-renders every raster") {
    const auto c = small_config();
    for (std::uint64_t i = 0; i < 20; ++i) {
        const Sample s = generate_sample(11, i, c, pool());
        const SampleMeta back = SampleMeta::from_json(nlohmann::json::parse(s.meta.to_json().dump()));
        REQUIRE(render_sample(back, c, pool()).encode_files() == s.encode_files());
    }
}

TEST_CASE("planning a sample yields the metadata generation renders") {
    const auto c = small_config();
    for (std::uint64_t i = 0; i < 5; ++i) {
        const SampleMeta m = plan_sample(21, i, c, pool());
        const Sample s = generate_sample(21, i, c, pool());
        CHECK(m.to_json() == s.meta.to_json());
        CHECK(render_sample(m, c, pool()).encode_files() == s.encode_files());
    }
}

TEST_CASE("layer-order variants differ only where parts overlap") {
    const auto c = small_config();
    for (std::uint64_t i = 0; i < 10; ++i) {
        const Sample s = generate_sample(13, i, c, pool());
        // posed opaque coverage count per pixel, from the metadata
        std::vector<int> cover(256 * 256, 0);
        const auto t = forward_kinematics(s.meta.tree, s.meta.poses[0]);
        for (int b = 0; b < int(s.meta.parts.size()); ++b) {
            const auto& rec = s.meta.parts[std::size_t(b)];
            PartShape shape;
            shape.owner_bone = b;
            shape.control_points = rec.control_points;
            shape.boundary = bezier_loop(rec.control_points, c.shape.samples_per_segment);
            const auto part = make_textured_part(shape, pool().load(rec.texture_id), rec.texture_id, rec.crop_x, rec.crop_y);
            const auto posed = transform_part(part, t[std::size_t(b)], c.canvas, c.resampling);
            for (int y = 0; y < posed.sprite.height; ++y)
                for (int x = 0; x < posed.sprite.width; ++x) {
                    const int cx = posed.origin_x + x, cy = posed.origin_y + y;
                    if (posed.sprite.pixel(x, y)[3] > 0 && cx >= 0 && cy >= 0 && cx < 256 && cy < 256) ++cover[std::size_t(cy * 256 + cx)];
                }
        }
        const Image& a = s.pairs[0].target_appearance;  // ordering 0, variant 0
        const Image& b = s.pairs[2].target_appearance;  // ordering 1, variant 0
        for (int p = 0; p < 256 * 256; ++p) {
            const bool differs = !std::equal(a.data.begin() + 4 * p, a.data.begin() + 4 * p + 4, b.data.begin() + 4 * p);
            if (differs) REQUIRE(cover[std::size_t(p)] >= 2);
        }
    }
}

TEST_CASE("a small dataset passes self-validation and lists every file") {
    DatasetConfig c = small_config();
    const fs::path dir = scratch("ten");
    std::vector<std::uint64_t> progress;
    GenerateOptions opt;
    opt.progress = [&](std::uint64_t done, std::uint64_t total) {
        CHECK(total == 10);
        progress.push_back(done);
    };
    const auto m = generate_dataset(c, 21, 10, dir, pool(), opt);
    REQUIRE(m.samples.size() == 10);
    CHECK(progress.back() == 10);
    const auto loaded = DatasetManifest::load(dir);
    CHECK(loaded.to_json() == m.to_json());
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(m.samples[i].dir == sample_dir_name(i));
        CHECK(m.samples[i].files.size() == 12);
        for (const auto& f : m.samples[i].files) CHECK(fs::exists(dir / m.samples[i].dir / f));
    }
    const auto report = validate_dataset(dir, pool());
    CHECK(report.samples_checked == 10);
    CHECK(report.ok());

    // a flipped byte in one raster is caught
    const fs::path victim = dir / sample_dir_name(4) / "o1_v0_target_skeleton.png";
    const Image img = read_image(victim);
    Image changed = img;
    changed.data[changed.data.size() / 2] ^= 0x40;
    write_png(victim, changed);
    const auto bad = validate_dataset(dir, pool());
    CHECK(!bad.ok());
    fs::remove(victim);
    const auto missing = validate_dataset(dir, pool());
    REQUIRE(!missing.ok());
    CHECK(missing.errors[0].find("missing") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("100 generated samples decode and regenerate") {
    DatasetConfig c = small_config();
    c.variants = 1;
    c.orderings = 1;
    const fs::path dir = scratch("hundred");
    generate_dataset(c, 22, 100, dir, pool());
    const auto report = validate_dataset(dir, pool());
    CHECK(report.samples_checked == 100);
    CHECK(report.ok());
    for (const auto& e : report.errors) MESSAGE(e);
    fs::remove_all(dir);
}

TEST_CASE("an interrupted run resumes to the uninterrupted output") {
    const auto c = small_config();
    const fs::path full = scratch("full"), part = scratch("part");
    generate_dataset(c, 23, 12, full, pool());

    GenerateOptions stop;
    stop.stop_after = 5;
    CHECK(error_code([&] { generate_dataset(c, 23, 12, part, pool(), stop); }) == ErrorCode::Io);
    CHECK(!fs::exists(part / kManifestName));
    // simulate a crash mid-sample: raster written, metadata not yet
    const fs::path torn = part / sample_dir_name(11);
    fs::create_directories(torn);
    write_file_atomic(torn / "o0_ref_appearance.png", "garbage");

    std::uint64_t regenerated = 0;
    GenerateOptions resume;
    resume.progress = [&](std::uint64_t, std::uint64_t) { ++regenerated; };
    generate_dataset(c, 23, 12, part, pool(), resume);
    CHECK(regenerated == 12);
    CHECK(read_tree(part) == read_tree(full));
    fs::remove_all(full);
    fs::remove_all(part);
}

TEST_CASE("generation errors leave no manifest") {
    const auto c = small_config();
    const fs::path dir = scratch("blocked");
    write_file_atomic(dir / "samples", "not a directory");
    CHECK(error_code([&] { generate_dataset(c, 1, 2, dir, pool()); }) == ErrorCode::Io);
    CHECK(!fs::exists(dir / kManifestName));
    fs::remove_all(dir);
}

TEST_CASE("config JSON is strict") {
    const DatasetConfig d;
    CHECK(d.canvas.width == 512);
    CHECK(d.topology.max_bones == 10);
    CHECK(DatasetConfig::from_json(d.to_json()).to_json() == d.to_json());
    CHECK(DatasetConfig::from_json(nlohmann::json::object()).to_json() == d.to_json());

    auto expect = [](const nlohmann::json& j, const std::string& field) {
        try {
            DatasetConfig::from_json(j);
            FAIL("accepted " << j.dump());
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InvalidConfig);
            CHECK(e.field() == field);
        }
    };
    expect({{"colour", 1}}, "colour");
    expect({{"pose", {{"max_branch_angle", 1}}}}, "pose.max_branch_angle");
    expect({{"variants", 1.5}}, "variants");
    expect({{"variants", 0}}, "variants");
    expect({{"canvas", {{"width", "512"}}}}, "canvas.width");
    expect({{"canvas", {{"width", 8}}}}, "canvas");
    expect({{"resampling", "cubic"}}, "resampling");
    expect({{"codec", {{"layer_levels", 3}}}}, "codec.layer_levels");
    expect({{"pose", {{"branch_probability", 1.5}}}}, "pose.branch_probability");

    const fs::path dir = scratch("config");
    write_file_atomic(dir / "c.json", R"({"canvas": {"width": 128, "height": 96}, "variants": 3})");
    const auto c = DatasetConfig::load(dir / "c.json");
    CHECK(c.canvas.width == 128);
    CHECK(c.canvas.height == 96);
    CHECK(c.variants == 3);
    write_file_atomic(dir / "bad.json", "{");
    CHECK(error_code([&] { DatasetConfig::load(dir / "bad.json"); }) == ErrorCode::InvalidConfig);
    CHECK(error_code([&] { DatasetConfig::load(dir / "none.json"); }) == ErrorCode::Io);
    fs::remove_all(dir);
}

TEST_CASE("the texture environment variable overrides the configured pool") {
    const fs::path dir = scratch("textures");
    write_png(dir / "one.png", Image(40, 40, 3, 90));
    write_png(dir / "two.png", Image(50, 30, 3, 200));
    DatasetConfig c;
    CHECK(open_texture_pool(c).size() == std::size_t(c.procedural_textures));
    ::setenv(kTextureEnv, dir.c_str(), 1);
    const auto p = open_texture_pool(c);
    ::unsetenv(kTextureEnv);
    REQUIRE(p.size() == 2);
    CHECK(p.record(0).path == "one.png");
    c.texture_dir = dir.string();
    CHECK(open_texture_pool(c).size() == 2);
    fs::remove_all(dir);
}

TEST_CASE("procedural textures are deterministic") {
    const auto a = procedural_textures(6, 3, 32), b = procedural_textures(6, 3, 32);
    CHECK(a == b);
    CHECK(a != procedural_textures(6, 4, 32));
    CHECK(error_code([] { procedural_textures(0, 1); }) == ErrorCode::InvalidConfig);
}
