#include "toporig/appearance.hpp"

#include "oracles.hpp"
#include "reference.hpp"

#include <doctest.h>

#include <set>

using namespace toporig;

namespace {

Image noise_texture(int w, int h, std::uint64_t seed) {
    Image img(w, h, 3);
    Rng rng(seed);
    for (auto& v : img.data) v = std::uint8_t(rng.uniform_int(0, 255));
    return img;
}

std::vector<PartShape> random_shapes(int n, const Extent& canvas, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<PartShape> out;
    const double m = 0.2 * canvas.width;
    for (int i = 0; i < n; ++i) {
        const Vec2 a(rng.uniform(m, canvas.width - m), rng.uniform(m, canvas.height - m));
        const Vec2 b(rng.uniform(m, canvas.width - m), rng.uniform(m, canvas.height - m));
        if ((b - a).norm() < 4) {
            --i;
            continue;
        }
        out.push_back(sample_part_shape(i, a, b, rng.next()));
    }
    return out;
}

std::vector<TexturedPart> random_parts(int n, const Extent& canvas, std::uint64_t seed) {
    std::vector<Image> tex;
    for (int i = 0; i < 4; ++i) tex.push_back(noise_texture(40, 40, seed + std::uint64_t(i)));
    auto parts = assign_textures(random_shapes(n, canvas, seed), TexturePool::from_images(tex), seed);
    const auto order = sample_layer_order(n, seed);
    for (int i = 0; i < n; ++i) parts[std::size_t(i)].layer = order[std::size_t(i)];
    return parts;
}

bool covers(const TexturedPart& p, int x, int y) {
    const int sx = x - p.origin_x, sy = y - p.origin_y;
    return p.sprite.contains(sx, sy) && p.sprite.pixel(sx, sy)[3] == 255;
}

} // namespace

TEST_CASE("a solid pool fills every mask with its color and nothing else") {
    Image red(8, 8, 3);
    for (int i = 0; i < 64; ++i) red.data[std::size_t(3 * i)] = 255;
    const auto shapes = random_shapes(6, {256, 256}, 3);
    const auto parts = assign_textures(shapes, TexturePool::from_images({red}), 1);
    REQUIRE(parts.size() == shapes.size());
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto& p = parts[i];
        CHECK(p.bone == shapes[i].owner_bone);
        for (int y = 0; y < p.sprite.height; ++y)
            for (int x = 0; x < p.sprite.width; ++x) {
                const auto* px = p.sprite.pixel(x, y);
                const bool in = oracle::inside_polygon(shapes[i].boundary, Vec2(p.origin_x + x + 0.5, p.origin_y + y + 0.5));
                REQUIRE(px[3] == (in ? 255 : 0));
                if (in) {
                    REQUIRE(px[0] == 255);
                    REQUIRE(px[1] == 0);
                    REQUIRE(px[2] == 0);
                } else {
                    REQUIRE(px[0] + px[1] + px[2] == 0);
                }
            }
    }
}

TEST_CASE("texture assignment is deterministic per seed") {
    const auto shapes = random_shapes(5, {128, 128}, 8);
    const auto pool = TexturePool::from_images({noise_texture(50, 50, 1), noise_texture(30, 70, 2)});
    const auto a = assign_textures(shapes, pool, 77), b = assign_textures(shapes, pool, 77);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].sprite == b[i].sprite);
        CHECK(a[i].texture_id == b[i].texture_id);
        CHECK(a[i].crop_x == b[i].crop_x);
    }
    CHECK_THROWS_AS(assign_textures(shapes, TexturePool::from_images({}), 1), Error);
}

TEST_CASE("sprites sample the texture at the crop offset, tiling when small") {
    const auto shapes = random_shapes(3, {200, 200}, 12);
    const Image tex = noise_texture(17, 13, 5);
    for (const auto& s : shapes) {
        const auto p = make_textured_part(s, tex, 0, 4, 9);
        for (int y = 0; y < p.sprite.height; ++y)
            for (int x = 0; x < p.sprite.width; ++x) {
                const auto* px = p.sprite.pixel(x, y);
                if (px[3] == 0) continue;
                const auto* t = tex.pixel((4 + x) % 17, (9 + y) % 13);
                REQUIRE(std::equal(t, t + 3, px));
            }
    }
}

TEST_CASE("texture choice is uniform over a large pool") {
    std::vector<Image> pool_images(30000, Image(4, 4, 3, 128));
    const auto pool = TexturePool::from_images(std::move(pool_images));
    const auto shapes = random_shapes(1000, {64, 64}, 2);
    const auto parts = assign_textures(shapes, pool, 2024);
    // 20 bins of 1500 consecutive ids, 50 expected per bin
    std::vector<int> bins(20, 0);
    for (const auto& p : parts) ++bins[p.texture_id / 1500];
    double chi2 = 0;
    for (int b : bins) chi2 += (b - 50.0) * (b - 50.0) / 50.0;
    CHECK(chi2 < 43.8);  // 19 dof, p = 0.001
    std::set<std::size_t> distinct;
    for (const auto& p : parts) distinct.insert(p.texture_id);
    CHECK(distinct.size() > 950);
}

TEST_CASE("layer orders are uniform permutations") {
    CHECK(sample_layer_order(1, 5) == std::vector<int>{1});
    CHECK(sample_layer_order(7, 5) == sample_layer_order(7, 5));
    std::map<std::vector<int>, int> seen;
    for (std::uint64_t s = 0; s < 10000; ++s) ++seen[sample_layer_order(3, s)];
    CHECK(seen.size() == 6);
    double chi2 = 0;
    for (const auto& [perm, n] : seen) chi2 += (n - 10000.0 / 6) * (n - 10000.0 / 6) / (10000.0 / 6);
    CHECK(chi2 < 20.5);  // 5 dof, p = 0.001
    const auto big = sample_layer_order(10, 3);
    CHECK(std::set<int>(big.begin(), big.end()) == std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
    CHECK_THROWS_AS(sample_layer_order(0, 1), Error);
}

TEST_CASE("compositing matches the brute-force painter at 64x64") {
    const Extent canvas{64, 64};
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto parts = random_parts(int(1 + s % 6), canvas, s);
        const Image got = composite(parts, canvas);
        REQUIRE(got == oracle::painter(parts, canvas, kWhite));
        REQUIRE(got == reference::composite(parts, canvas));
    }
}

TEST_CASE("a single part over white is its sprite over white") {
    const Extent canvas{96, 96};
    const auto parts = random_parts(1, canvas, 4);
    const Image got = composite(parts, canvas);
    const auto& p = parts[0];
    for (int y = 0; y < canvas.height; ++y)
        for (int x = 0; x < canvas.width; ++x) {
            const auto* g = got.pixel(x, y);
            if (covers(p, x, y)) {
                REQUIRE(std::equal(g, g + 4, p.sprite.pixel(x - p.origin_x, y - p.origin_y)));
            } else {
                REQUIRE((g[0] & g[1] & g[2] & g[3]) == 255);
            }
        }
}

TEST_CASE("swapping the order of two parts changes exactly the overlap") {
    const Extent canvas{128, 128};
    int tested = 0;
    for (std::uint64_t s = 0; tested < 20; ++s) {
        auto parts = random_parts(2, canvas, 1000 + s);
        const Image ab = composite(parts, canvas);
        std::swap(parts[0].layer, parts[1].layer);
        const Image ba = composite(parts, canvas);
        int overlap = 0;
        for (int y = 0; y < canvas.height; ++y)
            for (int x = 0; x < canvas.width; ++x) {
                const bool both = covers(parts[0], x, y) && covers(parts[1], x, y);
                const bool differs = !std::equal(ab.pixel(x, y), ab.pixel(x, y) + 4, ba.pixel(x, y));
                // noise textures make equal colors on overlap pixels rare, but allowed
                if (!both) REQUIRE_FALSE(differs);
                overlap += both;
                if (both) {
                    const auto& front = parts[0].layer == 2 ? parts[0] : parts[1];
                    REQUIRE(std::equal(ba.pixel(x, y), ba.pixel(x, y) + 4, front.sprite.pixel(x - front.origin_x, y - front.origin_y)));
                }
            }
        if (overlap > 0) ++tested;
    }
}

TEST_CASE("compositing input errors") {
    auto parts = random_parts(3, {64, 64}, 9);
    parts[1].layer = parts[0].layer;
    CHECK_THROWS_AS(composite(parts, {64, 64}), Error);
    parts[1].layer = 99;
    CHECK_THROWS_AS(composite(parts, {64, 64}), Error);
    CHECK_THROWS_AS(composite({}, {0, 64}), Error);
}

TEST_CASE("texture directories are indexed, cached and decoded") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "toporig_test_pool";
    fs::remove_all(dir);
    fs::create_directories(dir / "sub");
    write_png(dir / "b.png", Image(10, 12, 3, 50));
    write_png(dir / "sub" / "a.png", Image(7, 5, 4, 90));
    write_file_atomic(dir / "broken.png", std::string("not a png"));
    write_file_atomic(dir / "notes.txt", std::string("ignored"));
    const auto pool = TexturePool::from_directory(dir);
    REQUIRE(pool.size() == 2);
    CHECK(pool.record(0).path == "b.png");
    CHECK(pool.record(1).path == "sub/a.png");
    CHECK(pool.record(1).width == 7);
    CHECK(pool.load(1).channels == 3);
    const auto again = TexturePool::from_directory(dir);
    CHECK(again.size() == 2);
    fs::remove_all(dir);
}
