#include "toporig/topology.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <set>

using namespace toporig;

namespace {

const Extent kCanvas{512, 512};

// pelvis root with spine, neck, head, two arms and two legs
TreeSkeleton humanoid() {
    TreeSkeleton t;
    t.parent = {-1, 0, 1, 2, 1, 4, 1, 6, 0, 0};
    t.edge_length = {80, 40, 30, 60, 55, 60, 55, 90, 90};
    return t;
}

} // namespace

TEST_CASE("a single-bone cap gives the only legal tree") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto t = sample_topology(s, 1, {}, kCanvas);
        CHECK(t.node_count() == 2);
        CHECK(t.parent[1] == 0);
    }
}

TEST_CASE("sampling is deterministic per seed") {
    const auto a = sample_topology(42, 10, {}, kCanvas);
    const auto b = sample_topology(42, 10, {}, kCanvas);
    CHECK(a.parent == b.parent);
    CHECK(a.edge_length == b.edge_length);
    const auto la = layout_rest_pose(a, kCanvas, 42);
    const auto lb = layout_rest_pose(b, kCanvas, 42);
    CHECK(la.rest_position == lb.rest_position);
}

TEST_CASE("10000 sampled topologies are valid trees covering every bone count") {
    std::set<int> counts;
    const TopologyConfig cfg;
    for (std::uint64_t s = 0; s < 10000; ++s) {
        const auto t = sample_topology(s, 10, cfg, kCanvas);
        REQUIRE(check_tree(t, 10).empty());
        counts.insert(t.bone_count());
        for (int i = 1; i < t.node_count(); ++i) REQUIRE(t.parent[std::size_t(i)] < i);
        for (double l : t.edge_length) {
            REQUIRE(l >= cfg.min_edge_frac * kCanvas.diagonal());
            REQUIRE(l <= cfg.max_edge_frac * kCanvas.diagonal());
        }
    }
    CHECK(counts == std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
}

TEST_CASE("parent choice is uniform over earlier nodes") {
    // parent of node 3 among {0, 1, 2}
    int hist[3] = {0, 0, 0}, n = 0;
    for (std::uint64_t s = 0; s < 30000; ++s) {
        const auto t = sample_topology(s, 10, {}, kCanvas);
        if (t.node_count() < 4) continue;
        ++hist[t.parent[3]];
        ++n;
    }
    double chi2 = 0;
    for (int h : hist) chi2 += (h - n / 3.0) * (h - n / 3.0) / (n / 3.0);
    CHECK(chi2 < 13.8);  // 2 dof, p = 0.001
}

TEST_CASE("invalid sampling parameters") {
    CHECK_THROWS_AS(sample_topology(1, 0, {}, kCanvas), Error);
    TopologyConfig bad;
    bad.min_edge_frac = 0.3;
    bad.max_edge_frac = 0.1;
    CHECK_THROWS_AS(sample_topology(1, 5, bad, kCanvas), Error);
}

TEST_CASE("structural checker rejects malformed trees") {
    TreeSkeleton t;
    t.parent = {-1, 0, 3, 2};  // 2 and 3 form a cycle
    t.edge_length = {10, 10, 10};
    CHECK_FALSE(check_tree(t, 10).empty());
    t.parent = {-1, 0, 0};
    t.edge_length = {10, -1};
    CHECK_FALSE(check_tree(t, 10).empty());
    t.edge_length = {10, 10};
    CHECK(check_tree(t, 10).empty());
    CHECK_FALSE(check_tree(t, 1).empty());
}

TEST_CASE("two-node layout keeps the exact length and is centered") {
    TreeSkeleton t;
    t.parent = {-1, 0};
    t.edge_length = {100.0};
    const auto l = layout_rest_pose(t, kCanvas, 5);
    CHECK(std::abs((l.rest_position[1] - l.rest_position[0]).norm() - 100.0) < 1e-9);
    const Vec2 mid = 0.5 * (l.rest_position[0] + l.rest_position[1]);
    CHECK((mid - Vec2(256, 256)).norm() < 1e-9);
}

TEST_CASE("layouts satisfy length exactness and margins over many seeds") {
    for (std::uint64_t s = 0; s < 500; ++s) {
        const auto t = layout_rest_pose(sample_topology(s, 10, {}, kCanvas), kCanvas, s);
        const auto errs = check_layout(t, kCanvas, 0.1);
        INFO("seed " << s << ": " << (errs.empty() ? "" : errs.front()));
        REQUIRE(errs.empty());
        for (int b = 0; b < t.bone_count(); ++b) {
            const double d = (t.rest_position[std::size_t(b + 1)] - t.rest_position[std::size_t(t.parent_node(b))]).norm();
            REQUIRE(std::abs(d - t.edge_length[std::size_t(b)]) < 1e-6);
        }
    }
}

TEST_CASE("humanoid layouts are crossing free in at least 95% of seeds") {
    const auto base = humanoid();
    REQUIRE(check_tree(base, 10).empty());
    int clean = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        const auto t = layout_rest_pose(base, kCanvas, s);
        bool crossing = false;
        const auto& p = t.rest_position;
        for (int a = 0; a < t.bone_count() && !crossing; ++a)
            for (int b = a + 1; b < t.bone_count(); ++b) {
                const int a0 = t.parent_node(a), a1 = a + 1, b0 = t.parent_node(b), b1 = b + 1;
                if (a0 == b0 || a0 == b1 || a1 == b0 || a1 == b1) continue;  // adjacent bones share a joint
                if (oracle::segments_touch(p[std::size_t(a0)], p[std::size_t(a1)], p[std::size_t(b0)], p[std::size_t(b1)])) {
                    crossing = true;
                    break;
                }
            }
        clean += !crossing;
        CHECK((count_bone_crossings(t) > 0) == crossing);
    }
    MESSAGE("crossing-free humanoid layouts: " << clean << " / 1000");
    CHECK(clean >= 950);
}

TEST_CASE("segment intersection agrees with the parametric oracle") {
    Rng rng(9);
    auto pt = [&] { return Vec2(double(rng.uniform_int(0, 8)), double(rng.uniform_int(0, 8))); };
    for (int i = 0; i < 20000; ++i) {
        // small integer grid makes collinear and touching cases common
        const Vec2 a = pt(), b = pt(), c = pt(), d = pt();
        INFO(a.transpose() << " " << b.transpose() << " " << c.transpose() << " " << d.transpose());
        REQUIRE(segments_intersect(a, b, c, d) == oracle::segments_touch(a, b, c, d));
    }
}

TEST_CASE("a canvas without room is a layout failure") {
    LayoutConfig cfg;
    cfg.margin_frac = 0.5;
    try {
        layout_rest_pose(humanoid(), kCanvas, 1, cfg);
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::LayoutFailure);
    }
    cfg.margin_frac = 0.1;
    cfg.min_bone_px = 1000;
    CHECK_THROWS_AS(layout_rest_pose(humanoid(), kCanvas, 1, cfg), Error);
}

TEST_CASE("branches and topological order") {
    const auto t = humanoid();
    const auto order = t.topological_bones();
    std::vector<int> pos(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) pos[std::size_t(order[i])] = int(i);
    for (int b = 0; b < t.bone_count(); ++b) {
        const int pn = t.parent_node(b);
        if (pn > 0) CHECK(pos[std::size_t(TreeSkeleton::bone_of_node(pn))] < pos[std::size_t(b)]);
    }
    const auto br = t.branches();
    CHECK(br.size() == 5);  // head, two arms, two legs
    for (const auto& path : br) CHECK(t.parent_node(path.front()) == 0);
}
