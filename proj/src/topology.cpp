#include "toporig/topology.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace toporig {

std::vector<std::vector<int>> TreeSkeleton::children() const {
    std::vector<std::vector<int>> out(parent.size());
    for (int n = 1; n < node_count(); ++n) out[std::size_t(parent[std::size_t(n)])].push_back(n);
    return out;
}

std::vector<std::vector<int>> TreeSkeleton::branches() const {
    const auto kids = children();
    std::vector<std::vector<int>> out;
    std::vector<int> path;
    // iterative DFS over (node, next child index)
    std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < kids[std::size_t(node)].size()) {
            const int child = kids[std::size_t(node)][next++];
            path.push_back(bone_of_node(child));
            stack.push_back({child, 0});
            continue;
        }
        if (kids[std::size_t(node)].empty() && node != 0) out.push_back(path);
        stack.pop_back();
        if (!path.empty() && !stack.empty()) path.pop_back();
    }
    return out;
}

std::vector<int> TreeSkeleton::topological_bones() const {
    const auto kids = children();
    std::vector<int> order;
    std::vector<int> queue{0};
    for (std::size_t i = 0; i < queue.size(); ++i)
        for (int c : kids[std::size_t(queue[i])]) {
            queue.push_back(c);
            order.push_back(bone_of_node(c));
        }
    return order;
}

TreeSkeleton sample_topology(std::uint64_t seed, int max_bones, const TopologyConfig& cfg, const Extent& canvas) {
    if (max_bones < 1) throw Error(ErrorCode::InvalidConfig, "max_bones must be >= 1");
    if (!(cfg.min_edge_frac > 0.0) || cfg.max_edge_frac < cfg.min_edge_frac)
        throw Error(ErrorCode::InvalidConfig, "edge length range must be positive and ordered");
    Rng rng(seed);
    const int nodes = int(rng.uniform_int(2, max_bones + 1));
    const double diag = canvas.diagonal();
    TreeSkeleton tree;
    tree.parent.assign(std::size_t(nodes), -1);
    tree.edge_length.resize(std::size_t(nodes - 1));
    for (int i = 1; i < nodes; ++i) {
        tree.parent[std::size_t(i)] = int(rng.uniform_int(0, i - 1));
        tree.edge_length[std::size_t(i - 1)] = diag * rng.uniform(cfg.min_edge_frac, cfg.max_edge_frac);
    }
    return tree;
}

TreeSkeleton layout_rest_pose(TreeSkeleton tree, const Extent& canvas, std::uint64_t seed, const LayoutConfig& cfg) {
    if (auto errs = check_tree(tree, std::numeric_limits<int>::max()); !errs.empty())
        throw Error(ErrorCode::InvalidInput, "layout_rest_pose: " + errs.front());
    const double avail_w = canvas.width * (1.0 - 2.0 * cfg.margin_frac);
    const double avail_h = canvas.height * (1.0 - 2.0 * cfg.margin_frac);
    if (!(avail_w > 0.0) || !(avail_h > 0.0))
        throw Error(ErrorCode::LayoutFailure, "canvas has no room inside its margins");

    const int n = tree.node_count();
    const int bones = tree.bone_count();
    const double mean_len =
        std::accumulate(tree.edge_length.begin(), tree.edge_length.end(), 0.0) / double(std::max(bones, 1));
    const double k = mean_len;

    Rng rng(seed);
    std::vector<Vec2> pos(static_cast<std::size_t>(n));
    const double spread = mean_len * std::sqrt(double(n));
    for (auto& p : pos) p = Vec2(rng.uniform(-spread, spread), rng.uniform(-spread, spread));

    std::vector<Vec2> disp(static_cast<std::size_t>(n));
    const double t0 = cfg.initial_temperature * spread;
    for (int it = 0; it < cfg.iterations; ++it) {
        const double temp = t0 * (1.0 - double(it) / double(cfg.iterations)) + 1e-3 * k;
        std::fill(disp.begin(), disp.end(), Vec2::Zero());
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                Vec2 d = pos[std::size_t(i)] - pos[std::size_t(j)];
                double dist = d.norm();
                if (dist < 1e-9) {
                    // coincident nodes: push apart along a fixed axis
                    d = Vec2(1e-3 * k, 0.0);
                    dist = d.norm();
                }
                const Vec2 f = d / dist * (k * k / dist);
                disp[std::size_t(i)] += f;
                disp[std::size_t(j)] -= f;
            }
        for (int b = 0; b < bones; ++b) {
            const int c = TreeSkeleton::child_node(b), p = tree.parent_node(b);
            const Vec2 d = pos[std::size_t(c)] - pos[std::size_t(p)];
            const double dist = std::max(d.norm(), 1e-9);
            const Vec2 f = d / dist * ((dist - tree.edge_length[std::size_t(b)]) * dist / tree.edge_length[std::size_t(b)]);
            disp[std::size_t(c)] -= f;
            disp[std::size_t(p)] += f;
        }
        for (int i = 0; i < n; ++i) {
            const double len = disp[std::size_t(i)].norm();
            if (len > 0.0) pos[std::size_t(i)] += disp[std::size_t(i)] / len * std::min(len, temp);
        }
    }

    // exact lengths, directions kept
    std::vector<Vec2> fixed(static_cast<std::size_t>(n));
    fixed[0] = pos[0];
    for (int b : tree.topological_bones()) {
        const int c = TreeSkeleton::child_node(b), p = tree.parent_node(b);
        Vec2 dir = pos[std::size_t(c)] - pos[std::size_t(p)];
        const double len = dir.norm();
        dir = len > 1e-12 ? Vec2(dir / len) : Vec2(1.0, 0.0);
        fixed[std::size_t(c)] = fixed[std::size_t(p)] + tree.edge_length[std::size_t(b)] * dir;
    }

    Vec2 lo = fixed[0], hi = fixed[0];
    for (const auto& p : fixed) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec2 size = hi - lo;
    double scale = 1.0;
    if (size.x() > avail_w) scale = std::min(scale, avail_w / size.x());
    if (size.y() > avail_h) scale = std::min(scale, avail_h / size.y());
    const Vec2 center = 0.5 * (lo + hi);
    const Vec2 canvas_center(0.5 * canvas.width, 0.5 * canvas.height);
    for (auto& p : fixed) p = canvas_center + scale * (p - center);
    for (auto& l : tree.edge_length) {
        l *= scale;
        if (l < cfg.min_bone_px) throw Error(ErrorCode::LayoutFailure, "canvas too small: bone shrinks below minimum length");
    }
    // re-derive children from scaled parents so lengths stay exact after scaling
    for (int b : tree.topological_bones()) {
        const int c = TreeSkeleton::child_node(b), p = tree.parent_node(b);
        const Vec2 dir = (fixed[std::size_t(c)] - fixed[std::size_t(p)]).normalized();
        fixed[std::size_t(c)] = fixed[std::size_t(p)] + tree.edge_length[std::size_t(b)] * dir;
    }
    tree.rest_position = std::move(fixed);
    return tree;
}

std::vector<std::string> check_tree(const TreeSkeleton& tree, int max_bones) {
    std::vector<std::string> errs;
    const int n = tree.node_count();
    if (n < 2) errs.push_back("tree needs at least two nodes");
    if (n >= 1 && tree.parent[0] != -1) errs.push_back("node 0 must be the root");
    if (tree.bone_count() > max_bones) errs.push_back("bone count exceeds maximum");
    if (int(tree.edge_length.size()) != std::max(n - 1, 0)) errs.push_back("edge length count mismatch");
    for (int i = 1; i < n; ++i) {
        const int p = tree.parent[std::size_t(i)];
        if (p < 0 || p >= n) {
            errs.push_back("node " + std::to_string(i) + " has no valid parent");
            continue;
        }
    }
    if (!errs.empty()) return errs;
    // every node must reach the root without revisiting (acyclic, connected)
    for (int i = 1; i < n; ++i) {
        int cur = i, steps = 0;
        while (cur != 0 && steps <= n) {
            cur = tree.parent[std::size_t(cur)];
            ++steps;
        }
        if (cur != 0) errs.push_back("node " + std::to_string(i) + " is on a cycle");
    }
    for (std::size_t b = 0; b < tree.edge_length.size(); ++b)
        if (!(tree.edge_length[b] > 0.0)) errs.push_back("bone " + std::to_string(b) + " has non-positive length");
    return errs;
}

std::vector<std::string> check_layout(const TreeSkeleton& tree, const Extent& canvas, double margin_frac,
                                      double length_tol) {
    std::vector<std::string> errs;
    if (int(tree.rest_position.size()) != tree.node_count()) {
        errs.push_back("rest positions missing");
        return errs;
    }
    for (int b = 0; b < tree.bone_count(); ++b) {
        const double d = (tree.rest_position[std::size_t(TreeSkeleton::child_node(b))] -
                          tree.rest_position[std::size_t(tree.parent_node(b))])
                             .norm();
        if (std::abs(d - tree.edge_length[std::size_t(b)]) > length_tol)
            errs.push_back("bone " + std::to_string(b) + " length differs from rest length");
    }
    const double mx = canvas.width * margin_frac, my = canvas.height * margin_frac;
    const double eps = 1e-9 * canvas.diagonal();
    for (int i = 0; i < tree.node_count(); ++i) {
        const Vec2& p = tree.rest_position[std::size_t(i)];
        if (p.x() < mx - eps || p.x() > canvas.width - mx + eps || p.y() < my - eps || p.y() > canvas.height - my + eps)
            errs.push_back("node " + std::to_string(i) + " outside canvas margin");
    }
    return errs;
}

namespace {
double orient(const Vec2& a, const Vec2& b, const Vec2& c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}
bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
    return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) && std::min(a.y(), b.y()) <= p.y() &&
           p.y() <= std::max(a.y(), b.y());
}
} // namespace

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const double o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
    if (((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) && ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0))) return true;
    if (o1 == 0 && on_segment(a, b, c)) return true;
    if (o2 == 0 && on_segment(a, b, d)) return true;
    if (o3 == 0 && on_segment(c, d, a)) return true;
    if (o4 == 0 && on_segment(c, d, b)) return true;
    return false;
}

int count_bone_crossings(const TreeSkeleton& tree) {
    int count = 0;
    for (int a = 0; a < tree.bone_count(); ++a)
        for (int b = a + 1; b < tree.bone_count(); ++b) {
            const int a0 = tree.parent_node(a), a1 = TreeSkeleton::child_node(a);
            const int b0 = tree.parent_node(b), b1 = TreeSkeleton::child_node(b);
            if (a0 == b0 || a0 == b1 || a1 == b0 || a1 == b1) continue;  // adjacent
            if (segments_intersect(tree.rest_position[std::size_t(a0)], tree.rest_position[std::size_t(a1)],
                                   tree.rest_position[std::size_t(b0)], tree.rest_position[std::size_t(b1)]))
                ++count;
        }
    return count;
}

} // namespace toporig
