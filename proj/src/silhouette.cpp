#include "toporig/service.hpp"

#include <deque>
#include <unordered_map>

namespace toporig {

std::vector<std::uint8_t> silhouette_mask(const Image& rgba, int alpha_threshold) {
    if (rgba.channels != 4) throw Error(ErrorCode::InvalidInput, "silhouette needs an RGBA image");
    const int w = rgba.width, h = rgba.height;
    const auto at = [w](int x, int y) { return std::size_t(y) * std::size_t(w) + std::size_t(x); };
    std::vector<std::uint8_t> inside(std::size_t(w) * std::size_t(h), 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) inside[at(x, y)] = rgba.pixel(x, y)[3] >= alpha_threshold;

    std::vector<int> label(inside.size(), -1);
    int best = -1;
    std::size_t best_size = 0;
    std::vector<int> stack;
    int next = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!inside[at(x, y)] || label[at(x, y)] >= 0) continue;
            const int id = next++;
            std::size_t size = 0;
            stack.assign(1, int(at(x, y)));
            label[at(x, y)] = id;
            while (!stack.empty()) {
                const int p = stack.back();
                stack.pop_back();
                ++size;
                const int px = p % w, py = p / w;
                const int nx[4] = {px - 1, px + 1, px, px}, ny[4] = {py, py, py - 1, py + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
                    const std::size_t q = at(nx[k], ny[k]);
                    if (inside[q] && label[q] < 0) {
                        label[q] = id;
                        stack.push_back(int(q));
                    }
                }
            }
            if (size > best_size) {
                best_size = size;
                best = id;
            }
        }
    std::vector<std::uint8_t> out(inside.size(), 0);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = best >= 0 && label[i] == best;
    return out;
}

namespace {

struct Grid {
    int w, h;
    std::vector<std::uint8_t> v;
    std::uint8_t& at(int x, int y) { return v[std::size_t(y) * std::size_t(w) + std::size_t(x)]; }
    std::uint8_t get(int x, int y) const {
        return x < 0 || y < 0 || x >= w || y >= h ? 0 : v[std::size_t(y) * std::size_t(w) + std::size_t(x)];
    }
};

void dilate(Grid& g) {
    Grid out = g;
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x) {
            if (g.get(x, y)) continue;
            for (int dy = -1; dy <= 1 && !out.at(x, y); ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    if (g.get(x + dx, y + dy)) {
                        out.at(x, y) = 1;
                        break;
                    }
        }
    g = std::move(out);
}

bool fill_holes(Grid& g) {
    // background reachable from the border stays background
    std::vector<std::uint8_t> outside(g.v.size(), 0);
    std::deque<std::pair<int, int>> queue;
    auto push = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= g.w || y >= g.h) return;
        const std::size_t i = std::size_t(y) * std::size_t(g.w) + std::size_t(x);
        if (g.v[i] || outside[i]) return;
        outside[i] = 1;
        queue.emplace_back(x, y);
    };
    for (int x = 0; x < g.w; ++x) push(x, 0), push(x, g.h - 1);
    for (int y = 0; y < g.h; ++y) push(0, y), push(g.w - 1, y);
    while (!queue.empty()) {
        const auto [x, y] = queue.front();
        queue.pop_front();
        push(x - 1, y);
        push(x + 1, y);
        push(x, y - 1);
        push(x, y + 1);
    }
    bool changed = false;
    for (std::size_t i = 0; i < g.v.size(); ++i)
        if (!g.v[i] && !outside[i]) g.v[i] = 1, changed = true;
    return changed;
}

bool fix_pinches(Grid& g) {
    bool changed = false;
    for (int y = 0; y + 1 < g.h; ++y)
        for (int x = 0; x + 1 < g.w; ++x) {
            const bool a = g.get(x, y), b = g.get(x + 1, y), c = g.get(x, y + 1), d = g.get(x + 1, y + 1);
            if ((a && d && !b && !c) || (b && c && !a && !d)) {
                g.at(x, y) = g.at(x + 1, y) = g.at(x, y + 1) = g.at(x + 1, y + 1) = 1;
                changed = true;
            }
        }
    return changed;
}

void douglas_peucker(const std::vector<Vec2>& pts, std::size_t lo, std::size_t hi, double tol, std::vector<char>& keep) {
    if (hi <= lo + 1) return;
    double best = -1.0;
    std::size_t idx = lo;
    const Vec2& a = pts[lo];
    const Vec2& b = pts[hi % pts.size()];
    for (std::size_t i = lo + 1; i < hi; ++i) {
        const double d = distance_to_segment(pts[i], a, b);
        if (d > best) best = d, idx = i;
    }
    if (best <= tol) return;
    keep[idx] = 1;
    douglas_peucker(pts, lo, idx, tol, keep);
    douglas_peucker(pts, idx, hi, tol, keep);
}

std::vector<Vec2> simplify_closed(const std::vector<Vec2>& pts, double tol) {
    const std::size_t n = pts.size();
    std::size_t far = 0;
    double best = -1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double d = (pts[i] - pts[0]).squaredNorm();
        if (d > best) best = d, far = i;
    }
    std::vector<char> keep(n, 0);
    keep[0] = keep[far] = 1;
    douglas_peucker(pts, 0, far, tol, keep);
    douglas_peucker(pts, far, n, tol, keep);
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) out.push_back(pts[i]);
    return out;
}

} // namespace

std::vector<Vec2> silhouette_outline(const Image& rgba, const SilhouetteOptions& options) {
    const auto mask = silhouette_mask(rgba, options.alpha_threshold);
    const int pad = std::max(options.dilation, 0) + 2;
    Grid g{rgba.width + 2 * pad, rgba.height + 2 * pad, {}};
    g.v.assign(std::size_t(g.w) * std::size_t(g.h), 0);
    bool any = false;
    for (int y = 0; y < rgba.height; ++y)
        for (int x = 0; x < rgba.width; ++x)
            if (mask[std::size_t(y) * std::size_t(rgba.width) + std::size_t(x)]) g.at(x + pad, y + pad) = 1, any = true;
    if (!any) throw Error(ErrorCode::InvalidInput, "image has an empty silhouette");
    for (int i = 0; i < options.dilation; ++i) dilate(g);
    for (bool changed = true; changed;) {
        changed = fill_holes(g);
        changed = fix_pinches(g) || changed;
    }

    // directed pixel edges with the region on the left in (x, y)
    const int vw = g.w + 1;
    auto vid = [vw](int x, int y) { return std::int64_t(y) * vw + x; };
    std::unordered_map<std::int64_t, std::int64_t> next;
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x) {
            if (!g.get(x, y)) continue;
            if (!g.get(x, y - 1)) next[vid(x, y)] = vid(x + 1, y);
            if (!g.get(x + 1, y)) next[vid(x + 1, y)] = vid(x + 1, y + 1);
            if (!g.get(x, y + 1)) next[vid(x + 1, y + 1)] = vid(x, y + 1);
            if (!g.get(x - 1, y)) next[vid(x, y + 1)] = vid(x, y);
        }
    std::vector<Vec2> loop;
    std::int64_t start = next.begin()->first;
    for (const auto& [from, to] : next) start = std::min(start, from);
    std::int64_t cur = start;
    do {
        loop.emplace_back(double(cur % vw - pad), double(cur / vw - pad));
        cur = next.at(cur);
    } while (cur != start && loop.size() <= next.size());
    if (loop.size() != next.size()) throw Error(ErrorCode::InvalidInput, "silhouette boundary is not a single loop");

    std::vector<Vec2> corners;
    for (std::size_t i = 0; i < loop.size(); ++i) {
        const Vec2& a = loop[(i + loop.size() - 1) % loop.size()];
        const Vec2& b = loop[i];
        const Vec2& c = loop[(i + 1) % loop.size()];
        const Vec2 d1 = b - a, d2 = c - b;
        if (d1.x() * d2.y() - d1.y() * d2.x() != 0.0) corners.push_back(b);
    }
    for (double tol = options.tolerance; tol >= 1e-3; tol *= 0.5) {
        auto simple = simplify_closed(corners, tol);
        if (simple.size() >= 3 && std::abs(signed_area(simple)) > 0 && is_simple_polygon(simple)) {
            if (signed_area(simple) < 0) std::reverse(simple.begin(), simple.end());
            return simple;
        }
    }
    if (signed_area(corners) < 0) std::reverse(corners.begin(), corners.end());
    return corners;
}

Triangulation mesh_silhouette(const Image& rgba, const SilhouetteOptions& options) {
    return triangulate(silhouette_outline(rgba, options), options.target_edge);
}

} // namespace toporig
