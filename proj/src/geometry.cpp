#include "toporig/geometry.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>
#include <unordered_set>

namespace toporig {

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

bool segments_touch(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const double d1 = cross(a, b, c), d2 = cross(a, b, d), d3 = cross(c, d, a), d4 = cross(c, d, b);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
    auto within = [](const Vec2& p, const Vec2& q, const Vec2& r) {
        return std::min(p.x(), q.x()) <= r.x() && r.x() <= std::max(p.x(), q.x()) && std::min(p.y(), q.y()) <= r.y() &&
               r.y() <= std::max(p.y(), q.y());
    };
    return (d1 == 0 && within(a, b, c)) || (d2 == 0 && within(a, b, d)) || (d3 == 0 && within(c, d, a)) ||
           (d4 == 0 && within(c, d, b));
}

} // namespace

double signed_area(const std::vector<Vec2>& poly) {
    double a = 0.0;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
}

double distance_to_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (p - (a + t * ab)).norm();
}

double distance_to_boundary(const std::vector<Vec2>& poly, const Vec2& p) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) best = std::min(best, distance_to_segment(p, poly[i], poly[(i + 1) % n]));
    return best;
}

bool point_in_polygon(const std::vector<Vec2>& poly, const Vec2& p, double tol) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if (distance_to_segment(p, a, b) <= tol) return true;
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
            if (p.x() < x) inside = !inside;
        }
    }
    return inside;
}

bool is_simple_polygon(const std::vector<Vec2>& poly) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    Vec2 lo = poly[0], hi = poly[0];
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        lo = lo.cwiseMin(poly[i]);
        hi = hi.cwiseMax(poly[i]);
        const double len = (poly[(i + 1) % n] - poly[i]).norm();
        if (len == 0.0) return false;  // repeated vertex
        total += len;
    }
    // adjacent edges may share only their common vertex
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[(i + n - 1) % n];
        const Vec2& b = poly[i];
        const Vec2& c = poly[(i + 1) % n];
        if (cross(a, b, c) == 0.0 && (a - b).dot(c - b) > 0.0) return false;
    }
    const double cell = std::max(2.0 * total / double(n), 1e-12);
    const int gw = std::max(1, std::min(1024, int((hi.x() - lo.x()) / cell) + 1));
    const int gh = std::max(1, std::min(1024, int((hi.y() - lo.y()) / cell) + 1));
    const double cw = (hi.x() - lo.x()) / gw + 1e-12, ch = (hi.y() - lo.y()) / gh + 1e-12;
    std::vector<std::vector<int>> grid(std::size_t(gw) * gh);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        const int x0 = std::clamp(int((std::min(a.x(), b.x()) - lo.x()) / cw), 0, gw - 1);
        const int x1 = std::clamp(int((std::max(a.x(), b.x()) - lo.x()) / cw), 0, gw - 1);
        const int y0 = std::clamp(int((std::min(a.y(), b.y()) - lo.y()) / ch), 0, gh - 1);
        const int y1 = std::clamp(int((std::max(a.y(), b.y()) - lo.y()) / ch), 0, gh - 1);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) grid[std::size_t(y) * gw + x].push_back(int(i));
    }
    for (const auto& bucket : grid)
        for (std::size_t s = 0; s < bucket.size(); ++s)
            for (std::size_t t = s + 1; t < bucket.size(); ++t) {
                const std::size_t i = std::size_t(bucket[s]), j = std::size_t(bucket[t]);
                const std::size_t d = i > j ? i - j : j - i;
                if (d == 1 || d == n - 1) continue;
                if (segments_touch(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
            }
    return true;
}

std::vector<Vec2> resample_polygon(const std::vector<Vec2>& poly, double spacing) {
    const std::size_t n = poly.size();
    std::vector<double> cum(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + (poly[(i + 1) % n] - poly[i]).norm();
    const double total = cum[n];
    const int count = std::max(3, int(std::lround(total / spacing)));
    std::vector<Vec2> out;
    out.reserve(std::size_t(count));
    std::size_t seg = 0;
    for (int k = 0; k < count; ++k) {
        const double s = total * double(k) / double(count);
        while (seg + 1 < n && cum[seg + 1] <= s) ++seg;
        const double len = cum[seg + 1] - cum[seg];
        const double t = len > 0.0 ? (s - cum[seg]) / len : 0.0;
        out.push_back(poly[seg] + t * (poly[(seg + 1) % n] - poly[seg]));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<Vec2> bezier_loop(const std::vector<Vec2>& control, int samples_per_segment) {
    const std::size_t n = control.size();
    std::vector<Vec2> out;
    out.reserve(n * std::size_t(samples_per_segment));
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& p0 = control[(i + n - 1) % n];
        const Vec2& p1 = control[i];
        const Vec2& p2 = control[(i + 1) % n];
        const Vec2& p3 = control[(i + 2) % n];
        const Vec2 b1 = p1 + (p2 - p0) / 6.0;
        const Vec2 b2 = p2 - (p3 - p1) / 6.0;
        for (int j = 0; j < samples_per_segment; ++j) {
            const double t = double(j) / double(samples_per_segment);
            const double u = 1.0 - t;
            out.push_back(u * u * u * p1 + 3.0 * u * u * t * b1 + 3.0 * u * t * t * b2 + t * t * t * p2);
        }
    }
    return out;
}

double bone_aligned_aspect(const std::vector<Vec2>& poly, const Vec2& bone_start, const Vec2& bone_end) {
    const Vec2 axis = (bone_end - bone_start).normalized();
    const Vec2 perp(-axis.y(), axis.x());
    double umin = std::numeric_limits<double>::infinity(), umax = -umin, vmin = umin, vmax = -umin;
    for (const auto& p : poly) {
        const Vec2 d = p - bone_start;
        umin = std::min(umin, d.dot(axis));
        umax = std::max(umax, d.dot(axis));
        vmin = std::min(vmin, d.dot(perp));
        vmax = std::max(vmax, d.dot(perp));
    }
    return (vmax - vmin) / (umax - umin);
}

std::vector<std::string> check_part_shape(const PartShape& shape, const ShapeConfig& cfg) {
    std::vector<std::string> errs;
    const auto& poly = shape.boundary;
    if (poly.size() < 3) {
        errs.push_back("boundary has fewer than 3 points");
        return errs;
    }
    if (!is_simple_polygon(poly)) errs.push_back("boundary is not simple");
    if (!(signed_area(poly) > 0.0)) errs.push_back("boundary is not counter-clockwise");
    const double len = (shape.bone_end - shape.bone_start).norm();
    const double tol = 1e-9 * std::max(len, 1.0);
    if (!point_in_polygon(poly, shape.bone_start, tol)) errs.push_back("bone start outside shape");
    if (!point_in_polygon(poly, shape.bone_end, tol)) errs.push_back("bone end outside shape");
    if (bone_aligned_aspect(poly, shape.bone_start, shape.bone_end) > cfg.max_aspect)
        errs.push_back("aspect ratio exceeds bound");
    const Vec2 axis = (shape.bone_end - shape.bone_start) / len;
    for (const auto& p : poly) {
        const double u = (p - shape.bone_start).dot(axis);
        if (u < -cfg.max_overhang * len - tol || u > (1.0 + cfg.max_overhang) * len + tol) {
            errs.push_back("shape overhangs bone by more than allowed");
            break;
        }
    }
    return errs;
}

PartShape sample_part_shape(int owner_bone, const Vec2& bone_start, const Vec2& bone_end, std::uint64_t seed,
                            const ShapeConfig& cfg) {
    const double len = (bone_end - bone_start).norm();
    if (!(len > 0.0)) throw Error(ErrorCode::InvalidInput, "bone has zero length");
    if (cfg.min_points_per_side < 1 || cfg.max_points_per_side < cfg.min_points_per_side || !(cfg.max_aspect > 0.0) ||
        cfg.samples_per_segment < 1)
        throw Error(ErrorCode::InvalidConfig, "invalid shape config");
    const Vec2 axis = (bone_end - bone_start) / len;
    const Vec2 perp(-axis.y(), axis.x());
    const double min_aspect = std::min(cfg.min_aspect, cfg.max_aspect);
    const double cap_max = std::min(0.06, 0.6 * cfg.max_overhang);

    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        Rng rng(derive_seed(seed, std::uint64_t(attempt)));
        const double aspect = rng.uniform(min_aspect, cfg.max_aspect);
        const double half = 0.5 * aspect * len;
        auto side = [&](double sign, std::vector<Vec2>& out) {
            const int k = int(rng.uniform_int(cfg.min_points_per_side, cfg.max_points_per_side));
            std::vector<Vec2> pts;
            for (int i = 0; i < k; ++i) {
                const double u = len * (double(i) + rng.uniform(0.25, 0.75)) / double(k);
                const double v = sign * half * rng.uniform(0.5, 1.0);
                pts.push_back(bone_start + u * axis + v * perp);
            }
            if (sign < 0) std::reverse(pts.begin(), pts.end());
            out.insert(out.end(), pts.begin(), pts.end());
        };
        PartShape shape;
        shape.owner_bone = owner_bone;
        shape.bone_start = bone_start;
        shape.bone_end = bone_end;
        auto& ctrl = shape.control_points;
        ctrl.push_back(bone_start - len * rng.uniform(0.02, cap_max) * axis);
        side(+1.0, ctrl);
        ctrl.push_back(bone_end + len * rng.uniform(0.02, cap_max) * axis);
        side(-1.0, ctrl);
        shape.boundary = bezier_loop(ctrl, cfg.samples_per_segment);
        if (signed_area(shape.boundary) < 0.0) {
            // +perp is clockwise when y points down
            std::reverse(ctrl.begin(), ctrl.end());
            shape.boundary = bezier_loop(ctrl, cfg.samples_per_segment);
        }
        if (check_part_shape(shape, cfg).empty()) return shape;
    }
    throw Error(ErrorCode::ShapeGeneration, "could not sample a valid part shape within the retry budget");
}

// ---------------------------------------------------------------------------
// Triangulation

double Triangulation::area() const {
    double a = 0.0;
    for (const auto& t : triangles)
        a += 0.5 * cross(vertices[std::size_t(t[0])], vertices[std::size_t(t[1])], vertices[std::size_t(t[2])]);
    return a;
}

int Triangulation::edge_count() const {
    std::unordered_set<std::uint64_t> edges;
    for (const auto& t : triangles)
        for (int k = 0; k < 3; ++k) {
            const auto a = std::uint32_t(std::min(t[k], t[(k + 1) % 3]));
            const auto b = std::uint32_t(std::max(t[k], t[(k + 1) % 3]));
            edges.insert((std::uint64_t(a) << 32) | b);
        }
    return int(edges.size());
}

double Triangulation::median_edge_length() const {
    std::vector<double> lens;
    for (const auto& t : triangles)
        for (int k = 0; k < 3; ++k) {
            if (t[k] > t[(k + 1) % 3]) continue;  // interior edges counted once from one side
            lens.push_back((vertices[std::size_t(t[k])] - vertices[std::size_t(t[(k + 1) % 3])]).norm());
        }
    if (lens.empty()) return 0.0;
    std::nth_element(lens.begin(), lens.begin() + std::ptrdiff_t(lens.size() / 2), lens.end());
    return lens[lens.size() / 2];
}

namespace {

std::uint64_t edge_key(int a, int b) { return (std::uint64_t(std::uint32_t(a)) << 32) | std::uint32_t(b); }
std::uint64_t undirected_key(int a, int b) { return a < b ? edge_key(a, b) : edge_key(b, a); }

double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const double adx = a.x() - d.x(), ady = a.y() - d.y();
    const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
    const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
    const double ad = adx * adx + ady * ady, bd = bdx * bdx + bdy * bdy, cd = cdx * cdx + cdy * cdy;
    return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

/// Mutable triangle soup with directed-edge lookup.
class Mesher {
public:
    Mesher(std::vector<Vec2> verts, double scale) : v_(std::move(verts)), scale_(scale) {}

    std::vector<Vec2>& vertices() { return v_; }
    std::vector<std::array<int, 3>>& triangles() { return tris_; }

    void add_triangle(int a, int b, int c) {
        const int id = int(tris_.size());
        tris_.push_back({a, b, c});
        index(id);
    }

    void constrain(int a, int b) { constrained_.insert(undirected_key(a, b)); }

    void legalize_all() {
        std::vector<std::pair<int, int>> stack;
        for (const auto& t : tris_)
            for (int k = 0; k < 3; ++k) stack.emplace_back(t[k], t[(k + 1) % 3]);
        legalize(stack);
    }

    /// Inserts `p` strictly inside some triangle; returns false if `p` is not
    /// clearly interior to any triangle (on an edge or outside).
    bool insert(const Vec2& p) {
        int found = -1;
        for (int i = 0; i < int(tris_.size()); ++i) {
            const auto& t = tris_[std::size_t(i)];
            const Vec2 &a = v_[std::size_t(t[0])], &b = v_[std::size_t(t[1])], &c = v_[std::size_t(t[2])];
            const double area = cross(a, b, c);
            const double eps = 1e-9 * area;
            if (cross(a, b, p) > eps && cross(b, c, p) > eps && cross(c, a, p) > eps) {
                found = i;
                break;
            }
        }
        if (found < 0) return false;
        const int pi = int(v_.size());
        v_.push_back(p);
        const auto t = tris_[std::size_t(found)];
        unindex(found);
        tris_[std::size_t(found)] = {t[0], t[1], pi};
        index(found);
        add_triangle(t[1], t[2], pi);
        add_triangle(t[2], t[0], pi);
        std::vector<std::pair<int, int>> stack{{t[0], t[1]}, {t[1], t[2]}, {t[2], t[0]}};
        legalize(stack);
        return true;
    }

private:
    void index(int id) {
        const auto& t = tris_[std::size_t(id)];
        for (int k = 0; k < 3; ++k) edges_[edge_key(t[k], t[(k + 1) % 3])] = id;
    }
    void unindex(int id) {
        const auto& t = tris_[std::size_t(id)];
        for (int k = 0; k < 3; ++k) edges_.erase(edge_key(t[k], t[(k + 1) % 3]));
    }

    static int opposite(const std::array<int, 3>& t, int a, int b) {
        for (int k = 0; k < 3; ++k)
            if (t[k] != a && t[k] != b) return t[k];
        return -1;
    }

    void legalize(std::vector<std::pair<int, int>>& stack) {
        const double tol = 1e-12 * scale_ * scale_ * scale_ * scale_;
        std::size_t guard = 0;
        const std::size_t guard_max = 64 * (tris_.size() + 16) * (tris_.size() + 16);
        while (!stack.empty() && guard++ < guard_max) {
            auto [a, b] = stack.back();
            stack.pop_back();
            if (constrained_.count(undirected_key(a, b))) continue;
            auto it1 = edges_.find(edge_key(a, b));
            auto it2 = edges_.find(edge_key(b, a));
            if (it1 == edges_.end() || it2 == edges_.end()) continue;
            const int t1 = it1->second, t2 = it2->second;
            const int c = opposite(tris_[std::size_t(t1)], a, b);
            const int d = opposite(tris_[std::size_t(t2)], a, b);
            const Vec2 &pa = v_[std::size_t(a)], &pb = v_[std::size_t(b)], &pc = v_[std::size_t(c)],
                       &pd = v_[std::size_t(d)];
            // t1 = (a, b, c) ccw, t2 = (b, a, d) ccw
            if (incircle(pa, pb, pc, pd) <= tol) continue;
            if (cross(pc, pa, pd) <= 0.0 || cross(pd, pb, pc) <= 0.0) continue;  // flip would fold
            unindex(t1);
            unindex(t2);
            tris_[std::size_t(t1)] = {c, a, d};
            tris_[std::size_t(t2)] = {d, b, c};
            index(t1);
            index(t2);
            stack.emplace_back(a, d);
            stack.emplace_back(d, b);
            stack.emplace_back(b, c);
            stack.emplace_back(c, a);
        }
    }

    std::vector<Vec2> v_;
    double scale_;
    std::vector<std::array<int, 3>> tris_;
    std::unordered_map<std::uint64_t, int> edges_;
    std::unordered_set<std::uint64_t> constrained_;
};

std::vector<Vec2> clean_polygon(const std::vector<Vec2>& input) {
    std::vector<Vec2> poly;
    for (const auto& p : input)
        if (poly.empty() || p != poly.back()) poly.push_back(p);
    while (poly.size() > 1 && poly.front() == poly.back()) poly.pop_back();
    bool changed = true;
    while (changed && poly.size() >= 3) {
        changed = false;
        for (std::size_t i = 0; i < poly.size() && poly.size() >= 3; ++i) {
            const std::size_t n = poly.size();
            if (cross(poly[(i + n - 1) % n], poly[i], poly[(i + 1) % n]) == 0.0) {
                poly.erase(poly.begin() + std::ptrdiff_t(i));
                changed = true;
                --i;
            }
        }
    }
    return poly;
}

void ear_clip(Mesher& mesher, int count) {
    const auto& v = mesher.vertices();
    const auto n = static_cast<std::size_t>(count);
    std::vector<std::size_t> prev(n), next(n);
    for (std::size_t i = 0; i < n; ++i) {
        prev[i] = (i + n - 1) % n;
        next[i] = (i + 1) % n;
    }
    auto reflex = [&](std::size_t i) { return cross(v[prev[i]], v[i], v[next[i]]) <= 0.0; };
    std::vector<char> is_reflex(n);
    for (std::size_t i = 0; i < n; ++i) is_reflex[i] = reflex(i);

    auto is_ear = [&](std::size_t i) {
        if (is_reflex[i]) return false;
        const std::size_t p = prev[i], q = next[i];
        const Vec2 &a = v[p], &b = v[i], &c = v[q];
        for (std::size_t j = next[q]; j != p; j = next[j]) {
            if (!is_reflex[j]) continue;
            const Vec2& x = v[j];
            if (x == a || x == b || x == c) continue;
            if (cross(a, b, x) >= 0.0 && cross(b, c, x) >= 0.0 && cross(c, a, x) >= 0.0) return false;
        }
        return true;
    };

    std::size_t remaining = n, cur = 0, misses = 0;
    while (remaining > 3) {
        if (is_ear(cur)) {
            const std::size_t p = prev[cur], q = next[cur];
            mesher.add_triangle(int(p), int(cur), int(q));
            next[p] = q;
            prev[q] = p;
            --remaining;
            is_reflex[p] = reflex(p);
            is_reflex[q] = reflex(q);
            cur = p;
            misses = 0;
        } else {
            cur = next[cur];
            if (++misses > remaining) throw Error(ErrorCode::InvalidInput, "triangulate: polygon has no ear (not simple?)");
        }
    }
    const std::size_t p = prev[cur], q = next[cur];
    if (cross(v[p], v[cur], v[q]) > 0.0) mesher.add_triangle(int(p), int(cur), int(q));
}

} // namespace

Triangulation triangulate(const std::vector<Vec2>& polygon, double target_edge) {
    if (!(target_edge > 0.0)) throw Error(ErrorCode::InvalidInput, "triangulate: target_edge must be positive");
    auto poly = clean_polygon(polygon);
    if (poly.size() < 3 || !is_simple_polygon(poly))
        throw Error(ErrorCode::InvalidInput, "triangulate: polygon is not simple");
    const double area = signed_area(poly);
    if (area == 0.0) throw Error(ErrorCode::InvalidInput, "triangulate: polygon has zero area");
    if (area < 0.0) std::reverse(poly.begin(), poly.end());

    Vec2 lo = poly[0], hi = poly[0];
    for (const auto& p : poly) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double scale = std::max((hi - lo).maxCoeff(), 1e-12);
    const int n = int(poly.size());
    Mesher mesher(poly, scale);
    ear_clip(mesher, n);
    for (int i = 0; i < n; ++i) mesher.constrain(i, (i + 1) % n);
    mesher.legalize_all();

    // Steiner points on a triangular lattice, kept half a spacing off the boundary
    const double row = target_edge * std::sqrt(3.0) / 2.0;
    for (int j = 0;; ++j) {
        const double y = lo.y() + row * j;
        if (y > hi.y()) break;
        const double shift = (j % 2) ? 0.5 * target_edge : 0.0;
        for (int i = 0;; ++i) {
            const double x = lo.x() + shift + target_edge * i;
            if (x > hi.x()) break;
            const Vec2 p(x, y);
            if (!point_in_polygon(poly, p, 0.0)) continue;
            if (distance_to_boundary(poly, p) < 0.5 * target_edge) continue;
            mesher.insert(p);
        }
    }

    Triangulation out;
    out.boundary_count = n;
    out.vertices = std::move(mesher.vertices());
    out.triangles = std::move(mesher.triangles());
    return out;
}

} // namespace toporig
