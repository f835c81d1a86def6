#pragma once

#include "toporig/common.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace toporig {

// ---------------------------------------------------------------------------
// Polygon predicates

/// Signed area; positive for counter-clockwise order in (x, y).
double signed_area(const std::vector<Vec2>& poly);

/// True if `p` is inside the closed polygon or within `tol` of its boundary.
bool point_in_polygon(const std::vector<Vec2>& poly, const Vec2& p, double tol = 1e-9);

double distance_to_segment(const Vec2& p, const Vec2& a, const Vec2& b);
double distance_to_boundary(const std::vector<Vec2>& poly, const Vec2& p);

/// Closed polygon with no two non-adjacent edges touching and no adjacent
/// edges folding back on each other. Uses a uniform grid so cost is ~linear.
bool is_simple_polygon(const std::vector<Vec2>& poly);

/// Arc-length resampling of a closed polygon to roughly `spacing`.
std::vector<Vec2> resample_polygon(const std::vector<Vec2>& poly, double spacing);

// ---------------------------------------------------------------------------
// Part shapes

struct ShapeConfig {
    int min_points_per_side = 2;
    int max_points_per_side = 5;
    /// Upper bound on (perpendicular extent / axial extent).
    double max_aspect = 0.6;
    /// Lower bound on the sampled per-shape aspect.
    double min_aspect = 0.15;
    /// Overhang past each bone endpoint, fraction of bone length.
    double max_overhang = 0.1;
    int samples_per_segment = 64;
    int max_retries = 20;
};

struct PartShape {
    int owner_bone = -1;
    Vec2 bone_start = Vec2::Zero();
    Vec2 bone_end = Vec2::Zero();
    /// Points the closed spline interpolates, counter-clockwise.
    std::vector<Vec2> control_points;
    /// Dense polygon sampled from the spline, counter-clockwise.
    std::vector<Vec2> boundary;
};

/// Samples a closed Bezier blob around the bone. Rejection-resamples with
/// derived sub-seeds; throws ShapeGeneration once `max_retries` is exhausted.
PartShape sample_part_shape(int owner_bone, const Vec2& bone_start, const Vec2& bone_end, std::uint64_t seed,
                            const ShapeConfig& cfg = {});

/// Closed cubic Bezier spline through `control` (Catmull-Rom tangents), each
/// segment sampled at `samples_per_segment` uniform parameter steps.
std::vector<Vec2> bezier_loop(const std::vector<Vec2>& control, int samples_per_segment);

/// Perpendicular over axial extent of `poly` in the frame of the bone axis.
double bone_aligned_aspect(const std::vector<Vec2>& poly, const Vec2& bone_start, const Vec2& bone_end);

/// Violations of the part-shape guarantees; empty means valid.
std::vector<std::string> check_part_shape(const PartShape& shape, const ShapeConfig& cfg = {});

// ---------------------------------------------------------------------------
// Triangulation

struct Triangulation {
    std::vector<Vec2> vertices;              ///< boundary vertices first, then interior
    std::vector<std::array<int, 3>> triangles;  ///< counter-clockwise
    int boundary_count = 0;

    double area() const;
    /// Undirected edge count.
    int edge_count() const;
    double median_edge_length() const;
};

/// Constrained Delaunay triangulation of a simple polygon with interior
/// Steiner points on a triangular lattice of spacing `target_edge`. Boundary
/// edges are kept as constraints; exactly collinear boundary vertices are
/// dropped. Throws InvalidInput for non-simple or degenerate polygons.
Triangulation triangulate(const std::vector<Vec2>& polygon, double target_edge);

} // namespace toporig
