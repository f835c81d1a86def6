#pragma once

#include "toporig/appearance.hpp"
#include "toporig/geometry.hpp"
#include "toporig/kinematics.hpp"
#include "toporig/skelcodec.hpp"

#include <Eigen/Sparse>

#include <array>
#include <string>
#include <vector>

namespace toporig {

using Triangle = std::array<int, 3>;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Triangle mesh prepared for deformation. `handles` are groups of vertex
/// indices (a single joint vertex, or e.g. a column of a grid); groups are
/// non-empty and pairwise disjoint.
struct DeformMesh {
    std::vector<Vec2> vertices;
    std::vector<Triangle> triangles;
    std::vector<std::vector<int>> handles;
    /// Cotangent stiffness matrix K (K_ij = -w_ij, K_ii = sum_j w_ij), with
    /// w_ij = (cot a + cot b) / 2 clamped at 0.
    SparseMatrix laplacian;
    /// Lumped (barycentric) vertex areas.
    Eigen::VectorXd mass;

    int vertex_count() const { return int(vertices.size()); }
    int handle_count() const { return int(handles.size()); }
};

SparseMatrix cotangent_laplacian(const std::vector<Vec2>& vertices, const std::vector<Triangle>& triangles);
Eigen::VectorXd lumped_mass(const std::vector<Vec2>& vertices, const std::vector<Triangle>& triangles);

/// Validates the triangulation (indices, positive orientation, connectivity)
/// and the handle groups, then caches the Laplacian and mass.
DeformMesh make_deform_mesh(std::vector<Vec2> vertices, std::vector<Triangle> triangles,
                            std::vector<std::vector<int>> handles);
DeformMesh make_deform_mesh(const Triangulation& tri, std::vector<std::vector<int>> handles);

/// Regular grid over [origin, origin + size] with nx × ny vertices, row-major
/// (vertex (i, j) at index j * nx + i), each cell split along one diagonal.
Triangulation make_grid(const Vec2& origin, const Vec2& size, int nx, int ny);

/// Index of the vertex closest to `p`.
int nearest_vertex(const std::vector<Vec2>& vertices, const Vec2& p);

// ---------------------------------------------------------------------------
// Rigid skinning

/// Nearest bone segment per vertex (ties go to the lower index).
std::vector<int> assign_nearest_segment(const std::vector<Vec2>& vertices, const std::vector<BoneSegment>& segments);

/// Each vertex moved by the transform of its assigned handle. Throws
/// InvalidInput for an unassigned or out-of-range assignment.
std::vector<Vec2> deform_rigid(const std::vector<Vec2>& vertices, const std::vector<int>& assignment,
                               const std::vector<RigidTransform>& transforms);

// ---------------------------------------------------------------------------
// ARAP

struct ArapOptions {
    int max_iters = 100;
    /// Stop once the relative energy change drops below this.
    double tol = 1e-6;
};

struct ArapResult {
    std::vector<Vec2> vertices;
    /// Energy of the initial guess followed by one entry per iteration.
    std::vector<double> energy;
    int iterations = 0;
    bool converged = false;
};

/// Vertex-cell ARAP with cotangent weights. The pinned set is fixed at
/// construction and the reduced system is factorized once; solves are const
/// and may run concurrently.
class ArapSolver {
public:
    ArapSolver(const DeformMesh& mesh, std::vector<int> pinned);

    const std::vector<int>& pinned() const { return pinned_; }

    /// Best rotation per vertex cell for the current positions.
    std::vector<Mat2> local_step(const std::vector<Vec2>& current) const;
    /// Positions minimizing the energy for fixed rotations and pins.
    std::vector<Vec2> global_step(const std::vector<Mat2>& rotations, const std::vector<Vec2>& pinned_positions) const;
    double energy(const std::vector<Vec2>& current, const std::vector<Mat2>& rotations) const;
    /// Energy with the locally optimal rotations.
    double energy(const std::vector<Vec2>& current) const { return energy(current, local_step(current)); }

    /// Starts from `initial`, or from the rigid fit of the pins when null.
    ArapResult solve(const std::vector<Vec2>& pinned_positions, const ArapOptions& options = {},
                     const std::vector<Vec2>* initial = nullptr) const;

private:
    struct Neighbor {
        int index;
        double weight;
    };
    std::vector<Vec2> rest_;
    std::vector<std::vector<Neighbor>> adjacency_;
    std::vector<int> pinned_;
    std::vector<int> free_index_;  // vertex -> row in the reduced system, -1 if pinned
    std::vector<int> free_vertices_;
    SparseMatrix coupling_;  // L restricted to (free, pinned)
    Eigen::SimplicialLDLT<SparseMatrix> factor_;
};

ArapResult solve_arap(const DeformMesh& mesh, const std::vector<int>& pinned, const std::vector<Vec2>& pinned_positions,
                      const ArapOptions& options = {});

// ---------------------------------------------------------------------------
// Bounded biharmonic weights

/// weights(v, h): influence of handle h on vertex v.
struct WeightField {
    Eigen::MatrixXd weights;
};

struct BbwOptions {
    /// KKT tolerance of the per-handle box QP.
    double tol = 1e-8;
    int max_iters = 500;
    /// Divide by the per-vertex sum; off only to inspect raw QP solutions.
    bool normalize = true;
};

/// Per handle: minimize w' K M^-1 K w subject to 0 <= w <= 1, w = 1 on the
/// handle's vertices and 0 on every other handle's. Handles are solved
/// independently (in parallel), then normalized per vertex.
WeightField compute_bbw(const DeformMesh& mesh, const BbwOptions& options = {});

/// Violations of bounds, partition of unity and handle interpolation.
std::vector<std::string> check_weights(const DeformMesh& mesh, const WeightField& field, double tol = 1e-6);

/// Solution of min 0.5 x'Qx + q'x subject to lo <= x <= hi (primal-dual
/// active set, with a primal active-set fallback when it cycles).
Eigen::VectorXd solve_box_qp(const SparseMatrix& Q, const Eigen::VectorXd& q, const Eigen::VectorXd& lo,
                             const Eigen::VectorXd& hi, double tol = 1e-8, int max_iters = 500);

// ---------------------------------------------------------------------------
// Linear blend skinning

std::vector<Vec2> deform_lbs(const std::vector<Vec2>& vertices, const WeightField& field,
                             const std::vector<RigidTransform>& transforms);

// ---------------------------------------------------------------------------
// Backends

enum class Backend { Rigid, Arap, Bbw };
/// "rigid", "arap" or "bbw"; throws InvalidInput otherwise.
Backend parse_backend(const std::string& name);
const char* to_string(Backend b);

// ---------------------------------------------------------------------------
// Rendering

struct RenderStats {
    int inverted_triangles = 0;
    int degenerate_triangles = 0;
    long covered_pixels = 0;
};

/// Piecewise-affine warp: every canvas pixel center inside a deformed
/// triangle samples `sprite` at the matching rest position (sprite pixel
/// (x, y) covers [x, x+1) × [y, y+1) in rest coordinates). Later triangles
/// win. Samples are written as-is over a transparent background and blended
/// (straight alpha) over an opaque one. Inverted triangles are counted in
/// `stats` and rendered anyway.
Image render_deformed(const Image& sprite, const std::vector<Vec2>& rest, const std::vector<Vec2>& deformed,
                      const std::vector<Triangle>& triangles, const Extent& canvas,
                      Resampling mode = Resampling::Nearest, const Rgba& background = kTransparent,
                      RenderStats* stats = nullptr);

namespace deform_detail {

/// Per-triangle data for the inverse barycentric map.
struct WarpTriangle {
    Vec2 d0;
    Mat2 inverse;  // maps (p - d0) to (l1, l2)
    Vec2 r0, r1, r2;
    int y0, y1;  // inclusive pixel rows whose centers may be covered
    int x0, x1;
};

/// Returns false for degenerate triangles; sets `inverted` for negative area.
bool prepare_triangle(const Vec2& r0, const Vec2& r1, const Vec2& r2, const Vec2& d0, const Vec2& d1, const Vec2& d2,
                      const Extent& canvas, WarpTriangle& out, bool& inverted);

/// Rest-space source of pixel center (x, y) when the triangle covers it.
bool warp_source(const WarpTriangle& t, int x, int y, Vec2& source);

/// Sample of a straight-alpha RGBA sprite at rest point `s`.
void sample_sprite(const Image& sprite, const Vec2& s, Resampling mode, std::uint8_t* rgba);

void put_pixel(std::uint8_t* dst, const std::uint8_t* sample, const Rgba& background);

} // namespace deform_detail

} // namespace toporig
