#include "toporig/deform.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_set>

namespace toporig {

SparseMatrix cotangent_laplacian(const std::vector<Vec2>& vertices, const std::vector<Triangle>& triangles) {
    const int n = int(vertices.size());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(triangles.size() * 6);
    for (const auto& t : triangles) {
        for (int c = 0; c < 3; ++c) {
            const int i = t[std::size_t((c + 1) % 3)], j = t[std::size_t((c + 2) % 3)], k = t[std::size_t(c)];
            const Vec2 a = vertices[std::size_t(i)] - vertices[std::size_t(k)];
            const Vec2 b = vertices[std::size_t(j)] - vertices[std::size_t(k)];
            const double cross = std::abs(a.x() * b.y() - a.y() * b.x());
            const double half_cot = cross > 0.0 ? 0.5 * a.dot(b) / cross : 0.0;
            trips.emplace_back(std::min(i, j), std::max(i, j), half_cot);
        }
    }
    SparseMatrix w(n, n);
    w.setFromTriplets(trips.begin(), trips.end());  // sums both sides of each edge

    trips.clear();
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    for (int col = 0; col < w.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(w, col); it; ++it) {
            const double wij = std::max(it.value(), 0.0);
            const int i = int(it.row()), j = int(it.col());
            trips.emplace_back(i, j, -wij);
            trips.emplace_back(j, i, -wij);
            diag[i] += wij;
            diag[j] += wij;
        }
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, diag[i]);
    SparseMatrix k(n, n);
    k.setFromTriplets(trips.begin(), trips.end());
    return k;
}

Eigen::VectorXd lumped_mass(const std::vector<Vec2>& vertices, const std::vector<Triangle>& triangles) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(Eigen::Index(vertices.size()));
    for (const auto& t : triangles) {
        const Vec2 a = vertices[std::size_t(t[1])] - vertices[std::size_t(t[0])];
        const Vec2 b = vertices[std::size_t(t[2])] - vertices[std::size_t(t[0])];
        const double area = 0.5 * std::abs(a.x() * b.y() - a.y() * b.x());
        for (int v : t) m[v] += area / 3.0;
    }
    return m;
}

namespace {

void check_mesh(const std::vector<Vec2>& vertices, const std::vector<Triangle>& triangles) {
    const int n = int(vertices.size());
    if (n < 3 || triangles.empty()) throw Error(ErrorCode::InvalidInput, "deform mesh needs at least one triangle");
    for (const auto& v : vertices)
        if (!v.allFinite()) throw Error(ErrorCode::InvalidInput, "deform mesh has a non-finite vertex");
    std::vector<int> uf(std::size_t(n), 0);
    std::iota(uf.begin(), uf.end(), 0);
    auto find = [&](int x) {
        while (uf[std::size_t(x)] != x) x = uf[std::size_t(x)] = uf[std::size_t(uf[std::size_t(x)])];
        return x;
    };
    std::vector<char> used(std::size_t(n), 0);
    for (std::size_t t = 0; t < triangles.size(); ++t) {
        const auto& tri = triangles[t];
        for (int v : tri)
            if (v < 0 || v >= n) throw Error(ErrorCode::InvalidInput, "triangle " + std::to_string(t) + " has an invalid index");
        const Vec2 a = vertices[std::size_t(tri[1])] - vertices[std::size_t(tri[0])];
        const Vec2 b = vertices[std::size_t(tri[2])] - vertices[std::size_t(tri[0])];
        if (!(a.x() * b.y() - a.y() * b.x() > 0.0))
            throw Error(ErrorCode::InvalidInput, "triangle " + std::to_string(t) + " is degenerate or clockwise");
        for (int v : tri) used[std::size_t(v)] = 1;
        uf[std::size_t(find(tri[0]))] = find(tri[1]);
        uf[std::size_t(find(tri[1]))] = find(tri[2]);
    }
    for (int v = 0; v < n; ++v)
        if (!used[std::size_t(v)]) throw Error(ErrorCode::InvalidInput, "vertex " + std::to_string(v) + " is in no triangle");
    const int root = find(0);
    for (int v = 1; v < n; ++v)
        if (find(v) != root) throw Error(ErrorCode::InvalidInput, "deform mesh is not connected");
}

} // namespace

DeformMesh make_deform_mesh(std::vector<Vec2> vertices, std::vector<Triangle> triangles,
                            std::vector<std::vector<int>> handles) {
    check_mesh(vertices, triangles);
    if (handles.empty()) throw Error(ErrorCode::InvalidInput, "at least one handle is required");
    std::set<int> seen;
    for (std::size_t h = 0; h < handles.size(); ++h) {
        if (handles[h].empty()) throw Error(ErrorCode::InvalidInput, "handle " + std::to_string(h) + " has no vertices");
        for (int v : handles[h]) {
            if (v < 0 || v >= int(vertices.size()))
                throw Error(ErrorCode::InvalidInput, "handle " + std::to_string(h) + " references an invalid vertex");
            if (!seen.insert(v).second)
                throw Error(ErrorCode::InvalidInput, "vertex " + std::to_string(v) + " belongs to more than one handle");
        }
    }
    DeformMesh mesh;
    mesh.laplacian = cotangent_laplacian(vertices, triangles);
    mesh.mass = lumped_mass(vertices, triangles);
    mesh.vertices = std::move(vertices);
    mesh.triangles = std::move(triangles);
    mesh.handles = std::move(handles);
    return mesh;
}

DeformMesh make_deform_mesh(const Triangulation& tri, std::vector<std::vector<int>> handles) {
    return make_deform_mesh(tri.vertices, tri.triangles, std::move(handles));
}

Triangulation make_grid(const Vec2& origin, const Vec2& size, int nx, int ny) {
    if (nx < 2 || ny < 2 || !(size.x() > 0) || !(size.y() > 0))
        throw Error(ErrorCode::InvalidInput, "grid needs at least 2 × 2 vertices and a positive size");
    Triangulation out;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            out.vertices.push_back(origin + Vec2(size.x() * i / (nx - 1), size.y() * j / (ny - 1)));
    for (int j = 0; j + 1 < ny; ++j)
        for (int i = 0; i + 1 < nx; ++i) {
            const int a = j * nx + i, b = a + 1, c = a + nx, d = c + 1;
            out.triangles.push_back({a, d, b});
            out.triangles.push_back({a, c, d});
        }
    // counter-clockwise in (x, y): flip if the grid came out negative
    for (auto& t : out.triangles) {
        const Vec2 e1 = out.vertices[std::size_t(t[1])] - out.vertices[std::size_t(t[0])];
        const Vec2 e2 = out.vertices[std::size_t(t[2])] - out.vertices[std::size_t(t[0])];
        if (e1.x() * e2.y() - e1.y() * e2.x() < 0) std::swap(t[1], t[2]);
    }
    return out;
}

int nearest_vertex(const std::vector<Vec2>& vertices, const Vec2& p) {
    if (vertices.empty()) throw Error(ErrorCode::InvalidInput, "nearest_vertex on an empty set");
    int best = 0;
    double best_d = (vertices[0] - p).squaredNorm();
    for (std::size_t i = 1; i < vertices.size(); ++i) {
        const double d = (vertices[i] - p).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = int(i);
        }
    }
    return best;
}

// ---------------------------------------------------------------------------

std::vector<int> assign_nearest_segment(const std::vector<Vec2>& vertices, const std::vector<BoneSegment>& segments) {
    if (segments.empty()) throw Error(ErrorCode::InvalidInput, "rigid skinning needs at least one bone");
    std::vector<int> out(vertices.size(), -1);
    for (std::size_t v = 0; v < vertices.size(); ++v) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < segments.size(); ++s) {
            const double d = distance_to_segment(vertices[v], segments[s].start, segments[s].end);
            if (d < best) {
                best = d;
                out[v] = int(s);
            }
        }
    }
    return out;
}

std::vector<Vec2> deform_rigid(const std::vector<Vec2>& vertices, const std::vector<int>& assignment,
                               const std::vector<RigidTransform>& transforms) {
    if (assignment.size() != vertices.size()) throw Error(ErrorCode::InvalidInput, "one assignment per vertex required");
    std::vector<Vec2> out(vertices.size());
    for (std::size_t v = 0; v < vertices.size(); ++v) {
        const int h = assignment[v];
        if (h < 0 || h >= int(transforms.size()))
            throw Error(ErrorCode::InvalidInput, "vertex " + std::to_string(v) + " is not assigned to a handle");
        out[v] = transforms[std::size_t(h)](vertices[v]);
    }
    return out;
}

// ---------------------------------------------------------------------------

ArapSolver::ArapSolver(const DeformMesh& mesh, std::vector<int> pinned) : rest_(mesh.vertices), pinned_(std::move(pinned)) {
    const int n = int(rest_.size());
    if (pinned_.size() < 2) throw Error(ErrorCode::InvalidInput, "ARAP needs at least two pinned vertices");
    free_index_.assign(std::size_t(n), 0);
    for (int v : pinned_) {
        if (v < 0 || v >= n) throw Error(ErrorCode::InvalidInput, "pinned vertex out of range");
        if (free_index_[std::size_t(v)] < 0) throw Error(ErrorCode::InvalidInput, "pinned vertex listed twice");
        free_index_[std::size_t(v)] = -1;
    }
    std::vector<int> pin_index(std::size_t(n), -1);
    for (std::size_t k = 0; k < pinned_.size(); ++k) pin_index[std::size_t(pinned_[k])] = int(k);
    for (int v = 0; v < n; ++v)
        if (free_index_[std::size_t(v)] == 0) {
            free_index_[std::size_t(v)] = int(free_vertices_.size());
            free_vertices_.push_back(v);
        }

    adjacency_.assign(std::size_t(n), {});
    const SparseMatrix& k = mesh.laplacian;
    std::vector<Eigen::Triplet<double>> ff, fp;
    for (int col = 0; col < k.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(k, col); it; ++it) {
            const int i = int(it.row()), j = int(it.col());
            if (i != j) adjacency_[std::size_t(i)].push_back({j, -it.value()});
            const int fi = free_index_[std::size_t(i)];
            if (fi < 0) continue;
            const int fj = free_index_[std::size_t(j)];
            if (fj >= 0) ff.emplace_back(fi, fj, it.value());
            else fp.emplace_back(fi, pin_index[std::size_t(j)], it.value());
        }
    const auto nf = Eigen::Index(free_vertices_.size());
    coupling_.resize(nf, Eigen::Index(pinned_.size()));
    coupling_.setFromTriplets(fp.begin(), fp.end());
    if (nf > 0) {
        SparseMatrix lff(nf, nf);
        lff.setFromTriplets(ff.begin(), ff.end());
        factor_.compute(lff);
        if (factor_.info() != Eigen::Success) throw Error(ErrorCode::Solver, "ARAP system is singular (degenerate mesh)");
        // LDLT succeeds on some singular matrices; a zero pivot still means no unique solution
        const double dmax = factor_.vectorD().cwiseAbs().maxCoeff();
        if (!(factor_.vectorD().minCoeff() > 1e-12 * dmax))
            throw Error(ErrorCode::Solver, "ARAP system is singular (free vertices not anchored to a pin)");
    }
}

std::vector<Mat2> ArapSolver::local_step(const std::vector<Vec2>& current) const {
    if (current.size() != rest_.size()) throw Error(ErrorCode::InvalidInput, "ARAP: vertex count mismatch");
    std::vector<Mat2> out(rest_.size());
    for (std::size_t i = 0; i < rest_.size(); ++i) {
        Mat2 s = Mat2::Zero();
        for (const auto& nb : adjacency_[i])
            s += nb.weight * (rest_[i] - rest_[std::size_t(nb.index)]) * (current[i] - current[std::size_t(nb.index)]).transpose();
        // argmax over rotations of tr(R S) in closed form
        const double theta = std::atan2(s(0, 1) - s(1, 0), s(0, 0) + s(1, 1));
        out[i] = RigidTransform::rotation(theta).linear;
    }
    return out;
}

std::vector<Vec2> ArapSolver::global_step(const std::vector<Mat2>& rotations, const std::vector<Vec2>& pinned_positions) const {
    if (rotations.size() != rest_.size()) throw Error(ErrorCode::InvalidInput, "ARAP: one rotation per vertex required");
    if (pinned_positions.size() != pinned_.size()) throw Error(ErrorCode::InvalidInput, "ARAP: one position per pin required");
    std::vector<Vec2> out(rest_.size());
    Eigen::MatrixXd xp(Eigen::Index(pinned_.size()), 2);
    for (std::size_t k = 0; k < pinned_.size(); ++k) {
        xp.row(Eigen::Index(k)) = pinned_positions[k].transpose();
        out[std::size_t(pinned_[k])] = pinned_positions[k];
    }
    if (free_vertices_.empty()) return out;
    Eigen::MatrixXd b(Eigen::Index(free_vertices_.size()), 2);
    for (std::size_t f = 0; f < free_vertices_.size(); ++f) {
        const auto i = std::size_t(free_vertices_[f]);
        Vec2 acc = Vec2::Zero();
        for (const auto& nb : adjacency_[i])
            acc += 0.5 * nb.weight * (rotations[i] + rotations[std::size_t(nb.index)]) * (rest_[i] - rest_[std::size_t(nb.index)]);
        b.row(Eigen::Index(f)) = acc.transpose();
    }
    b -= coupling_ * xp;
    const Eigen::MatrixXd x = factor_.solve(b);
    if (factor_.info() != Eigen::Success || !x.allFinite()) throw Error(ErrorCode::Solver, "ARAP global solve failed");
    for (std::size_t f = 0; f < free_vertices_.size(); ++f) out[std::size_t(free_vertices_[f])] = x.row(Eigen::Index(f)).transpose();
    return out;
}

double ArapSolver::energy(const std::vector<Vec2>& current, const std::vector<Mat2>& rotations) const {
    double e = 0.0;
    for (std::size_t i = 0; i < rest_.size(); ++i)
        for (const auto& nb : adjacency_[i]) {
            const auto j = std::size_t(nb.index);
            e += nb.weight * ((current[i] - current[j]) - rotations[i] * (rest_[i] - rest_[j])).squaredNorm();
        }
    return e;
}

ArapResult ArapSolver::solve(const std::vector<Vec2>& pinned_positions, const ArapOptions& options,
                             const std::vector<Vec2>* initial) const {
    if (pinned_positions.size() != pinned_.size()) throw Error(ErrorCode::InvalidInput, "ARAP: one position per pin required");
    for (const auto& p : pinned_positions)
        if (!p.allFinite()) throw Error(ErrorCode::InvalidInput, "ARAP: pinned position is not finite");
    ArapResult res;
    if (initial) {
        if (initial->size() != rest_.size()) throw Error(ErrorCode::InvalidInput, "ARAP: initial guess has the wrong size");
        res.vertices = *initial;
    } else {
        std::vector<Vec2> from;
        for (int v : pinned_) from.push_back(rest_[std::size_t(v)]);
        const RigidTransform fit = fit_rigid(from, pinned_positions);
        res.vertices.resize(rest_.size());
        for (std::size_t i = 0; i < rest_.size(); ++i) res.vertices[i] = fit(rest_[i]);
    }
    for (std::size_t k = 0; k < pinned_.size(); ++k) res.vertices[std::size_t(pinned_[k])] = pinned_positions[k];

    double scale = 0.0;
    for (std::size_t i = 0; i < rest_.size(); ++i)
        for (const auto& nb : adjacency_[i]) scale += nb.weight * (rest_[i] - rest_[std::size_t(nb.index)]).squaredNorm();
    const double floor = 1e-24 * std::max(scale, 1e-300);

    auto rotations = local_step(res.vertices);
    double e = energy(res.vertices, rotations);
    res.energy.push_back(e);
    if (e <= floor) {
        res.converged = true;
        return res;
    }
    for (int it = 0; it < options.max_iters; ++it) {
        res.vertices = global_step(rotations, pinned_positions);
        rotations = local_step(res.vertices);
        const double next = energy(res.vertices, rotations);
        res.energy.push_back(next);
        res.iterations = it + 1;
        if (next <= floor || std::abs(e - next) <= options.tol * e) {
            res.converged = true;
            break;
        }
        e = next;
    }
    return res;
}

ArapResult solve_arap(const DeformMesh& mesh, const std::vector<int>& pinned, const std::vector<Vec2>& pinned_positions,
                      const ArapOptions& options) {
    return ArapSolver(mesh, pinned).solve(pinned_positions, options);
}

// ---------------------------------------------------------------------------

namespace {

SparseMatrix submatrix(const SparseMatrix& m, const std::vector<int>& rows_map, Eigen::Index nr, const std::vector<int>& cols_map,
                       Eigen::Index nc) {
    std::vector<Eigen::Triplet<double>> trips;
    for (int col = 0; col < m.outerSize(); ++col) {
        const int c = cols_map[std::size_t(col)];
        if (c < 0) continue;
        for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
            const int r = rows_map[std::size_t(it.row())];
            if (r >= 0) trips.emplace_back(r, c, it.value());
        }
    }
    SparseMatrix out(nr, nc);
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

// x restricted to the free set solving Q_FF x_F = -q_F - Q_FB x_B
bool solve_free(const SparseMatrix& Q, const Eigen::VectorXd& q, const std::vector<signed char>& state, Eigen::VectorXd& x) {
    const int n = int(q.size());
    std::vector<int> fmap(std::size_t(n), -1), bmap(std::size_t(n), -1);
    int nf = 0, nb = 0;
    for (int i = 0; i < n; ++i) (state[std::size_t(i)] == 0 ? fmap[std::size_t(i)] = nf++ : bmap[std::size_t(i)] = nb++);
    if (nf == 0) return true;
    Eigen::VectorXd rhs(nf), xb(nb);
    for (int i = 0; i < n; ++i) {
        if (fmap[std::size_t(i)] >= 0) rhs[fmap[std::size_t(i)]] = -q[i];
        else xb[bmap[std::size_t(i)]] = x[i];
    }
    if (nb > 0) rhs -= submatrix(Q, fmap, nf, bmap, nb) * xb;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(submatrix(Q, fmap, nf, fmap, nf));
    if (ldlt.info() != Eigen::Success) return false;
    const Eigen::VectorXd xf = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !xf.allFinite()) return false;
    for (int i = 0; i < n; ++i)
        if (fmap[std::size_t(i)] >= 0) x[i] = xf[fmap[std::size_t(i)]];
    return true;
}

bool kkt_holds(const SparseMatrix& Q, const Eigen::VectorXd& q, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
               const Eigen::VectorXd& x, double tol) {
    const Eigen::VectorXd g = Q * x + q;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
        const bool at_lo = x[i] <= lo[i] + tol, at_hi = x[i] >= hi[i] - tol;
        if (at_lo && at_hi) continue;
        if (at_lo ? g[i] < -tol : at_hi ? g[i] > tol : std::abs(g[i]) > tol) return false;
    }
    return true;
}

// Primal active set on the box, started from a feasible point.
Eigen::VectorXd primal_active_set(const SparseMatrix& Q, const Eigen::VectorXd& q, const Eigen::VectorXd& lo,
                                  const Eigen::VectorXd& hi, Eigen::VectorXd x, double tol, int max_iters) {
    const Eigen::Index n = q.size();
    std::vector<signed char> state(std::size_t(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        x[i] = std::clamp(x[i], lo[i], hi[i]);
        if (x[i] == lo[i]) state[std::size_t(i)] = -1;
        else if (x[i] == hi[i]) state[std::size_t(i)] = 1;
    }
    for (int it = 0; it < max_iters; ++it) {
        Eigen::VectorXd target = x;
        if (!solve_free(Q, q, state, target)) throw Error(ErrorCode::Solver, "box QP: singular reduced system");
        const Eigen::VectorXd p = target - x;
        if (p.lpNorm<Eigen::Infinity>() <= tol) {
            const Eigen::VectorXd g = Q * x + q;
            Eigen::Index worst = -1;
            double worst_mu = -tol;
            for (Eigen::Index i = 0; i < n; ++i) {
                const signed char s = state[std::size_t(i)];
                if (s == 0) continue;
                const double mu = s < 0 ? g[i] : -g[i];
                if (mu < worst_mu) {
                    worst_mu = mu;
                    worst = i;
                }
            }
            if (worst < 0) return x;
            state[std::size_t(worst)] = 0;
            continue;
        }
        double alpha = 1.0;
        Eigen::Index block = -1;
        signed char block_side = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (state[std::size_t(i)] != 0) continue;
            if (p[i] < 0 && x[i] + p[i] < lo[i]) {
                const double a = (lo[i] - x[i]) / p[i];
                if (a < alpha) alpha = a, block = i, block_side = -1;
            } else if (p[i] > 0 && x[i] + p[i] > hi[i]) {
                const double a = (hi[i] - x[i]) / p[i];
                if (a < alpha) alpha = a, block = i, block_side = 1;
            }
        }
        x += alpha * p;
        if (block >= 0) {
            x[block] = block_side < 0 ? lo[block] : hi[block];
            state[std::size_t(block)] = block_side;
        }
    }
    throw Error(ErrorCode::Solver, "box QP did not converge");
}

} // namespace

Eigen::VectorXd solve_box_qp(const SparseMatrix& Q, const Eigen::VectorXd& q, const Eigen::VectorXd& lo,
                             const Eigen::VectorXd& hi, double tol, int max_iters) {
    const Eigen::Index n = q.size();
    if (Q.rows() != n || Q.cols() != n || lo.size() != n || hi.size() != n)
        throw Error(ErrorCode::InvalidInput, "box QP: dimension mismatch");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(lo[i] <= hi[i])) throw Error(ErrorCode::InvalidInput, "box QP: empty bound interval");
    if (n == 0) return {};

    // primal-dual active set; c scales multipliers against bound violations
    const double c = std::max(Q.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n), lambda = Eigen::VectorXd::Zero(n);
    std::vector<signed char> state(std::size_t(n), 0);
    if (!solve_free(Q, q, state, x)) throw Error(ErrorCode::Solver, "box QP: singular system");
    std::set<std::vector<signed char>> visited;
    for (int it = 0; it < max_iters; ++it) {
        std::vector<signed char> next(std::size_t(n), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (lambda[i] + c * (x[i] - hi[i]) > 0) next[std::size_t(i)] = 1;
            else if (lambda[i] + c * (x[i] - lo[i]) < 0) next[std::size_t(i)] = -1;
        }
        if (it > 0 && next == state) {
            if (kkt_holds(Q, q, lo, hi, x, tol)) return x;
            break;
        }
        if (!visited.insert(next).second) break;  // cycling
        state = std::move(next);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (state[std::size_t(i)] > 0) x[i] = hi[i];
            else if (state[std::size_t(i)] < 0) x[i] = lo[i];
        }
        if (!solve_free(Q, q, state, x)) break;
        const Eigen::VectorXd g = Q * x + q;
        for (Eigen::Index i = 0; i < n; ++i) lambda[i] = state[std::size_t(i)] == 0 ? 0.0 : -g[i];
    }
    return primal_active_set(Q, q, lo, hi, x, tol, std::max(max_iters, int(4 * n + 100)));
}

WeightField compute_bbw(const DeformMesh& mesh, const BbwOptions& options) {
    const int n = mesh.vertex_count(), nh = mesh.handle_count();
    if (nh == 0) throw Error(ErrorCode::InvalidInput, "BBW needs at least one handle");
    std::vector<int> owner(std::size_t(n), -1);
    for (int h = 0; h < nh; ++h)
        for (int v : mesh.handles[std::size_t(h)]) {
            if (v < 0 || v >= n) throw Error(ErrorCode::InvalidInput, "handle vertex out of range");
            if (owner[std::size_t(v)] >= 0) throw Error(ErrorCode::InvalidInput, "handles share a vertex");
            owner[std::size_t(v)] = h;
        }
    WeightField field;
    field.weights = Eigen::MatrixXd::Zero(n, nh);
    if (nh == 1) {
        field.weights.setOnes();
        return field;
    }

    std::vector<int> fmap(std::size_t(n), -1), cmap(std::size_t(n), -1), free_vertices;
    int nc = 0;
    for (int v = 0; v < n; ++v) {
        if (owner[std::size_t(v)] < 0) {
            fmap[std::size_t(v)] = int(free_vertices.size());
            free_vertices.push_back(v);
        } else {
            cmap[std::size_t(v)] = nc++;
        }
    }
    const auto nf = Eigen::Index(free_vertices.size());
    Eigen::VectorXd inv_mass(n);
    for (int v = 0; v < n; ++v) {
        if (!(mesh.mass[v] > 0)) throw Error(ErrorCode::InvalidInput, "vertex with zero area");
        inv_mass[v] = 1.0 / mesh.mass[v];
    }
    SparseMatrix q = mesh.laplacian * inv_mass.asDiagonal() * mesh.laplacian;
    q /= std::max(q.diagonal().maxCoeff(), 1e-300);
    const SparseMatrix qff = submatrix(q, fmap, nf, fmap, nf);
    const SparseMatrix qfc = submatrix(q, fmap, nf, cmap, nc);
    const Eigen::VectorXd lo = Eigen::VectorXd::Zero(nf), hi = Eigen::VectorXd::Ones(nf);

    std::vector<std::string> failures(static_cast<std::size_t>(nh));
#pragma omp parallel for schedule(dynamic)
    for (int h = 0; h < nh; ++h) {
        Eigen::VectorXd wc = Eigen::VectorXd::Zero(nc);
        for (int v : mesh.handles[std::size_t(h)]) wc[cmap[std::size_t(v)]] = 1.0;
        try {
            const Eigen::VectorXd x = nf > 0 ? solve_box_qp(qff, qfc * wc, lo, hi, options.tol, options.max_iters)
                                             : Eigen::VectorXd();
            for (Eigen::Index f = 0; f < nf; ++f) field.weights(free_vertices[std::size_t(f)], h) = std::clamp(x[f], 0.0, 1.0);
            for (int v : mesh.handles[std::size_t(h)]) field.weights(v, h) = 1.0;
        } catch (const Error& e) {
            failures[std::size_t(h)] = e.what();
        }
    }
    for (int h = 0; h < nh; ++h)
        if (!failures[std::size_t(h)].empty())
            throw Error(ErrorCode::Solver, "BBW handle " + std::to_string(h) + ": " + failures[std::size_t(h)]);

    if (options.normalize) {
        for (int v = 0; v < n; ++v) {
            const double s = field.weights.row(v).sum();
            if (s > 1e-12) {
                field.weights.row(v) /= s;
            } else {
                // no handle reaches this vertex; fall back to the nearest handle vertex
                double best = std::numeric_limits<double>::infinity();
                int best_h = 0;
                for (int h = 0; h < nh; ++h)
                    for (int u : mesh.handles[std::size_t(h)]) {
                        const double d = (mesh.vertices[std::size_t(u)] - mesh.vertices[std::size_t(v)]).squaredNorm();
                        if (d < best) best = d, best_h = h;
                    }
                field.weights(v, best_h) = 1.0;
            }
            for (int h = 0; h < nh; ++h) field.weights(v, h) = std::clamp(field.weights(v, h), 0.0, 1.0);
        }
    }
    return field;
}

std::vector<std::string> check_weights(const DeformMesh& mesh, const WeightField& field, double tol) {
    std::vector<std::string> out;
    const auto& w = field.weights;
    if (w.rows() != mesh.vertex_count() || w.cols() != mesh.handle_count()) {
        out.push_back("weight field has the wrong shape");
        return out;
    }
    for (Eigen::Index v = 0; v < w.rows(); ++v) {
        for (Eigen::Index h = 0; h < w.cols(); ++h)
            if (!(w(v, h) >= 0.0 && w(v, h) <= 1.0))
                out.push_back("weight (" + std::to_string(v) + ", " + std::to_string(h) + ") outside [0, 1]");
        if (std::abs(w.row(v).sum() - 1.0) > tol) out.push_back("weights of vertex " + std::to_string(v) + " do not sum to 1");
    }
    for (int h = 0; h < mesh.handle_count(); ++h)
        for (int v : mesh.handles[std::size_t(h)])
            for (int g = 0; g < mesh.handle_count(); ++g)
                if (w(v, g) != (g == h ? 1.0 : 0.0))
                    out.push_back("handle " + std::to_string(h) + " not interpolated at vertex " + std::to_string(v));
    return out;
}

std::vector<Vec2> deform_lbs(const std::vector<Vec2>& vertices, const WeightField& field,
                             const std::vector<RigidTransform>& transforms) {
    if (field.weights.rows() != Eigen::Index(vertices.size()) || field.weights.cols() != Eigen::Index(transforms.size()))
        throw Error(ErrorCode::InvalidInput, "LBS: weights do not match vertices and transforms");
    std::vector<Vec2> out(vertices.size(), Vec2::Zero());
    for (std::size_t v = 0; v < vertices.size(); ++v) {
        Mat2 a = Mat2::Zero();
        Vec2 t = Vec2::Zero();
        for (std::size_t h = 0; h < transforms.size(); ++h) {
            const double w = field.weights(Eigen::Index(v), Eigen::Index(h));
            a += w * transforms[h].linear;
            t += w * transforms[h].translation;
        }
        out[v] = a * vertices[v] + t;
    }
    return out;
}

// ---------------------------------------------------------------------------

Backend parse_backend(const std::string& name) {
    if (name == "rigid") return Backend::Rigid;
    if (name == "arap") return Backend::Arap;
    if (name == "bbw") return Backend::Bbw;
    throw Error(ErrorCode::InvalidInput, "backend must be one of rigid, arap, bbw", "backend");
}

const char* to_string(Backend b) {
    switch (b) {
    case Backend::Rigid: return "rigid";
    case Backend::Arap: return "arap";
    case Backend::Bbw: return "bbw";
    }
    return "unknown";
}

namespace deform_detail {

bool prepare_triangle(const Vec2& r0, const Vec2& r1, const Vec2& r2, const Vec2& d0, const Vec2& d1, const Vec2& d2,
                      const Extent& canvas, WarpTriangle& out, bool& inverted) {
    Mat2 m;
    m.col(0) = d1 - d0;
    m.col(1) = d2 - d0;
    const double det = m.determinant();
    const Vec2 e1 = r1 - r0, e2 = r2 - r0;
    const double rest_det = e1.x() * e2.y() - e1.y() * e2.x();
    inverted = false;
    if (!(std::abs(det) > 1e-12) || !std::isfinite(det)) return false;
    inverted = (det > 0) != (rest_det > 0);
    out.d0 = d0;
    out.inverse = m.inverse();
    out.r0 = r0;
    out.r1 = r1;
    out.r2 = r2;
    const double xmin = std::min({d0.x(), d1.x(), d2.x()}), xmax = std::max({d0.x(), d1.x(), d2.x()});
    const double ymin = std::min({d0.y(), d1.y(), d2.y()}), ymax = std::max({d0.y(), d1.y(), d2.y()});
    out.x0 = int(std::max(0.0, std::ceil(xmin - 0.5)));
    out.x1 = int(std::min(double(canvas.width - 1), std::floor(xmax - 0.5)));
    out.y0 = int(std::max(0.0, std::ceil(ymin - 0.5)));
    out.y1 = int(std::min(double(canvas.height - 1), std::floor(ymax - 0.5)));
    return true;
}

bool warp_source(const WarpTriangle& t, int x, int y, Vec2& source) {
    const Vec2 l = t.inverse * (Vec2(x + 0.5, y + 0.5) - t.d0);
    const double l0 = 1.0 - l.x() - l.y();
    if (l0 < 0.0 || l.x() < 0.0 || l.y() < 0.0) return false;
    source = t.r0 + l.x() * (t.r1 - t.r0) + l.y() * (t.r2 - t.r0);
    return true;
}

void sample_sprite(const Image& sprite, const Vec2& s, Resampling mode, std::uint8_t* rgba) {
    std::fill_n(rgba, 4, std::uint8_t(0));
    if (mode == Resampling::Nearest) {
        const int sx = int(std::floor(s.x())), sy = int(std::floor(s.y()));
        if (sprite.contains(sx, sy)) std::copy_n(sprite.pixel(sx, sy), 4, rgba);
        return;
    }
    const double fx = s.x() - 0.5, fy = s.y() - 0.5;
    const int ix = int(std::floor(fx)), iy = int(std::floor(fy));
    const double tx = fx - ix, ty = fy - iy;
    const double w[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
    const int px[4] = {ix, ix + 1, ix, ix + 1}, py[4] = {iy, iy, iy + 1, iy + 1};
    // interpolate premultiplied so transparent neighbours do not bleed color
    double acc[4] = {0, 0, 0, 0};
    for (int k = 0; k < 4; ++k) {
        if (!sprite.contains(px[k], py[k])) continue;
        const std::uint8_t* p = sprite.pixel(px[k], py[k]);
        const double a = w[k] * p[3];
        for (int c = 0; c < 3; ++c) acc[c] += a * p[c];
        acc[3] += a;
    }
    if (acc[3] <= 0.0) return;
    for (int c = 0; c < 3; ++c) rgba[c] = std::uint8_t(std::clamp(std::lround(acc[c] / acc[3]), 0L, 255L));
    rgba[3] = std::uint8_t(std::clamp(std::lround(acc[3]), 0L, 255L));
}

void put_pixel(std::uint8_t* dst, const std::uint8_t* sample, const Rgba& background) {
    if (background[3] == 0) {
        std::copy_n(sample, 4, dst);
        return;
    }
    const unsigned a = sample[3];
    for (int c = 0; c < 3; ++c) dst[c] = std::uint8_t((sample[c] * a + background[std::size_t(c)] * (255u - a) + 127u) / 255u);
    dst[3] = std::uint8_t(a + (background[3] * (255u - a) + 127u) / 255u);
}

} // namespace deform_detail

Image render_deformed(const Image& sprite, const std::vector<Vec2>& rest, const std::vector<Vec2>& deformed,
                      const std::vector<Triangle>& triangles, const Extent& canvas, Resampling mode,
                      const Rgba& background, RenderStats* stats) {
    using namespace deform_detail;
    if (sprite.channels != 4) throw Error(ErrorCode::InvalidInput, "render_deformed: sprite must be RGBA");
    if (rest.size() != deformed.size()) throw Error(ErrorCode::InvalidInput, "render_deformed: vertex count mismatch");
    if (canvas.width <= 0 || canvas.height <= 0) throw Error(ErrorCode::InvalidInput, "render_deformed: empty canvas");
    RenderStats local;
    std::vector<WarpTriangle> warps;
    warps.reserve(triangles.size());
    for (const auto& t : triangles) {
        for (int v : t)
            if (v < 0 || v >= int(rest.size())) throw Error(ErrorCode::InvalidInput, "render_deformed: bad triangle index");
        WarpTriangle w;
        bool inverted = false;
        const auto i0 = std::size_t(t[0]), i1 = std::size_t(t[1]), i2 = std::size_t(t[2]);
        if (!prepare_triangle(rest[i0], rest[i1], rest[i2], deformed[i0], deformed[i1], deformed[i2], canvas, w, inverted)) {
            ++local.degenerate_triangles;
            continue;
        }
        if (inverted) ++local.inverted_triangles;
        if (w.y0 <= w.y1 && w.x0 <= w.x1) warps.push_back(w);
    }
    std::vector<std::vector<int>> rows(std::size_t(canvas.height));
    for (std::size_t k = 0; k < warps.size(); ++k)
        for (int y = warps[k].y0; y <= warps[k].y1; ++y) rows[std::size_t(y)].push_back(int(k));

    Image out(canvas.width, canvas.height, 4);
    long covered = 0;
#pragma omp parallel for schedule(dynamic, 8) reduction(+ : covered)
    for (int y = 0; y < canvas.height; ++y) {
        std::vector<char> hit(std::size_t(canvas.width), 0);
        std::uint8_t* row = out.pixel(0, y);
        for (int x = 0; x < canvas.width; ++x) std::copy(background.begin(), background.end(), row + 4 * x);
        std::uint8_t sample[4];
        for (int k : rows[std::size_t(y)]) {
            const auto& t = warps[std::size_t(k)];
            for (int x = t.x0; x <= t.x1; ++x) {
                Vec2 s;
                if (!warp_source(t, x, y, s)) continue;
                sample_sprite(sprite, s, mode, sample);
                put_pixel(row + 4 * x, sample, background);
                hit[std::size_t(x)] = 1;
            }
        }
        for (char h : hit) covered += h;
    }
    local.covered_pixels = covered;
    if (stats) *stats = local;
    return out;
}

} // namespace toporig
