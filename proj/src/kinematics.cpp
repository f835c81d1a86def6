#include "toporig/kinematics.hpp"

#include <algorithm>
#include <set>

namespace toporig {

PoseSpec PoseSpec::identity(int bones, const Vec2& pivot) {
    PoseSpec p;
    p.bone_rotation.assign(std::size_t(bones), 0.0);
    p.global_pivot = pivot;
    return p;
}

RigidTransform PoseSpec::global_transform() const {
    return RigidTransform::translate(global_translation) * RigidTransform::rotation_about(global_rotation, global_pivot);
}

std::vector<RigidTransform> forward_kinematics(const TreeSkeleton& tree, const PoseSpec& pose) {
    if (int(pose.bone_rotation.size()) != tree.bone_count())
        throw Error(ErrorCode::InvalidInput, "pose must have one rotation per bone");
    if (!tree.has_positions()) throw Error(ErrorCode::InvalidInput, "forward_kinematics needs rest positions");
    for (double a : pose.bone_rotation)
        if (!std::isfinite(a)) throw Error(ErrorCode::InvalidInput, "pose rotation is not finite");
    if (!std::isfinite(pose.global_rotation) || !pose.global_translation.allFinite() || !pose.global_pivot.allFinite())
        throw Error(ErrorCode::InvalidInput, "global transform is not finite");

    std::vector<RigidTransform> local(std::size_t(tree.bone_count()));
    for (int b : tree.topological_bones()) {
        const int pn = tree.parent_node(b);
        const RigidTransform rot = RigidTransform::rotation_about(pose.bone_rotation[std::size_t(b)], tree.rest_position[std::size_t(pn)]);
        local[std::size_t(b)] = pn == 0 ? rot : local[std::size_t(TreeSkeleton::bone_of_node(pn))] * rot;
    }
    const RigidTransform g = pose.global_transform();
    for (auto& t : local) t = g * t;
    return local;
}

std::vector<Vec2> posed_joints(const TreeSkeleton& tree, const std::vector<RigidTransform>& bone_transforms,
                               const PoseSpec& pose) {
    std::vector<Vec2> out(tree.rest_position.size());
    out[0] = pose.global_transform()(tree.rest_position[0]);
    for (int b = 0; b < tree.bone_count(); ++b) {
        const int c = TreeSkeleton::child_node(b);
        out[std::size_t(c)] = bone_transforms[std::size_t(b)](tree.rest_position[std::size_t(c)]);
    }
    return out;
}

PoseSpec sample_pose(const TreeSkeleton& tree, std::uint64_t seed, const PoseParams& params, const Extent& canvas,
                     const std::vector<std::vector<Vec2>>* extra_points) {
    const Vec2 pivot(0.5 * canvas.width, 0.5 * canvas.height);
    const auto branches = tree.branches();
    for (int attempt = 0; attempt < std::max(params.retries, 1); ++attempt) {
        Rng rng(derive_seed(seed, std::uint64_t(attempt)));
        PoseSpec pose = PoseSpec::identity(tree.bone_count(), pivot);

        std::vector<int> chosen;
        for (int i = 0; i < int(branches.size()); ++i)
            if (rng.bernoulli(params.branch_probability)) chosen.push_back(i);
        if (chosen.empty() && !branches.empty()) chosen.push_back(int(rng.uniform_int(0, std::int64_t(branches.size()) - 1)));
        while (int(chosen.size()) > std::max(params.max_branches, 1))
            chosen.erase(chosen.begin() + std::ptrdiff_t(rng.uniform_int(0, std::int64_t(chosen.size()) - 1)));
        std::set<int> bones;
        for (int i : chosen) bones.insert(branches[std::size_t(i)].begin(), branches[std::size_t(i)].end());
        for (int b : bones) pose.bone_rotation[std::size_t(b)] = rng.uniform(-params.max_branch_angle, params.max_branch_angle);
        pose.global_rotation = rng.uniform(-params.max_global_angle, params.max_global_angle);

        // bounding box of the untranslated pose decides the admissible translation
        const auto transforms = forward_kinematics(tree, pose);
        std::vector<Vec2> pts = posed_joints(tree, transforms, pose);
        if (extra_points)
            for (std::size_t b = 0; b < extra_points->size() && b < transforms.size(); ++b)
                for (const auto& p : (*extra_points)[b]) pts.push_back(transforms[b](p));
        Vec2 lo = pts.front(), hi = lo;
        for (const auto& p : pts) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        const double tx_lo = std::max(-lo.x(), -params.max_translation * canvas.width);
        const double tx_hi = std::min(canvas.width - hi.x(), params.max_translation * canvas.width);
        const double ty_lo = std::max(-lo.y(), -params.max_translation * canvas.height);
        const double ty_hi = std::min(canvas.height - hi.y(), params.max_translation * canvas.height);
        if (tx_lo > tx_hi || ty_lo > ty_hi) continue;
        pose.global_translation = Vec2(tx_lo == tx_hi ? tx_lo : rng.uniform(tx_lo, tx_hi),
                                       ty_lo == ty_hi ? ty_lo : rng.uniform(ty_lo, ty_hi));
        return pose;
    }
    return PoseSpec::identity(tree.bone_count(), pivot);
}

TexturedPart transform_part(const TexturedPart& part, const RigidTransform& transform, const Extent& canvas,
                            Resampling mode) {
    TexturedPart out = part;
    const Vec2 o(part.origin_x, part.origin_y);
    const Vec2 corners[4] = {o, o + Vec2(part.sprite.width, 0), o + Vec2(0, part.sprite.height),
                             o + Vec2(part.sprite.width, part.sprite.height)};
    Vec2 lo = transform(corners[0]), hi = lo;
    for (const auto& c : corners) {
        lo = lo.cwiseMin(transform(c));
        hi = hi.cwiseMax(transform(c));
    }
    const int x0 = std::max(0, int(std::floor(lo.x()))), y0 = std::max(0, int(std::floor(lo.y())));
    const int x1 = std::min(canvas.width, int(std::ceil(hi.x()))), y1 = std::min(canvas.height, int(std::ceil(hi.y())));
    out.origin_x = x0;
    out.origin_y = y0;
    out.sprite = Image(std::max(x1 - x0, 0), std::max(y1 - y0, 0), 4);
    const RigidTransform inv = transform.inverse();
    const Image& src = part.sprite;

#pragma omp parallel for schedule(static)
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const Vec2 s = inv(Vec2(x + 0.5, y + 0.5)) - o;
            std::uint8_t* d = out.sprite.pixel(x - x0, y - y0);
            if (mode == Resampling::Nearest) {
                const int sx = int(std::floor(s.x())), sy = int(std::floor(s.y()));
                if (src.contains(sx, sy)) std::copy_n(src.pixel(sx, sy), 4, d);
                continue;
            }
            const double fx = s.x() - 0.5, fy = s.y() - 0.5;
            const int ix = int(std::floor(fx)), iy = int(std::floor(fy));
            const double tx = fx - ix, ty = fy - iy;
            double acc[4] = {0, 0, 0, 0};
            const double w[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
            const int px[4] = {ix, ix + 1, ix, ix + 1}, py[4] = {iy, iy, iy + 1, iy + 1};
            for (int k = 0; k < 4; ++k) {
                if (!src.contains(px[k], py[k])) continue;
                const std::uint8_t* p = src.pixel(px[k], py[k]);
                for (int c = 0; c < 4; ++c) acc[c] += w[k] * p[c];
            }
            for (int c = 0; c < 4; ++c) d[c] = std::uint8_t(std::clamp(std::lround(acc[c]), 0L, 255L));
            // keep premultiplied invariant color <= alpha under rounding
            for (int c = 0; c < 3; ++c) d[c] = std::min(d[c], d[3]);
        }
    }
    return out;
}

Image pose_character(const std::vector<TexturedPart>& parts, const std::vector<RigidTransform>& bone_transforms,
                     const Extent& canvas, Resampling mode, const Rgba& background) {
    std::vector<TexturedPart> posed;
    posed.reserve(parts.size());
    for (const auto& p : parts) {
        if (p.bone < 0 || p.bone >= int(bone_transforms.size()))
            throw Error(ErrorCode::InvalidInput, "part references a bone without a transform");
        posed.push_back(transform_part(p, bone_transforms[std::size_t(p.bone)], canvas, mode));
    }
    return composite(posed, canvas, background);
}

} // namespace toporig
