#pragma once

#include "toporig/appearance.hpp"
#include "toporig/topology.hpp"

#include <cstdint>
#include <vector>

namespace toporig {

/// Per-bone rotations about each bone's parent joint, applied down the
/// hierarchy, followed by a global rotation about `global_pivot` and a
/// translation.
struct PoseSpec {
    std::vector<double> bone_rotation;  ///< radians, one per bone
    double global_rotation = 0.0;
    Vec2 global_translation = Vec2::Zero();
    Vec2 global_pivot = Vec2::Zero();

    static PoseSpec identity(int bones, const Vec2& pivot = Vec2::Zero());
    RigidTransform global_transform() const;
};

struct PoseParams {
    double max_branch_angle = 60.0 * kPi / 180.0;
    double max_global_angle = 30.0 * kPi / 180.0;
    /// Translation cap as a fraction of the canvas size per axis.
    double max_translation = 0.15;
    double branch_probability = 0.5;
    int max_branches = 3;
    int retries = 10;
};

/// Samples a pose whose posed joints (and `extra_points`, given per bone in
/// rest coordinates, e.g. part outlines) stay inside the canvas. Falls back to
/// the identity when no sampled pose fits.
PoseSpec sample_pose(const TreeSkeleton& tree, std::uint64_t seed, const PoseParams& params, const Extent& canvas,
                     const std::vector<std::vector<Vec2>>* extra_points = nullptr);

/// Rest-to-posed rigid map per bone. Throws InvalidInput if the pose does not
/// cover every bone or holds non-finite values.
std::vector<RigidTransform> forward_kinematics(const TreeSkeleton& tree, const PoseSpec& pose);

/// Posed position of every node (root mapped by the global transform).
std::vector<Vec2> posed_joints(const TreeSkeleton& tree, const std::vector<RigidTransform>& bone_transforms,
                               const PoseSpec& pose);

enum class Resampling { Nearest, Bilinear };

/// Resamples a sprite under a rigid map (inverse mapping of target pixel
/// centers), clipped to the canvas.
TexturedPart transform_part(const TexturedPart& part, const RigidTransform& transform, const Extent& canvas,
                            Resampling mode);

/// Target appearance: every part moved by its bone's transform, then composited.
Image pose_character(const std::vector<TexturedPart>& parts, const std::vector<RigidTransform>& bone_transforms,
                     const Extent& canvas, Resampling mode = Resampling::Bilinear, const Rgba& background = kWhite);

} // namespace toporig
