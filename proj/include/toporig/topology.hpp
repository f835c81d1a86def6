#pragma once

#include "toporig/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace toporig {

/// Rooted tree over nodes 0..n-1 with node 0 the root. Bone b connects
/// parent(b+1) to node b+1, so bones and non-root nodes share an index space.
struct TreeSkeleton {
    std::vector<int> parent;            ///< parent[0] == -1
    std::vector<double> edge_length;    ///< per bone, pixels
    std::vector<Vec2> rest_position;    ///< per node; empty until laid out

    int node_count() const { return int(parent.size()); }
    int bone_count() const { return int(parent.size()) - 1; }
    bool has_positions() const { return !rest_position.empty(); }

    static int child_node(int bone) { return bone + 1; }
    static int bone_of_node(int node) { return node - 1; }
    int parent_node(int bone) const { return parent[std::size_t(bone) + 1]; }

    std::vector<std::vector<int>> children() const;

    /// Each root-to-leaf path as a list of bone ids, root side first.
    std::vector<std::vector<int>> branches() const;

    /// Bones in an order where every bone follows its parent bone.
    std::vector<int> topological_bones() const;
};

struct TopologyConfig {
    int max_bones = 10;
    /// Edge length range as fractions of the canvas diagonal.
    double min_edge_frac = 0.08;
    double max_edge_frac = 0.25;
};

struct LayoutConfig {
    int iterations = 200;
    /// Initial step cap as a fraction of the mean edge length.
    double initial_temperature = 0.5;
    /// Rest positions keep this fraction of the canvas size free on every side.
    double margin_frac = 0.1;
    /// Smallest bone length (pixels) accepted after canvas fitting.
    double min_bone_px = 2.0;
};

/// Samples a random tree: node count uniform in [2, max_bones + 1], parent of
/// node i uniform over 0..i-1, edge lengths uniform in the configured range.
TreeSkeleton sample_topology(std::uint64_t seed, int max_bones, const TopologyConfig& cfg, const Extent& canvas);

/// Spring-embedder layout with per-edge target lengths followed by an exact
/// length repair pass and a scale-down-and-center canvas fit. The fitted
/// lengths are written back to `edge_length`.
TreeSkeleton layout_rest_pose(TreeSkeleton tree, const Extent& canvas, std::uint64_t seed, const LayoutConfig& cfg = {});

/// Structural checks (tree shape, lengths, bone cap). Empty result means valid.
std::vector<std::string> check_tree(const TreeSkeleton& tree, int max_bones);

/// Positional checks for a laid-out tree (length exactness, canvas margin).
std::vector<std::string> check_layout(const TreeSkeleton& tree, const Extent& canvas, double margin_frac,
                                      double length_tol = 1e-6);

/// Count of pairs of non-adjacent bones whose segments intersect.
int count_bone_crossings(const TreeSkeleton& tree);

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

} // namespace toporig
