#pragma once

#include "toporig/skelcodec.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace toporig {

/// Annotation file (JSON, "version": 1):
///
///   {
///     "version": 1,
///     "canvas": {"width": 512, "height": 512},
///     "reference_frame": "rest",
///     "frames": [
///       {"id": "rest",
///        "joints": [{"name": "hip", "x": 250.0, "y": 300.5}, ...],
///        "bones": [["hip", "knee"], ...],
///        "layer_order": [2, 0, 1]},
///       ...
///     ]
///   }
///
/// `bones` are (parent, child) joint-name pairs forming a tree over the
/// frame's joints. `layer_order` lists bone indices from back-most to
/// front-most, so bone layer_order[i] has layer i + 1. Every frame carries the
/// same joint names and bones as the reference frame; joint positions and
/// layer order may differ per frame.
struct Joint {
    std::string name;
    Vec2 position = Vec2::Zero();
    bool operator==(const Joint&) const = default;
};

struct AnnotationFrame {
    std::string id;
    std::vector<Joint> joints;
    std::vector<std::pair<std::string, std::string>> bones;
    std::vector<int> layer_order;
    bool operator==(const AnnotationFrame&) const = default;

    const Joint* find_joint(const std::string& name) const;
    /// 1-based layer per bone.
    std::vector<int> layers() const;
};

struct AnnotationSet {
    int version = 1;
    Extent canvas;
    std::string reference_frame;
    std::vector<AnnotationFrame> frames;
    bool operator==(const AnnotationSet&) const = default;

    const AnnotationFrame& reference() const;
};

/// Throws Schema / DanglingReference / NonTree / NonPermutation /
/// FrameMismatch with the offending field path.
void validate(const AnnotationSet& set);

nlohmann::json to_json(const AnnotationSet& set);
/// Parses and validates.
AnnotationSet annotations_from_json(const nlohmann::json& j);

AnnotationSet parse_annotations(const std::filesystem::path& path);
void write_annotations(const AnnotationSet& set, const std::filesystem::path& path);

/// Bone segments of a frame in bone order.
std::vector<BoneSegment> frame_segments(const AnnotationFrame& frame);

/// Per-bone rigid fit mapping the reference frame's bones onto `frame`'s.
std::vector<RigidTransform> fit_bone_transforms(const AnnotationFrame& reference, const AnnotationFrame& frame);

/// One skeleton raster per frame, in frame order: the reference frame via
/// encode_rest, every other frame via encode_posed.
std::vector<Image> annotations_to_rasters(const AnnotationSet& set, const CodecParams& params = {});

} // namespace toporig
