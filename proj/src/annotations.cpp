#include "toporig/annotations.hpp"

#include <fstream>
#include <map>
#include <set>

namespace toporig {

using nlohmann::json;

const Joint* AnnotationFrame::find_joint(const std::string& name) const {
    for (const auto& j : joints)
        if (j.name == name) return &j;
    return nullptr;
}

std::vector<int> AnnotationFrame::layers() const {
    std::vector<int> out(bones.size(), 0);
    for (std::size_t i = 0; i < layer_order.size(); ++i) out.at(std::size_t(layer_order[i])) = int(i) + 1;
    return out;
}

const AnnotationFrame& AnnotationSet::reference() const {
    for (const auto& f : frames)
        if (f.id == reference_frame) return f;
    throw Error(ErrorCode::DanglingReference, "reference frame '" + reference_frame + "' not found", "reference_frame");
}

namespace {

void validate_frame(const AnnotationFrame& frame, const std::string& path) {
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < frame.joints.size(); ++i) {
        const auto& j = frame.joints[i];
        const std::string field = path + ".joints[" + std::to_string(i) + "]";
        if (j.name.empty()) throw Error(ErrorCode::Schema, "joint name must be non-empty", field);
        if (!j.position.allFinite()) throw Error(ErrorCode::Schema, "joint position must be finite", field);
        if (!index.emplace(j.name, int(i)).second)
            throw Error(ErrorCode::Schema, "duplicate joint name '" + j.name + "'", field);
    }
    // union-find over joints for the tree check
    std::vector<int> uf(frame.joints.size());
    for (std::size_t i = 0; i < uf.size(); ++i) uf[i] = int(i);
    auto find = [&](int x) {
        while (uf[std::size_t(x)] != x) x = uf[std::size_t(x)] = uf[std::size_t(uf[std::size_t(x)])];
        return x;
    };
    for (std::size_t b = 0; b < frame.bones.size(); ++b) {
        const std::string field = path + ".bones[" + std::to_string(b) + "]";
        const auto& [from, to] = frame.bones[b];
        const auto a = index.find(from), c = index.find(to);
        if (a == index.end())
            throw Error(ErrorCode::DanglingReference, "bone references missing joint '" + from + "'", field);
        if (c == index.end()) throw Error(ErrorCode::DanglingReference, "bone references missing joint '" + to + "'", field);
        const int ra = find(a->second), rc = find(c->second);
        if (ra == rc) throw Error(ErrorCode::NonTree, "bone closes a cycle", field);
        uf[std::size_t(ra)] = rc;
    }
    if (frame.bones.empty()) throw Error(ErrorCode::NonTree, "at least one bone is required", path + ".bones");
    if (frame.bones.size() + 1 != frame.joints.size())
        throw Error(ErrorCode::NonTree, "bones do not connect all joints into one tree", path + ".bones");
    std::vector<char> seen(frame.bones.size(), 0);
    for (std::size_t i = 0; i < frame.layer_order.size(); ++i) {
        const int b = frame.layer_order[i];
        const std::string field = path + ".layer_order[" + std::to_string(i) + "]";
        if (b < 0 || b >= int(frame.bones.size()) || seen[std::size_t(b)])
            throw Error(ErrorCode::NonPermutation, "layer order is not a permutation of bone indices", field);
        seen[std::size_t(b)] = 1;
    }
    if (frame.layer_order.size() != frame.bones.size())
        throw Error(ErrorCode::NonPermutation, "layer order must list every bone exactly once", path + ".layer_order");
}

} // namespace

void validate(const AnnotationSet& set) {
    if (set.version != 1) throw Error(ErrorCode::Schema, "unsupported annotation version", "version");
    if (set.canvas.width <= 0 || set.canvas.height <= 0) throw Error(ErrorCode::Schema, "canvas must be positive", "canvas");
    if (set.frames.empty()) throw Error(ErrorCode::Schema, "at least one frame is required", "frames");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < set.frames.size(); ++i) {
        const std::string path = "frames[" + std::to_string(i) + "]";
        if (set.frames[i].id.empty()) throw Error(ErrorCode::Schema, "frame id must be non-empty", path + ".id");
        if (!ids.insert(set.frames[i].id).second)
            throw Error(ErrorCode::Schema, "duplicate frame id '" + set.frames[i].id + "'", path + ".id");
        validate_frame(set.frames[i], path);
    }
    const auto& ref = set.reference();
    std::set<std::string> ref_names;
    for (const auto& j : ref.joints) ref_names.insert(j.name);
    for (std::size_t i = 0; i < set.frames.size(); ++i) {
        const auto& f = set.frames[i];
        const std::string path = "frames[" + std::to_string(i) + "]";
        std::set<std::string> names;
        for (const auto& j : f.joints) names.insert(j.name);
        if (names != ref_names) throw Error(ErrorCode::FrameMismatch, "joint names differ from the reference frame", path + ".joints");
        if (f.bones != ref.bones) throw Error(ErrorCode::FrameMismatch, "bones differ from the reference frame", path + ".bones");
    }
}

json to_json(const AnnotationSet& set) {
    json j;
    j["version"] = set.version;
    j["canvas"] = {{"width", set.canvas.width}, {"height", set.canvas.height}};
    j["reference_frame"] = set.reference_frame;
    j["frames"] = json::array();
    for (const auto& f : set.frames) {
        json fj;
        fj["id"] = f.id;
        fj["joints"] = json::array();
        for (const auto& jt : f.joints) fj["joints"].push_back({{"name", jt.name}, {"x", jt.position.x()}, {"y", jt.position.y()}});
        fj["bones"] = json::array();
        for (const auto& [a, b] : f.bones) fj["bones"].push_back({a, b});
        fj["layer_order"] = f.layer_order;
        j["frames"].push_back(std::move(fj));
    }
    return j;
}

namespace {

const json& field(const json& j, const char* key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) throw Error(ErrorCode::Schema, std::string("missing field '") + key + "'", path + "." + key);
    return j.at(key);
}

template <class T>
T typed(const json& j, const std::string& path) {
    try {
        if constexpr (std::is_same_v<T, std::string>) {
            if (!j.is_string()) throw Error(ErrorCode::Schema, "expected a string", path);
        } else if constexpr (std::is_integral_v<T>) {
            if (!j.is_number_integer()) throw Error(ErrorCode::Schema, "expected an integer", path);
        } else {
            if (!j.is_number()) throw Error(ErrorCode::Schema, "expected a number", path);
        }
        return j.get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Schema, e.what(), path);
    }
}

} // namespace

AnnotationSet annotations_from_json(const json& j) {
    AnnotationSet set;
    if (!j.is_object()) throw Error(ErrorCode::Schema, "annotation document must be an object", "");
    set.version = typed<int>(field(j, "version", ""), "version");
    const auto& canvas = field(j, "canvas", "");
    set.canvas.width = typed<int>(field(canvas, "width", "canvas"), "canvas.width");
    set.canvas.height = typed<int>(field(canvas, "height", "canvas"), "canvas.height");
    set.reference_frame = typed<std::string>(field(j, "reference_frame", ""), "reference_frame");
    const auto& frames = field(j, "frames", "");
    if (!frames.is_array()) throw Error(ErrorCode::Schema, "expected an array", "frames");
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const std::string path = "frames[" + std::to_string(i) + "]";
        const auto& fj = frames[i];
        AnnotationFrame f;
        f.id = typed<std::string>(field(fj, "id", path), path + ".id");
        const auto& joints = field(fj, "joints", path);
        if (!joints.is_array()) throw Error(ErrorCode::Schema, "expected an array", path + ".joints");
        for (std::size_t k = 0; k < joints.size(); ++k) {
            const std::string jp = path + ".joints[" + std::to_string(k) + "]";
            Joint jt;
            jt.name = typed<std::string>(field(joints[k], "name", jp), jp + ".name");
            jt.position = Vec2(typed<double>(field(joints[k], "x", jp), jp + ".x"), typed<double>(field(joints[k], "y", jp), jp + ".y"));
            f.joints.push_back(std::move(jt));
        }
        const auto& bones = field(fj, "bones", path);
        if (!bones.is_array()) throw Error(ErrorCode::Schema, "expected an array", path + ".bones");
        for (std::size_t k = 0; k < bones.size(); ++k) {
            const std::string bp = path + ".bones[" + std::to_string(k) + "]";
            if (!bones[k].is_array() || bones[k].size() != 2) throw Error(ErrorCode::Schema, "bone must be a [parent, child] pair", bp);
            f.bones.emplace_back(typed<std::string>(bones[k][0], bp + "[0]"), typed<std::string>(bones[k][1], bp + "[1]"));
        }
        const auto& order = field(fj, "layer_order", path);
        if (!order.is_array()) throw Error(ErrorCode::Schema, "expected an array", path + ".layer_order");
        for (std::size_t k = 0; k < order.size(); ++k)
            f.layer_order.push_back(typed<int>(order[k], path + ".layer_order[" + std::to_string(k) + "]"));
        set.frames.push_back(std::move(f));
    }
    validate(set);
    return set;
}

AnnotationSet parse_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Schema, std::string("invalid JSON: ") + e.what(), "");
    }
    return annotations_from_json(j);
}

void write_annotations(const AnnotationSet& set, const std::filesystem::path& path) {
    validate(set);
    write_file_atomic(path, to_json(set).dump(2) + "\n");
}

std::vector<BoneSegment> frame_segments(const AnnotationFrame& frame) {
    std::vector<BoneSegment> out;
    for (const auto& [a, b] : frame.bones) {
        const Joint* ja = frame.find_joint(a);
        const Joint* jb = frame.find_joint(b);
        if (!ja || !jb) throw Error(ErrorCode::DanglingReference, "bone references a missing joint");
        out.push_back({ja->position, jb->position});
    }
    return out;
}

std::vector<RigidTransform> fit_bone_transforms(const AnnotationFrame& reference, const AnnotationFrame& frame) {
    const auto ref = frame_segments(reference);
    const auto cur = frame_segments(frame);
    if (ref.size() != cur.size()) throw Error(ErrorCode::FrameMismatch, "frames have different bone counts");
    std::vector<RigidTransform> out;
    for (std::size_t i = 0; i < ref.size(); ++i)
        out.push_back(fit_rigid({ref[i].start, ref[i].end}, {cur[i].start, cur[i].end}));
    return out;
}

std::vector<Image> annotations_to_rasters(const AnnotationSet& set, const CodecParams& params) {
    validate(set);
    const auto& ref = set.reference();
    const auto segments = frame_segments(ref);
    std::vector<Image> out;
    for (const auto& f : set.frames) {
        if (&f == &ref) {
            out.push_back(encode_rest(segments, f.layers(), set.canvas, params));
        } else {
            out.push_back(encode_posed(segments, fit_bone_transforms(ref, f), f.layers(), set.canvas, params));
        }
    }
    return out;
}

} // namespace toporig
