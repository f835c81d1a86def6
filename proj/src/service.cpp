#include "toporig/service.hpp"

#include <sodium.h>

#include <cstring>
#include <fstream>
#include <random>
#include <set>

namespace toporig {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Encoding helpers

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    const std::size_t len = sodium_base64_encoded_len(bytes.size(), sodium_base64_VARIANT_ORIGINAL);
    std::string out(len, '\0');
    sodium_bin2base64(out.data(), len, bytes.data(), bytes.size(), sodium_base64_VARIANT_ORIGINAL);
    out.resize(len - 1);  // drop the terminator
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    // accept data URLs from browsers
    std::size_t begin = 0;
    if (text.rfind("data:", 0) == 0) {
        const auto comma = text.find(',');
        if (comma == std::string::npos) throw Error(ErrorCode::InvalidInput, "malformed data URL");
        begin = comma + 1;
    }
    std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
    std::size_t len = 0;
    const char* end = nullptr;
    if (sodium_base642bin(out.data(), out.size(), text.data() + begin, text.size() - begin, " \r\n\t", &len, &end,
                          sodium_base64_VARIANT_ORIGINAL) != 0 ||
        end != text.data() + text.size())
        throw Error(ErrorCode::InvalidInput, "malformed base64 payload");
    out.resize(len);
    return out;
}

std::vector<std::uint8_t> make_tar(const std::vector<std::pair<std::string, std::vector<std::uint8_t>>>& files) {
    std::vector<std::uint8_t> out;
    for (const auto& [name, data] : files) {
        if (name.empty() || name.size() >= 100) throw Error(ErrorCode::InvalidInput, "tar entry name must be 1..99 bytes");
        std::array<char, 512> h{};
        auto put = [&h](std::size_t off, std::size_t width, const std::string& s) { std::memcpy(h.data() + off, s.data(), std::min(width, s.size())); };
        auto octal = [](std::uint64_t v, int digits) {
            std::string s(std::size_t(digits), '0');
            for (int i = digits - 1; i >= 0 && v; --i, v >>= 3) s[std::size_t(i)] = char('0' + (v & 7));
            return s;
        };
        put(0, 100, name);
        put(100, 8, octal(0644, 7));
        put(108, 8, octal(0, 7));
        put(116, 8, octal(0, 7));
        put(124, 12, octal(data.size(), 11));
        put(136, 12, octal(0, 11));
        std::memset(h.data() + 148, ' ', 8);
        h[156] = '0';
        put(257, 6, std::string("ustar", 6));
        put(263, 2, "00");
        unsigned sum = 0;
        for (char c : h) sum += static_cast<unsigned char>(c);
        put(148, 7, octal(sum, 6) + std::string(1, '\0'));
        out.insert(out.end(), h.begin(), h.end());
        out.insert(out.end(), data.begin(), data.end());
        out.resize((out.size() + 511) / 512 * 512, 0);
    }
    out.resize(out.size() + 1024, 0);
    return out;
}

// ---------------------------------------------------------------------------
// Sessions

namespace {

// Deformation state for one annotation revision. Members other than the
// lazily built solvers are immutable after construction.
struct Rig {
    std::uint64_t revision = 0;
    DeformMesh mesh;
    std::vector<int> joint_vertex;  // per reference joint
    std::vector<int> joint_bone;    // bone whose rotation drives each joint handle
    std::vector<BoneSegment> segments;
    std::vector<int> assignment;
    std::shared_ptr<const ArapSolver> arap;
    std::shared_ptr<const WeightField> bbw;
};

} // namespace

struct ServiceCore::Session {
    std::string id;
    Image image;  // RGBA
    mutable std::shared_mutex mu;
    std::optional<AnnotationSet> annotations;
    std::uint64_t revision = 0;

    mutable std::mutex cache_mu;
    mutable std::shared_ptr<const Triangulation> outline_mesh;
    mutable std::shared_ptr<Rig> rig;
};

ServiceCore::ServiceCore(ServiceConfig config) : config_(std::move(config)) {}
ServiceCore::~ServiceCore() = default;

std::shared_ptr<ServiceCore::Session> ServiceCore::find(const std::string& id) const {
    std::shared_lock lock(mu_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "no session '" + id + "'", "id");
    return it->second;
}

std::string ServiceCore::add_session(Image image, std::optional<AnnotationSet> annotations, std::string id) {
    auto s = std::make_shared<Session>();
    s->image = std::move(image);
    s->annotations = std::move(annotations);
    std::unique_lock lock(mu_);
    if (id.empty()) {
        static thread_local std::mt19937_64 gen{std::random_device{}()};
        do {
            char buf[17];
            std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(gen()));
            id = buf;
        } while (sessions_.count(id));
    } else if (sessions_.count(id)) {
        throw Error(ErrorCode::Conflict, "session '" + id + "' already exists");
    }
    s->id = id;
    sessions_[id] = std::move(s);
    return id;
}

std::string ServiceCore::create_session(std::span<const std::uint8_t> image_bytes) {
    if (image_bytes.size() > config_.max_upload_bytes)
        throw Error(ErrorCode::TooLarge, "upload exceeds " + std::to_string(config_.max_upload_bytes) + " bytes", "image");
    Image img;
    try {
        img = decode_image(image_bytes);
    } catch (const Error& e) {
        throw Error(ErrorCode::Decode, std::string("cannot decode image: ") + e.what(), "image");
    }
    if (img.width <= 0 || img.height <= 0) throw Error(ErrorCode::Decode, "image is empty", "image");
    if (img.width > config_.max_side || img.height > config_.max_side)
        throw Error(ErrorCode::TooLarge, "image side exceeds " + std::to_string(config_.max_side) + " pixels", "image");
    return add_session(to_rgba(img), std::nullopt);
}

json ServiceCore::session_info(const std::string& id) const {
    const auto s = find(id);
    std::shared_lock lock(s->mu);
    return {{"schema", 1},
            {"id", s->id},
            {"width", s->image.width},
            {"height", s->image.height},
            {"revision", s->revision},
            {"has_annotations", s->annotations.has_value()}};
}

json ServiceCore::get_annotations(const std::string& id) const {
    const auto s = find(id);
    std::shared_lock lock(s->mu);
    return {{"schema", 1}, {"id", s->id}, {"revision", s->revision},
            {"annotations", s->annotations ? to_json(*s->annotations) : json()}};
}

std::uint64_t ServiceCore::put_annotations(const std::string& id, const json& annotations,
                                           std::optional<std::uint64_t> expected_revision) {
    const auto s = find(id);
    AnnotationSet set = annotations_from_json(annotations);
    std::unique_lock lock(s->mu);
    if (expected_revision && *expected_revision != s->revision)
        throw Error(ErrorCode::Conflict, "annotations changed since revision " + std::to_string(*expected_revision), "revision");
    if (set.canvas.width != s->image.width || set.canvas.height != s->image.height)
        throw Error(ErrorCode::FrameMismatch, "annotation canvas does not match the image size", "canvas");
    s->annotations = std::move(set);
    ++s->revision;
    std::lock_guard cache(s->cache_mu);
    s->rig.reset();
    return s->revision;
}

namespace {

std::shared_ptr<Rig> build_rig(const Triangulation& tri, const AnnotationSet& set, std::uint64_t revision) {
    const auto& ref = set.reference();
    auto rig = std::make_shared<Rig>();
    rig->revision = revision;
    std::vector<std::vector<int>> handles;
    std::set<int> used;
    for (const auto& j : ref.joints) {
        const int v = nearest_vertex(tri.vertices, j.position);
        if (!used.insert(v).second)
            throw Error(ErrorCode::InvalidInput, "joint '" + j.name + "' shares its nearest mesh vertex with another joint");
        rig->joint_vertex.push_back(v);
        handles.push_back({v});
    }
    rig->mesh = make_deform_mesh(tri, std::move(handles));
    for (const auto& j : ref.joints) {
        int bone = -1;
        for (std::size_t b = 0; b < ref.bones.size() && bone < 0; ++b)
            if (ref.bones[b].second == j.name) bone = int(b);
        for (std::size_t b = 0; b < ref.bones.size() && bone < 0; ++b)
            if (ref.bones[b].first == j.name) bone = int(b);
        rig->joint_bone.push_back(bone);
    }
    rig->segments = frame_segments(ref);
    rig->assignment = assign_nearest_segment(rig->mesh.vertices, rig->segments);
    return rig;
}

AnnotationFrame pose_frame(const AnnotationFrame& ref, const std::vector<Joint>& joints, const std::string& id) {
    AnnotationFrame f;
    f.id = id;
    f.bones = ref.bones;
    f.layer_order = ref.layer_order;
    std::set<std::string> names;
    for (const auto& j : joints) {
        if (!ref.find_joint(j.name)) throw Error(ErrorCode::DanglingReference, "unknown joint '" + j.name + "'", "joints");
        if (!names.insert(j.name).second) throw Error(ErrorCode::Schema, "joint '" + j.name + "' given twice", "joints");
        if (!j.position.allFinite()) throw Error(ErrorCode::Schema, "joint '" + j.name + "' is not finite", "joints");
    }
    // keep the reference joint order
    for (const auto& rj : ref.joints) {
        const auto it = std::find_if(joints.begin(), joints.end(), [&](const Joint& j) { return j.name == rj.name; });
        if (it == joints.end()) throw Error(ErrorCode::FrameMismatch, "joint '" + rj.name + "' missing from pose", "joints");
        f.joints.push_back(*it);
    }
    return f;
}

} // namespace

PreviewResult ServiceCore::preview(const std::string& id, const std::vector<Joint>& joints, Backend backend, Resampling mode,
                                   std::optional<std::uint64_t> expected_revision) const {
    const auto s = find(id);
    std::shared_lock lock(s->mu);
    if (!s->annotations) throw Error(ErrorCode::InvalidInput, "session has no annotations yet", "annotations");
    if (expected_revision && *expected_revision != s->revision)
        throw Error(ErrorCode::Conflict, "annotations are at revision " + std::to_string(s->revision), "revision");
    const AnnotationSet& set = *s->annotations;
    const AnnotationFrame& ref = set.reference();
    const AnnotationFrame pose = pose_frame(ref, joints, "preview");
    const auto bone_transforms = fit_bone_transforms(ref, pose);

    std::shared_ptr<Rig> rig;
    std::shared_ptr<const ArapSolver> arap;
    std::shared_ptr<const WeightField> bbw;
    {
        std::lock_guard cache(s->cache_mu);
        if (!s->outline_mesh) s->outline_mesh = std::make_shared<const Triangulation>(mesh_silhouette(s->image, config_.silhouette));
        if (!s->rig || s->rig->revision != s->revision) s->rig = build_rig(*s->outline_mesh, set, s->revision);
        rig = s->rig;
        if (backend == Backend::Arap && !rig->arap) rig->arap = std::make_shared<const ArapSolver>(rig->mesh, rig->joint_vertex);
        if (backend == Backend::Bbw && !rig->bbw) rig->bbw = std::make_shared<const WeightField>(compute_bbw(rig->mesh, config_.bbw));
        arap = rig->arap;
        bbw = rig->bbw;
    }

    // handle transform per joint: the driving bone's rotation, pinned at the joint
    std::vector<RigidTransform> joint_transforms;
    for (std::size_t j = 0; j < ref.joints.size(); ++j) {
        const Mat2 r = bone_transforms[std::size_t(rig->joint_bone[j])].linear;
        RigidTransform t;
        t.linear = r;
        t.translation = pose.joints[j].position - r * ref.joints[j].position;
        joint_transforms.push_back(t);
    }

    PreviewResult out;
    out.revision = s->revision;
    out.backend = backend;
    std::vector<Vec2> deformed;
    switch (backend) {
    case Backend::Rigid: deformed = deform_rigid(rig->mesh.vertices, rig->assignment, bone_transforms); break;
    case Backend::Arap: {
        std::vector<Vec2> pins;
        for (std::size_t j = 0; j < rig->joint_vertex.size(); ++j)
            pins.push_back(joint_transforms[j](rig->mesh.vertices[std::size_t(rig->joint_vertex[j])]));
        out.arap = arap->solve(pins, config_.arap);
        deformed = out.arap->vertices;
        if (!out.arap->converged) out.warnings.push_back("ARAP stopped after " + std::to_string(out.arap->iterations) + " iterations");
        break;
    }
    case Backend::Bbw: deformed = deform_lbs(rig->mesh.vertices, *bbw, joint_transforms); break;
    }
    const Extent canvas{s->image.width, s->image.height};
    out.image = render_deformed(s->image, rig->mesh.vertices, deformed, rig->mesh.triangles, canvas, mode, kTransparent, &out.stats);
    if (out.stats.inverted_triangles > 0)
        out.warnings.push_back(std::to_string(out.stats.inverted_triangles) + " triangles are inverted");
    out.skeleton = encode_posed(rig->segments, bone_transforms, ref.layers(), canvas, config_.codec);
    return out;
}

std::vector<std::uint8_t> ServiceCore::export_bundle(const std::string& id,
                                                     const std::vector<std::pair<std::string, std::vector<Joint>>>& poses) const {
    if (poses.empty()) throw Error(ErrorCode::InvalidInput, "export needs at least one pose", "poses");
    const auto s = find(id);
    std::shared_lock lock(s->mu);
    if (!s->annotations) throw Error(ErrorCode::InvalidInput, "session has no annotations yet", "annotations");
    const AnnotationFrame& ref = s->annotations->reference();
    AnnotationSet bundle;
    bundle.version = s->annotations->version;
    bundle.canvas = s->annotations->canvas;
    bundle.reference_frame = ref.id;
    bundle.frames.push_back(ref);
    for (std::size_t k = 0; k < poses.size(); ++k) {
        const std::string fid = poses[k].first.empty() ? "pose_" + std::to_string(k + 1) : poses[k].first;
        bundle.frames.push_back(pose_frame(ref, poses[k].second, fid));
    }
    validate(bundle);
    const auto rasters = annotations_to_rasters(bundle, config_.codec);
    std::vector<std::pair<std::string, std::vector<std::uint8_t>>> files;
    const std::string doc = to_json(bundle).dump(2) + "\n";
    files.emplace_back("annotations.json", std::vector<std::uint8_t>(doc.begin(), doc.end()));
    files.emplace_back("reference_skeleton.png", encode_png(rasters[0]));
    for (std::size_t k = 1; k < rasters.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "pose_%02zu_skeleton.png", k);
        files.emplace_back(name, encode_png(rasters[k]));
    }
    return make_tar(files);
}

std::vector<std::string> ServiceCore::session_ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) out.push_back(id);
    return out;
}

void ServiceCore::save(const fs::path& dir) const {
    for (const auto& id : session_ids()) {
        const auto s = find(id);
        std::shared_lock lock(s->mu);
        const fs::path d = dir / id;
        fs::create_directories(d);
        write_png(d / "image.png", s->image);
        if (s->annotations) write_annotations(*s->annotations, d / "annotations.json");
        write_file_atomic(d / "session.json", json{{"revision", s->revision}}.dump() + "\n");
    }
}

std::size_t ServiceCore::load(const fs::path& dir) {
    if (!fs::is_directory(dir)) return 0;
    std::size_t n = 0;
    std::vector<fs::path> entries;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory() && fs::exists(e.path() / "image.png")) entries.push_back(e.path());
    std::sort(entries.begin(), entries.end());
    for (const auto& d : entries) {
        std::optional<AnnotationSet> ann;
        if (fs::exists(d / "annotations.json")) ann = parse_annotations(d / "annotations.json");
        const std::string id = add_session(to_rgba(read_image(d / "image.png")), std::move(ann), d.filename().string());
        if (fs::exists(d / "session.json")) {
            std::ifstream in(d / "session.json");
            const auto j = json::parse(in);
            find(id)->revision = j.at("revision").get<std::uint64_t>();
        }
        ++n;
    }
    return n;
}

// ---------------------------------------------------------------------------
// JSON entry points

std::vector<Joint> joints_from_json(const json& j, const std::string& path) {
    if (!j.is_array()) throw Error(ErrorCode::Schema, "expected an array of joints", path);
    std::vector<Joint> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        const std::string p = path + "[" + std::to_string(k) + "]";
        const auto& e = j[k];
        if (!e.is_object() || !e.contains("name") || !e["name"].is_string() || !e.contains("x") || !e["x"].is_number() ||
            !e.contains("y") || !e["y"].is_number())
            throw Error(ErrorCode::Schema, "joint needs a string name and numeric x, y", p);
        out.push_back({e["name"].get<std::string>(), Vec2(e["x"].get<double>(), e["y"].get<double>())});
    }
    return out;
}

namespace {

std::optional<std::uint64_t> optional_revision(const json& body) {
    if (!body.is_object() || !body.contains("revision")) return std::nullopt;
    if (!body["revision"].is_number_unsigned()) throw Error(ErrorCode::Schema, "revision must be a non-negative integer", "revision");
    return body["revision"].get<std::uint64_t>();
}

} // namespace

json ServiceCore::handle_create(const json& body) {
    if (!body.is_object() || !body.contains("image") || !body["image"].is_string())
        throw Error(ErrorCode::Schema, "body needs a base64 'image' string", "image");
    const auto bytes = base64_decode(body["image"].get<std::string>());
    return session_info(create_session(bytes));
}

json ServiceCore::handle_put_annotations(const std::string& id, const json& body) {
    const bool wrapped = body.is_object() && body.contains("annotations");
    const std::uint64_t rev = put_annotations(id, wrapped ? body["annotations"] : body, wrapped ? optional_revision(body) : std::nullopt);
    return {{"schema", 1}, {"id", id}, {"revision", rev}};
}

json ServiceCore::handle_preview(const std::string& id, const json& body) const {
    if (!body.is_object()) throw Error(ErrorCode::Schema, "body must be an object");
    if (!body.contains("joints")) throw Error(ErrorCode::Schema, "missing field 'joints'", "joints");
    const auto joints = joints_from_json(body["joints"], "joints");
    const Backend backend = parse_backend(body.value("backend", std::string("rigid")));
    const std::string res = body.value("resampling", std::string("nearest"));
    if (res != "nearest" && res != "bilinear") throw Error(ErrorCode::Schema, "resampling must be nearest or bilinear", "resampling");
    const auto r = preview(id, joints, backend, res == "nearest" ? Resampling::Nearest : Resampling::Bilinear, optional_revision(body));
    json out{{"schema", 1},
             {"id", id},
             {"revision", r.revision},
             {"backend", to_string(r.backend)},
             {"image", base64_encode(encode_png(r.image))},
             {"skeleton", base64_encode(encode_png(r.skeleton))},
             {"warnings", r.warnings},
             {"stats",
              {{"inverted_triangles", r.stats.inverted_triangles},
               {"degenerate_triangles", r.stats.degenerate_triangles},
               {"covered_pixels", r.stats.covered_pixels}}}};
    if (r.arap)
        out["arap"] = {{"iterations", r.arap->iterations}, {"converged", r.arap->converged}, {"energy", r.arap->energy.back()}};
    return out;
}

std::vector<std::uint8_t> ServiceCore::handle_export(const std::string& id, const json& body) const {
    if (!body.is_object() || !body.contains("poses") || !body["poses"].is_array())
        throw Error(ErrorCode::Schema, "body needs a 'poses' array", "poses");
    std::vector<std::pair<std::string, std::vector<Joint>>> poses;
    for (std::size_t k = 0; k < body["poses"].size(); ++k) {
        const auto& p = body["poses"][k];
        const std::string path = "poses[" + std::to_string(k) + "]";
        if (!p.is_object() || !p.contains("joints")) throw Error(ErrorCode::Schema, "pose needs 'joints'", path);
        std::string pid;
        if (p.contains("id")) {
            if (!p["id"].is_string()) throw Error(ErrorCode::Schema, "pose id must be a string", path + ".id");
            pid = p["id"].get<std::string>();
        }
        poses.emplace_back(pid, joints_from_json(p["joints"], path + ".joints"));
    }
    return export_bundle(id, poses);
}

int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Conflict: return 409;
    case ErrorCode::TooLarge: return 413;
    case ErrorCode::Solver: return 422;
    case ErrorCode::Io: return 500;
    default: return 400;
    }
}

json error_body(const Error& e) {
    json err{{"code", to_string(e.code())}, {"message", e.what()}};
    if (!e.field().empty()) err["field"] = e.field();
    return {{"schema", 1}, {"error", err}};
}

} // namespace toporig
