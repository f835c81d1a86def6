#include "toporig/dataset.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>

namespace toporig {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

namespace {

/// Reads keys of one JSON object, rejecting anything not consumed.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw Error(ErrorCode::InvalidConfig, "expected an object", path_);
    }
    ~ObjectReader() noexcept(false) {
        if (std::uncaught_exceptions()) return;
        for (const auto& [key, value] : j_.items())
            if (!used_.count(key)) throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "'", join(key));
    }
    template <class T>
    void get(const char* key, T& out) {
        used_.insert(key);
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw Error(ErrorCode::InvalidConfig, "expected a boolean", join(key));
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw Error(ErrorCode::InvalidConfig, "expected an integer", join(key));
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw Error(ErrorCode::InvalidConfig, "expected a number", join(key));
            } else {
                if (!v.is_string()) throw Error(ErrorCode::InvalidConfig, "expected a string", join(key));
            }
            out = v.get<T>();
        } catch (const json::exception& e) {
            throw Error(ErrorCode::InvalidConfig, e.what(), join(key));
        }
    }
    const json* sub(const char* key) {
        used_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }
    std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

const char* resampling_name(Resampling r) { return r == Resampling::Nearest ? "nearest" : "bilinear"; }

} // namespace

json DatasetConfig::to_json() const {
    json j;
    j["canvas"] = {{"width", canvas.width}, {"height", canvas.height}};
    j["topology"] = {{"max_bones", topology.max_bones},
                     {"min_edge_frac", topology.min_edge_frac},
                     {"max_edge_frac", topology.max_edge_frac}};
    j["layout"] = {{"iterations", layout.iterations},
                   {"initial_temperature", layout.initial_temperature},
                   {"margin_frac", layout.margin_frac},
                   {"min_bone_px", layout.min_bone_px}};
    j["shape"] = {{"min_points_per_side", shape.min_points_per_side},
                  {"max_points_per_side", shape.max_points_per_side},
                  {"min_aspect", shape.min_aspect},
                  {"max_aspect", shape.max_aspect},
                  {"max_overhang", shape.max_overhang},
                  {"samples_per_segment", shape.samples_per_segment},
                  {"max_retries", shape.max_retries}};
    j["pose"] = {{"max_branch_angle_rad", pose.max_branch_angle},
                 {"max_global_angle_rad", pose.max_global_angle},
                 {"max_translation", pose.max_translation},
                 {"branch_probability", pose.branch_probability},
                 {"max_branches", pose.max_branches},
                 {"retries", pose.retries}};
    j["codec"] = {{"scale", codec.scale}, {"stroke_width", codec.stroke_width}, {"layer_levels", codec.layer_levels}};
    j["resampling"] = resampling_name(resampling);
    j["variants"] = variants;
    j["orderings"] = orderings;
    j["character_retries"] = character_retries;
    j["texture_dir"] = texture_dir;
    j["procedural_textures"] = procedural_textures;
    j["procedural_seed"] = procedural_seed;
    return j;
}

DatasetConfig DatasetConfig::from_json(const json& j) {
    DatasetConfig c;
    {
        ObjectReader r(j, "");
        if (const json* s = r.sub("canvas")) {
            ObjectReader o(*s, "canvas");
            o.get("width", c.canvas.width);
            o.get("height", c.canvas.height);
        }
        if (const json* s = r.sub("topology")) {
            ObjectReader o(*s, "topology");
            o.get("max_bones", c.topology.max_bones);
            o.get("min_edge_frac", c.topology.min_edge_frac);
            o.get("max_edge_frac", c.topology.max_edge_frac);
        }
        if (const json* s = r.sub("layout")) {
            ObjectReader o(*s, "layout");
            o.get("iterations", c.layout.iterations);
            o.get("initial_temperature", c.layout.initial_temperature);
            o.get("margin_frac", c.layout.margin_frac);
            o.get("min_bone_px", c.layout.min_bone_px);
        }
        if (const json* s = r.sub("shape")) {
            ObjectReader o(*s, "shape");
            o.get("min_points_per_side", c.shape.min_points_per_side);
            o.get("max_points_per_side", c.shape.max_points_per_side);
            o.get("min_aspect", c.shape.min_aspect);
            o.get("max_aspect", c.shape.max_aspect);
            o.get("max_overhang", c.shape.max_overhang);
            o.get("samples_per_segment", c.shape.samples_per_segment);
            o.get("max_retries", c.shape.max_retries);
        }
        if (const json* s = r.sub("pose")) {
            ObjectReader o(*s, "pose");
            o.get("max_branch_angle_rad", c.pose.max_branch_angle);
            o.get("max_global_angle_rad", c.pose.max_global_angle);
            o.get("max_translation", c.pose.max_translation);
            o.get("branch_probability", c.pose.branch_probability);
            o.get("max_branches", c.pose.max_branches);
            o.get("retries", c.pose.retries);
        }
        if (const json* s = r.sub("codec")) {
            ObjectReader o(*s, "codec");
            o.get("scale", c.codec.scale);
            o.get("stroke_width", c.codec.stroke_width);
            o.get("layer_levels", c.codec.layer_levels);
        }
        std::string resampling = resampling_name(c.resampling);
        r.get("resampling", resampling);
        if (resampling == "nearest") c.resampling = Resampling::Nearest;
        else if (resampling == "bilinear") c.resampling = Resampling::Bilinear;
        else throw Error(ErrorCode::InvalidConfig, "resampling must be 'nearest' or 'bilinear'", "resampling");
        r.get("variants", c.variants);
        r.get("orderings", c.orderings);
        r.get("character_retries", c.character_retries);
        r.get("texture_dir", c.texture_dir);
        r.get("procedural_textures", c.procedural_textures);
        r.get("procedural_seed", c.procedural_seed);
    }
    c.validate();
    return c;
}

DatasetConfig DatasetConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
    }
    return from_json(j);
}

void DatasetConfig::validate() const {
    auto fail = [](const std::string& what, const char* field) { throw Error(ErrorCode::InvalidConfig, what, field); };
    if (canvas.width < 16 || canvas.height < 16) fail("canvas must be at least 16 × 16", "canvas");
    if (topology.max_bones < 1) fail("max_bones must be >= 1", "topology.max_bones");
    if (!(topology.min_edge_frac > 0) || !(topology.max_edge_frac >= topology.min_edge_frac))
        fail("edge length range must be positive and ordered", "topology");
    if (layout.iterations < 0) fail("layout iterations must be >= 0", "layout.iterations");
    if (!(layout.margin_frac >= 0 && layout.margin_frac < 0.5)) fail("margin_frac must be in [0, 0.5)", "layout.margin_frac");
    if (shape.min_points_per_side < 1 || shape.max_points_per_side < shape.min_points_per_side)
        fail("points per side must be >= 1 and ordered", "shape");
    if (!(shape.min_aspect > 0) || !(shape.max_aspect >= shape.min_aspect)) fail("aspect range must be positive and ordered", "shape");
    if (!(shape.max_overhang >= 0)) fail("max_overhang must be >= 0", "shape.max_overhang");
    if (shape.samples_per_segment < 2) fail("samples_per_segment must be >= 2", "shape.samples_per_segment");
    if (!(pose.branch_probability >= 0 && pose.branch_probability <= 1))
        fail("branch_probability must be in [0, 1]", "pose.branch_probability");
    if (!(pose.max_translation >= 0)) fail("max_translation must be >= 0", "pose.max_translation");
    if (!(codec.scale > 0 && codec.scale <= 255)) fail("codec scale must be in (0, 255]", "codec.scale");
    if (!(codec.stroke_width > 0)) fail("stroke width must be positive", "codec.stroke_width");
    if (codec.layer_levels != 0 && codec.layer_levels < topology.max_bones)
        fail("layer_levels must be 0 or >= max_bones", "codec.layer_levels");
    if (variants < 1) fail("variants must be >= 1", "variants");
    if (orderings < 1) fail("orderings must be >= 1", "orderings");
    if (character_retries < 1) fail("character_retries must be >= 1", "character_retries");
    if (texture_dir.empty() && procedural_textures < 1) fail("procedural_textures must be >= 1", "procedural_textures");
}

// ---------------------------------------------------------------------------
// Textures

std::vector<Image> procedural_textures(int count, std::uint64_t seed, int size) {
    if (count < 1 || size < 1) throw Error(ErrorCode::InvalidConfig, "procedural texture count and size must be positive");
    std::vector<Image> out;
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, std::uint64_t(i)));
        auto color = [&] {
            std::array<double, 3> c;
            for (auto& v : c) v = double(rng.uniform_int(0, 255));
            return c;
        };
        const auto a = color(), b = color();
        const int kind = int(rng.uniform_int(0, 4));
        const double angle = rng.uniform(0.0, kPi);
        const double period = rng.uniform(6.0, 40.0);
        const Vec2 dir(std::cos(angle), std::sin(angle));
        // value noise lattice
        const int cells = int(rng.uniform_int(2, 12));
        std::vector<double> lattice(std::size_t(cells + 1) * std::size_t(cells + 1));
        for (auto& v : lattice) v = rng.uniform();
        Image img(size, size, 3);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                double t = 0.0;
                const Vec2 p(x + 0.5, y + 0.5);
                switch (kind) {
                case 0: t = 0.0; break;
                case 1: t = std::fmod(p.dot(dir) / period + 1e6, 1.0) < 0.5 ? 0.0 : 1.0; break;
                case 2: t = double((int(std::floor(p.x() / period)) + int(std::floor(p.y() / period))) & 1); break;
                case 3: t = std::clamp(p.dot(dir) / (size * 1.5) + 0.25, 0.0, 1.0); break;
                default: {
                    const double u = p.x() / size * cells, v = p.y() / size * cells;
                    const int iu = std::min(int(u), cells - 1), iv = std::min(int(v), cells - 1);
                    const double fu = u - iu, fv = v - iv;
                    auto at = [&](int cx, int cy) { return lattice[std::size_t(cy) * std::size_t(cells + 1) + std::size_t(cx)]; };
                    t = (1 - fu) * (1 - fv) * at(iu, iv) + fu * (1 - fv) * at(iu + 1, iv) + (1 - fu) * fv * at(iu, iv + 1) +
                        fu * fv * at(iu + 1, iv + 1);
                }
                }
                std::uint8_t* d = img.pixel(x, y);
                for (int c = 0; c < 3; ++c) d[c] = std::uint8_t(std::lround((1 - t) * a[std::size_t(c)] + t * b[std::size_t(c)]));
            }
        out.push_back(std::move(img));
    }
    return out;
}

TexturePool open_texture_pool(const DatasetConfig& config) {
    if (const char* env = std::getenv(kTextureEnv); env && *env) return TexturePool::from_directory(env);
    if (!config.texture_dir.empty()) return TexturePool::from_directory(config.texture_dir);
    return TexturePool::from_images(procedural_textures(config.procedural_textures, config.procedural_seed));
}

// ---------------------------------------------------------------------------
// Metadata

namespace {

json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec2 vec_from(const json& j) {
    if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::Schema, "expected an [x, y] pair");
    return Vec2(j.at(0).get<double>(), j.at(1).get<double>());
}

} // namespace

json SampleMeta::to_json() const {
    json j;
    j["index"] = index;
    j["seed"] = seed;
    j["attempt"] = attempt;
    json tj;
    tj["parent"] = tree.parent;
    tj["edge_length"] = tree.edge_length;
    tj["rest_position"] = json::array();
    for (const auto& p : tree.rest_position) tj["rest_position"].push_back(vec_json(p));
    j["tree"] = std::move(tj);
    j["parts"] = json::array();
    for (const auto& p : parts) {
        json pj;
        pj["control_points"] = json::array();
        for (const auto& c : p.control_points) pj["control_points"].push_back(vec_json(c));
        pj["texture_id"] = p.texture_id;
        pj["texture_path"] = p.texture_path;
        pj["crop"] = {p.crop_x, p.crop_y};
        j["parts"].push_back(std::move(pj));
    }
    j["orderings"] = orderings;
    j["poses"] = json::array();
    for (const auto& p : poses)
        j["poses"].push_back({{"bone_rotation", p.bone_rotation},
                              {"global_rotation", p.global_rotation},
                              {"global_translation", vec_json(p.global_translation)},
                              {"global_pivot", vec_json(p.global_pivot)}});
    j["layer_levels"] = layer_levels;
    return j;
}

SampleMeta SampleMeta::from_json(const json& j) {
    try {
        SampleMeta m;
        m.index = j.at("index").get<std::uint64_t>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.attempt = j.at("attempt").get<int>();
        const auto& tj = j.at("tree");
        m.tree.parent = tj.at("parent").get<std::vector<int>>();
        m.tree.edge_length = tj.at("edge_length").get<std::vector<double>>();
        for (const auto& p : tj.at("rest_position")) m.tree.rest_position.push_back(vec_from(p));
        for (const auto& pj : j.at("parts")) {
            PartRecord p;
            for (const auto& c : pj.at("control_points")) p.control_points.push_back(vec_from(c));
            p.texture_id = pj.at("texture_id").get<std::size_t>();
            p.texture_path = pj.at("texture_path").get<std::string>();
            p.crop_x = pj.at("crop").at(0).get<int>();
            p.crop_y = pj.at("crop").at(1).get<int>();
            m.parts.push_back(std::move(p));
        }
        m.orderings = j.at("orderings").get<std::vector<std::vector<int>>>();
        for (const auto& pj : j.at("poses")) {
            PoseSpec p;
            p.bone_rotation = pj.at("bone_rotation").get<std::vector<double>>();
            p.global_rotation = pj.at("global_rotation").get<double>();
            p.global_translation = vec_from(pj.at("global_translation"));
            p.global_pivot = vec_from(pj.at("global_pivot"));
            m.poses.push_back(std::move(p));
        }
        m.layer_levels = j.at("layer_levels").get<int>();
        if (m.tree.node_count() < 2 || int(m.parts.size()) != m.tree.bone_count())
            throw Error(ErrorCode::Schema, "sample metadata: one part per bone required");
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Schema, std::string("sample metadata: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Samples

std::uint64_t sample_seed(std::uint64_t master_seed, std::uint64_t index) { return derive_seed(master_seed, index); }

namespace {

std::vector<BoneSegment> rest_segments(const TreeSkeleton& tree) {
    std::vector<BoneSegment> out;
    for (int b = 0; b < tree.bone_count(); ++b)
        out.push_back({tree.rest_position[std::size_t(tree.parent_node(b))], tree.rest_position[std::size_t(TreeSkeleton::child_node(b))]});
    return out;
}

std::string ref_name(int o, const char* kind) { return "o" + std::to_string(o) + "_ref_" + kind + ".png"; }
std::string target_name(int o, int v, const char* kind) {
    return "o" + std::to_string(o) + "_v" + std::to_string(v) + "_target_" + kind + ".png";
}

std::vector<std::string> sample_file_names(int orderings, int variants) {
    std::vector<std::string> out;
    for (int o = 0; o < orderings; ++o) {
        out.push_back(ref_name(o, "appearance"));
        out.push_back(ref_name(o, "skeleton"));
        for (int v = 0; v < variants; ++v) {
            out.push_back(target_name(o, v, "skeleton"));
            out.push_back(target_name(o, v, "appearance"));
        }
    }
    return out;
}

Sample render(const SampleMeta& meta, std::vector<TexturedPart> parts, const DatasetConfig& config) {
    Sample s;
    s.meta = meta;
    const auto segments = rest_segments(meta.tree);
    CodecParams codec = config.codec;
    codec.layer_levels = meta.layer_levels;
    std::vector<std::vector<RigidTransform>> transforms;
    for (const auto& pose : meta.poses) transforms.push_back(forward_kinematics(meta.tree, pose));
    for (int o = 0; o < int(meta.orderings.size()); ++o) {
        const auto& layers = meta.orderings[std::size_t(o)];
        for (std::size_t b = 0; b < parts.size(); ++b) parts[b].layer = layers[b];
        const Image ref_app = composite(parts, config.canvas);
        const Image ref_skel = encode_rest(segments, layers, config.canvas, codec);
        for (int v = 0; v < int(meta.poses.size()); ++v) {
            SamplePair p;
            p.ordering = o;
            p.variant = v;
            p.ref_appearance = ref_app;
            p.ref_skeleton = ref_skel;
            p.target_skeleton = encode_posed(segments, transforms[std::size_t(v)], layers, config.canvas, codec);
            p.target_appearance = pose_character(parts, transforms[std::size_t(v)], config.canvas, config.resampling);
            s.pairs.push_back(std::move(p));
        }
    }
    return s;
}

} // namespace

std::vector<std::pair<std::string, std::vector<std::uint8_t>>> Sample::encode_files() const {
    std::vector<std::pair<std::string, std::vector<std::uint8_t>>> out;
    for (const auto& p : pairs) {
        if (p.variant == 0) {
            out.emplace_back(ref_name(p.ordering, "appearance"), encode_png(p.ref_appearance));
            out.emplace_back(ref_name(p.ordering, "skeleton"), encode_png(p.ref_skeleton));
        }
        out.emplace_back(target_name(p.ordering, p.variant, "skeleton"), encode_png(p.target_skeleton));
        out.emplace_back(target_name(p.ordering, p.variant, "appearance"), encode_png(p.target_appearance));
    }
    return out;
}

namespace {

SampleMeta plan(std::uint64_t master_seed, std::uint64_t index, const DatasetConfig& config, const TexturePool& pool,
                std::vector<TexturedPart>& parts_out) {
    config.validate();
    const std::uint64_t seed = sample_seed(master_seed, index);
    std::string last_error;
    for (int attempt = 0; attempt < config.character_retries; ++attempt) {
        const std::uint64_t cseed = derive_seed(seed, std::uint64_t(attempt));
        try {
            SampleMeta meta;
            meta.index = index;
            meta.seed = seed;
            meta.attempt = attempt;
            meta.tree = sample_topology(derive_seed(cseed, 1), config.topology.max_bones, config.topology, config.canvas);
            meta.tree = layout_rest_pose(std::move(meta.tree), config.canvas, derive_seed(cseed, 2), config.layout);
            const int n = meta.tree.bone_count();
            const auto segments = rest_segments(meta.tree);

            std::vector<PartShape> shapes;
            std::vector<std::vector<Vec2>> outlines;
            for (int b = 0; b < n; ++b) {
                const auto& seg = segments[std::size_t(b)];
                shapes.push_back(sample_part_shape(b, seg.start, seg.end, derive_seed(derive_seed(cseed, 3), std::uint64_t(b)), config.shape));
                outlines.push_back(shapes.back().boundary);
            }
            auto parts = assign_textures(shapes, pool, derive_seed(cseed, 4));
            for (int b = 0; b < n; ++b) {
                const auto& tp = parts[std::size_t(b)];
                meta.parts.push_back({shapes[std::size_t(b)].control_points, tp.texture_id, pool.record(tp.texture_id).path,
                                      tp.crop_x, tp.crop_y});
            }
            for (int o = 0; o < config.orderings; ++o)
                meta.orderings.push_back(sample_layer_order(n, derive_seed(derive_seed(cseed, 5), std::uint64_t(o))));
            for (int v = 0; v < config.variants; ++v)
                meta.poses.push_back(sample_pose(meta.tree, derive_seed(derive_seed(cseed, 6), std::uint64_t(v)), config.pose,
                                                 config.canvas, &outlines));
            meta.layer_levels = config.codec.layer_levels > 0 ? config.codec.layer_levels : n;
            parts_out = std::move(parts);
            return meta;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ShapeGeneration && e.code() != ErrorCode::LayoutFailure) throw;
            last_error = e.what();
        }
    }
    throw Error(ErrorCode::ShapeGeneration, "sample " + std::to_string(index) + ": character generation failed after " +
                                                std::to_string(config.character_retries) + " attempts: " + last_error);
}

} // namespace

SampleMeta plan_sample(std::uint64_t master_seed, std::uint64_t index, const DatasetConfig& config, const TexturePool& pool) {
    std::vector<TexturedPart> parts;
    return plan(master_seed, index, config, pool, parts);
}

Sample generate_sample(std::uint64_t master_seed, std::uint64_t index, const DatasetConfig& config, const TexturePool& pool) {
    std::vector<TexturedPart> parts;
    SampleMeta meta = plan(master_seed, index, config, pool, parts);
    return render(meta, std::move(parts), config);
}

Sample render_sample(const SampleMeta& meta, const DatasetConfig& config, const TexturePool& pool) {
    std::vector<TexturedPart> parts;
    for (int b = 0; b < int(meta.parts.size()); ++b) {
        const auto& rec = meta.parts[std::size_t(b)];
        if (rec.texture_id >= pool.size() || pool.record(rec.texture_id).path != rec.texture_path)
            throw Error(ErrorCode::InvalidInput, "texture " + rec.texture_path + " is not in the pool at index " +
                                                     std::to_string(rec.texture_id));
        PartShape shape;
        shape.owner_bone = b;
        shape.control_points = rec.control_points;
        shape.boundary = bezier_loop(rec.control_points, config.shape.samples_per_segment);
        parts.push_back(make_textured_part(shape, pool.load(rec.texture_id), rec.texture_id, rec.crop_x, rec.crop_y));
    }
    return render(meta, std::move(parts), config);
}

// ---------------------------------------------------------------------------
// Datasets

std::string sample_dir_name(std::uint64_t index) {
    std::ostringstream s;
    s << "samples/" << std::setw(6) << std::setfill('0') << index;
    return s.str();
}

json DatasetManifest::to_json() const {
    json j;
    j["format_version"] = format_version;
    j["master_seed"] = master_seed;
    j["count"] = samples.size();
    j["config"] = config.to_json();
    j["samples"] = json::array();
    for (const auto& s : samples) j["samples"].push_back({{"index", s.index}, {"seed", s.seed}, {"dir", s.dir}, {"files", s.files}});
    return j;
}

DatasetManifest DatasetManifest::from_json(const json& j) {
    DatasetManifest m;
    try {
        m.format_version = j.at("format_version").get<int>();
        if (m.format_version != 1) throw Error(ErrorCode::Schema, "unsupported manifest version");
        m.master_seed = j.at("master_seed").get<std::uint64_t>();
        m.config = DatasetConfig::from_json(j.at("config"));
        for (const auto& s : j.at("samples"))
            m.samples.push_back({s.at("index").get<std::uint64_t>(), s.at("seed").get<std::uint64_t>(),
                                 s.at("dir").get<std::string>(), s.at("files").get<std::vector<std::string>>()});
        if (j.at("count").get<std::size_t>() != m.samples.size()) throw Error(ErrorCode::Schema, "manifest count mismatch");
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Schema, std::string("manifest: ") + e.what());
    }
    return m;
}

DatasetManifest DatasetManifest::load(const fs::path& root) {
    std::ifstream in(root / kManifestName);
    if (!in) throw Error(ErrorCode::NotFound, "no manifest in " + root.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Schema, std::string("manifest is not valid JSON: ") + e.what());
    }
}

namespace {

// A sample directory counts as done when its metadata (written last) parses
// and matches the expected seed and every raster file exists.
bool sample_complete(const fs::path& dir, std::uint64_t index, std::uint64_t seed, const std::vector<std::string>& files) {
    std::ifstream in(dir / kMetaName);
    if (!in) return false;
    try {
        const auto meta = SampleMeta::from_json(json::parse(in));
        if (meta.index != index || meta.seed != seed) return false;
    } catch (const std::exception&) {
        return false;
    }
    for (const auto& f : files)
        if (!fs::exists(dir / f)) return false;
    return true;
}

} // namespace

DatasetManifest generate_dataset(const DatasetConfig& config, std::uint64_t master_seed, std::uint64_t count,
                                 const fs::path& out_dir, const TexturePool& pool, const GenerateOptions& options) {
    config.validate();
    std::error_code ec;
    fs::create_directories(out_dir / "samples", ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + (out_dir / "samples").string() + ": " + ec.message());
    fs::remove(out_dir / kManifestName, ec);

    const auto files = sample_file_names(config.orderings, config.variants);
    DatasetManifest manifest;
    manifest.master_seed = master_seed;
    manifest.config = config;
    manifest.samples.resize(count);

    std::mutex mu;
    std::string failure;
    std::atomic<long> generated{0};
    std::atomic<bool> stop{false};
    std::uint64_t done = 0;
    const auto n = std::int64_t(count);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
        if (stop.load()) continue;
        const auto index = std::uint64_t(i);
        const std::uint64_t seed = sample_seed(master_seed, index);
        const std::string rel = sample_dir_name(index);
        const fs::path dir = out_dir / rel;
        try {
            if (!sample_complete(dir, index, seed, files)) {
                if (options.stop_after >= 0 && generated.fetch_add(1) >= options.stop_after) {
                    stop = true;
                    continue;
                }
                const Sample s = generate_sample(master_seed, index, config, pool);
                fs::create_directories(dir);
                for (const auto& [name, bytes] : s.encode_files()) write_file_atomic(dir / name, bytes);
                write_file_atomic(dir / kMetaName, s.meta.to_json().dump(1) + "\n");
            }
            manifest.samples[index] = {index, seed, rel, files};
            std::lock_guard lock(mu);
            ++done;
            if (options.progress) options.progress(done, count);
        } catch (const std::exception& e) {
            std::lock_guard lock(mu);
            if (failure.empty()) failure = "sample " + std::to_string(index) + ": " + e.what();
            stop = true;
        }
    }
    if (!failure.empty()) throw Error(ErrorCode::Io, "dataset generation aborted: " + failure);
    if (stop) throw Error(ErrorCode::Io, "dataset generation interrupted before completion");
    write_file_atomic(out_dir / kManifestName, manifest.to_json().dump(1) + "\n");
    return manifest;
}

ValidationReport validate_dataset(const fs::path& root, const TexturePool& pool) {
    ValidationReport report;
    const DatasetManifest manifest = DatasetManifest::load(root);
    std::set<std::uint64_t> seeds;
    for (const auto& s : manifest.samples)
        if (!seeds.insert(s.seed).second) report.errors.push_back("duplicate seed " + std::to_string(s.seed));

    std::mutex mu;
    const auto n = std::int64_t(manifest.samples.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto& entry = manifest.samples[std::size_t(i)];
        std::vector<std::string> errs;
        const std::string tag = entry.dir + ": ";
        try {
            if (entry.seed != sample_seed(manifest.master_seed, entry.index)) errs.push_back(tag + "seed does not derive from the master seed");
            const fs::path dir = root / entry.dir;
            for (const auto& f : entry.files)
                if (!fs::exists(dir / f)) errs.push_back(tag + "missing " + f);
            std::ifstream in(dir / kMetaName);
            if (!in) throw Error(ErrorCode::NotFound, "missing meta.json");
            const SampleMeta meta = SampleMeta::from_json(json::parse(in));
            if (meta.seed != entry.seed || meta.index != entry.index) errs.push_back(tag + "metadata disagrees with the manifest");
            for (const auto& f : entry.files)
                if (f.find("skeleton") != std::string::npos && fs::exists(dir / f))
                    decode(read_image(dir / f), meta.layer_levels, manifest.config.codec.scale);
            const Sample regen = render_sample(meta, manifest.config, pool);
            for (const auto& [name, bytes] : regen.encode_files()) {
                if (!fs::exists(dir / name)) continue;
                if (read_file(dir / name) != bytes) errs.push_back(tag + name + " differs from its regeneration");
            }
        } catch (const std::exception& e) {
            errs.push_back(tag + e.what());
        }
        std::lock_guard lock(mu);
        ++report.samples_checked;
        report.errors.insert(report.errors.end(), errs.begin(), errs.end());
    }
    std::sort(report.errors.begin(), report.errors.end());
    return report;
}

} // namespace toporig
