#pragma once

#include "toporig/appearance.hpp"
#include "toporig/geometry.hpp"
#include "toporig/kinematics.hpp"
#include "toporig/skelcodec.hpp"
#include "toporig/topology.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace toporig {

/// Generation settings. Serialized as JSON; every key is optional and unknown
/// keys are rejected (see README for the schema).
struct DatasetConfig {
    Extent canvas;
    TopologyConfig topology;
    LayoutConfig layout;
    ShapeConfig shape;
    PoseParams pose;
    CodecParams codec;
    Resampling resampling = Resampling::Bilinear;
    /// Target poses per character.
    int variants = 2;
    /// Layer orderings per character.
    int orderings = 2;
    /// Whole-character resamples (fresh sub-seed) after a shape failure.
    int character_retries = 5;
    /// Texture directory; empty selects the built-in procedural pool.
    std::string texture_dir;
    int procedural_textures = 64;
    std::uint64_t procedural_seed = 1;

    nlohmann::json to_json() const;
    static DatasetConfig from_json(const nlohmann::json& j);
    static DatasetConfig load(const std::filesystem::path& path);
    /// Throws InvalidConfig.
    void validate() const;
};

/// Environment variable that overrides DatasetConfig::texture_dir.
inline constexpr const char* kTextureEnv = "TOPORIG_TEXTURES";

/// Random solid, stripe, checker, gradient and noise textures.
std::vector<Image> procedural_textures(int count, std::uint64_t seed, int size = 256);

/// Pool for a config: env override, then texture_dir, then procedural.
TexturePool open_texture_pool(const DatasetConfig& config);

struct PartRecord {
    std::vector<Vec2> control_points;
    std::size_t texture_id = 0;
    std::string texture_path;
    int crop_x = 0;
    int crop_y = 0;
};

/// Everything needed to re-render a sample without its seed.
struct SampleMeta {
    std::uint64_t index = 0;
    std::uint64_t seed = 0;
    int attempt = 0;
    TreeSkeleton tree;
    std::vector<PartRecord> parts;            ///< one per bone
    std::vector<std::vector<int>> orderings;  ///< per ordering, layer of each bone
    std::vector<PoseSpec> poses;              ///< per variant
    int layer_levels = 0;

    nlohmann::json to_json() const;
    static SampleMeta from_json(const nlohmann::json& j);
};

/// One (reference, target) training pair.
struct SamplePair {
    int ordering = 0;
    int variant = 0;
    Image ref_appearance;
    Image ref_skeleton;
    Image target_skeleton;
    Image target_appearance;
};

struct Sample {
    SampleMeta meta;
    std::vector<SamplePair> pairs;  ///< ordering-major

    /// (file name, PNG bytes) for every raster; reference rasters once per ordering.
    std::vector<std::pair<std::string, std::vector<std::uint8_t>>> encode_files() const;
};

std::uint64_t sample_seed(std::uint64_t master_seed, std::uint64_t index);

/// Topology, layout, shapes, textures, orderings and poses of one sample,
/// without rendering. generate_sample renders exactly this.
SampleMeta plan_sample(std::uint64_t master_seed, std::uint64_t index, const DatasetConfig& config, const TexturePool& pool);

Sample generate_sample(std::uint64_t master_seed, std::uint64_t index, const DatasetConfig& config, const TexturePool& pool);

/// Re-renders all rasters from metadata alone.
Sample render_sample(const SampleMeta& meta, const DatasetConfig& config, const TexturePool& pool);

struct ManifestEntry {
    std::uint64_t index = 0;
    std::uint64_t seed = 0;
    std::string dir;  ///< relative to the dataset root
    std::vector<std::string> files;
};

struct DatasetManifest {
    int format_version = 1;
    std::uint64_t master_seed = 0;
    DatasetConfig config;
    std::vector<ManifestEntry> samples;

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j);
    static DatasetManifest load(const std::filesystem::path& root);
};

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kMetaName = "meta.json";

std::string sample_dir_name(std::uint64_t index);

struct GenerateOptions {
    /// Called after each finished sample (serialized, any thread order).
    std::function<void(std::uint64_t done, std::uint64_t total)> progress;
    /// Stop after this many newly generated samples (testing interruption); -1 = no limit.
    long stop_after = -1;
};

/// Generates `count` samples under `out_dir` in parallel, skipping sample
/// directories that already hold a complete sample for the same seed, and
/// writes the manifest last. Any stale manifest is removed first, so an
/// aborted run never leaves one behind.
DatasetManifest generate_dataset(const DatasetConfig& config, std::uint64_t master_seed, std::uint64_t count,
                                 const std::filesystem::path& out_dir, const TexturePool& pool,
                                 const GenerateOptions& options = {});

struct ValidationReport {
    std::uint64_t samples_checked = 0;
    std::vector<std::string> errors;
    bool ok() const { return errors.empty(); }
};

/// Checks files exist, skeleton rasters decode, seeds match the manifest and
/// every raster is byte-identical to its regeneration from metadata.
ValidationReport validate_dataset(const std::filesystem::path& root, const TexturePool& pool);

} // namespace toporig
