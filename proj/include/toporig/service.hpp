#pragma once

#include "toporig/annotations.hpp"
#include "toporig/deform.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

namespace toporig {

// ---------------------------------------------------------------------------
// Silhouette meshing

struct SilhouetteOptions {
    int alpha_threshold = 128;  ///< alpha >= threshold counts as inside
    int dilation = 2;           ///< pixels grown around the mask before tracing
    double tolerance = 1.0;     ///< Douglas-Peucker tolerance in pixels
    double target_edge = 12.0;  ///< interior vertex spacing
};

/// Binary mask (1 byte per pixel) of the largest 4-connected opaque region.
std::vector<std::uint8_t> silhouette_mask(const Image& rgba, int alpha_threshold);

/// Simple counter-clockwise outline around the largest opaque region, traced
/// along pixel edges after dilation, hole filling and removal of diagonal
/// pinches, then simplified. Throws InvalidInput for an empty silhouette.
std::vector<Vec2> silhouette_outline(const Image& rgba, const SilhouetteOptions& options = {});

Triangulation mesh_silhouette(const Image& rgba, const SilhouetteOptions& options = {});

// ---------------------------------------------------------------------------
// Encoding helpers

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws InvalidInput on malformed input.
std::vector<std::uint8_t> base64_decode(const std::string& text);

/// Deterministic ustar archive (mode 0644, mtime 0, owner 0).
std::vector<std::uint8_t> make_tar(const std::vector<std::pair<std::string, std::vector<std::uint8_t>>>& files);

// ---------------------------------------------------------------------------
// Sessions

struct ServiceConfig {
    std::size_t max_upload_bytes = 32u << 20;
    int max_side = 4096;
    SilhouetteOptions silhouette;
    ArapOptions arap;
    BbwOptions bbw;
    CodecParams codec;
};

struct PreviewResult {
    std::uint64_t revision = 0;
    Backend backend = Backend::Rigid;
    Image image;     ///< RGBA, image-sized, transparent background
    Image skeleton;  ///< posed skeleton raster
    RenderStats stats;
    std::optional<ArapResult> arap;
    std::vector<std::string> warnings;
};

/// Transport-independent session store. Calls on different sessions run
/// concurrently; mutations of one session are serialized and previews share
/// a per-revision solver cache.
class ServiceCore {
public:
    explicit ServiceCore(ServiceConfig config = {});
    ~ServiceCore();

    /// Returns the new session id. Throws Decode or TooLarge.
    std::string create_session(std::span<const std::uint8_t> image_bytes);
    nlohmann::json session_info(const std::string& id) const;
    /// Annotations (null before the first PUT) with the current revision.
    nlohmann::json get_annotations(const std::string& id) const;
    /// Validates and stores; returns the new revision. When
    /// `expected_revision` is given and stale, throws Conflict.
    std::uint64_t put_annotations(const std::string& id, const nlohmann::json& annotations,
                                  std::optional<std::uint64_t> expected_revision = std::nullopt);
    /// Pose given as joint name -> position; not stored.
    PreviewResult preview(const std::string& id, const std::vector<Joint>& joints, Backend backend,
                          Resampling mode = Resampling::Nearest,
                          std::optional<std::uint64_t> expected_revision = std::nullopt) const;
    /// Archive with annotations.json (reference frame plus one frame per
    /// pose), the reference skeleton raster and one posed raster per pose.
    std::vector<std::uint8_t> export_bundle(const std::string& id,
                                            const std::vector<std::pair<std::string, std::vector<Joint>>>& poses) const;

    std::vector<std::string> session_ids() const;

    /// Writes every session (image + annotations) below `dir`.
    void save(const std::filesystem::path& dir) const;
    /// Restores sessions written by save(); returns how many were loaded.
    std::size_t load(const std::filesystem::path& dir);

    const ServiceConfig& config() const { return config_; }

    // JSON-level entry points shared by the HTTP layer and tests.
    nlohmann::json handle_create(const nlohmann::json& body);
    nlohmann::json handle_put_annotations(const std::string& id, const nlohmann::json& body);
    nlohmann::json handle_preview(const std::string& id, const nlohmann::json& body) const;
    std::vector<std::uint8_t> handle_export(const std::string& id, const nlohmann::json& body) const;

private:
    struct Session;
    std::shared_ptr<Session> find(const std::string& id) const;
    std::string add_session(Image image, std::optional<AnnotationSet> annotations, std::string id = {});

    ServiceConfig config_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
};

/// HTTP status for an error code.
int http_status(ErrorCode code);
nlohmann::json error_body(const Error& e);

/// Parses a [{"name", "x", "y"}, ...] array.
std::vector<Joint> joints_from_json(const nlohmann::json& j, const std::string& path);

/// HTTP front end over a ServiceCore (JSON bodies, base64 images, tar export).
class HttpServer {
public:
    explicit HttpServer(ServiceCore& core);
    ~HttpServer();
    /// Binds and returns the port; then call listen() (blocking).
    int bind(const std::string& host, int port);
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace toporig
