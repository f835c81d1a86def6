#pragma once

#include "toporig/image.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace toporig {

/// Reported PSNR for identical frames (and the ceiling for all others).
inline constexpr double kPsnrCapDb = 99.0;

/// Mean squared error over all channels of frames normalized to [0, 1].
double mse(std::span<const double> a, std::span<const double> b);
/// Same on 8-bit images (values divided by 255). Sizes and channels must match.
double mse(const Image& a, const Image& b);
/// 10 log10(1 / mse) with MAX = 1, capped at kPsnrCapDb.
double psnr_from_mse(double m);

struct FrameScore {
    std::string name;
    std::optional<double> mse;
    std::optional<double> psnr;
    std::string error;  ///< non-empty when the frame could not be scored
};

struct MetricsReport {
    std::vector<FrameScore> frames;
    int scored = 0;
    double mean_mse = 0.0;
    double mean_psnr = 0.0;

    /// FID and LPIPS are reserved as null.
    nlohmann::json to_json() const;
};

/// Scores every PNG/JPEG in `ground_truth` against the file of the same
/// relative name in `predicted`. Missing or mis-sized frames become per-frame
/// error entries; only unreadable directories throw.
MetricsReport score_frames(const std::filesystem::path& predicted, const std::filesystem::path& ground_truth);

} // namespace toporig
