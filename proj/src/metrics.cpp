#include "toporig/metrics.hpp"

#include <algorithm>

namespace toporig {

double mse(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::InvalidInput, "mse: frames differ in size");
    if (a.empty()) throw Error(ErrorCode::InvalidInput, "mse: empty frames");
    double acc = 0.0;
    const auto n = std::ptrdiff_t(a.size());
#pragma omp parallel for reduction(+ : acc) schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double d = a[std::size_t(i)] - b[std::size_t(i)];
        acc += d * d;
    }
    return acc / double(a.size());
}

double mse(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw Error(ErrorCode::InvalidInput, "mse: frames differ in size or channels");
    if (a.data.empty()) throw Error(ErrorCode::InvalidInput, "mse: empty frames");
    // exact integer accumulation per row, then one division
    double acc = 0.0;
    const std::size_t row = std::size_t(a.width) * std::size_t(a.channels);
#pragma omp parallel for reduction(+ : acc) schedule(static)
    for (int y = 0; y < a.height; ++y) {
        std::uint64_t s = 0;
        const std::uint8_t* pa = a.data.data() + std::size_t(y) * row;
        const std::uint8_t* pb = b.data.data() + std::size_t(y) * row;
        for (std::size_t i = 0; i < row; ++i) {
            const int d = int(pa[i]) - int(pb[i]);
            s += std::uint64_t(d * d);
        }
        acc += double(s);
    }
    return acc / (255.0 * 255.0 * double(a.data.size()));
}

double psnr_from_mse(double m) {
    if (!(m >= 0.0)) throw Error(ErrorCode::InvalidInput, "psnr: negative or NaN mse");
    if (m == 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / m));
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["psnr_cap_db"] = kPsnrCapDb;
    j["frames"] = nlohmann::json::array();
    for (const auto& f : frames) {
        nlohmann::json fj{{"name", f.name}};
        if (f.error.empty()) {
            fj["mse"] = *f.mse;
            fj["psnr"] = *f.psnr;
        } else {
            fj["error"] = f.error;
        }
        j["frames"].push_back(std::move(fj));
    }
    j["scored"] = scored;
    j["failed"] = int(frames.size()) - scored;
    j["mean"] = {{"mse", scored ? nlohmann::json(mean_mse) : nlohmann::json()},
                 {"psnr", scored ? nlohmann::json(mean_psnr) : nlohmann::json()}};
    j["fid"] = nullptr;
    j["lpips"] = nullptr;
    return j;
}

namespace {

std::vector<std::string> list_images(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw Error(ErrorCode::Io, "not a directory: " + root.string());
    std::vector<std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::string ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(fs::relative(e.path(), root).generic_string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

MetricsReport score_frames(const std::filesystem::path& predicted, const std::filesystem::path& ground_truth) {
    const auto names = list_images(ground_truth);
    if (!std::filesystem::is_directory(predicted)) throw Error(ErrorCode::Io, "not a directory: " + predicted.string());
    MetricsReport report;
    report.frames.resize(names.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < names.size(); ++i) {
        FrameScore& f = report.frames[i];
        f.name = names[i];
        try {
            const auto pred_path = predicted / names[i];
            if (!std::filesystem::exists(pred_path)) throw Error(ErrorCode::NotFound, "missing predicted frame");
            Image gt = read_image(ground_truth / names[i]);
            Image pr = read_image(pred_path);
            if (gt.width != pr.width || gt.height != pr.height)
                throw Error(ErrorCode::InvalidInput, "size mismatch: predicted " + std::to_string(pr.width) + "x" +
                                                         std::to_string(pr.height) + ", ground truth " +
                                                         std::to_string(gt.width) + "x" + std::to_string(gt.height));
            if (gt.channels != pr.channels) {
                gt = to_rgba(gt);
                pr = to_rgba(pr);
            }
            const double m = mse(gt, pr);
            f.mse = m;
            f.psnr = psnr_from_mse(m);
        } catch (const Error& e) {
            f.error = e.what();
        }
    }
    for (const auto& f : report.frames) {
        if (!f.error.empty()) continue;
        ++report.scored;
        report.mean_mse += *f.mse;
        report.mean_psnr += *f.psnr;
    }
    if (report.scored) {
        report.mean_mse /= report.scored;
        report.mean_psnr /= report.scored;
    }
    return report;
}

} // namespace toporig
