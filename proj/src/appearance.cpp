#include "toporig/appearance.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>

namespace toporig {

namespace fs = std::filesystem;

namespace {

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

constexpr const char* kPoolIndexName = ".toporig_pool.json";

} // namespace

TexturePool TexturePool::from_directory(const fs::path& root, bool use_cache) {
    if (!fs::is_directory(root)) throw Error(ErrorCode::InvalidConfig, "texture pool is not a directory: " + root.string());
    std::vector<std::pair<std::string, std::uintmax_t>> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file() || !has_image_extension(entry.path())) continue;
        files.emplace_back(fs::relative(entry.path(), root).generic_string(), entry.file_size());
    }
    std::sort(files.begin(), files.end());

    TexturePool pool;
    pool.root_ = root;
    const fs::path cache_path = root / kPoolIndexName;
    if (use_cache && fs::exists(cache_path)) {
        try {
            std::ifstream in(cache_path);
            const auto j = nlohmann::json::parse(in);
            const auto& entries = j.at("entries");
            // cache is only trusted if it covers exactly the same files
            std::vector<std::pair<std::string, std::uintmax_t>> cached;
            for (const auto& e : j.at("scanned")) cached.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::uintmax_t>());
            if (cached == files) {
                for (const auto& e : entries)
                    pool.records_.push_back({e.at("path").get<std::string>(), e.at("width").get<int>(), e.at("height").get<int>()});
                if (pool.records_.empty()) throw Error(ErrorCode::InvalidConfig, "texture pool is empty: " + root.string());
                return pool;
            }
        } catch (const nlohmann::json::exception&) {
            // stale or corrupt cache: rebuild below
        }
    }

    for (const auto& [rel, size] : files) {
        try {
            const auto info = probe_image(root / rel);
            if (info.width > 0 && info.height > 0) pool.records_.push_back({rel, info.width, info.height});
        } catch (const Error& e) {
            std::cerr << "toporig: skipping texture " << rel << ": " << e.what() << "\n";
        }
    }
    if (pool.records_.empty()) throw Error(ErrorCode::InvalidConfig, "texture pool is empty: " + root.string());

    if (use_cache) {
        nlohmann::json j;
        j["version"] = 1;
        j["scanned"] = nlohmann::json::array();
        for (const auto& [rel, size] : files) j["scanned"].push_back({rel, size});
        j["entries"] = nlohmann::json::array();
        for (const auto& r : pool.records_) j["entries"].push_back({{"path", r.path}, {"width", r.width}, {"height", r.height}});
        try {
            write_file_atomic(cache_path, j.dump(1));
        } catch (const Error&) {
            // read-only pool directories are fine
        }
    }
    return pool;
}

TexturePool TexturePool::from_images(std::vector<Image> images) {
    if (images.empty()) throw Error(ErrorCode::InvalidConfig, "texture pool is empty");
    TexturePool pool;
    for (std::size_t i = 0; i < images.size(); ++i) {
        images[i] = to_rgb(images[i]);
        pool.records_.push_back({"#" + std::to_string(i), images[i].width, images[i].height});
    }
    pool.memory_ = std::make_shared<const std::vector<Image>>(std::move(images));
    return pool;
}

Image TexturePool::load(std::size_t i) const {
    if (memory_) return (*memory_).at(i);
    Image img = to_rgb(read_image(root_ / records_.at(i).path));
    if (img.width <= 0 || img.height <= 0) throw Error(ErrorCode::Decode, "empty texture " + records_[i].path);
    return img;
}

std::vector<std::uint8_t> rasterize_polygon(const std::vector<Vec2>& poly, int x0, int y0, int w, int h) {
    std::vector<std::uint8_t> mask(std::size_t(w) * std::size_t(h), 0);
    const std::size_t n = poly.size();
    // bucket edges by the rows they cross
    std::vector<std::vector<std::size_t>> rows(std::size_t(std::max(h, 0)));
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        const double ylo = std::min(a.y(), b.y()), yhi = std::max(a.y(), b.y());
        const int r0 = std::max(0, int(std::ceil(ylo - 0.5)) - y0 - 1);
        const int r1 = std::min(h - 1, int(std::floor(yhi - 0.5)) - y0 + 1);
        for (int r = r0; r <= r1; ++r) rows[std::size_t(r)].push_back(i);
    }
    std::vector<double> xs;
    for (int r = 0; r < h; ++r) {
        const double yc = double(y0 + r) + 0.5;
        xs.clear();
        for (std::size_t i : rows[std::size_t(r)]) {
            const Vec2& a = poly[i];
            const Vec2& b = poly[(i + 1) % n];
            if ((a.y() > yc) != (b.y() > yc)) xs.push_back(a.x() + (yc - a.y()) * (b.x() - a.x()) / (b.y() - a.y()));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            // centers strictly between the two crossings
            const int c0 = std::max(0, int(std::floor(xs[k] - 0.5)) + 1 - x0);
            const int c1 = std::min(w - 1, int(std::ceil(xs[k + 1] - 0.5)) - 1 - x0);
            for (int c = c0; c <= c1; ++c) mask[std::size_t(r) * std::size_t(w) + std::size_t(c)] = 1;
        }
    }
    return mask;
}

TexturedPart make_textured_part(const PartShape& shape, const Image& texture, std::size_t texture_id, int crop_x,
                                int crop_y) {
    if (texture.empty() || texture.channels < 3) throw Error(ErrorCode::InvalidInput, "texture must be RGB(A)");
    Vec2 lo = shape.boundary.front(), hi = lo;
    for (const auto& p : shape.boundary) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    TexturedPart part;
    part.bone = shape.owner_bone;
    part.texture_id = texture_id;
    part.crop_x = crop_x;
    part.crop_y = crop_y;
    part.origin_x = int(std::floor(lo.x()));
    part.origin_y = int(std::floor(lo.y()));
    const int w = int(std::ceil(hi.x())) - part.origin_x + 1;
    const int h = int(std::ceil(hi.y())) - part.origin_y + 1;
    part.sprite = Image(w, h, 4);
    const auto mask = rasterize_polygon(shape.boundary, part.origin_x, part.origin_y, w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!mask[std::size_t(y) * std::size_t(w) + std::size_t(x)]) continue;
            const std::uint8_t* t = texture.pixel((crop_x + x) % texture.width, (crop_y + y) % texture.height);
            std::uint8_t* d = part.sprite.pixel(x, y);
            d[0] = t[0];
            d[1] = t[1];
            d[2] = t[2];
            d[3] = 255;
        }
    return part;
}

std::vector<TexturedPart> assign_textures(const std::vector<PartShape>& parts, const TexturePool& pool,
                                          std::uint64_t seed) {
    if (pool.size() == 0) throw Error(ErrorCode::InvalidConfig, "texture pool is empty");
    std::vector<TexturedPart> out;
    out.reserve(parts.size());
    std::set<std::size_t> bad;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        Rng rng(derive_seed(seed, i));
        for (;;) {
            if (bad.size() == pool.size()) throw Error(ErrorCode::InvalidConfig, "no decodable texture in pool");
            const auto id = std::size_t(rng.uniform_int(0, std::int64_t(pool.size()) - 1));
            if (bad.count(id)) continue;
            Image tex;
            try {
                tex = pool.load(id);
            } catch (const Error& e) {
                std::cerr << "toporig: skipping texture " << pool.record(id).path << ": " << e.what() << "\n";
                bad.insert(id);
                continue;
            }
            const auto& shape = parts[i];
            double w = 0, h = 0;
            {
                Vec2 lo = shape.boundary.front(), hi = lo;
                for (const auto& p : shape.boundary) {
                    lo = lo.cwiseMin(p);
                    hi = hi.cwiseMax(p);
                }
                w = std::ceil(hi.x()) - std::floor(lo.x()) + 1;
                h = std::ceil(hi.y()) - std::floor(lo.y()) + 1;
            }
            // crop inside the texture when it is large enough, otherwise tile
            const int cx = int(rng.uniform_int(0, tex.width >= w ? std::int64_t(tex.width - w) : tex.width - 1));
            const int cy = int(rng.uniform_int(0, tex.height >= h ? std::int64_t(tex.height - h) : tex.height - 1));
            out.push_back(make_textured_part(shape, tex, id, cx, cy));
            break;
        }
    }
    return out;
}

std::vector<int> sample_layer_order(int n_parts, std::uint64_t seed) {
    if (n_parts < 1) throw Error(ErrorCode::InvalidInput, "sample_layer_order: need at least one part");
    std::vector<int> order(static_cast<std::size_t>(n_parts));
    for (int i = 0; i < n_parts; ++i) order[std::size_t(i)] = i + 1;
    Rng rng(seed);
    for (int i = n_parts - 1; i > 0; --i) std::swap(order[std::size_t(i)], order[std::size_t(rng.uniform_int(0, i))]);
    return order;
}

void require_layer_permutation(const std::vector<TexturedPart>& parts) {
    std::vector<char> seen(parts.size() + 1, 0);
    for (const auto& p : parts) {
        if (p.layer < 1 || p.layer > int(parts.size()) || seen[std::size_t(p.layer)])
            throw Error(ErrorCode::InvalidInput, "layer indices must be a permutation of 1..n");
        seen[std::size_t(p.layer)] = 1;
    }
}

Image composite(const std::vector<TexturedPart>& parts, const Extent& canvas, const Rgba& background) {
    if (canvas.width <= 0 || canvas.height <= 0) throw Error(ErrorCode::InvalidInput, "composite: empty canvas");
    require_layer_permutation(parts);
    for (const auto& p : parts)
        if (p.sprite.channels != 4) throw Error(ErrorCode::InvalidInput, "composite: sprites must be RGBA");
    std::vector<const TexturedPart*> order(parts.size());
    for (const auto& p : parts) order[std::size_t(p.layer - 1)] = &p;

    Image out(canvas.width, canvas.height, 4);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < canvas.height; ++y) {
        std::uint8_t* row = out.pixel(0, y);
        for (int x = 0; x < canvas.width; ++x) std::copy(background.begin(), background.end(), row + 4 * x);
        for (const TexturedPart* p : order) {
            const int sy = y - p->origin_y;
            if (sy < 0 || sy >= p->sprite.height) continue;
            const int x0 = std::max(0, p->origin_x), x1 = std::min(canvas.width, p->origin_x + p->sprite.width);
            for (int x = x0; x < x1; ++x) {
                const std::uint8_t* s = p->sprite.pixel(x - p->origin_x, sy);
                const unsigned a = s[3];
                if (a == 0) continue;
                std::uint8_t* d = row + 4 * x;
                for (int c = 0; c < 4; ++c) d[c] = std::uint8_t(s[c] + (d[c] * (255u - a) + 127u) / 255u);
            }
        }
    }
    return out;
}

} // namespace toporig
