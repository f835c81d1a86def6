#include "toporig/common.hpp"

#include <limits>

namespace toporig {

const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidConfig: return "invalid-config";
    case ErrorCode::InvalidInput: return "invalid-input";
    case ErrorCode::LayoutFailure: return "layout-failure";
    case ErrorCode::ShapeGeneration: return "shape-generation";
    case ErrorCode::MalformedRaster: return "malformed-raster";
    case ErrorCode::Io: return "io";
    case ErrorCode::Decode: return "decode";
    case ErrorCode::NotFound: return "not-found";
    case ErrorCode::Solver: return "solver";
    case ErrorCode::Schema: return "schema";
    case ErrorCode::DanglingReference: return "dangling-reference";
    case ErrorCode::NonTree: return "non-tree";
    case ErrorCode::NonPermutation: return "non-permutation";
    case ErrorCode::FrameMismatch: return "frame-mismatch";
    case ErrorCode::Conflict: return "conflict";
    case ErrorCode::TooLarge: return "too-large";
    }
    return "unknown";
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw Error(ErrorCode::InvalidInput, "uniform_int: empty range");
    const std::uint64_t span = std::uint64_t(hi - lo) + 1;
    if (span == 0) return std::int64_t(engine_());  // full 64-bit range
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t r;
    do {
        r = engine_();
    } while (r >= limit);
    return lo + std::int64_t(r % span);
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) {
    return mix64(mix64(parent) ^ mix64(tag + 0x632be59bd9b4e019ULL));
}

RigidTransform RigidTransform::rotation(double angle) {
    RigidTransform t;
    const double c = std::cos(angle), s = std::sin(angle);
    t.linear << c, -s, s, c;
    return t;
}

RigidTransform RigidTransform::rotation_about(double angle, const Vec2& pivot) {
    RigidTransform t = rotation(angle);
    t.translation = pivot - t.linear * pivot;
    return t;
}

RigidTransform RigidTransform::translate(const Vec2& v) {
    RigidTransform t;
    t.translation = v;
    return t;
}

RigidTransform RigidTransform::inverse() const {
    RigidTransform t;
    t.linear = linear.transpose();
    t.translation = -(t.linear * translation);
    return t;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
    RigidTransform t;
    t.linear = linear * rhs.linear;
    t.translation = linear * rhs.translation + translation;
    return t;
}

double RigidTransform::rigidity_defect() const {
    const double ortho = (linear.transpose() * linear - Mat2::Identity()).cwiseAbs().maxCoeff();
    return std::max(ortho, std::abs(linear.determinant() - 1.0));
}

RigidTransform fit_rigid(const std::vector<Vec2>& from, const std::vector<Vec2>& to) {
    if (from.size() != to.size() || from.empty())
        throw Error(ErrorCode::InvalidInput, "fit_rigid: point sets must be non-empty and equal-sized");
    Vec2 cf = Vec2::Zero(), ct = Vec2::Zero();
    for (size_t i = 0; i < from.size(); ++i) {
        cf += from[i];
        ct += to[i];
    }
    cf /= double(from.size());
    ct /= double(to.size());
    // maximize tr(R S), S = Σ a bᵀ
    double s00 = 0, s01 = 0, s10 = 0, s11 = 0;
    for (size_t i = 0; i < from.size(); ++i) {
        const Vec2 a = from[i] - cf, b = to[i] - ct;
        s00 += a.x() * b.x();
        s01 += a.x() * b.y();
        s10 += a.y() * b.x();
        s11 += a.y() * b.y();
    }
    double angle = 0.0;
    if (std::abs(s01 - s10) + std::abs(s00 + s11) > 0.0) angle = std::atan2(s01 - s10, s00 + s11);
    RigidTransform t = RigidTransform::rotation(angle);
    t.translation = ct - t.linear * cf;
    return t;
}

} // namespace toporig
