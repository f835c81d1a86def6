#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace toporig {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

constexpr double kPi = 3.14159265358979323846;

enum class ErrorCode {
    InvalidConfig,
    InvalidInput,
    LayoutFailure,
    ShapeGeneration,
    MalformedRaster,
    Io,
    Decode,
    NotFound,
    Solver,
    Schema,
    DanglingReference,
    NonTree,
    NonPermutation,
    FrameMismatch,
    Conflict,
    TooLarge,
};

const char* to_string(ErrorCode code);

/// Error carrying a machine-readable code; `field` names the offending input
/// element when one can be identified (e.g. "frames[1].bones[3]").
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what, std::string field = {})
        : std::runtime_error(what), code_(code), field_(std::move(field)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& field() const noexcept { return field_; }

private:
    ErrorCode code_;
    std::string field_;
};

struct Extent {
    int width = 512;
    int height = 512;

    double diagonal() const { return std::hypot(double(width), double(height)); }
    bool operator==(const Extent&) const = default;
};

/// Seeded generator with distribution code written out here so sequences are
/// identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] (inclusive), unbiased.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent stream seed from a parent seed and a tag.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag);

/// Rigid 2D map x -> R x + t.
struct RigidTransform {
    Mat2 linear = Mat2::Identity();
    Vec2 translation = Vec2::Zero();

    static RigidTransform identity() { return {}; }
    static RigidTransform rotation(double angle);
    /// Rotation by `angle` about `pivot`.
    static RigidTransform rotation_about(double angle, const Vec2& pivot);
    static RigidTransform translate(const Vec2& t);

    Vec2 apply(const Vec2& p) const { return linear * p + translation; }
    Vec2 operator()(const Vec2& p) const { return apply(p); }
    RigidTransform inverse() const;
    double angle() const { return std::atan2(linear(1, 0), linear(0, 0)); }

    /// (*this) ∘ rhs
    RigidTransform operator*(const RigidTransform& rhs) const;

    /// Orthonormality defect: max(|RᵀR − I|, |det R − 1|).
    double rigidity_defect() const;
};

/// Least-squares rigid fit (2D Procrustes) mapping `from` onto `to`.
/// Exact whenever the two point sets are congruent.
RigidTransform fit_rigid(const std::vector<Vec2>& from, const std::vector<Vec2>& to);

} // namespace toporig
