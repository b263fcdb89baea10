#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "flexitac/core_model.hpp"

namespace flexitac {

struct Plane {
    Vec3 normal = Vec3::UnitZ();  // unit length
    double offset_m = 0.0;        // sdf(p) = normal . p - offset
};

struct Sphere {
    Vec3 center = Vec3::Zero();
    double radius_m = 0.01;
};

struct Box {
    Vec3 center = Vec3::Zero();
    Vec3 half_extents = Vec3::Constant(0.01);
    Mat3 rotation = Mat3::Identity();
};

using ShapeGeometry = std::variant<Plane, Sphere, Box>;

/// Analytic signed-distance primitive translating at a constant velocity.
struct SdfShape {
    ShapeGeometry geometry;
    Vec3 velocity = Vec3::Zero();  // m/s

    static SdfShape plane(const Vec3& normal, double offset_m, const Vec3& velocity = Vec3::Zero());
    static SdfShape sphere(const Vec3& center, double radius_m,
                           const Vec3& velocity = Vec3::Zero());
    static SdfShape box(const Vec3& center, const Vec3& half_extents,
                        const Mat3& rotation = Mat3::Identity(),
                        const Vec3& velocity = Vec3::Zero());

    // Throws ConfigError on a non-unit plane normal, non-positive radius or
    // extents, or an improper box rotation.
    void validate() const;
    double distance(const Vec3& p) const;
    SdfShape advanced(double dt) const;
};

inline constexpr double kEmptySceneDistance = std::numeric_limits<double>::infinity();

struct SdfScene {
    std::vector<SdfShape> shapes;

    SdfScene advanced(double dt) const;
};

double sdf_eval(const SdfScene& scene, const Vec3& point);
double penetration_depth(const SdfScene& scene, const Vec3& point);

struct ContactParams {
    double k_n = 500.0;               // N/m
    double k_d = 5.0;                 // N*s/m
    double counts_per_newton = 400.0;
    double noise_floor_counts = 50.0;
    double noise_sigma_counts = 0.0;  // 0 disables noise

    void validate() const;
};

/// Per-taxel output. Normal channels only; there is no tangential component.
struct TaxelContactSample {
    double depth = 0.0;       // m, >= 0
    double depth_rate = 0.0;  // m/s, positive while penetration grows
    double force_n = 0.0;     // N, >= 0

    bool operator==(const TaxelContactSample&) const = default;
};

// Spring plus damper, zero at zero depth, never negative.
double kelvin_voigt_force(const ContactParams& params, double depth, double depth_rate);

struct StepResult {
    std::vector<TaxelContactSample> samples;  // row-major
    SdfScene scene;                           // after advancing by dt

    std::vector<double> depths() const;
};

/// Advances every shape by velocity * dt, then queries each taxel. depth_rate
/// is the finite difference against `previous_depths`, or 0 when absent.
StepResult step(const SdfScene& scene, const PadGeometry& pad, const ContactParams& params,
                double dt, std::optional<std::span<const double>> previous_depths = std::nullopt);

/// Linear count response with ADC saturation:
/// clamp(round(gain * force + floor + N(0, sigma)), 0, max_count).
TactileFrame samples_to_frame(std::span<const TaxelContactSample> samples,
                              const ContactParams& params, const GridConfig& grid,
                              std::uint16_t sequence, std::uint32_t timestamp_ms,
                              std::optional<std::uint64_t> rng_seed = std::nullopt);

// Per-frame noise seed derived from a run seed (splitmix64 finalizer).
inline std::uint64_t frame_seed(std::uint64_t run_seed, std::uint64_t frame_index) {
    std::uint64_t z = run_seed + 0x9E3779B97F4A7C15ull * (frame_index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Stateful wrapper that keeps the scene and previous depths across steps.
class ContactSimulator {
public:
    ContactSimulator(SdfScene scene, PadGeometry pad, ContactParams params, double dt);

    const std::vector<TaxelContactSample>& advance();

    const SdfScene& scene() const { return scene_; }
    const PadGeometry& pad() const { return pad_; }
    const ContactParams& params() const { return params_; }
    double dt() const { return dt_; }
    std::uint64_t steps_taken() const { return steps_; }

private:
    SdfScene scene_;
    PadGeometry pad_;
    ContactParams params_;
    double dt_;
    std::vector<Vec3> taxels_;
    std::vector<double> previous_;
    std::vector<TaxelContactSample> samples_;
    std::uint64_t steps_ = 0;
};

}  // namespace flexitac
