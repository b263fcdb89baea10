#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace flexitac {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Wire id reserved for a session-defined grid that is not one of the presets.
inline constexpr std::uint8_t kCustomConfigId = 0xFF;
inline constexpr int kDefaultAdcBits = 10;
inline constexpr double kDefaultPitchM = 0.002;

/// Pad electrode grid. Values are always stored row-major: index = row * cols + col.
/// Local frame: origin at grid center, x along columns, y along rows, z is the
/// contact normal.
struct GridConfig {
    int rows = 1;
    int cols = 1;
    double pitch_m = kDefaultPitchM;
    int adc_bits = kDefaultAdcBits;
    std::uint8_t config_id = kCustomConfigId;

    // Throws ConfigError on invalid dimensions.
    static GridConfig make(int rows, int cols, double pitch_m = kDefaultPitchM,
                           int adc_bits = kDefaultAdcBits,
                           std::uint8_t config_id = kCustomConfigId);

    // "12x32", "8x16", "16x16", "32x32" (ids 0..3). Throws ConfigError.
    static GridConfig preset(std::string_view name);
    static GridConfig preset(std::uint8_t config_id);
    static std::optional<GridConfig> find_preset(std::uint8_t config_id);

    // Accepts a preset name, or "RxC" for a custom grid (id 0xFF, 2 mm, 10 bit).
    static GridConfig parse(std::string_view name);

    std::size_t taxel_count() const { return static_cast<std::size_t>(rows) * cols; }
    std::uint16_t max_count() const {
        return static_cast<std::uint16_t>((1u << adc_bits) - 1u);
    }
    std::string name() const;
    void validate() const;

    bool same_shape(const GridConfig& o) const {
        return rows == o.rows && cols == o.cols && pitch_m == o.pitch_m &&
               adc_bits == o.adc_bits;
    }
    bool operator==(const GridConfig&) const = default;
};

const std::vector<GridConfig>& grid_presets();

class RigidTransform {
public:
    RigidTransform() = default;
    // Throws ConfigError unless rotation is orthonormal with det +1 (1e-9).
    RigidTransform(const Mat3& rotation, const Vec3& translation);

    static RigidTransform identity() { return {}; }
    static RigidTransform translation_only(const Vec3& t);
    // Quaternion in w, x, y, z order; normalized before use.
    static RigidTransform from_quaternion(double w, double x, double y, double z,
                                          const Vec3& translation);
    static RigidTransform about_z(double angle_rad, const Vec3& translation = Vec3::Zero());

    const Mat3& rotation() const { return rotation_; }
    const Vec3& translation() const { return translation_; }

    Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
    // (this * other)(p) == this(other(p))
    RigidTransform operator*(const RigidTransform& other) const;

private:
    Mat3 rotation_ = Mat3::Identity();
    Vec3 translation_ = Vec3::Zero();
};

struct PadGeometry {
    GridConfig grid;
    RigidTransform pose;
};

struct TactileFrame {
    GridConfig grid;
    std::uint16_t sequence = 0;
    std::uint32_t timestamp_ms = 0;
    std::vector<std::uint16_t> values;

    std::uint8_t config_id() const { return grid.config_id; }
    std::uint16_t at(int row, int col) const;
    // Throws ContractViolation on a length or range problem.
    void validate() const;

    bool operator==(const TactileFrame&) const = default;
};

TactileFrame make_uniform_frame(const GridConfig& grid, std::uint16_t value,
                                std::uint16_t sequence = 0, std::uint32_t timestamp_ms = 0);

/// Linear map of raw counts to [0, 1]: counts at or below noise_floor read 0,
/// counts at or above full_scale read 1.
struct NormalizationRule {
    double noise_floor = 0.0;
    double full_scale = 1023.0;

    // Throws ConfigError unless 0 <= noise_floor < full_scale <= max count.
    void validate(const GridConfig& grid) const;
    double apply(double raw) const;
};

Vec3 taxel_local_position(const GridConfig& grid, int row, int col);
std::vector<Vec3> taxel_local_positions(const GridConfig& grid);
std::vector<Vec3> taxel_world_positions(const PadGeometry& pad);

std::vector<double> normalize_frame(const TactileFrame& frame, const NormalizationRule& rule);

}  // namespace flexitac
