#include "flexitac/core_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <Eigen/Geometry>

#include "flexitac/errors.hpp"

namespace flexitac {

namespace {

GridConfig preset_entry(int rows, int cols, std::uint8_t id) {
    GridConfig g;
    g.rows = rows;
    g.cols = cols;
    g.pitch_m = kDefaultPitchM;
    g.adc_bits = kDefaultAdcBits;
    g.config_id = id;
    return g;
}

bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

const std::vector<GridConfig>& grid_presets() {
    static const std::vector<GridConfig> presets = {
        preset_entry(12, 32, 0),
        preset_entry(8, 16, 1),
        preset_entry(16, 16, 2),
        preset_entry(32, 32, 3),
    };
    return presets;
}

GridConfig GridConfig::make(int rows, int cols, double pitch_m, int adc_bits,
                            std::uint8_t config_id) {
    GridConfig g;
    g.rows = rows;
    g.cols = cols;
    g.pitch_m = pitch_m;
    g.adc_bits = adc_bits;
    g.config_id = config_id;
    g.validate();
    return g;
}

void GridConfig::validate() const {
    if (rows < 1 || cols < 1)
        throw ConfigError("grid must have at least one row and one column");
    if (!(pitch_m > 0.0) || !std::isfinite(pitch_m))
        throw ConfigError("grid pitch must be positive");
    if (adc_bits < 1 || adc_bits > 16)
        throw ConfigError("adc_bits must be in [1, 16]");
}

GridConfig GridConfig::preset(std::string_view name) {
    for (const auto& p : grid_presets())
        if (p.name() == name) return p;
    throw ConfigError("unknown grid preset '" + std::string(name) + "'");
}

GridConfig GridConfig::preset(std::uint8_t config_id) {
    if (auto p = find_preset(config_id)) return *p;
    throw ConfigError("unknown grid preset id " + std::to_string(config_id));
}

std::optional<GridConfig> GridConfig::find_preset(std::uint8_t config_id) {
    for (const auto& p : grid_presets())
        if (p.config_id == config_id) return p;
    return std::nullopt;
}

GridConfig GridConfig::parse(std::string_view name) {
    for (const auto& p : grid_presets())
        if (p.name() == name) return p;
    auto x = name.find('x');
    int rows = 0, cols = 0;
    if (x == std::string_view::npos || !parse_int(name.substr(0, x), rows) ||
        !parse_int(name.substr(x + 1), cols))
        throw ConfigError("cannot parse grid '" + std::string(name) + "', expected RxC");
    return make(rows, cols);
}

std::string GridConfig::name() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
    const double ortho = (rotation_.transpose() * rotation_ - Mat3::Identity()).cwiseAbs().maxCoeff();
    const double det = rotation_.determinant();
    if (!(ortho <= 1e-9) || !(std::abs(det - 1.0) <= 1e-9))
        throw ConfigError("rotation is not a proper orthonormal matrix");
    if (!translation_.allFinite()) throw ConfigError("translation is not finite");
}

RigidTransform RigidTransform::translation_only(const Vec3& t) {
    return RigidTransform(Mat3::Identity(), t);
}

RigidTransform RigidTransform::from_quaternion(double w, double x, double y, double z,
                                               const Vec3& translation) {
    Eigen::Quaterniond q(w, x, y, z);
    const double n = q.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw ConfigError("quaternion has zero norm");
    q.normalize();
    return RigidTransform(q.toRotationMatrix(), translation);
}

RigidTransform RigidTransform::about_z(double angle_rad, const Vec3& translation) {
    return RigidTransform(Eigen::AngleAxisd(angle_rad, Vec3::UnitZ()).toRotationMatrix(),
                          translation);
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
    RigidTransform out;
    out.rotation_ = rotation_ * other.rotation_;
    out.translation_ = rotation_ * other.translation_ + translation_;
    return out;
}

std::uint16_t TactileFrame::at(int row, int col) const {
    if (row < 0 || row >= grid.rows || col < 0 || col >= grid.cols)
        throw IndexError("taxel (" + std::to_string(row) + "," + std::to_string(col) +
                         ") outside " + grid.name() + " grid");
    return values[static_cast<std::size_t>(row) * grid.cols + col];
}

void TactileFrame::validate() const {
    grid.validate();
    if (values.size() != grid.taxel_count())
        throw ContractViolation("frame has " + std::to_string(values.size()) +
                                " values, grid " + grid.name() + " needs " +
                                std::to_string(grid.taxel_count()));
    const auto hi = grid.max_count();
    for (auto v : values)
        if (v > hi)
            throw ContractViolation("frame value " + std::to_string(v) + " exceeds " +
                                    std::to_string(grid.adc_bits) + "-bit range");
}

TactileFrame make_uniform_frame(const GridConfig& grid, std::uint16_t value,
                                std::uint16_t sequence, std::uint32_t timestamp_ms) {
    TactileFrame f;
    f.grid = grid;
    f.sequence = sequence;
    f.timestamp_ms = timestamp_ms;
    f.values.assign(grid.taxel_count(), value);
    return f;
}

void NormalizationRule::validate(const GridConfig& grid) const {
    if (!(noise_floor >= 0.0) || !(noise_floor < full_scale) ||
        !(full_scale <= static_cast<double>(grid.max_count())))
        throw ConfigError("normalization rule needs 0 <= noise_floor < full_scale <= " +
                          std::to_string(grid.max_count()));
}

double NormalizationRule::apply(double raw) const {
    return std::clamp((raw - noise_floor) / (full_scale - noise_floor), 0.0, 1.0);
}

Vec3 taxel_local_position(const GridConfig& grid, int row, int col) {
    if (row < 0 || row >= grid.rows || col < 0 || col >= grid.cols)
        throw IndexError("taxel (" + std::to_string(row) + "," + std::to_string(col) +
                         ") outside " + grid.name() + " grid");
    const double x = (col - (grid.cols - 1) / 2.0) * grid.pitch_m;
    const double y = (row - (grid.rows - 1) / 2.0) * grid.pitch_m;
    return {x, y, 0.0};
}

std::vector<Vec3> taxel_local_positions(const GridConfig& grid) {
    std::vector<Vec3> out;
    out.reserve(grid.taxel_count());
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) out.push_back(taxel_local_position(grid, r, c));
    return out;
}

std::vector<Vec3> taxel_world_positions(const PadGeometry& pad) {
    auto pts = taxel_local_positions(pad.grid);
    for (auto& p : pts) p = pad.pose.apply(p);
    return pts;
}

std::vector<double> normalize_frame(const TactileFrame& frame, const NormalizationRule& rule) {
    rule.validate(frame.grid);
    std::vector<double> out;
    out.reserve(frame.values.size());
    for (auto v : frame.values) out.push_back(rule.apply(v));
    return out;
}

}  // namespace flexitac
