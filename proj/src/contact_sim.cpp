#include "flexitac/contact_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "flexitac/errors.hpp"

namespace flexitac {

namespace {

double plane_distance(const Plane& s, const Vec3& p) {
    return s.normal.x() * p.x() + s.normal.y() * p.y() + s.normal.z() * p.z() - s.offset_m;
}

double sphere_distance(const Sphere& s, const Vec3& p) {
    const double dx = p.x() - s.center.x();
    const double dy = p.y() - s.center.y();
    const double dz = p.z() - s.center.z();
    return std::sqrt(dx * dx + dy * dy + dz * dz) - s.radius_m;
}

double box_distance(const Box& s, const Vec3& p) {
    const Vec3 local = s.rotation.transpose() * (p - s.center);
    const double qx = std::abs(local.x()) - s.half_extents.x();
    const double qy = std::abs(local.y()) - s.half_extents.y();
    const double qz = std::abs(local.z()) - s.half_extents.z();
    const double ox = std::max(qx, 0.0), oy = std::max(qy, 0.0), oz = std::max(qz, 0.0);
    const double outside = std::sqrt(ox * ox + oy * oy + oz * oz);
    const double inside = std::min(std::max({qx, qy, qz}), 0.0);
    return outside + inside;
}

void fill_samples(const SdfScene& scene, std::span<const Vec3> taxels, const ContactParams& params,
                  double dt, std::span<const double> previous,
                  std::vector<TaxelContactSample>& out) {
    out.resize(taxels.size());
    for (std::size_t i = 0; i < taxels.size(); ++i) {
        auto& s = out[i];
        s.depth = penetration_depth(scene, taxels[i]);
        s.depth_rate = previous.empty() ? 0.0 : (s.depth - previous[i]) / dt;
        s.force_n = kelvin_voigt_force(params, s.depth, s.depth_rate);
    }
}

void check_dt(double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ContractViolation("time step must be positive");
}

}  // namespace

SdfShape SdfShape::plane(const Vec3& normal, double offset_m, const Vec3& velocity) {
    SdfShape s{Plane{normal, offset_m}, velocity};
    s.validate();
    return s;
}

SdfShape SdfShape::sphere(const Vec3& center, double radius_m, const Vec3& velocity) {
    SdfShape s{Sphere{center, radius_m}, velocity};
    s.validate();
    return s;
}

SdfShape SdfShape::box(const Vec3& center, const Vec3& half_extents, const Mat3& rotation,
                       const Vec3& velocity) {
    SdfShape s{Box{center, half_extents, rotation}, velocity};
    s.validate();
    return s;
}

void SdfShape::validate() const {
    if (!velocity.allFinite()) throw ConfigError("shape velocity must be finite");
    std::visit(
        [](const auto& g) {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, Plane>) {
                if (!g.normal.allFinite() || std::abs(g.normal.norm() - 1.0) > 1e-9)
                    throw ConfigError("plane normal must have unit length");
                if (!std::isfinite(g.offset_m)) throw ConfigError("plane offset must be finite");
            } else if constexpr (std::is_same_v<T, Sphere>) {
                if (!g.center.allFinite()) throw ConfigError("sphere center must be finite");
                if (!(g.radius_m > 0.0) || !std::isfinite(g.radius_m))
                    throw ConfigError("sphere radius must be positive");
            } else {
                if (!g.center.allFinite()) throw ConfigError("box center must be finite");
                if (!(g.half_extents.array() > 0.0).all() || !g.half_extents.allFinite())
                    throw ConfigError("box half-extents must be positive");
                RigidTransform(g.rotation, Vec3::Zero());  // throws on improper rotation
            }
        },
        geometry);
}

double SdfShape::distance(const Vec3& p) const {
    return std::visit(
        [&](const auto& g) {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, Plane>)
                return plane_distance(g, p);
            else if constexpr (std::is_same_v<T, Sphere>)
                return sphere_distance(g, p);
            else
                return box_distance(g, p);
        },
        geometry);
}

SdfShape SdfShape::advanced(double dt) const {
    SdfShape out = *this;
    const Vec3 delta = velocity * dt;
    std::visit(
        [&](auto& g) {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, Plane>)
                g.offset_m += g.normal.dot(delta);
            else
                g.center += delta;
        },
        out.geometry);
    return out;
}

SdfScene SdfScene::advanced(double dt) const {
    SdfScene out;
    out.shapes.reserve(shapes.size());
    for (const auto& s : shapes) out.shapes.push_back(s.advanced(dt));
    return out;
}

double sdf_eval(const SdfScene& scene, const Vec3& point) {
    double d = kEmptySceneDistance;
    for (const auto& s : scene.shapes) d = std::min(d, s.distance(point));
    return d;
}

double penetration_depth(const SdfScene& scene, const Vec3& point) {
    return std::max(0.0, -sdf_eval(scene, point));
}

void ContactParams::validate() const {
    if (!(k_n >= 0.0) || !std::isfinite(k_n)) throw ConfigError("k_n must be >= 0");
    if (!(k_d >= 0.0) || !std::isfinite(k_d)) throw ConfigError("k_d must be >= 0");
    if (!(counts_per_newton > 0.0) || !std::isfinite(counts_per_newton))
        throw ConfigError("counts_per_newton must be > 0");
    if (!std::isfinite(noise_floor_counts)) throw ConfigError("noise_floor_counts must be finite");
    if (!(noise_sigma_counts >= 0.0) || !std::isfinite(noise_sigma_counts))
        throw ConfigError("noise_sigma_counts must be >= 0");
}

double kelvin_voigt_force(const ContactParams& params, double depth, double depth_rate) {
    if (!(depth >= 0.0))
        throw ContractViolation("penetration depth must be >= 0, got " + std::to_string(depth));
    if (depth == 0.0) return 0.0;
    return std::max(0.0, params.k_n * depth + params.k_d * depth_rate);
}

std::vector<double> StepResult::depths() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.depth);
    return out;
}

StepResult step(const SdfScene& scene, const PadGeometry& pad, const ContactParams& params,
                double dt, std::optional<std::span<const double>> previous_depths) {
    check_dt(dt);
    const auto taxels = taxel_world_positions(pad);
    std::span<const double> prev;
    if (previous_depths) {
        if (previous_depths->size() != taxels.size())
            throw ContractViolation("previous_depths has " +
                                    std::to_string(previous_depths->size()) +
                                    " entries, pad has " + std::to_string(taxels.size()));
        prev = *previous_depths;
    }
    StepResult result;
    result.scene = scene.advanced(dt);
    fill_samples(result.scene, taxels, params, dt, prev, result.samples);
    return result;
}

TactileFrame samples_to_frame(std::span<const TaxelContactSample> samples,
                              const ContactParams& params, const GridConfig& grid,
                              std::uint16_t sequence, std::uint32_t timestamp_ms,
                              std::optional<std::uint64_t> rng_seed) {
    if (samples.size() != grid.taxel_count())
        throw ContractViolation("sample count " + std::to_string(samples.size()) +
                                " does not match grid " + grid.name());
    std::mt19937_64 rng(rng_seed.value_or(0));
    std::normal_distribution<double> noise(0.0, 1.0);
    const bool noisy = params.noise_sigma_counts > 0.0;
    const double hi = grid.max_count();

    TactileFrame f;
    f.grid = grid;
    f.sequence = sequence;
    f.timestamp_ms = timestamp_ms;
    f.values.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double raw = params.counts_per_newton * samples[i].force_n + params.noise_floor_counts;
        if (noisy) raw += params.noise_sigma_counts * noise(rng);
        f.values[i] = static_cast<std::uint16_t>(std::clamp(std::round(raw), 0.0, hi));
    }
    return f;
}

ContactSimulator::ContactSimulator(SdfScene scene, PadGeometry pad, ContactParams params,
                                   double dt)
    : scene_(std::move(scene)), pad_(std::move(pad)), params_(params), dt_(dt) {
    check_dt(dt_);
    params_.validate();
    for (const auto& s : scene_.shapes) s.validate();
    taxels_ = taxel_world_positions(pad_);
}

const std::vector<TaxelContactSample>& ContactSimulator::advance() {
    scene_ = scene_.advanced(dt_);
    fill_samples(scene_, taxels_, params_, dt_, previous_, samples_);
    previous_.resize(samples_.size());
    for (std::size_t i = 0; i < samples_.size(); ++i) previous_[i] = samples_[i].depth;
    ++steps_;
    return samples_;
}

}  // namespace flexitac
