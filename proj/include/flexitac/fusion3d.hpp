#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "flexitac/core_model.hpp"

namespace flexitac {

enum class Modality : std::uint8_t { vision = 0, tactile = 1 };

const char* modality_name(Modality m);

struct FusedPoint {
    Vec3 position = Vec3::Zero();  // m, world frame
    double magnitude = 0.0;        // [0, 1]
    Modality modality = Modality::vision;

    bool operator==(const FusedPoint&) const = default;
};

struct FusedPointSet {
    std::vector<FusedPoint> points;  // vision points first, then tactile
    std::size_t vision_count = 0;
    std::size_t tactile_count = 0;
};

/// One tactile point per taxel whose normalized reading is >= drop_below,
/// placed at the taxel's world position. Row-major order.
std::vector<FusedPoint> lift_tactile(const TactileFrame& frame, const PadGeometry& pad,
                                     const NormalizationRule& rule, double drop_below = 0.0);

FusedPointSet merge(const std::vector<FusedPoint>& visual, const std::vector<FusedPoint>& tactile);

std::vector<FusedPoint> filter_modality(const FusedPointSet& set, Modality modality);

// CSV x_m,y_m,z_m,feature; feature must lie in [0, 1].
std::vector<FusedPoint> read_visual_csv(std::istream& in);
void write_visual_csv(std::ostream& out, const std::vector<FusedPoint>& points);

// CSV x_m,y_m,z_m,magnitude,modality with modality "vision" or "tactile".
void write_fused_csv(std::ostream& out, const FusedPointSet& set);
FusedPointSet read_fused_csv(std::istream& in);

}  // namespace flexitac
