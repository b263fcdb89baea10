#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flexitac/contact_sim.hpp"
#include "flexitac/core_model.hpp"
#include "flexitac/errors.hpp"
#include "flexitac/wire_protocol.hpp"

namespace flexitac {

// Thrown for unparseable or invalid scene documents; message carries the
// line/column or the offending JSON path.
class SceneError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Everything needed to replay a contact run.
///
/// JSON form:
///   {
///     "pad": {"preset": "12x32",
///             "pose": {"quaternion_wxyz": [1,0,0,0], "translation_m": [0,0,0]}},
///     "shapes": [{"kind": "sphere", "center_m": [..], "radius_m": 0.02,
///                 "velocity_mps": [0,0,-0.02]},
///                {"kind": "plane", "normal": [..], "offset_m": 0.0},
///                {"kind": "box", "center_m": [..], "half_extents_m": [..],
///                 "quaternion_wxyz": [..]}],
///     "contact": {"k_n_npm": 500, "k_d_nspm": 5, "counts_per_newton": 400,
///                 "noise_floor_counts": 50, "noise_sigma_counts": 0},
///     "dt_s": 0.001,
///     "steps": 150
///   }
/// A custom pad uses {"rows": R, "cols": C, "pitch_m": .., "adc_bits": ..}
/// in place of "preset" and goes on the wire as config id 0xFF.
struct SceneDescription {
    PadGeometry pad;
    SdfScene scene;
    ContactParams params;
    double dt_s = 0.01;
    std::uint64_t steps = 1;

    void validate() const;
};

SceneDescription parse_scene_json(const std::string& text);
SceneDescription load_scene_file(const std::string& path);
std::string scene_to_json(const SceneDescription& scene);

// Registry with the scene's pad grid added when it is not a preset.
ConfigRegistry registry_for(const GridConfig& grid);

struct StepSummary {
    double max_force_n = 0.0;
    std::size_t contacting_taxels = 0;
};

struct SimulationRun {
    std::vector<TactileFrame> frames;
    std::vector<StepSummary> summaries;
    // Per-step samples, kept only when requested.
    std::vector<std::vector<TaxelContactSample>> samples;
};

/// Steps the scene `steps` times. Frame k has sequence k (mod 2^16),
/// timestamp round(k * dt) ms and noise seeded by frame_seed(seed, k).
SimulationRun simulate_scene(const SceneDescription& scene, std::uint64_t seed,
                             bool keep_samples = false);

Bytes encode_frames(const std::vector<TactileFrame>& frames);

}  // namespace flexitac
