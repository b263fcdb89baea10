#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flexitac/contact_sim.hpp"
#include "flexitac/core_model.hpp"
#include "flexitac/wire_protocol.hpp"

namespace flexitac {

struct SceneDescription;

struct TaxelId {
    int row = 0;
    int col = 0;
    bool operator==(const TaxelId&) const = default;
};

enum class CurveSource { real, simulated };

struct CurveSample {
    double depth = 0.0;       // m
    double depth_rate = 0.0;  // m/s
    double reading = 0.0;     // raw counts
};

/// Readings of one taxel against the replayed load schedule.
struct ForceResponseCurve {
    std::vector<CurveSample> samples;
    TaxelId taxel;
    CurveSource source = CurveSource::real;

    void validate() const;
};

// The count response that is held fixed while fitting (k_n, k_d).
struct ResponseModel {
    double counts_per_newton = 400.0;
    double noise_floor_counts = 50.0;

    static ResponseModel from(const ContactParams& p) {
        return {p.counts_per_newton, p.noise_floor_counts};
    }
};

struct CalibrationResult {
    double k_n = 0.0;
    double k_d = 0.0;
    double residual_rms = 0.0;  // counts
    int iterations = 0;         // number of least-squares solves
    bool degenerate = false;    // k_d not identifiable, reported as 0
    bool k_n_clamped = false;   // unconstrained k_n was negative
};

/// Predicted reading for one sample under (k_n, k_d), including the zero-force clamp.
double predicted_reading(const ResponseModel& response, double k_n, double k_d,
                         const CurveSample& s);

double residual_rms(const ForceResponseCurve& curve, const ResponseModel& response, double k_n,
                    double k_d);

/// Least-squares fit of reading = gain * (k_n d + k_d rate) + floor over the
/// samples with positive model force. Samples the solution would clamp are
/// dropped and the solve repeated until the active set is stable.
/// Throws UnidentifiableError when no sample has positive depth.
CalibrationResult fit_kelvin_voigt(const ForceResponseCurve& curve, const ResponseModel& response);

struct Histogram {
    std::vector<double> bin_edges;  // uniform over [0, 1]
    std::vector<double> masses;     // sum to 1, or all zero when empty
    std::size_t count = 0;          // values that were binned

    std::size_t bins() const { return masses.size(); }
    bool empty() const { return count == 0; }
};

inline constexpr int kDefaultHistogramBins = 32;

// Values below floor_cut are dropped before binning. Values must lie in [0, 1].
Histogram histogram(std::span<const double> values, int bins, double floor_cut);

// Sum of bin-wise minima. Two empty histograms compare as identical (1.0).
double histogram_intersection(const Histogram& a, const Histogram& b);

struct PipelineOptions {
    int bins = kDefaultHistogramBins;
    std::optional<double> floor_cut;  // default: one bin width
    std::uint64_t sim_seed = 0;
};

struct PipelineReport {
    CalibrationResult fit;
    ContactParams params_before;
    ContactParams params_after;
    double overlap_before = 0.0;
    double overlap_after = 0.0;
    DecoderStats decoder;
    std::size_t frames_decoded = 0;
    std::size_t curve_samples = 0;
    ForceResponseCurve curve;
};

/// Fits one taxel of a recorded log against a replay of `scene`, applies the
/// fitted parameters to every taxel, and scores normalized-histogram overlap
/// before and after. The same `rule` normalizes both streams.
PipelineReport calibrate_pipeline(ByteView real_log, const SceneDescription& scene, TaxelId taxel,
                                  const NormalizationRule& rule,
                                  const PipelineOptions& options = {});

ForceResponseCurve read_curve_csv(std::istream& in);
void write_curve_csv(std::ostream& out, const ForceResponseCurve& curve);

std::string report_to_json(const PipelineReport& report);

}  // namespace flexitac
