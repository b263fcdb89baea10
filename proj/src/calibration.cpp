#include "flexitac/calibration.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "flexitac/errors.hpp"
#include "flexitac/scenario.hpp"
#include "json.hpp"

namespace flexitac {

namespace {

struct Solve {
    double k_n = 0.0;
    double k_d = 0.0;
    bool degenerate = false;
    bool k_n_clamped = false;
};

double dot_column(const std::vector<CurveSample>& s, const std::vector<std::size_t>& idx,
                  double gain, bool rate_column, double floor) {
    double num = 0.0;
    for (auto i : idx) {
        const double a = gain * (rate_column ? s[i].depth_rate : s[i].depth);
        num += a * (s[i].reading - floor);
    }
    return num;
}

double sq_column(const std::vector<CurveSample>& s, const std::vector<std::size_t>& idx,
                 double gain, bool rate_column) {
    double den = 0.0;
    for (auto i : idx) {
        const double a = gain * (rate_column ? s[i].depth_rate : s[i].depth);
        den += a * a;
    }
    return den;
}

// Single-column fit on the active set; returns 0 when the column is empty.
double fit_single(const std::vector<CurveSample>& s, const std::vector<std::size_t>& idx,
                  const ResponseModel& resp, bool rate_column) {
    const double den = sq_column(s, idx, resp.counts_per_newton, rate_column);
    if (!(den > 0.0)) return 0.0;
    return dot_column(s, idx, resp.counts_per_newton, rate_column, resp.noise_floor_counts) / den;
}

Solve solve_active(const std::vector<CurveSample>& s, const std::vector<std::size_t>& idx,
                   const ResponseModel& resp) {
    Solve out;
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd a(n, 2);
    Eigen::VectorXd b(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& smp = s[idx[static_cast<std::size_t>(r)]];
        a(r, 0) = resp.counts_per_newton * smp.depth;
        a(r, 1) = resp.counts_per_newton * smp.depth_rate;
        b(r) = smp.reading - resp.noise_floor_counts;
    }
    // Equilibrate columns so the rank decision does not depend on units.
    Eigen::Vector2d scale = a.colwise().norm().transpose();
    const bool rate_excited = scale(1) > 0.0;
    int rank = 0;
    Eigen::Vector2d x = Eigen::Vector2d::Zero();
    if (rate_excited && scale(0) > 0.0) {
        Eigen::MatrixXd an = a * scale.cwiseInverse().asDiagonal();
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(an);
        qr.setThreshold(1e-10);
        rank = static_cast<int>(qr.rank());
        if (rank == 2) x = qr.solve(b).cwiseQuotient(scale);
    }
    if (rank < 2) {
        out.degenerate = true;
        out.k_n = fit_single(s, idx, resp, false);
        out.k_d = 0.0;
    } else {
        out.k_n = x(0);
        out.k_d = x(1);
    }

    if (out.k_n < 0.0) {
        out.k_n_clamped = true;
        out.k_n = 0.0;
        if (!out.degenerate) out.k_d = std::max(0.0, fit_single(s, idx, resp, true));
    } else if (out.k_d < 0.0) {
        // Damping must stay physical; fall back to a spring-only fit.
        out.k_d = 0.0;
        out.k_n = std::max(0.0, fit_single(s, idx, resp, false));
    }
    return out;
}

}  // namespace

void ForceResponseCurve::validate() const {
    if (samples.size() < 2)
        throw ContractViolation("force-response curve needs at least 2 samples");
    for (const auto& s : samples) {
        if (!(s.depth >= 0.0) || !std::isfinite(s.depth))
            throw ContractViolation("curve depths must be finite and >= 0");
        if (!std::isfinite(s.depth_rate) || !std::isfinite(s.reading))
            throw ContractViolation("curve values must be finite");
    }
}

double predicted_reading(const ResponseModel& response, double k_n, double k_d,
                         const CurveSample& s) {
    double force = 0.0;
    if (s.depth > 0.0) force = std::max(0.0, k_n * s.depth + k_d * s.depth_rate);
    return response.counts_per_newton * force + response.noise_floor_counts;
}

double residual_rms(const ForceResponseCurve& curve, const ResponseModel& response, double k_n,
                    double k_d) {
    if (curve.samples.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& s : curve.samples) {
        const double r = predicted_reading(response, k_n, k_d, s) - s.reading;
        sum += r * r;
    }
    return std::sqrt(sum / static_cast<double>(curve.samples.size()));
}

CalibrationResult fit_kelvin_voigt(const ForceResponseCurve& curve, const ResponseModel& response) {
    const auto& s = curve.samples;
    const bool excited =
        std::any_of(s.begin(), s.end(), [](const CurveSample& x) { return x.depth > 0.0; });
    if (!excited)
        throw UnidentifiableError("force-response curve has no sample with positive depth");
    curve.validate();
    if (!(response.counts_per_newton > 0.0))
        throw ConfigError("counts_per_newton must be > 0");

    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i].depth > 0.0) active.push_back(i);

    CalibrationResult result;
    Solve sol;
    const int max_iterations = static_cast<int>(s.size()) + 2;
    for (int it = 0; it < max_iterations; ++it) {
        sol = solve_active(s, active, response);
        ++result.iterations;

        std::vector<std::size_t> next;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i].depth > 0.0 && sol.k_n * s[i].depth + sol.k_d * s[i].depth_rate >= 0.0)
                next.push_back(i);
        if (next == active || next.empty()) break;
        active = std::move(next);
    }

    result.k_n = sol.k_n;
    result.k_d = sol.k_d;
    result.degenerate = sol.degenerate;
    result.k_n_clamped = sol.k_n_clamped;
    result.residual_rms = residual_rms(curve, response, result.k_n, result.k_d);
    return result;
}

Histogram histogram(std::span<const double> values, int bins, double floor_cut) {
    if (bins < 1) throw ContractViolation("histogram needs at least one bin");
    Histogram h;
    h.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) h.bin_edges[i] = static_cast<double>(i) / bins;
    h.masses.assign(static_cast<std::size_t>(bins), 0.0);

    for (double v : values) {
        if (!(v >= 0.0 && v <= 1.0))
            throw ContractViolation("histogram values must lie in [0, 1]");
        if (v < floor_cut) continue;
        const auto bin = std::min(static_cast<int>(std::floor(v * bins)), bins - 1);
        h.masses[static_cast<std::size_t>(bin)] += 1.0;
        ++h.count;
    }
    if (h.count > 0)
        for (auto& m : h.masses) m /= static_cast<double>(h.count);
    return h;
}

double histogram_intersection(const Histogram& a, const Histogram& b) {
    if (a.bin_edges != b.bin_edges)
        throw ContractViolation("histogram intersection needs identical bin edges");
    if (a.empty() && b.empty()) return 1.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < a.masses.size(); ++i) sum += std::min(a.masses[i], b.masses[i]);
    return std::clamp(sum, 0.0, 1.0);
}

PipelineReport calibrate_pipeline(ByteView real_log, const SceneDescription& scene, TaxelId taxel,
                                  const NormalizationRule& rule, const PipelineOptions& options) {
    scene.validate();
    const GridConfig& grid = scene.pad.grid;
    if (taxel.row < 0 || taxel.row >= grid.rows || taxel.col < 0 || taxel.col >= grid.cols)
        throw IndexError("calibration taxel outside " + grid.name() + " grid");
    rule.validate(grid);

    PipelineReport report;
    const DecodedLog log = decode_stream(real_log, registry_for(grid));
    report.decoder = log.stats;
    report.frames_decoded = log.frames.size();
    if (log.frames.empty()) throw UnidentifiableError("log contains no decodable frames");

    // Step index for every decoded frame, unwrapping the 16-bit sequence.
    std::vector<std::uint64_t> step_of;
    step_of.reserve(log.frames.size());
    std::uint64_t k = log.frames.front().sequence;
    for (std::size_t i = 0; i < log.frames.size(); ++i) {
        const auto& f = log.frames[i];
        if (!f.grid.same_shape(grid))
            throw ContractViolation("log frame grid " + f.grid.name() + " does not match scene pad " +
                                    grid.name());
        if (i > 0)
            k += static_cast<std::uint16_t>(f.sequence - log.frames[i - 1].sequence);
        step_of.push_back(k);
    }

    const std::size_t tix = scan_payload_index(grid, taxel.row, taxel.col);
    const bool contacting = std::any_of(log.frames.begin(), log.frames.end(),
                                        [&](const TactileFrame& f) {
                                            return f.values[tix] > rule.noise_floor;
                                        });
    if (!contacting)
        throw UnidentifiableError("taxel (" + std::to_string(taxel.row) + "," +
                                  std::to_string(taxel.col) +
                                  ") never rises above the noise floor in the log");

    report.params_before = scene.params;
    const SimulationRun before = simulate_scene(scene, options.sim_seed, true);

    ForceResponseCurve& curve = report.curve;
    curve.taxel = taxel;
    curve.source = CurveSource::real;
    const auto hi = grid.max_count();
    for (std::size_t i = 0; i < log.frames.size(); ++i) {
        if (step_of[i] >= before.samples.size()) continue;
        const auto reading = log.frames[i].values[tix];
        if (reading >= hi) continue;  // saturated
        const auto& smp = before.samples[step_of[i]][tix];
        curve.samples.push_back({smp.depth, smp.depth_rate, static_cast<double>(reading)});
    }
    report.curve_samples = curve.samples.size();
    report.fit = fit_kelvin_voigt(curve, ResponseModel::from(scene.params));

    SceneDescription fitted = scene;
    fitted.params.k_n = report.fit.k_n;
    fitted.params.k_d = report.fit.k_d;
    report.params_after = fitted.params;
    const SimulationRun after = simulate_scene(fitted, options.sim_seed);

    const int bins = options.bins;
    const double floor_cut = options.floor_cut.value_or(1.0 / bins);
    std::vector<double> real_values, before_values, after_values;
    for (std::size_t i = 0; i < log.frames.size(); ++i) {
        if (step_of[i] >= before.frames.size()) continue;
        auto r = normalize_frame(log.frames[i], rule);
        auto b = normalize_frame(before.frames[step_of[i]], rule);
        auto a = normalize_frame(after.frames[step_of[i]], rule);
        real_values.insert(real_values.end(), r.begin(), r.end());
        before_values.insert(before_values.end(), b.begin(), b.end());
        after_values.insert(after_values.end(), a.begin(), a.end());
    }
    const Histogram h_real = histogram(real_values, bins, floor_cut);
    report.overlap_before = histogram_intersection(h_real, histogram(before_values, bins, floor_cut));
    report.overlap_after = histogram_intersection(h_real, histogram(after_values, bins, floor_cut));
    return report;
}

ForceResponseCurve read_curve_csv(std::istream& in) {
    ForceResponseCurve curve;
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("curve CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "depth_m,depth_rate_mps,reading_counts")
        throw ValidationError("curve CSV header must be depth_m,depth_rate_mps,reading_counts");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        double v[3];
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (int c = 0; c < 3; ++c) {
            auto [ptr, ec] = std::from_chars(p, end, v[c]);
            if (ec != std::errc{} || (c < 2 && (ptr == end || *ptr != ',')) || (c == 2 && ptr != end))
                throw ValidationError("curve CSV line " + std::to_string(lineno) + ": malformed row");
            p = ptr + 1;
        }
        curve.samples.push_back({v[0], v[1], v[2]});
    }
    return curve;
}

void write_curve_csv(std::ostream& out, const ForceResponseCurve& curve) {
    out << "depth_m,depth_rate_mps,reading_counts\n";
    char buf[96];
    for (const auto& s : curve.samples) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", s.depth, s.depth_rate, s.reading);
        out << buf;
    }
}

std::string report_to_json(const PipelineReport& report) {
    nlohmann::ordered_json j;
    j["k_n"] = report.fit.k_n;
    j["k_d"] = report.fit.k_d;
    j["residual_rms"] = report.fit.residual_rms;
    j["iterations"] = report.fit.iterations;
    j["overlap_before"] = report.overlap_before;
    j["overlap_after"] = report.overlap_after;
    j["degenerate"] = report.fit.degenerate;
    j["k_n_clamped"] = report.fit.k_n_clamped;
    j["taxel"] = {report.curve.taxel.row, report.curve.taxel.col};
    j["curve_samples"] = report.curve_samples;
    j["frames_decoded"] = report.frames_decoded;
    j["decoder"] = {{"frames_ok", report.decoder.frames_ok},
                    {"frames_corrupt", report.decoder.frames_corrupt},
                    {"bytes_discarded", report.decoder.bytes_discarded}};
    j["params_before"] = {{"k_n", report.params_before.k_n}, {"k_d", report.params_before.k_d}};
    return j.dump(2) + "\n";
}

}  // namespace flexitac
