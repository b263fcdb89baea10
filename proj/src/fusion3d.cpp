#include "flexitac/fusion3d.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "flexitac/errors.hpp"

namespace flexitac {

namespace {

std::string format_point(const FusedPoint& p, bool with_modality) {
    char buf[160];
    if (with_modality)
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%s\n", p.position.x(),
                      p.position.y(), p.position.z(), p.magnitude, modality_name(p.modality));
    else
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", p.position.x(),
                      p.position.y(), p.position.z(), p.magnitude);
    return buf;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double to_double(std::string_view s, std::size_t lineno) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ValidationError("CSV line " + std::to_string(lineno) + ": bad number '" +
                              std::string(s) + "'");
    return v;
}

template <typename RowFn>
void read_csv(std::istream& in, std::string_view header, RowFn&& row) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("CSV input is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) throw ValidationError("CSV header must be " + std::string(header));
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        row(split(line), lineno);
    }
}

}  // namespace

const char* modality_name(Modality m) { return m == Modality::vision ? "vision" : "tactile"; }

std::vector<FusedPoint> lift_tactile(const TactileFrame& frame, const PadGeometry& pad,
                                     const NormalizationRule& rule, double drop_below) {
    if (!frame.grid.same_shape(pad.grid))
        throw ContractViolation("frame grid " + frame.grid.name() + " does not match pad grid " +
                                pad.grid.name());
    frame.validate();
    const auto magnitudes = normalize_frame(frame, rule);
    const auto positions = taxel_world_positions(pad);
    std::vector<FusedPoint> out;
    out.reserve(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i)
        if (magnitudes[i] >= drop_below)
            out.push_back({positions[i], magnitudes[i], Modality::tactile});
    return out;
}

FusedPointSet merge(const std::vector<FusedPoint>& visual, const std::vector<FusedPoint>& tactile) {
    for (const auto& p : visual)
        if (p.modality != Modality::vision)
            throw ContractViolation("visual input contains a non-vision point");
    for (const auto& p : tactile)
        if (p.modality != Modality::tactile)
            throw ContractViolation("tactile input contains a non-tactile point");
    FusedPointSet set;
    set.points.reserve(visual.size() + tactile.size());
    set.points.insert(set.points.end(), visual.begin(), visual.end());
    set.points.insert(set.points.end(), tactile.begin(), tactile.end());
    set.vision_count = visual.size();
    set.tactile_count = tactile.size();
    return set;
}

std::vector<FusedPoint> filter_modality(const FusedPointSet& set, Modality modality) {
    std::vector<FusedPoint> out;
    for (const auto& p : set.points)
        if (p.modality == modality) out.push_back(p);
    return out;
}

std::vector<FusedPoint> read_visual_csv(std::istream& in) {
    std::vector<FusedPoint> out;
    read_csv(in, "x_m,y_m,z_m,feature", [&](const auto& cols, std::size_t lineno) {
        if (cols.size() != 4)
            throw ValidationError("visual CSV line " + std::to_string(lineno) +
                                  ": expected 4 columns");
        FusedPoint p;
        p.position = {to_double(cols[0], lineno), to_double(cols[1], lineno),
                      to_double(cols[2], lineno)};
        p.magnitude = to_double(cols[3], lineno);
        if (!(p.magnitude >= 0.0 && p.magnitude <= 1.0))
            throw ValidationError("visual CSV line " + std::to_string(lineno) +
                                  ": feature must lie in [0, 1]");
        p.modality = Modality::vision;
        out.push_back(p);
    });
    return out;
}

void write_visual_csv(std::ostream& out, const std::vector<FusedPoint>& points) {
    out << "x_m,y_m,z_m,feature\n";
    for (const auto& p : points) out << format_point(p, false);
}

void write_fused_csv(std::ostream& out, const FusedPointSet& set) {
    out << "x_m,y_m,z_m,magnitude,modality\n";
    for (const auto& p : set.points) out << format_point(p, true);
}

FusedPointSet read_fused_csv(std::istream& in) {
    std::vector<FusedPoint> visual, tactile;
    read_csv(in, "x_m,y_m,z_m,magnitude,modality", [&](const auto& cols, std::size_t lineno) {
        if (cols.size() != 5)
            throw ValidationError("fused CSV line " + std::to_string(lineno) +
                                  ": expected 5 columns");
        FusedPoint p;
        p.position = {to_double(cols[0], lineno), to_double(cols[1], lineno),
                      to_double(cols[2], lineno)};
        p.magnitude = to_double(cols[3], lineno);
        if (cols[4] == "vision") {
            p.modality = Modality::vision;
            visual.push_back(p);
        } else if (cols[4] == "tactile") {
            p.modality = Modality::tactile;
            tactile.push_back(p);
        } else {
            throw ValidationError("fused CSV line " + std::to_string(lineno) +
                                  ": unknown modality");
        }
    });
    return merge(visual, tactile);
}

}  // namespace flexitac
