#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flexitac/calibration.hpp"
#include "flexitac/core_model.hpp"

namespace flexitac::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitValidation = 3, kExitRuntime = 4 };

struct FileDigest {
    std::string path;    // absolute
    std::string sha256;  // lowercase hex
};

/// Written next to every command output as `<out>.manifest.json`.
struct RunManifest {
    std::string command;
    std::string version = FLEXITAC_VERSION;
    std::uint64_t seed = 0;
    std::vector<FileDigest> inputs;
    std::map<std::string, std::string> parameters;
    std::vector<FileDigest> outputs;

    std::string to_json() const;
};

std::string sha256_file(const std::string& path);
FileDigest digest_of(const std::string& path);

void write_manifest(const RunManifest& manifest, const std::string& path);
// True when every output listed in the manifest still has the recorded digest.
bool verify_manifest(const std::string& manifest_path);

struct SimulateOptions {
    std::string scene;
    std::string out;
    std::uint64_t seed = 0;
};

struct StreamOptions {
    std::string scene;
    std::string out = "-";
    double rate_hz = 100.0;
    std::uint64_t frames = 0;
    bool non_realtime = false;
    std::uint64_t seed = 0;
};

struct ReplayOptions {
    std::string log;
    std::optional<std::string> pad;  // needed for non-preset grids
    std::optional<std::string> out;  // JSON statistics
};

struct CalibrateOptions {
    std::string log;
    std::string scene;
    TaxelId taxel;
    std::string out;
    std::optional<double> noise_floor;
    std::optional<double> full_scale;
    int bins = kDefaultHistogramBins;
    std::uint64_t seed = 0;
};

struct FuseOptions {
    std::string log;
    std::string visual;
    std::string out;
    std::string pad = "12x32";
    std::string pose;  // "w,x,y,z,tx,ty,tz"; empty means identity
    std::optional<std::size_t> frame;
    double drop_below = 0.0;
    double noise_floor = 50.0;
    std::optional<double> full_scale;
};

struct StatsOptions {
    std::string log;
    std::optional<std::string> pad;
    std::optional<std::string> out;  // CSV; stdout when absent
};

// Each command prints its human-readable summary to `report`. Errors are
// thrown as flexitac::Error subclasses.
RunManifest cmd_simulate(const SimulateOptions& opt, std::ostream& report);
RunManifest cmd_stream(const StreamOptions& opt, std::ostream& report);
RunManifest cmd_replay(const ReplayOptions& opt, std::ostream& report);
RunManifest cmd_calibrate(const CalibrateOptions& opt, std::ostream& report);
RunManifest cmd_fuse(const FuseOptions& opt, std::ostream& report);
RunManifest cmd_stats(const StatsOptions& opt, std::ostream& report);

TaxelId parse_taxel(const std::string& text);
RigidTransform parse_pose(const std::string& text);
std::string fused_output_path(const std::string& out, std::size_t frame_index);

int run(int argc, char** argv);

}  // namespace flexitac::cli
