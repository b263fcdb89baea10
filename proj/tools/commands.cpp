#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "flexitac/errors.hpp"
#include "flexitac/fusion3d.hpp"
#include "flexitac/scenario.hpp"
#include "flexitac/virtual_device.hpp"
#include "flexitac/wire_protocol.hpp"
#include "json.hpp"

namespace flexitac::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string absolute_path(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

Bytes read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read '" + path + "'");
    return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Writes through a temporary so a failed run never leaves a partial file.
void write_file_atomic(const std::string& path, const void* data, std::size_t size) {
    const std::string tmp = path + ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw TransportError("cannot open '" + path + "' for writing");
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw TransportError("write to '" + path + "' failed");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw TransportError("cannot move output into place at '" + path + "': " + ec.message());
    }
}

void write_text_atomic(const std::string& path, const std::string& text) {
    write_file_atomic(path, text.data(), text.size());
}

std::string fmt_double(double v) {
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

ConfigRegistry registry_option(const std::optional<std::string>& pad) {
    return pad ? registry_for(GridConfig::parse(*pad)) : ConfigRegistry{};
}

void finish_manifest(RunManifest& m, const std::string& manifest_path) {
    write_manifest(m, manifest_path);
}

}  // namespace

std::string RunManifest::to_json() const {
    ordered_json j;
    j["command"] = command;
    j["version"] = version;
    j["seed"] = seed;
    j["inputs"] = ordered_json::array();
    for (const auto& d : inputs) j["inputs"].push_back({{"path", d.path}, {"sha256", d.sha256}});
    j["parameters"] = ordered_json::object();
    for (const auto& [k, v] : parameters) j["parameters"][k] = v;
    j["outputs"] = ordered_json::array();
    for (const auto& d : outputs) j["outputs"].push_back({{"path", d.path}, {"sha256", d.sha256}});
    return j.dump(2) + "\n";
}

std::string sha256_file(const std::string& path) {
    const Bytes data = read_file(path);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw RuntimeFailure("SHA-256 computation failed");
    std::ostringstream ss;
    for (unsigned i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return ss.str();
}

FileDigest digest_of(const std::string& path) { return {absolute_path(path), sha256_file(path)}; }

void write_manifest(const RunManifest& manifest, const std::string& path) {
    write_text_atomic(path, manifest.to_json());
}

bool verify_manifest(const std::string& manifest_path) {
    const Bytes raw = read_file(manifest_path);
    const auto j = nlohmann::json::parse(raw.begin(), raw.end());
    for (const auto& o : j.at("outputs")) {
        const auto path = o.at("path").get<std::string>();
        if (!fs::exists(path) || sha256_file(path) != o.at("sha256").get<std::string>()) return false;
    }
    return true;
}

TaxelId parse_taxel(const std::string& text) {
    TaxelId t;
    char comma = 0;
    std::istringstream ss(text);
    if (!(ss >> t.row >> comma >> t.col) || comma != ',' || !(ss >> std::ws).eof())
        throw ValidationError("taxel must be given as R,C (got '" + text + "')");
    return t;
}

RigidTransform parse_pose(const std::string& text) {
    if (text.empty()) return RigidTransform::identity();
    std::vector<double> v;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValidationError("pose component '" + item + "' is not a number");
        }
    }
    if (v.size() != 7) throw ValidationError("pose must be w,x,y,z,tx,ty,tz");
    return RigidTransform::from_quaternion(v[0], v[1], v[2], v[3], Vec3(v[4], v[5], v[6]));
}

std::string fused_output_path(const std::string& out, std::size_t frame_index) {
    fs::path p(out);
    char suffix[32];
    std::snprintf(suffix, sizeof suffix, "_%05zu", frame_index);
    fs::path name = p.stem();
    name += suffix;
    name += p.extension();
    return (p.parent_path() / name).string();
}

RunManifest cmd_simulate(const SimulateOptions& opt, std::ostream& report) {
    const SceneDescription scene = load_scene_file(opt.scene);
    const SimulationRun run = simulate_scene(scene, opt.seed);
    const Bytes bytes = encode_frames(run.frames);
    write_file_atomic(opt.out, bytes.data(), bytes.size());

    double max_force = 0.0;
    std::size_t first_contact = run.summaries.size(), peak_taxels = 0;
    for (std::size_t k = 0; k < run.summaries.size(); ++k) {
        const auto& s = run.summaries[k];
        max_force = std::max(max_force, s.max_force_n);
        peak_taxels = std::max(peak_taxels, s.contacting_taxels);
        if (s.contacting_taxels > 0 && first_contact == run.summaries.size()) first_contact = k;
    }
    report << "frames " << run.frames.size() << " bytes " << bytes.size() << " max_force_n "
           << fmt_double(max_force) << " peak_contacting " << peak_taxels;
    if (first_contact < run.summaries.size()) report << " first_contact_step " << first_contact;
    report << '\n';

    RunManifest m;
    m.command = "simulate";
    m.seed = opt.seed;
    m.inputs.push_back(digest_of(opt.scene));
    m.parameters["pad"] = scene.pad.grid.name();
    m.parameters["steps"] = std::to_string(scene.steps);
    m.outputs.push_back(digest_of(opt.out));
    finish_manifest(m, opt.out + ".manifest.json");
    return m;
}

RunManifest cmd_stream(const StreamOptions& opt, std::ostream& report) {
    const SceneDescription scene = load_scene_file(opt.scene);
    scene.validate();

    DeviceOptions dev;
    dev.period = period_from_rate(opt.rate_hz);
    dev.frame_count = opt.frames;
    dev.mode = opt.non_realtime ? TimingMode::non_realtime : TimingMode::realtime;

    // Frames are requested strictly in order, so one simulator suffices.
    ContactSimulator sim(scene.scene, scene.pad, scene.params, scene.dt_s);
    FrameSource source = [&](std::uint64_t k) {
        const auto& samples = sim.advance();
        return samples_to_frame(samples, scene.params, scene.pad.grid, 0, 0,
                                frame_seed(opt.seed, k));
    };

    StreamStats stats;
    const bool to_file = opt.out != "-";
    const std::string tmp = opt.out + ".partial";
    try {
        FileSink sink(to_file ? tmp : opt.out);
        stats = virtual_device_run(source, dev, sink);
    } catch (...) {
        if (to_file) fs::remove(tmp);
        throw;
    }
    if (to_file) fs::rename(tmp, opt.out);

    report << "frames " << stats.frames << " bytes " << stats.bytes << " nominal_period_ms "
           << fmt_double(stats.nominal_period_s * 1e3);
    if (dev.mode == TimingMode::realtime && stats.frames >= 2)
        report << " mean_period_ms " << fmt_double(stats.mean_period_s * 1e3) << " jitter_ms "
               << fmt_double(stats.jitter_s * 1e3) << " worst_window_error "
               << fmt_double(stats.worst_window_error);
    report << '\n';

    RunManifest m;
    m.command = "stream";
    m.seed = opt.seed;
    m.inputs.push_back(digest_of(opt.scene));
    m.parameters["rate_hz"] = fmt_double(opt.rate_hz);
    m.parameters["frames"] = std::to_string(opt.frames);
    m.parameters["mode"] = opt.non_realtime ? "non-realtime" : "realtime";
    if (to_file) {
        m.outputs.push_back(digest_of(opt.out));
        finish_manifest(m, opt.out + ".manifest.json");
    }
    return m;
}

RunManifest cmd_replay(const ReplayOptions& opt, std::ostream& report) {
    const Bytes bytes = read_file(opt.log);
    const DecodedLog log = decode_stream(bytes, registry_option(opt.pad));

    std::uint64_t gaps = 0;
    for (std::size_t i = 1; i < log.frames.size(); ++i)
        if (static_cast<std::uint16_t>(log.frames[i].sequence - log.frames[i - 1].sequence) != 1)
            ++gaps;

    ordered_json j;
    j["frames_ok"] = log.stats.frames_ok;
    j["frames_corrupt"] = log.stats.frames_corrupt;
    j["bytes_discarded"] = log.stats.bytes_discarded;
    j["trailing_bytes"] = log.trailing_bytes;
    j["sequence_gaps"] = gaps;
    if (!log.frames.empty()) {
        j["first_timestamp_ms"] = log.frames.front().timestamp_ms;
        j["last_timestamp_ms"] = log.frames.back().timestamp_ms;
        std::map<std::string, std::uint64_t> by_grid;
        for (const auto& f : log.frames) ++by_grid[f.grid.name()];
        j["frames_by_grid"] = by_grid;
    }

    report << "frames_ok " << log.stats.frames_ok << " frames_corrupt " << log.stats.frames_corrupt
           << " bytes_discarded " << log.stats.bytes_discarded << " trailing_bytes "
           << log.trailing_bytes << " sequence_gaps " << gaps << '\n';

    RunManifest m;
    m.command = "replay";
    m.inputs.push_back(digest_of(opt.log));
    if (opt.pad) m.parameters["pad"] = *opt.pad;
    if (opt.out) {
        write_text_atomic(*opt.out, j.dump(2) + "\n");
        m.outputs.push_back(digest_of(*opt.out));
        finish_manifest(m, *opt.out + ".manifest.json");
    }
    return m;
}

RunManifest cmd_calibrate(const CalibrateOptions& opt, std::ostream& report) {
    const SceneDescription scene = load_scene_file(opt.scene);
    const Bytes bytes = read_file(opt.log);

    NormalizationRule rule;
    rule.noise_floor = opt.noise_floor.value_or(
        scene.params.noise_floor_counts + std::max(1.0, std::ceil(3.0 * scene.params.noise_sigma_counts)));
    rule.full_scale = opt.full_scale.value_or(scene.pad.grid.max_count());

    PipelineOptions popt;
    popt.bins = opt.bins;
    popt.sim_seed = opt.seed;

    PipelineReport result;
    try {
        result = calibrate_pipeline(bytes, scene, opt.taxel, rule, popt);
    } catch (const UnidentifiableError& e) {
        const DecodedLog log = decode_stream(bytes, registry_for(scene.pad.grid));
        throw UnidentifiableError(std::string(e.what()) + " (decoded " +
                                  std::to_string(log.stats.frames_ok) + " frames, " +
                                  std::to_string(log.stats.frames_corrupt) + " corrupt)");
    }
    write_text_atomic(opt.out, report_to_json(result));

    report << "k_n " << fmt_double(result.fit.k_n) << " k_d " << fmt_double(result.fit.k_d)
           << " residual_rms " << fmt_double(result.fit.residual_rms) << " overlap_before "
           << fmt_double(result.overlap_before) << " overlap_after "
           << fmt_double(result.overlap_after) << " frames_corrupt "
           << result.decoder.frames_corrupt << '\n';
    if (result.fit.degenerate) report << "warning: damping not identifiable, k_d reported as 0\n";
    if (result.fit.k_n_clamped) report << "warning: fitted k_n was negative, clamped to 0\n";

    RunManifest m;
    m.command = "calibrate";
    m.seed = opt.seed;
    m.inputs.push_back(digest_of(opt.log));
    m.inputs.push_back(digest_of(opt.scene));
    m.parameters["taxel"] = std::to_string(opt.taxel.row) + "," + std::to_string(opt.taxel.col);
    m.parameters["noise_floor"] = fmt_double(rule.noise_floor);
    m.parameters["full_scale"] = fmt_double(rule.full_scale);
    m.parameters["bins"] = std::to_string(opt.bins);
    m.outputs.push_back(digest_of(opt.out));
    finish_manifest(m, opt.out + ".manifest.json");
    return m;
}

RunManifest cmd_fuse(const FuseOptions& opt, std::ostream& report) {
    PadGeometry pad;
    pad.grid = GridConfig::parse(opt.pad);
    pad.pose = parse_pose(opt.pose);

    NormalizationRule rule;
    rule.noise_floor = opt.noise_floor;
    rule.full_scale = opt.full_scale.value_or(pad.grid.max_count());
    rule.validate(pad.grid);
    if (!(opt.drop_below >= 0.0 && opt.drop_below <= 1.0))
        throw ValidationError("drop-below must lie in [0, 1]");

    std::vector<FusedPoint> visual;
    {
        std::ifstream in(opt.visual);
        if (!in) throw ValidationError("cannot read '" + opt.visual + "'");
        visual = read_visual_csv(in);
    }
    const Bytes bytes = read_file(opt.log);
    const DecodedLog log = decode_stream(bytes, registry_for(pad.grid));
    if (opt.frame && *opt.frame >= log.frames.size())
        throw ValidationError("frame index " + std::to_string(*opt.frame) + " out of range (" +
                              std::to_string(log.frames.size()) + " frames)");

    RunManifest m;
    m.command = "fuse";
    m.inputs.push_back(digest_of(opt.log));
    m.inputs.push_back(digest_of(opt.visual));
    m.parameters["pad"] = pad.grid.name();
    m.parameters["pose"] = opt.pose.empty() ? "identity" : opt.pose;
    m.parameters["drop_below"] = fmt_double(opt.drop_below);
    m.parameters["noise_floor"] = fmt_double(rule.noise_floor);
    m.parameters["full_scale"] = fmt_double(rule.full_scale);

    const std::size_t first = opt.frame.value_or(0);
    const std::size_t last = opt.frame ? first + 1 : log.frames.size();
    for (std::size_t i = first; i < last; ++i) {
        const auto tactile = lift_tactile(log.frames[i], pad, rule, opt.drop_below);
        const FusedPointSet set = merge(visual, tactile);
        std::ostringstream csv;
        write_fused_csv(csv, set);
        const std::string path = opt.frame ? opt.out : fused_output_path(opt.out, i);
        write_text_atomic(path, csv.str());
        m.outputs.push_back(digest_of(path));
        report << "frame " << i << " points " << set.points.size() << " vision "
               << set.vision_count << " tactile " << set.tactile_count << " -> " << path << '\n';
    }
    finish_manifest(m, opt.out + ".manifest.json");
    return m;
}

RunManifest cmd_stats(const StatsOptions& opt, std::ostream& report) {
    const Bytes bytes = read_file(opt.log);
    const DecodedLog log = decode_stream(bytes, registry_option(opt.pad));
    if (log.frames.empty()) throw ValidationError("log contains no decodable frames");

    const GridConfig grid = log.frames.front().grid;
    const std::size_t n = grid.taxel_count();
    std::vector<std::uint16_t> lo(n, std::numeric_limits<std::uint16_t>::max()), hi(n, 0);
    std::vector<double> sum(n, 0.0);
    std::size_t used = 0;
    for (const auto& f : log.frames) {
        if (!f.grid.same_shape(grid)) continue;
        ++used;
        for (std::size_t i = 0; i < n; ++i) {
            lo[i] = std::min(lo[i], f.values[i]);
            hi[i] = std::max(hi[i], f.values[i]);
            sum[i] += f.values[i];
        }
    }

    std::ostringstream csv;
    csv << "row,col,min,max,mean\n";
    for (std::size_t i = 0; i < n; ++i) {
        const auto [r, c] = scan_position(grid, i);
        csv << r << ',' << c << ',' << lo[i] << ',' << hi[i] << ',' << fmt_double(sum[i] / used)
            << '\n';
    }

    RunManifest m;
    m.command = "stats";
    m.inputs.push_back(digest_of(opt.log));
    m.parameters["grid"] = grid.name();
    m.parameters["frames"] = std::to_string(used);
    if (opt.out) {
        write_text_atomic(*opt.out, csv.str());
        m.outputs.push_back(digest_of(*opt.out));
        finish_manifest(m, *opt.out + ".manifest.json");
    } else {
        report << csv.str();
    }
    return m;
}

int run(int argc, char** argv) {
    CLI::App app{"FlexiTac tactile toolkit: simulate, stream, replay, calibrate, fuse"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(FLEXITAC_VERSION));

    SimulateOptions sim;
    auto* c_sim = app.add_subcommand("simulate", "Simulate a scene and write a .ftlog frame log");
    c_sim->add_option("--scene", sim.scene, "Scene JSON")->required();
    c_sim->add_option("--out", sim.out, "Output .ftlog")->required();
    c_sim->add_option("--seed", sim.seed, "Noise seed");

    StreamOptions st;
    auto* c_stream = app.add_subcommand("stream", "Run the virtual device at a fixed rate");
    c_stream->add_option("--scene", st.scene, "Scene JSON")->required();
    c_stream->add_option("--out", st.out, "Byte sink: file path or - for stdout");
    c_stream->add_option("--rate-hz", st.rate_hz, "Frame rate")->capture_default_str();
    c_stream->add_option("--frames", st.frames, "Number of frames")->required();
    c_stream->add_flag("--non-realtime", st.non_realtime, "Emit without sleeping");
    c_stream->add_option("--seed", st.seed, "Noise seed");

    ReplayOptions rp;
    std::string rp_pad, rp_out;
    auto* c_replay = app.add_subcommand("replay", "Decode a .ftlog and print frame statistics");
    c_replay->add_option("--log,log", rp.log, "Input .ftlog")->required();
    c_replay->add_option("--pad", rp_pad, "Grid for non-preset pads (RxC)");
    c_replay->add_option("--out", rp_out, "Write statistics JSON here");

    CalibrateOptions cal;
    std::string cal_taxel;
    double cal_floor = 0, cal_full = 0;
    auto* c_cal = app.add_subcommand("calibrate", "Fit k_n, k_d from a recorded log");
    c_cal->add_option("--log", cal.log, "Recorded .ftlog")->required();
    c_cal->add_option("--scene", cal.scene, "Scene replaying the same load schedule")->required();
    c_cal->add_option("--taxel", cal_taxel, "Taxel R,C")->required();
    c_cal->add_option("--out", cal.out, "Calibration report JSON")->required();
    auto* o_floor = c_cal->add_option("--noise-floor", cal_floor, "Normalization noise floor");
    auto* o_full = c_cal->add_option("--full-scale", cal_full, "Normalization full scale");
    c_cal->add_option("--bins", cal.bins, "Histogram bins")->capture_default_str();
    c_cal->add_option("--seed", cal.seed, "Simulation noise seed");

    FuseOptions fu;
    std::size_t fu_frame = 0;
    double fu_full = 0;
    auto* c_fuse = app.add_subcommand("fuse", "Merge tactile frames with a visual point cloud");
    c_fuse->add_option("--log", fu.log, "Input .ftlog")->required();
    c_fuse->add_option("--visual", fu.visual, "Visual CSV x_m,y_m,z_m,feature")->required();
    c_fuse->add_option("--out", fu.out, "Output CSV (suffixed per frame unless --frame)")->required();
    c_fuse->add_option("--pad", fu.pad, "Pad preset or RxC")->capture_default_str();
    c_fuse->add_option("--pose", fu.pose, "Pad pose w,x,y,z,tx,ty,tz");
    auto* o_frame = c_fuse->add_option("--frame", fu_frame, "Only fuse this frame index");
    c_fuse->add_option("--drop-below", fu.drop_below, "Drop taxels below this magnitude");
    c_fuse->add_option("--noise-floor", fu.noise_floor, "Normalization noise floor")
        ->capture_default_str();
    auto* o_fu_full = c_fuse->add_option("--full-scale", fu_full, "Normalization full scale");

    StatsOptions sa;
    std::string sa_pad, sa_out;
    auto* c_stats = app.add_subcommand("stats", "Per-taxel min/max/mean over a log");
    c_stats->add_option("--log,log", sa.log, "Input .ftlog")->required();
    c_stats->add_option("--pad", sa_pad, "Grid for non-preset pads (RxC)");
    c_stats->add_option("--out", sa_out, "Write CSV here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (c_sim->parsed()) {
            cmd_simulate(sim, std::cout);
        } else if (c_stream->parsed()) {
            cmd_stream(st, st.out == "-" ? std::cerr : std::cout);
        } else if (c_replay->parsed()) {
            if (!rp_pad.empty()) rp.pad = rp_pad;
            if (!rp_out.empty()) rp.out = rp_out;
            cmd_replay(rp, std::cout);
        } else if (c_cal->parsed()) {
            cal.taxel = parse_taxel(cal_taxel);
            if (o_floor->count()) cal.noise_floor = cal_floor;
            if (o_full->count()) cal.full_scale = cal_full;
            cmd_calibrate(cal, std::cout);
        } else if (c_fuse->parsed()) {
            if (o_frame->count()) fu.frame = fu_frame;
            if (o_fu_full->count()) fu.full_scale = fu_full;
            cmd_fuse(fu, std::cout);
        } else if (c_stats->parsed()) {
            if (!sa_pad.empty()) sa.pad = sa_pad;
            if (!sa_out.empty()) sa.out = sa_out;
            cmd_stats(sa, std::cout);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace flexitac::cli
