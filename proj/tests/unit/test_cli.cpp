#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "flexitac/scenario.hpp"
#include "flexitac/wire_protocol.hpp"

using namespace flexitac;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("flexitac_cli_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string press_scene(double k_n, double k_d) {
    std::ostringstream s;
    s << R"({"pad": {"preset": "12x32"},
  "shapes": [{"kind": "sphere", "center_m": [0, 0, 0.0205], "radius_m": 0.02,
              "velocity_mps": [0, 0, -0.02]}],
  "contact": {"k_n_npm": )"
      << k_n << R"(, "k_d_nspm": )" << k_d
      << R"(, "counts_per_newton": 400, "noise_floor_counts": 50, "noise_sigma_counts": 2},
  "dt_s": 0.001, "steps": 150})";
    return s.str();
}

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "flexitac");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("argument helpers") {
    CHECK(cli::parse_taxel("5,15") == TaxelId{5, 15});
    CHECK_THROWS_AS(cli::parse_taxel("5;15"), ValidationError);
    CHECK_THROWS_AS(cli::parse_taxel("5,15,2"), ValidationError);
    const auto pose = cli::parse_pose("1,0,0,0,0.1,0.2,0.3");
    CHECK(pose.apply(Vec3::Zero()).isApprox(Vec3(0.1, 0.2, 0.3)));
    CHECK_THROWS_AS(cli::parse_pose("1,0,0"), ValidationError);
    CHECK(cli::fused_output_path("out/fused.csv", 7) == "out/fused_00007.csv");
    CHECK(cli::fused_output_path("fused", 12) == "fused_00012");
}

TEST_CASE("exit codes") {
    TempDir dir;
    write_text(dir / "scene.json", press_scene(600, 25));
    write_text(dir / "broken.json", "{\n  \"pad\": {\n    \"preset\": \"12x32\",,\n}");

    CHECK(run_cli({}) == cli::kExitUsage);
    CHECK(run_cli({"simulate", "--scene", dir / "scene.json"}) == cli::kExitUsage);
    CHECK(run_cli({"teleport"}) == cli::kExitUsage);

    CHECK(run_cli({"simulate", "--scene", dir / "broken.json", "--out", dir / "a.ftlog"}) ==
          cli::kExitValidation);
    CHECK_FALSE(fs::exists(dir / "a.ftlog"));
    CHECK_FALSE(fs::exists(dir / "a.ftlog.partial"));

    CHECK(run_cli({"simulate", "--scene", dir / "scene.json", "--out", dir / "a.ftlog"}) ==
          cli::kExitOk);
    CHECK(run_cli({"replay", dir / "a.ftlog"}) == cli::kExitOk);
    CHECK(run_cli({"calibrate", "--log", dir / "a.ftlog", "--scene", dir / "scene.json", "--taxel",
                   "99,0", "--out", dir / "c.json"}) == cli::kExitValidation);

    // A log with no contact at all cannot identify the model.
    write_text(dir / "far.json",
               R"({"pad": {"preset": "12x32"}, "shapes": [{"kind": "sphere",
                   "center_m": [0, 0, 0.5], "radius_m": 0.02}], "dt_s": 0.01, "steps": 10})");
    CHECK(run_cli({"simulate", "--scene", dir / "far.json", "--out", dir / "far.ftlog"}) == 0);
    CHECK(run_cli({"calibrate", "--log", dir / "far.ftlog", "--scene", dir / "scene.json",
                   "--taxel", "5,15", "--out", dir / "c.json"}) == cli::kExitRuntime);
    CHECK_FALSE(fs::exists(dir / "c.json"));

    CHECK(run_cli({"replay", dir / "missing.ftlog"}) == cli::kExitValidation);
}

TEST_CASE("simulate is deterministic and writes a verifiable manifest") {
    TempDir dir;
    write_text(dir / "scene.json", press_scene(600, 25));
    std::ostringstream report;
    cli::SimulateOptions opt{dir / "scene.json", dir / "a.ftlog", 4};
    const auto m = cli::cmd_simulate(opt, report);
    const auto first = read_text(dir / "a.ftlog");
    const auto first_manifest = read_text(dir / "a.ftlog.manifest.json");
    cli::cmd_simulate(opt, report);
    CHECK(read_text(dir / "a.ftlog") == first);
    CHECK(read_text(dir / "a.ftlog.manifest.json") == first_manifest);

    CHECK(first.size() == 150 * encoded_frame_size(GridConfig::preset("12x32")));
    REQUIRE(m.outputs.size() == 1);
    CHECK(m.outputs[0].sha256 == cli::sha256_file(dir / "a.ftlog"));
    CHECK(m.outputs[0].sha256.size() == 64);
    CHECK(cli::verify_manifest(dir / "a.ftlog.manifest.json"));

    write_text(dir / "a.ftlog", first.substr(0, 780));
    CHECK_FALSE(cli::verify_manifest(dir / "a.ftlog.manifest.json"));
}

TEST_CASE("sha256 known answer") {
    TempDir dir;
    write_text(dir / "abc.txt", "abc");
    CHECK(cli::sha256_file(dir / "abc.txt") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("replay reports corruption") {
    TempDir dir;
    write_text(dir / "scene.json", press_scene(600, 25));
    std::ostringstream sink;
    cli::cmd_simulate({dir / "scene.json", dir / "a.ftlog", 1}, sink);
    auto bytes = read_text(dir / "a.ftlog");
    bytes[780 * 10 + 100] ^= 0x08;
    bytes[780 * 20 + 300] ^= 0x01;
    write_text(dir / "bad.ftlog", bytes);

    cli::ReplayOptions opt;
    opt.log = dir / "bad.ftlog";
    opt.out = dir / "replay.json";
    std::ostringstream report;
    cli::cmd_replay(opt, report);
    const auto json = read_text(dir / "replay.json");
    CHECK(json.find("\"frames_ok\": 148") != std::string::npos);
    CHECK(json.find("\"sequence_gaps\": 2") != std::string::npos);
    CHECK(report.str().find("frames_corrupt") != std::string::npos);
}

TEST_CASE("calibrate surfaces decoder counts") {
    TempDir dir;
    write_text(dir / "hidden.json", press_scene(600, 25));
    write_text(dir / "nominal.json", press_scene(400, 10));
    std::ostringstream sink;
    cli::cmd_simulate({dir / "hidden.json", dir / "a.ftlog", 2}, sink);
    auto bytes = read_text(dir / "a.ftlog");
    bytes[780 * 50 + 400] ^= 0x10;
    write_text(dir / "a.ftlog", bytes);

    cli::CalibrateOptions opt;
    opt.log = dir / "a.ftlog";
    opt.scene = dir / "nominal.json";
    opt.taxel = {5, 15};
    opt.out = dir / "cal.json";
    opt.seed = 3;
    std::ostringstream report;
    cli::cmd_calibrate(opt, report);
    const auto json = read_text(dir / "cal.json");
    CHECK(json.find("\"frames_corrupt\": 1") != std::string::npos);
    CHECK(report.str().find("overlap_after") != std::string::npos);
    CHECK(cli::verify_manifest(dir / "cal.json.manifest.json"));
}

TEST_CASE("fuse a 1x1 pad with one visual point") {
    TempDir dir;
    write_text(dir / "one.json",
               R"({"pad": {"rows": 1, "cols": 1, "pitch_m": 0.002, "adc_bits": 10},
                   "shapes": [{"kind": "sphere", "center_m": [0, 0, 0.019], "radius_m": 0.02}],
                   "contact": {"k_n_npm": 500, "k_d_nspm": 0}, "dt_s": 0.01, "steps": 3})");
    write_text(dir / "visual.csv", "x_m,y_m,z_m,feature\n0.1,0.2,0.3,0.5\n");
    std::ostringstream sink;
    cli::cmd_simulate({dir / "one.json", dir / "one.ftlog", 0}, sink);

    cli::FuseOptions opt;
    opt.log = dir / "one.ftlog";
    opt.visual = dir / "visual.csv";
    opt.out = dir / "fused.csv";
    opt.pad = "1x1";
    opt.frame = 1;
    cli::cmd_fuse(opt, sink);
    std::istringstream csv(read_text(dir / "fused.csv"));
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(csv, line)) lines.push_back(line);
    REQUIRE(lines.size() == 3);
    CHECK(lines[1].find("vision") != std::string::npos);
    CHECK(lines[2].find("tactile") != std::string::npos);

    opt.frame.reset();
    const auto m = cli::cmd_fuse(opt, sink);
    CHECK(m.outputs.size() == 3);
    CHECK(fs::exists(dir / "fused_00000.csv"));
    CHECK(fs::exists(dir / "fused_00002.csv"));
}

TEST_CASE("stats CSV") {
    TempDir dir;
    write_text(dir / "scene.json", press_scene(600, 25));
    std::ostringstream sink;
    cli::cmd_simulate({dir / "scene.json", dir / "a.ftlog", 0}, sink);
    cli::StatsOptions opt;
    opt.log = dir / "a.ftlog";
    std::ostringstream report;
    cli::cmd_stats(opt, report);
    std::istringstream csv(report.str());
    std::string line;
    std::size_t rows = 0;
    std::getline(csv, line);
    CHECK(line == "row,col,min,max,mean");
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 384);
}
