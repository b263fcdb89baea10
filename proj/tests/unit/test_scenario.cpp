#include "doctest.h"

#include <string>

#include "flexitac/errors.hpp"
#include "flexitac/scenario.hpp"

using namespace flexitac;

namespace {

const char* kScene = R"({
  "pad": {"preset": "12x32",
          "pose": {"quaternion_wxyz": [1, 0, 0, 0], "translation_m": [0, 0, 0]}},
  "shapes": [
    {"kind": "sphere", "center_m": [0, 0, 0.0205], "radius_m": 0.02,
     "velocity_mps": [0, 0, -0.02]},
    {"kind": "box", "center_m": [0.5, 0, 0], "half_extents_m": [0.01, 0.01, 0.01],
     "quaternion_wxyz": [0.9238795325112867, 0, 0, 0.3826834323650898]},
    {"kind": "plane", "normal": [0, 0, -1], "offset_m": -1.0}
  ],
  "contact": {"k_n_npm": 600, "k_d_nspm": 25, "counts_per_newton": 400,
              "noise_floor_counts": 50, "noise_sigma_counts": 2},
  "dt_s": 0.001,
  "steps": 40
})";

std::string error_of(const std::string& text) {
    try {
        parse_scene_json(text);
    } catch (const SceneError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("parse a full scene") {
    const auto s = parse_scene_json(kScene);
    CHECK(s.pad.grid == GridConfig::preset("12x32"));
    CHECK(s.scene.shapes.size() == 3);
    CHECK(s.params.k_n == 600);
    CHECK(s.params.k_d == 25);
    CHECK(s.params.noise_sigma_counts == 2);
    CHECK(s.dt_s == 0.001);
    CHECK(s.steps == 40);
    const auto& sphere = std::get<Sphere>(s.scene.shapes[0].geometry);
    CHECK(sphere.radius_m == 0.02);
    CHECK(s.scene.shapes[0].velocity.z() == -0.02);
}

TEST_CASE("custom pad gets the custom config id") {
    const auto s = parse_scene_json(
        R"({"pad": {"rows": 3, "cols": 5, "pitch_m": 0.003, "adc_bits": 12}, "shapes": [],
            "dt_s": 0.01, "steps": 2})");
    CHECK(s.pad.grid.rows == 3);
    CHECK(s.pad.grid.cols == 5);
    CHECK(s.pad.grid.config_id == kCustomConfigId);
    CHECK(registry_for(s.pad.grid).find(kCustomConfigId) != nullptr);

    const auto run = simulate_scene(s, 0);
    CHECK(run.frames.size() == 2);
    const auto log = decode_stream(encode_frames(run.frames), registry_for(s.pad.grid));
    CHECK(log.frames == run.frames);
}

TEST_CASE("JSON round trip") {
    const auto s = parse_scene_json(kScene);
    const auto back = parse_scene_json(scene_to_json(s));
    CHECK(back.pad.grid == s.pad.grid);
    CHECK(back.steps == s.steps);
    CHECK(back.dt_s == s.dt_s);
    CHECK(simulate_scene(back, 3).frames == simulate_scene(s, 3).frames);
}

TEST_CASE("syntax errors carry line and column") {
    const std::string msg = error_of("{\n  \"pad\": {\"preset\": \"12x32\"},\n  \"steps\": ,\n}");
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("column") != std::string::npos);
}

TEST_CASE("semantic errors name the offending path") {
    std::string text = kScene;
    text.replace(text.find("\"radius_m\": 0.02"), 16, "\"radius_m\": -0.02");
    CHECK(error_of(text).find("/shapes/0") != std::string::npos);

    CHECK_FALSE(error_of(R"({"pad": {"preset": "7x7"}, "shapes": []})").empty());
    CHECK_FALSE(error_of(R"({"pad": {"preset": "12x32"}, "shapes": [{"kind": "cone"}]})").empty());
    CHECK_FALSE(error_of(R"({"pad": {"preset": "12x32"}, "shapes": [], "dt_s": 0})").empty());
    CHECK_FALSE(error_of(R"([1, 2])").empty());
    CHECK_THROWS_AS(load_scene_file("/nonexistent/scene.json"), ValidationError);
}

TEST_CASE("simulation bookkeeping") {
    const auto s = parse_scene_json(kScene);
    const auto run = simulate_scene(s, 9, true);
    REQUIRE(run.frames.size() == 40);
    REQUIRE(run.samples.size() == 40);
    for (std::size_t k = 0; k < run.frames.size(); ++k) {
        CHECK(run.frames[k].sequence == k);
        CHECK(run.frames[k].timestamp_ms == k);
    }
    // The sphere starts 0.5 mm above the pad and descends at 20 mm/s.
    CHECK(run.summaries.front().contacting_taxels == 0);
    CHECK(run.summaries.back().contacting_taxels > 0);
    CHECK(run.summaries.back().max_force_n > run.summaries[30].max_force_n);
    CHECK(simulate_scene(s, 9).frames == run.frames);
    CHECK_FALSE(simulate_scene(s, 10).frames == run.frames);
}
