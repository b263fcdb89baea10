#include "flexitac/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Geometry>

#include "json.hpp"

namespace flexitac {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw SceneError("scene " + path + ": " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) fail(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(path, "missing field '" + key + "'");
    return *it;
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(path, "expected a finite number");
    return v;
}

double number_or(const json& obj, const std::string& key, double fallback,
                 const std::string& path) {
    auto it = obj.find(key);
    return it == obj.end() ? fallback : number(*it, path + "/" + key);
}

Vec3 vec3(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) fail(path, "expected an array of 3 numbers");
    return {number(j[0], path + "/0"), number(j[1], path + "/1"), number(j[2], path + "/2")};
}

Vec3 vec3_or(const json& obj, const std::string& key, const std::string& path) {
    auto it = obj.find(key);
    return it == obj.end() ? Vec3::Zero() : vec3(*it, path + "/" + key);
}

Eigen::Quaterniond quaternion(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 4) fail(path, "expected [w, x, y, z]");
    Eigen::Quaterniond q(number(j[0], path + "/0"), number(j[1], path + "/1"),
                         number(j[2], path + "/2"), number(j[3], path + "/3"));
    if (!(q.norm() > 0.0)) fail(path, "quaternion has zero norm");
    return q.normalized();
}

PadGeometry parse_pad(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    PadGeometry pad;
    try {
        if (auto it = j.find("preset"); it != j.end()) {
            if (!it->is_string()) fail(path + "/preset", "expected a string");
            pad.grid = GridConfig::preset(it->get<std::string>());
        } else {
            auto int_field = [&](const char* key) {
                const json& v = require(j, key, path);
                if (!v.is_number_integer()) fail(path + "/" + key, "expected an integer");
                return v.get<int>();
            };
            const int rows = int_field("rows");
            const int cols = int_field("cols");
            const double pitch = number_or(j, "pitch_m", kDefaultPitchM, path);
            int bits = kDefaultAdcBits;
            if (j.contains("adc_bits")) bits = int_field("adc_bits");
            pad.grid = GridConfig::make(rows, cols, pitch, bits, kCustomConfigId);
        }
        if (auto it = j.find("pose"); it != j.end()) {
            const std::string pp = path + "/pose";
            Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
            if (it->contains("quaternion_wxyz"))
                q = quaternion((*it)["quaternion_wxyz"], pp + "/quaternion_wxyz");
            const Vec3 t = vec3_or(*it, "translation_m", pp);
            pad.pose = RigidTransform::from_quaternion(q.w(), q.x(), q.y(), q.z(), t);
        }
    } catch (const SceneError&) {
        throw;
    } catch (const ValidationError& e) {
        fail(path, e.what());
    }
    return pad;
}

SdfShape parse_shape(const json& j, const std::string& path) {
    const json& kind_j = require(j, "kind", path);
    if (!kind_j.is_string()) fail(path + "/kind", "expected a string");
    const std::string kind = kind_j.get<std::string>();
    const Vec3 velocity = vec3_or(j, "velocity_mps", path);
    try {
        if (kind == "plane") {
            return SdfShape::plane(vec3(require(j, "normal", path), path + "/normal"),
                                   number(require(j, "offset_m", path), path + "/offset_m"),
                                   velocity);
        }
        if (kind == "sphere") {
            return SdfShape::sphere(vec3(require(j, "center_m", path), path + "/center_m"),
                                    number(require(j, "radius_m", path), path + "/radius_m"),
                                    velocity);
        }
        if (kind == "box") {
            Mat3 rot = Mat3::Identity();
            if (j.contains("quaternion_wxyz"))
                rot = quaternion(j["quaternion_wxyz"], path + "/quaternion_wxyz").toRotationMatrix();
            return SdfShape::box(vec3(require(j, "center_m", path), path + "/center_m"),
                                 vec3(require(j, "half_extents_m", path), path + "/half_extents_m"),
                                 rot, velocity);
        }
    } catch (const SceneError&) {
        throw;
    } catch (const ValidationError& e) {
        fail(path, e.what());
    }
    fail(path + "/kind", "unknown shape kind '" + kind + "' (plane, sphere, box)");
}

ContactParams parse_contact(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    ContactParams p;
    p.k_n = number_or(j, "k_n_npm", p.k_n, path);
    p.k_d = number_or(j, "k_d_nspm", p.k_d, path);
    p.counts_per_newton = number_or(j, "counts_per_newton", p.counts_per_newton, path);
    p.noise_floor_counts = number_or(j, "noise_floor_counts", p.noise_floor_counts, path);
    p.noise_sigma_counts = number_or(j, "noise_sigma_counts", p.noise_sigma_counts, path);
    try {
        p.validate();
    } catch (const ValidationError& e) {
        fail(path, e.what());
    }
    return p;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json quat_json(const Mat3& r) {
    Eigen::Quaterniond q(r);
    return json::array({q.w(), q.x(), q.y(), q.z()});
}

}  // namespace

void SceneDescription::validate() const {
    pad.grid.validate();
    params.validate();
    for (const auto& s : scene.shapes) s.validate();
    if (!(dt_s > 0.0) || !std::isfinite(dt_s)) throw SceneError("scene: dt_s must be positive");
}

SceneDescription parse_scene_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        // Translate the byte offset into a line/column for the diagnostic.
        std::size_t line = 1, col = 1;
        const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        for (std::size_t i = 0; i < stop; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw SceneError("scene JSON parse error at line " + std::to_string(line) + ", column " +
                         std::to_string(col) + ": " + e.what());
    }
    if (!doc.is_object()) fail("", "top level must be an object");

    SceneDescription out;
    out.pad = parse_pad(require(doc, "pad", ""), "/pad");

    const json& shapes = require(doc, "shapes", "");
    if (!shapes.is_array()) fail("/shapes", "expected an array");
    for (std::size_t i = 0; i < shapes.size(); ++i)
        out.scene.shapes.push_back(parse_shape(shapes[i], "/shapes/" + std::to_string(i)));

    if (doc.contains("contact")) out.params = parse_contact(doc["contact"], "/contact");
    out.dt_s = number(require(doc, "dt_s", ""), "/dt_s");
    if (!(out.dt_s > 0.0)) fail("/dt_s", "must be positive");

    const json& steps = require(doc, "steps", "");
    if (!steps.is_number_integer() || steps.get<long long>() < 0)
        fail("/steps", "expected a non-negative integer");
    out.steps = steps.get<std::uint64_t>();
    return out;
}

SceneDescription load_scene_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SceneError("cannot read scene file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scene_json(ss.str());
}

std::string scene_to_json(const SceneDescription& scene) {
    json pad;
    if (scene.pad.grid.config_id != kCustomConfigId) {
        pad["preset"] = scene.pad.grid.name();
    } else {
        pad["rows"] = scene.pad.grid.rows;
        pad["cols"] = scene.pad.grid.cols;
        pad["pitch_m"] = scene.pad.grid.pitch_m;
        pad["adc_bits"] = scene.pad.grid.adc_bits;
    }
    pad["pose"] = {{"quaternion_wxyz", quat_json(scene.pad.pose.rotation())},
                   {"translation_m", vec_json(scene.pad.pose.translation())}};

    json shapes = json::array();
    for (const auto& s : scene.scene.shapes) {
        json js;
        std::visit(
            [&](const auto& g) {
                using T = std::decay_t<decltype(g)>;
                if constexpr (std::is_same_v<T, Plane>) {
                    js["kind"] = "plane";
                    js["normal"] = vec_json(g.normal);
                    js["offset_m"] = g.offset_m;
                } else if constexpr (std::is_same_v<T, Sphere>) {
                    js["kind"] = "sphere";
                    js["center_m"] = vec_json(g.center);
                    js["radius_m"] = g.radius_m;
                } else {
                    js["kind"] = "box";
                    js["center_m"] = vec_json(g.center);
                    js["half_extents_m"] = vec_json(g.half_extents);
                    js["quaternion_wxyz"] = quat_json(g.rotation);
                }
            },
            s.geometry);
        js["velocity_mps"] = vec_json(s.velocity);
        shapes.push_back(std::move(js));
    }

    json doc;
    doc["pad"] = std::move(pad);
    doc["shapes"] = std::move(shapes);
    doc["contact"] = {{"k_n_npm", scene.params.k_n},
                      {"k_d_nspm", scene.params.k_d},
                      {"counts_per_newton", scene.params.counts_per_newton},
                      {"noise_floor_counts", scene.params.noise_floor_counts},
                      {"noise_sigma_counts", scene.params.noise_sigma_counts}};
    doc["dt_s"] = scene.dt_s;
    doc["steps"] = scene.steps;
    return doc.dump(2);
}

ConfigRegistry registry_for(const GridConfig& grid) {
    ConfigRegistry reg;
    if (!GridConfig::find_preset(grid.config_id) || grid.config_id == kCustomConfigId)
        reg.add(grid);
    return reg;
}

SimulationRun simulate_scene(const SceneDescription& scene, std::uint64_t seed,
                             bool keep_samples) {
    scene.validate();
    ContactSimulator sim(scene.scene, scene.pad, scene.params, scene.dt_s);
    SimulationRun run;
    run.frames.reserve(scene.steps);
    run.summaries.reserve(scene.steps);
    for (std::uint64_t k = 0; k < scene.steps; ++k) {
        const auto& samples = sim.advance();
        StepSummary summary;
        for (const auto& s : samples) {
            summary.max_force_n = std::max(summary.max_force_n, s.force_n);
            if (s.depth > 0.0) ++summary.contacting_taxels;
        }
        const auto ts = static_cast<std::uint32_t>(
            static_cast<std::uint64_t>(std::llround(static_cast<double>(k) * scene.dt_s * 1000.0)));
        run.frames.push_back(samples_to_frame(samples, scene.params, scene.pad.grid,
                                              static_cast<std::uint16_t>(k), ts,
                                              frame_seed(seed, k)));
        run.summaries.push_back(summary);
        if (keep_samples) run.samples.push_back(samples);
    }
    return run;
}

Bytes encode_frames(const std::vector<TactileFrame>& frames) {
    Bytes out;
    for (const auto& f : frames) encode_frame_into(f, out);
    return out;
}

}  // namespace flexitac
