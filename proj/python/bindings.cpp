#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "flexitac/calibration.hpp"
#include "flexitac/contact_sim.hpp"
#include "flexitac/core_model.hpp"
#include "flexitac/errors.hpp"
#include "flexitac/fusion3d.hpp"
#include "flexitac/scenario.hpp"
#include "flexitac/wire_protocol.hpp"

namespace py = pybind11;
using namespace flexitac;

namespace {

ByteView view_of(const py::bytes& b) {
    char* data = nullptr;
    Py_ssize_t size = 0;
    PyBytes_AsStringAndSize(b.ptr(), &data, &size);
    return {reinterpret_cast<const std::uint8_t*>(data), static_cast<std::size_t>(size)};
}

py::bytes to_bytes(const Bytes& b) {
    return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

py::array_t<double> points_array(const std::vector<Vec3>& pts) {
    py::array_t<double> out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
    auto m = out.mutable_unchecked<2>();
    for (py::ssize_t i = 0; i < static_cast<py::ssize_t>(pts.size()); ++i)
        for (py::ssize_t k = 0; k < 3; ++k) m(i, k) = pts[static_cast<std::size_t>(i)][k];
    return out;
}

py::array_t<std::uint16_t> frame_values(const TactileFrame& f) {
    py::array_t<std::uint16_t> out({f.grid.rows, f.grid.cols});
    std::memcpy(out.mutable_data(), f.values.data(), f.values.size() * sizeof(std::uint16_t));
    return out;
}

void set_frame_values(TactileFrame& f, py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast> a) {
    if (static_cast<std::size_t>(a.size()) != f.grid.taxel_count())
        throw ContractViolation("values must have rows*cols entries");
    f.values.assign(a.data(), a.data() + a.size());
}

py::dict stats_dict(const DecoderStats& s) {
    py::dict d;
    d["frames_ok"] = s.frames_ok;
    d["frames_corrupt"] = s.frames_corrupt;
    d["bytes_discarded"] = s.bytes_discarded;
    return d;
}

ForceResponseCurve curve_from(py::array_t<double> depth, py::array_t<double> rate,
                              py::array_t<double> reading) {
    if (depth.size() != rate.size() || depth.size() != reading.size())
        throw ContractViolation("depth, depth_rate and reading must have equal length");
    auto d = depth.unchecked<1>();
    auto r = rate.unchecked<1>();
    auto y = reading.unchecked<1>();
    ForceResponseCurve c;
    for (py::ssize_t i = 0; i < depth.size(); ++i) c.samples.push_back({d(i), r(i), y(i)});
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "FlexiTac tactile toolkit core";
    m.attr("__version__") = FLEXITAC_VERSION;

    auto error = py::register_exception<Error>(m, "Error", PyExc_Exception);
    auto validation = py::register_exception<ValidationError>(m, "ValidationError", error.ptr());
    py::register_exception<DecodeError>(m, "DecodeError", validation.ptr());
    py::register_exception<ContractViolation>(m, "ContractViolation", validation.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", validation.ptr());
    auto runtime = py::register_exception<RuntimeFailure>(m, "RuntimeFailure", error.ptr());
    py::register_exception<UnidentifiableError>(m, "UnidentifiableError", runtime.ptr());

    py::class_<GridConfig>(m, "GridConfig")
        .def(py::init(&GridConfig::make), py::arg("rows"), py::arg("cols"),
             py::arg("pitch_m") = kDefaultPitchM, py::arg("adc_bits") = kDefaultAdcBits,
             py::arg("config_id") = kCustomConfigId)
        .def_static("preset", py::overload_cast<std::string_view>(&GridConfig::preset))
        .def_static("parse", &GridConfig::parse)
        .def_readonly("rows", &GridConfig::rows)
        .def_readonly("cols", &GridConfig::cols)
        .def_readonly("pitch_m", &GridConfig::pitch_m)
        .def_readonly("adc_bits", &GridConfig::adc_bits)
        .def_readonly("config_id", &GridConfig::config_id)
        .def_property_readonly("taxel_count", &GridConfig::taxel_count)
        .def_property_readonly("max_count", &GridConfig::max_count)
        .def_property_readonly("name", &GridConfig::name)
        .def(py::self == py::self)
        .def("__repr__", [](const GridConfig& g) { return "GridConfig('" + g.name() + "')"; });
    m.def("grid_presets", &grid_presets);

    py::class_<RigidTransform>(m, "RigidTransform")
        .def(py::init<>())
        .def(py::init<const Mat3&, const Vec3&>(), py::arg("rotation"), py::arg("translation"))
        .def_static("from_quaternion",
                    [](double w, double x, double y, double z, const Vec3& t) {
                        return RigidTransform::from_quaternion(w, x, y, z, t);
                    },
                    py::arg("w"), py::arg("x"), py::arg("y"), py::arg("z"),
                    py::arg("translation") = Vec3(Vec3::Zero()))
        .def_property_readonly("rotation", &RigidTransform::rotation)
        .def_property_readonly("translation", &RigidTransform::translation)
        .def("apply", &RigidTransform::apply)
        .def(py::self * py::self);

    py::class_<PadGeometry>(m, "PadGeometry")
        .def(py::init([](const GridConfig& g, const RigidTransform& pose) { return PadGeometry{g, pose}; }),
             py::arg("grid"), py::arg("pose") = RigidTransform::identity())
        .def_readwrite("grid", &PadGeometry::grid)
        .def_readwrite("pose", &PadGeometry::pose);

    py::class_<NormalizationRule>(m, "NormalizationRule")
        .def(py::init([](double floor, double full) { return NormalizationRule{floor, full}; }),
             py::arg("noise_floor"), py::arg("full_scale"))
        .def_readwrite("noise_floor", &NormalizationRule::noise_floor)
        .def_readwrite("full_scale", &NormalizationRule::full_scale)
        .def("apply", &NormalizationRule::apply);

    py::class_<TactileFrame>(m, "TactileFrame")
        .def(py::init([](const GridConfig& g, py::object values, std::uint16_t seq, std::uint32_t ts) {
                 TactileFrame f = make_uniform_frame(g, 0, seq, ts);
                 if (!values.is_none()) set_frame_values(f, values.cast<py::array_t<std::uint16_t>>());
                 return f;
             }),
             py::arg("grid"), py::arg("values") = py::none(), py::arg("sequence") = 0,
             py::arg("timestamp_ms") = 0)
        .def_readonly("grid", &TactileFrame::grid)
        .def_readwrite("sequence", &TactileFrame::sequence)
        .def_readwrite("timestamp_ms", &TactileFrame::timestamp_ms)
        .def_property("values", &frame_values, &set_frame_values)
        .def(py::self == py::self);

    m.def("taxel_local_positions", [](const GridConfig& g) { return points_array(taxel_local_positions(g)); });
    m.def("taxel_world_positions", [](const PadGeometry& p) { return points_array(taxel_world_positions(p)); });
    m.def("normalize_frame", &normalize_frame);

    m.def("crc16_ccitt_false", [](const py::bytes& b) { return crc16_ccitt_false(view_of(b)); });
    m.def("encoded_frame_size", &encoded_frame_size);
    m.def("encode_frame", [](const TactileFrame& f) { return to_bytes(encode_frame(f)); });
    m.def("decode_frame", [](const py::bytes& b, std::optional<GridConfig> custom) {
        return decode_frame(view_of(b), custom ? registry_for(*custom) : ConfigRegistry::defaults());
    }, py::arg("data"), py::arg("custom_grid") = py::none());
    m.def("decode_stream", [](const py::bytes& b, std::optional<GridConfig> custom) {
        const auto log = decode_stream(view_of(b), custom ? registry_for(*custom) : ConfigRegistry::defaults());
        return py::make_tuple(log.frames, stats_dict(log.stats));
    }, py::arg("data"), py::arg("custom_grid") = py::none());

    py::class_<StreamDecoder>(m, "StreamDecoder")
        .def(py::init([](std::optional<GridConfig> custom) {
                 return StreamDecoder(custom ? registry_for(*custom) : ConfigRegistry::defaults());
             }),
             py::arg("custom_grid") = py::none())
        .def("feed", [](StreamDecoder& d, const py::bytes& b) { return d.feed(view_of(b)); })
        .def_property_readonly("stats", [](const StreamDecoder& d) { return stats_dict(d.stats()); })
        .def_property_readonly("buffered", &StreamDecoder::buffered);

    py::class_<ContactParams>(m, "ContactParams")
        .def(py::init([](double k_n, double k_d, double gain, double floor, double sigma) {
                 ContactParams p{k_n, k_d, gain, floor, sigma};
                 p.validate();
                 return p;
             }),
             py::arg("k_n") = 500.0, py::arg("k_d") = 5.0, py::arg("counts_per_newton") = 400.0,
             py::arg("noise_floor_counts") = 50.0, py::arg("noise_sigma_counts") = 0.0)
        .def_readwrite("k_n", &ContactParams::k_n)
        .def_readwrite("k_d", &ContactParams::k_d)
        .def_readwrite("counts_per_newton", &ContactParams::counts_per_newton)
        .def_readwrite("noise_floor_counts", &ContactParams::noise_floor_counts)
        .def_readwrite("noise_sigma_counts", &ContactParams::noise_sigma_counts);
    m.def("kelvin_voigt_force", &kelvin_voigt_force, py::arg("params"), py::arg("depth"),
          py::arg("depth_rate"));

    py::class_<SdfShape>(m, "SdfShape")
        .def_static("plane", &SdfShape::plane, py::arg("normal"), py::arg("offset_m"),
                    py::arg("velocity") = Vec3(Vec3::Zero()))
        .def_static("sphere", &SdfShape::sphere, py::arg("center"), py::arg("radius_m"),
                    py::arg("velocity") = Vec3(Vec3::Zero()))
        .def_static("box", &SdfShape::box, py::arg("center"), py::arg("half_extents"),
                    py::arg("rotation") = Mat3(Mat3::Identity()), py::arg("velocity") = Vec3(Vec3::Zero()))
        .def("distance", &SdfShape::distance);

    py::class_<SceneDescription>(m, "Scene")
        .def_static("from_json", &parse_scene_json)
        .def_static("load", &load_scene_file)
        .def("to_json", [](const SceneDescription& s) { return scene_to_json(s); })
        .def_readwrite("pad", &SceneDescription::pad)
        .def_readwrite("params", &SceneDescription::params)
        .def_readwrite("dt_s", &SceneDescription::dt_s)
        .def_readwrite("steps", &SceneDescription::steps);
    m.def("simulate", [](const SceneDescription& s, std::uint64_t seed) {
        return simulate_scene(s, seed).frames;
    }, py::arg("scene"), py::arg("seed") = 0);
    m.def("encode_frames", [](const std::vector<TactileFrame>& f) { return to_bytes(encode_frames(f)); });

    py::class_<CalibrationResult>(m, "CalibrationResult")
        .def_readonly("k_n", &CalibrationResult::k_n)
        .def_readonly("k_d", &CalibrationResult::k_d)
        .def_readonly("residual_rms", &CalibrationResult::residual_rms)
        .def_readonly("iterations", &CalibrationResult::iterations)
        .def_readonly("degenerate", &CalibrationResult::degenerate)
        .def_readonly("k_n_clamped", &CalibrationResult::k_n_clamped);
    m.def("fit_kelvin_voigt",
          [](py::array_t<double> depth, py::array_t<double> rate, py::array_t<double> reading,
             double gain, double floor) {
              return fit_kelvin_voigt(curve_from(depth, rate, reading), ResponseModel{gain, floor});
          },
          py::arg("depth"), py::arg("depth_rate"), py::arg("reading"),
          py::arg("counts_per_newton") = 400.0, py::arg("noise_floor_counts") = 50.0);
    m.def("histogram", [](std::vector<double> values, int bins, std::optional<double> floor_cut) {
        const auto h = histogram(values, bins, floor_cut.value_or(1.0 / bins));
        return py::make_tuple(h.bin_edges, h.masses, h.count);
    }, py::arg("values"), py::arg("bins") = kDefaultHistogramBins, py::arg("floor_cut") = py::none());
    m.def("histogram_intersection", [](std::vector<double> a, std::vector<double> b) {
        if (a.size() != b.size()) throw ContractViolation("histograms must have the same bins");
        Histogram ha, hb;
        ha.bin_edges.resize(a.size() + 1);
        for (std::size_t i = 0; i <= a.size(); ++i) ha.bin_edges[i] = double(i) / double(a.size());
        hb.bin_edges = ha.bin_edges;
        ha.masses = std::move(a);
        hb.masses = std::move(b);
        for (double x : ha.masses) ha.count += x > 0;
        for (double x : hb.masses) hb.count += x > 0;
        return histogram_intersection(ha, hb);
    });
    m.def("calibrate", [](const py::bytes& log, const SceneDescription& scene, int row, int col,
                          const NormalizationRule& rule, int bins, std::uint64_t seed) {
        PipelineOptions opt;
        opt.bins = bins;
        opt.sim_seed = seed;
        const auto rep = calibrate_pipeline(view_of(log), scene, {row, col}, rule, opt);
        return py::module_::import("json").attr("loads")(report_to_json(rep));
    }, py::arg("log"), py::arg("scene"), py::arg("row"), py::arg("col"), py::arg("rule"),
       py::arg("bins") = kDefaultHistogramBins, py::arg("seed") = 0);

    m.def("lift_tactile", [](const TactileFrame& f, const PadGeometry& pad, const NormalizationRule& rule,
                             double drop_below) {
        const auto pts = lift_tactile(f, pad, rule, drop_below);
        std::vector<Vec3> pos;
        std::vector<double> mag;
        for (const auto& p : pts) {
            pos.push_back(p.position);
            mag.push_back(p.magnitude);
        }
        return py::make_tuple(points_array(pos), py::array_t<double>(mag.size(), mag.data()));
    }, py::arg("frame"), py::arg("pad"), py::arg("rule"), py::arg("drop_below") = 0.0);
    m.def("fuse", [](py::array_t<double, py::array::c_style | py::array::forcecast> visual_xyz,
                     py::array_t<double, py::array::c_style | py::array::forcecast> visual_feature,
                     const TactileFrame& f, const PadGeometry& pad, const NormalizationRule& rule,
                     double drop_below) {
        if (visual_xyz.ndim() != 2 || visual_xyz.shape(1) != 3 || visual_feature.size() != visual_xyz.shape(0))
            throw ContractViolation("visual points must be (N, 3) with N features");
        std::vector<FusedPoint> visual(static_cast<std::size_t>(visual_xyz.shape(0)));
        for (std::size_t i = 0; i < visual.size(); ++i)
            visual[i] = {Vec3(visual_xyz.at(i, 0), visual_xyz.at(i, 1), visual_xyz.at(i, 2)),
                         visual_feature.at(i), Modality::vision};
        const auto set = merge(visual, lift_tactile(f, pad, rule, drop_below));
        py::array_t<double> out({static_cast<py::ssize_t>(set.points.size()), py::ssize_t{5}});
        auto o = out.mutable_unchecked<2>();
        for (py::ssize_t i = 0; i < static_cast<py::ssize_t>(set.points.size()); ++i) {
            const auto& p = set.points[static_cast<std::size_t>(i)];
            o(i, 0) = p.position.x();
            o(i, 1) = p.position.y();
            o(i, 2) = p.position.z();
            o(i, 3) = p.magnitude;
            o(i, 4) = static_cast<double>(p.modality);
        }
        return out;
    }, py::arg("visual_xyz"), py::arg("visual_feature"), py::arg("frame"), py::arg("pad"),
       py::arg("rule"), py::arg("drop_below") = 0.0);
}
