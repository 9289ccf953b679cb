#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "egofov/error.hpp"
#include "egofov/features.hpp"
#include "egofov/gist.hpp"
#include "egofov/imaging.hpp"
#include "egofov/pipeline.hpp"
#include "egofov/sensor.hpp"
#include "egofov/synth.hpp"

namespace py = pybind11;
using namespace egofov;

namespace {

using Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

GrayImage to_image(const Array& a) {
    if (a.ndim() != 2) throw Error(ErrorCode::Parameter, "expected a 2-D uint8 array");
    const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
    return GrayImage(w, h, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

Array to_array(const GrayImage& img) {
    Array a({img.height(), img.width()});
    std::copy(img.pixels().begin(), img.pixels().end(), a.mutable_data());
    return a;
}

py::object point(const std::optional<Point2>& p) {
    if (!p) return py::none();
    return py::make_tuple(p->x, p->y);
}

Rotation rotation_from(const py::sequence& m) {
    Rotation r{};
    if (py::len(m) == 3) {
        for (int i = 0; i < 3; ++i) {
            const auto row = m[static_cast<std::size_t>(i)].cast<py::sequence>();
            for (int j = 0; j < 3; ++j) r[i * 3 + j] = row[static_cast<std::size_t>(j)].cast<double>();
        }
    } else if (py::len(m) == 9) {
        for (int i = 0; i < 9; ++i) r[i] = m[static_cast<std::size_t>(i)].cast<double>();
    } else {
        throw Error(ErrorCode::Parameter, "rotation must be 3x3 or 9 values");
    }
    return r;
}

py::list rotation_rows(const Rotation& r) {
    py::list rows;
    for (int i = 0; i < 3; ++i) rows.append(py::make_tuple(r[i * 3], r[i * 3 + 1], r[i * 3 + 2]));
    return rows;
}

py::dict result_dict(const LocalizationResult& r) {
    py::dict d;
    d["status"] = std::string(to_string(r.status));
    d["accepted"] = r.accepted;
    d["f"] = point(r.f);
    d["f_ref"] = point(r.f_ref);
    d["f_s"] = point(r.f_s);
    d["f_pov"] = point(r.f_pov);
    d["alpha"] = r.alpha;
    d["score"] = r.score;
    d["inliers"] = r.inliers;
    d["correspondences"] = r.correspondences;
    d["note"] = r.note;
    if (r.affine) d["affine"] = py::make_tuple(r.affine->m[0], r.affine->m[1], r.affine->m[2], r.affine->m[3],
                                                r.affine->m[4], r.affine->m[5]);
    else d["affine"] = py::none();
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Egocentric focus-of-attention localization";

    static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = error;
            py::object instance = exc(e.what());
            instance.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(error.ptr(), instance.ptr());
        }
    });

    m.def("load_image", [](const std::filesystem::path& p) { return to_array(load_image(p)); }, py::arg("path"),
          "Load a PGM/PPM file as a 2-D uint8 luminance array.");
    m.def("save_pgm", [](const Array& a, const std::filesystem::path& p) { save_pgm(to_image(a), p); },
          py::arg("image"), py::arg("path"));

    m.def(
        "mser_regions",
        [](const Array& a, int delta, int min_area) {
            MserParams p;
            p.delta = delta;
            p.min_area = min_area;
            py::list out;
            for (const auto& r : detect_mser(to_image(a), p)) {
                py::dict d;
                d["polarity"] = r.polarity == Polarity::Bright ? "bright" : "dark";
                d["centroid"] = py::make_tuple(r.centroid.x, r.centroid.y);
                d["pixel_count"] = r.pixel_count;
                d["variation"] = r.variation;
                out.append(d);
            }
            return out;
        },
        py::arg("image"), py::arg("delta") = 5, py::arg("min_area") = 30);

    m.def(
        "gist",
        [](const Array& a) {
            const auto d = gist_descriptor(to_image(a));
            return py::array_t<double>(static_cast<py::ssize_t>(d.values.size()), d.values.data());
        },
        py::arg("image"), "GIST descriptor under default parameters.");
    m.def(
        "gist_distance",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            return gist_distance(GistDescriptor{a}, GistDescriptor{b});
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "euler_from_rotation",
        [](const py::sequence& r) {
            const EulerAngles e = euler_from_rotation(rotation_from(r));
            return py::make_tuple(e.yaw, e.pitch, e.roll);
        },
        py::arg("rotation"), "Yaw, pitch, roll (radians) of R = Rz(yaw) Ry(pitch) Rx(roll).");
    m.def(
        "rotation_from_euler",
        [](double yaw, double pitch, double roll) { return rotation_rows(rotation_from_euler({yaw, pitch, roll})); },
        py::arg("yaw"), py::arg("pitch"), py::arg("roll"));
    m.def(
        "blend_focus",
        [](std::pair<double, double> fs, std::pair<double, double> fr, double alpha, std::optional<double> wrap) {
            const Point2 f = blend_focus({fs.first, fs.second}, {fr.first, fr.second}, alpha, wrap);
            return py::make_tuple(f.x, f.y);
        },
        py::arg("f_s"), py::arg("f_ref"), py::arg("alpha"), py::arg("wrap_width") = py::none());

    m.def(
        "localize",
        [](const Array& pov, const Array& ref, std::optional<py::sequence> rotation, double reliability,
           double yaw_at_left_edge, std::optional<double> alpha) {
            const GrayImage p = to_image(pov), r = to_image(ref);
            std::optional<HeadPose> pose;
            if (rotation) pose = HeadPose{0, rotation_from(*rotation), reliability};
            LocalizerConfig config;
            config.alpha_override = alpha;
            const ReferenceView view{&r, nullptr, PanoramaGeometry{r.width(), r.height(), yaw_at_left_edge}};
            LocalizationResult result;
            {
                py::gil_scoped_release release;
                result = localize(p, view, pose, config);
            }
            return result_dict(result);
        },
        py::arg("pov"), py::arg("panorama"), py::arg("rotation") = py::none(), py::arg("reliability") = 1.0,
        py::arg("yaw_at_left_edge") = 0.0, py::arg("alpha") = py::none(),
        "Localize a POV frame on a panoramic reference. Returns a dict of the result fields.");

    m.def(
        "synthetic_pair",
        [](std::uint64_t seed, const std::string& texture, double noise_sigma, bool identity_like) {
            SceneSpec spec;
            spec.seed = seed;
            spec.texture = texture_from_string(texture);
            TruthParams tp;
            tp.noise_sigma = noise_sigma;
            tp.identity_like = identity_like;
            const SyntheticPair pair = generate_pair(spec, tp);
            py::dict d;
            d["pov"] = to_array(pair.pov);
            d["ref"] = to_array(pair.ref);
            d["focus"] = py::make_tuple(pair.truth.focus.x, pair.truth.focus.y);
            d["radius"] = pair.truth.radius;
            d["rotation"] = rotation_rows(pair.sensor.rotation);
            d["reliability"] = pair.sensor.reliability;
            d["yaw_at_left_edge"] = pair.geometry.yaw_at_left_edge;
            return d;
        },
        py::arg("seed"), py::arg("texture") = "glyphs", py::arg("noise_sigma") = 0.0, py::arg("identity_like") = false);
}
