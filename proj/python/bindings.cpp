#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "partreg/cli.hpp"
#include "partreg/gradcheck.hpp"
#include "partreg/io.hpp"
#include "partreg/metrics.hpp"
#include "partreg/pipeline.hpp"
#include "partreg/raster.hpp"
#include "partreg/ref_planes.hpp"
#include "partreg/synthgen.hpp"

namespace py = pybind11;
using namespace partreg;

namespace {

JointMask mask_or_all(const std::optional<std::string>& name) {
  return name ? mask_preset(*name) : all_joints_mask();
}

py::array_t<int> labels_to_array(const LabelMap& m) {
  py::array_t<int> out({m.height, m.width});
  std::copy(m.labels.begin(), m.labels.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_partreg, m) {
  m.doc() = "Body-aware part regression toolkit";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<DegenerateGeometry>(m, "DegenerateGeometry", PyExc_ArithmeticError);
  py::register_exception<EmptyPart>(m, "EmptyPart", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  m.attr("NUM_JOINTS") = kNumJoints;
  m.attr("NUM_BETAS") = kNumBetas;

  py::class_<BodyTemplate>(m, "BodyTemplate")
      .def_readonly("vertices_rest", &BodyTemplate::vertices_rest)
      .def_readonly("faces", &BodyTemplate::faces)
      .def_readonly("joints_rest", &BodyTemplate::joints_rest)
      .def_readonly("parent", &BodyTemplate::parent)
      .def_readonly("blend_weights", &BodyTemplate::blend_weights)
      .def_readonly("shape_basis", &BodyTemplate::shape_basis)
      .def_readonly("joint_regressor", &BodyTemplate::joint_regressor)
      .def_property_readonly("num_vertices", &BodyTemplate::num_vertices)
      .def_property_readonly("num_joints", &BodyTemplate::num_joints)
      .def("validate", &BodyTemplate::validate);

  py::class_<PoseShape>(m, "PoseShape")
      .def(py::init([](const MatX3& theta, const VecX& beta) { return PoseShape{theta, beta}; }),
           py::arg("theta"), py::arg("beta"))
      .def_static("zero", &PoseShape::zero, py::arg("num_joints") = kNumJoints, py::arg("num_betas") = kNumBetas)
      .def_readwrite("theta", &PoseShape::theta)
      .def_readwrite("beta", &PoseShape::beta)
      .def("validate", &PoseShape::validate);

  py::class_<PosedBody>(m, "PosedBody")
      .def_readonly("vertices", &PosedBody::vertices)
      .def_readonly("joints3d", &PosedBody::joints3d);

  py::class_<WeakPerspectiveCamera>(m, "Camera")
      .def(py::init<>())
      .def_static("front_view", &WeakPerspectiveCamera::front_view)
      .def_readwrite("s", &WeakPerspectiveCamera::s)
      .def_readwrite("t", &WeakPerspectiveCamera::t)
      .def_readwrite("R", &WeakPerspectiveCamera::R);

  m.def("project", &project, py::arg("camera"), py::arg("points"));

  m.def(
      "gen_template",
      [](std::uint64_t seed, int vertices, double noise) {
        GenSpec spec;
        spec.seed = seed;
        spec.vertex_count = vertices;
        spec.noise_scale = noise;
        GeneratedModel g = gen_template(spec);
        return py::make_tuple(std::move(g.tmpl), std::move(g.assignment.part_of_vertex));
      },
      py::arg("seed") = 0, py::arg("vertices") = 690, py::arg("noise") = 0.0,
      "Returns (template, part_of_vertex).");

  m.def(
      "gen_pose",
      [](std::uint64_t seed, const std::string& preset) { return gen_pose(seed, parse_pose_preset(preset)); },
      py::arg("seed"), py::arg("preset") = "random");

  m.def("forward", &forward, py::arg("template"), py::arg("pose"), py::arg("trans") = Vec3::Zero());

  m.def(
      "relative_depth",
      [](const BodyTemplate& t, const PoseShape& ps, const std::vector<int>& parts, const std::string& source,
         const Vec3& trans) {
        require(source == "joints" || source == "part-centers", "source must be joints or part-centers");
        const PlaneSource s = source == "joints" ? PlaneSource::kJoints : PlaneSource::kPartCenters;
        return MatX3(ground_truth_rd(t, ps, PartAssignment{parts}, s, trans).rd);
      },
      py::arg("template"), py::arg("pose"), py::arg("part_of_vertex"), py::arg("source") = "joints",
      py::arg("trans") = Vec3::Zero(), "24×3 signed distances to the frontal, side and cross-section planes.");

  m.def(
      "mje",
      [](const MatX3& p, const MatX3& g, const std::optional<std::string>& mask, bool root_align) {
        return mje(p, g, mask_or_all(mask), {root_align, kPelvis});
      },
      py::arg("pred"), py::arg("gt"), py::arg("mask") = std::nullopt, py::arg("root_align") = true);
  m.def(
      "pamje", [](const MatX3& p, const MatX3& g, const std::optional<std::string>& mask) {
        return pamje(p, g, mask_or_all(mask));
      },
      py::arg("pred"), py::arg("gt"), py::arg("mask") = std::nullopt);
  m.def(
      "axis_mje",
      [](const MatX3& p, const MatX3& g, const std::optional<std::string>& mask, bool root_align) {
        return axis_mje(p, g, mask_or_all(mask), {root_align, kPelvis});
      },
      py::arg("pred"), py::arg("gt"), py::arg("mask") = std::nullopt, py::arg("root_align") = true);
  m.def(
      "pve", [](const MatX3& p, const MatX3& g) { return pve(p, g); }, py::arg("pred_vertices"),
      py::arg("gt_vertices"));
  m.def(
      "procrustes_align",
      [](const MatX3& p, const MatX3& g) {
        const AlignmentResult a = procrustes_align(p, g);
        return py::make_tuple(a.scale, a.rotation, a.translation, a.aligned);
      },
      py::arg("pred"), py::arg("gt"), "Returns (scale, rotation, translation, aligned).");

  m.def(
      "rasterize",
      [](const BodyTemplate& t, const PoseShape& ps, const std::vector<int>& parts, int height, int width,
         std::optional<WeakPerspectiveCamera> cam) {
        const PosedBody body = forward(t, ps);
        const WeakPerspectiveCamera c = cam ? *cam : fit_front_camera(body.vertices, height, width);
        return labels_to_array(rasterize_parts(body, t.faces, PartAssignment{parts}, c, height, width));
      },
      py::arg("template"), py::arg("pose"), py::arg("part_of_vertex"), py::arg("height") = kDefaultLabelSize,
      py::arg("width") = kDefaultLabelSize, py::arg("camera") = std::nullopt,
      "H×W part labels, 0 = background, part p -> p + 1.");

  m.def(
      "gradient_suite",
      [](std::uint64_t seed, int instances) {
        std::vector<std::pair<std::string, double>> out;
        for (const auto& c : run_gradient_suite(seed, instances)) out.emplace_back(c.op, c.max_rel_error);
        return out;
      },
      py::arg("seed") = 0, py::arg("instances") = 20, "List of (op, max relative error).");

  m.def("load_template", [](const std::string& p) { return io::load_template(p); }, py::arg("path"));
  m.def(
      "save_template", [](const std::string& p, const BodyTemplate& t) { io::save_template(p, t); },
      py::arg("path"), py::arg("template"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line in-process; returns (exit_code, stdout, stderr).");
}
