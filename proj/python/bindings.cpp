#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gagrasp/diffusion.hpp"
#include "gagrasp/embed.hpp"
#include "gagrasp/equinet.hpp"
#include "gagrasp/harness.hpp"
#include "gagrasp/multivector.hpp"
#include "gagrasp/physics.hpp"
#include "gagrasp/versor.hpp"

namespace py = pybind11;
using namespace gagrasp;

namespace {

std::array<double, 16> coeffs(const Multivector& m) { return m.c; }
Multivector from_coeffs(const std::array<double, 16>& c) { return Multivector(c); }

}  // namespace

PYBIND11_MODULE(_gagrasp, m) {
  m.doc() = "SE(3)-equivariant grasp generation core (G(3,0,1) algebra, "
            "equivariant denoiser, DDPM sampler, toy physics)";

  py::class_<Multivector>(m, "Multivector")
      .def(py::init<>())
      .def(py::init(&from_coeffs))
      .def_static("scalar", &Multivector::scalar)
      .def_static("blade", &Multivector::blade, py::arg("index"), py::arg("coeff") = 1.0)
      .def("coeffs", &coeffs)
      .def("__add__", [](const Multivector& a, const Multivector& b) { return a + b; })
      .def("__sub__", [](const Multivector& a, const Multivector& b) { return a - b; })
      .def("__mul__", [](const Multivector& a, const Multivector& b) { return a * b; })
      .def("__rmul__", [](const Multivector& a, double s) { return a * s; })
      .def("__repr__", &Multivector::str);

  m.def("geometric_product", &geometric_product);
  m.def("wedge", &wedge);
  m.def("dual", &dual);
  m.def("join", &join);
  m.def("reverse", &reverse);
  m.def("grade_project", &grade_project);
  m.def("inner_invariant", &inner_invariant);

  py::class_<Versor>(m, "Versor")
      .def(py::init<const Multivector&>())
      .def_static("identity", &Versor::identity)
      .def_static("rotor", &Versor::rotor)
      .def_static("translator", &Versor::translator)
      .def_static("reflection", &Versor::reflection)
      .def("mv", &Versor::mv)
      .def("odd", &Versor::odd)
      .def("inverse", &Versor::inverse)
      .def("__mul__", [](const Versor& a, const Versor& b) { return a * b; })
      .def("__call__", [](const Versor& u, const Multivector& x) { return u(x); });

  m.def("embed_point", &embed_point);
  m.def("embed_direction", &embed_direction);
  m.def("embed_plane", &embed_plane);
  m.def("extract_point", &extract_point);
  m.def("extract_direction", &extract_direction);
  m.def("motor_from_pose", &motor_from_pose);
  m.def("rot6d_decode", &rot6d_decode);
  m.def("rot6d_encode", &rot6d_encode);

  py::class_<Grasp>(m, "Grasp")
      .def(py::init<>())
      .def_readwrite("r", &Grasp::r)
      .def_readwrite("p", &Grasp::p)
      .def_readwrite("q", &Grasp::q)
      .def("flat", &Grasp::flat)
      .def_static("from_flat", &Grasp::from_flat);

  py::class_<HandSpec>(m, "HandSpec")
      .def("joint_count", &HandSpec::joint_count)
      .def("sphere_count", &HandSpec::sphere_count)
      .def("joint_lower", &HandSpec::joint_lower)
      .def("joint_upper", &HandSpec::joint_upper);
  m.def("toy_hand", &toy_hand);
  m.def("forward_kinematics", [](const HandSpec& spec, const Grasp& g) {
    std::vector<std::pair<Vec3, double>> out;
    for (const Sphere& s : forward_kinematics(spec, g)) out.push_back({s.center, s.radius});
    return out;
  });

  py::class_<EquiNetConfig>(m, "EquiNetConfig")
      .def(py::init<>())
      .def_readwrite("blocks", &EquiNetConfig::blocks)
      .def_readwrite("channels", &EquiNetConfig::channels)
      .def_readwrite("heads", &EquiNetConfig::heads)
      .def_readwrite("downsample_m", &EquiNetConfig::downsample_m)
      .def_readwrite("downsample_k", &EquiNetConfig::downsample_k)
      .def_readwrite("joint_dim", &EquiNetConfig::joint_dim)
      .def_readwrite("symmetry_breaking", &EquiNetConfig::symmetry_breaking);

  py::class_<Denoiser>(m, "Denoiser")
      .def(py::init<const EquiNetConfig&, uint64_t>())
      .def("eps", &Denoiser::eps)
      .def("load", &Denoiser::load)
      .def("save", &Denoiser::save, py::arg("path"),
           py::arg("config_echo") = std::map<std::string, std::string>{});

  py::class_<DiffusionSchedule>(m, "DiffusionSchedule")
      .def_static("linear", &DiffusionSchedule::linear, py::arg("T") = 100,
                  py::arg("beta1") = 1e-4, py::arg("betaT") = 2e-2)
      .def_readonly("T", &DiffusionSchedule::T)
      .def_readonly("beta", &DiffusionSchedule::beta)
      .def("abar", &DiffusionSchedule::abar);

  m.def("forward_sample", &forward_sample);
  m.def(
      "sample",
      [](const DiffusionSchedule& s, const Denoiser& model, const std::vector<Vec3>& cloud,
         uint64_t seed) {
        std::mt19937_64 rng(seed);
        return sample(s, model, cloud, rng).grasp;
      },
      py::arg("schedule"), py::arg("model"), py::arg("cloud"), py::arg("seed"));

  py::class_<PhysContext>(m, "PhysContext")
      .def(py::init<>())
      .def_readwrite("hand", &PhysContext::hand)
      .def_readwrite("obj_points", &PhysContext::obj_points)
      .def_readwrite("mass", &PhysContext::mass)
      .def_readwrite("k_n", &PhysContext::k_n)
      .def_readwrite("c_n", &PhysContext::c_n)
      .def_readwrite("c_t", &PhysContext::c_t);

  m.def("phys_loss_value", &phys_loss_value);
  m.def("range_loss", &range_loss);
  m.def("limit_loss", &limit_loss);
  m.def("diversity_score", &diversity_score);
  m.def("success_eval", [](const Grasp& g, const std::vector<Vec3>& pts, const HandSpec& hand,
                           const PhysContext& ctx) {
    SuccessReport rep = success_eval(g, pts, hand, ctx);
    return std::make_pair(rep.pass, rep.displacement);
  });

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("out_dir", &RunConfig::out_dir)
      .def("to_text", &RunConfig::to_text)
      .def_static("from_text", &RunConfig::from_text);
}
