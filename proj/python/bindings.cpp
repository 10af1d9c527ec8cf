#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <stdexcept>
#include <string>

#include "sharplab/errors.hpp"
#include "sharplab/linalg.hpp"
#include "sharplab/losses.hpp"
#include "sharplab/optim.hpp"
#include "sharplab/rng.hpp"
#include "sharplab/sharpness.hpp"
#include "sharplab/universality.hpp"

namespace py = pybind11;
using namespace sharplab;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

SymmetricMatrix to_matrix(const Array& a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw py::value_error("expected a square 2-D array");
  const auto d = static_cast<std::size_t>(a.shape(0));
  return SymmetricMatrix(d, std::span<const double>(a.data(), d * d));
}

Vector to_vector(const Array& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return Vector(a.data(), a.data() + a.shape(0));
}

Array from_matrix(const SymmetricMatrix& m) {
  const auto d = static_cast<py::ssize_t>(m.dim());
  Array out({d, d});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

Array from_vector(const Vector& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

SpecPreset make_preset(const std::string& name, double half_width, unsigned degree, const std::string& moment_measure,
                       double sigma) {
  SpecPreset p;
  p.kind = parse_preset_name(name);
  p.half_width = half_width;
  p.degree = degree;
  if (moment_measure == "gaussian")
    p.moment_measure = MomentMeasure::Gaussian;
  else if (moment_measure == "sphere")
    p.moment_measure = MomentMeasure::Sphere;
  else
    throw py::value_error("moment_measure must be 'gaussian' or 'sphere'");
  p.sigma = sigma;
  return p;
}

#define PRESET_ARGS                                                                                   \
  py::arg("preset"), py::kw_only(), py::arg("half_width") = 1.0, py::arg("degree") = 2u,              \
      py::arg("moment_measure") = "gaussian", py::arg("sigma") = 0.0

}  // namespace

PYBIND11_MODULE(_sharplab, m) {
  m.doc() = "Sharpness measures, Monte-Carlo estimators and universality probes.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def(
      "eigh",
      [](const Array& h) {
        const Spectrum s = symmetric_eig(to_matrix(h));
        const auto d = static_cast<py::ssize_t>(s.dim());
        Array q({d, d});
        std::copy(s.eigenvectors.begin(), s.eigenvectors.end(), q.mutable_data());
        return py::make_tuple(from_vector(s.eigenvalues), q);
      },
      py::arg("h"), "Eigenvalues (descending) and eigenvectors (columns) of a symmetric matrix.");

  m.def(
      "measure_exact",
      [](const Array& h, const std::string& preset, double half_width, unsigned degree,
         const std::string& moment_measure, double sigma) {
        return measure_exact(symmetric_eig(to_matrix(h)), make_preset(preset, half_width, degree, moment_measure, sigma));
      },
      py::arg("h"), PRESET_ARGS, "Closed-form sharpness value of a preset from the Hessian spectrum.");

  m.def(
      "estimate_sharpness",
      [](const Array& h, const std::string& preset, double half_width, unsigned degree,
         const std::string& moment_measure, double sigma, std::size_t samples, std::uint64_t seed) {
        const SymmetricMatrix mat = to_matrix(h);
        const SharpnessSpec spec = make_spec(make_preset(preset, half_width, degree, moment_measure, sigma), mat.dim());
        Estimate e;
        {
          py::gil_scoped_release release;
          e = estimate_S(quadratic_oracle(mat), spec, SeededStream(seed), samples);
        }
        return py::make_tuple(e.value, e.stderr);
      },
      py::arg("h"), PRESET_ARGS, py::arg("samples") = 100000, py::arg("seed") = 0,
      "Monte-Carlo estimate and delta-method standard error.");

  m.def(
      "reconstruct_eigenvalues",
      [](const Array& h, std::optional<Array> nodes) {
        const Spectrum s = symmetric_eig(to_matrix(h));
        const double radius = std::max(std::abs(s.eigenvalues.front()), std::abs(s.eigenvalues.back()));
        const Vector sigma = nodes ? to_vector(*nodes) : moment_nodes(s.dim(), node_interval_bound(radius));
        return from_vector(reconstruct_eigenvalues(probe_moments(s, sigma)));
      },
      py::arg("h"), py::arg("nodes") = py::none(), "Eigenvalues recovered from exact exp-moment probes.");

  m.def(
      "reconstruct_hessian",
      [](const Array& h) {
        const SymmetricMatrix mat = to_matrix(h);
        return from_matrix(reconstruct_hessian(probe_hessian(quadratic_oracle(mat), mat.dim())));
      },
      py::arg("h"), "Hessian recovered from the d(d+1)/2 Dirac quadratic forms.");

  py::class_<LossFunction, std::shared_ptr<LossFunction>>(m, "Loss")
      .def_property_readonly("dim", &LossFunction::dim)
      .def("value", [](const LossFunction& l, const Array& x) { return l.value(to_vector(x)); })
      .def("gradient", [](const LossFunction& l, const Array& x) { return from_vector(l.gradient(to_vector(x))); })
      .def("hessian", [](const LossFunction& l, const Array& x) { return from_matrix(hessian_at(l, to_vector(x))); })
      .def(
          "frob_sam_step",
          [](const LossFunction& l, const Array& x, double lam, double rho, std::size_t samples, std::uint64_t seed,
             std::uint64_t iteration) {
            TrainConfig cfg;
            cfg.kind = OptimizerKind::FrobSam;
            cfg.lambda = lam;
            cfg.rho = rho;
            cfg.samples = samples;
            return from_vector(step_frob(l, to_vector(x), cfg, perturbation_stream(seed, iteration)));
          },
          py::arg("x"), py::arg("lam"), py::arg("rho") = 0.05, py::arg("samples") = 2, py::arg("seed") = 0,
          py::arg("iteration") = 0, "One Frob-SAM update direction at x.");

  m.def("saddle_toy", [] { return std::shared_ptr<LossFunction>(std::make_shared<SaddleToy>()); });
  m.def("scale_inv_toy", [] { return std::shared_ptr<LossFunction>(std::make_shared<ScaleInvToy>()); });
  m.def(
      "rot_inv_toy", [](std::size_t dim) { return std::shared_ptr<LossFunction>(std::make_shared<RotInvToy>(dim)); },
      py::arg("dim"));
  m.def(
      "quadratic_loss",
      [](const Array& h) { return std::shared_ptr<LossFunction>(std::make_shared<QuadraticLoss>(to_matrix(h))); },
      py::arg("h"));
}
