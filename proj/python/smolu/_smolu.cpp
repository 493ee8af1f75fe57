#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "smolu/dynamics.hpp"
#include "smolu/errors.hpp"
#include "smolu/kernel.hpp"
#include "smolu/parallel.hpp"
#include "smolu/profile.hpp"
#include "smolu/selfsim.hpp"
#include "smolu/transform.hpp"
#include "smolu/verify.hpp"

namespace py = pybind11;
using namespace smolu;

PYBIND11_MODULE(_smolu, m) {
  m.attr("__version__") = SMOLU_VERSION;
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  m.def("set_threads", &set_thread_count, py::arg("n"));

  py::class_<CoagulationKernel>(m, "Kernel")
      .def("__call__", &CoagulationKernel::evaluate, py::arg("x"), py::arg("y"))
      .def_property_readonly("epsilon", &CoagulationKernel::epsilon)
      .def_property_readonly("alpha", &CoagulationKernel::alpha)
      .def_property_readonly("label", &CoagulationKernel::label)
      .def("__repr__", [](const CoagulationKernel& k) { return "<Kernel " + k.label() + ">"; });
  m.def("constant", &make_constant);
  m.def("brownian", &make_brownian);
  m.def("power", &make_power, py::arg("eps"), py::arg("alpha"));
  m.def("parse_kernel", &parse_kernel, py::arg("spec"));

  py::class_<Grid>(m, "Grid")
      .def_static("standard", &Grid::standard)
      .def_static("geometric", &Grid::geometric, py::arg("x_min"), py::arg("nodes_per_doubling"), py::arg("count"))
      .def_property_readonly("nodes", &Grid::nodes)
      .def("__len__", &Grid::size);

  py::class_<Profile>(m, "Profile")
      .def_static("exponential", &Profile::exponential, py::arg("grid"), py::arg("amplitude") = 1.0,
                  py::arg("rate") = 1.0)
      .def_static("sample", &Profile::sample, py::arg("grid"), py::arg("f"))
      .def_property_readonly("grid", &Profile::grid)
      .def_property_readonly("values", &Profile::values)
      .def_property_readonly("tail_rate", &Profile::tail_rate)
      .def_property_readonly("tail_amplitude", &Profile::tail_amplitude)
      .def("__call__", &Profile::value, py::arg("x"));
  m.def("mass", &mass);
  m.def("normalize_mass", &normalize_mass);
  m.def("moment", &moment, py::arg("profile"), py::arg("gamma"));
  m.def("rescale", &rescale, py::arg("profile"), py::arg("a"));
  m.def("l1_mass_distance", &l1_mass_distance);
  m.def("read_profile_csv", &read_profile_csv);
  m.def("write_profile_csv", &write_profile_csv);
  m.def("builtin_seed", &builtin_seed, py::arg("name"), py::arg("grid") = Grid::standard());

  py::class_<SolveSettings>(m, "SolveSettings")
      .def(py::init<>())
      .def_readwrite("omega", &SolveSettings::omega)
      .def_readwrite("max_iterations", &SolveSettings::max_iterations)
      .def_readwrite("tolerance", &SolveSettings::tolerance)
      .def_readwrite("refinement", &SolveSettings::refinement);
  py::class_<SolveResult>(m, "SolveResult")
      .def_readonly("profile", &SolveResult::profile)
      .def_readonly("residual", &SolveResult::residual)
      .def_readonly("iterations", &SolveResult::iterations)
      .def_readonly("converged", &SolveResult::converged)
      .def_readonly("diagnostic", &SolveResult::diagnostic);
  m.def("solve", py::overload_cast<const CoagulationKernel&, const Profile&, const SolveSettings&>(&solve),
        py::arg("kernel"), py::arg("seed"), py::arg("settings") = SolveSettings{},
        py::call_guard<py::gil_scoped_release>());
  m.def("apply_map", &apply_map);
  m.def("residual", &residual);

  py::class_<QGrid>(m, "QGrid")
      .def_static("standard", &QGrid::standard)
      .def_static("dense", &QGrid::dense, py::arg("per_decade") = 40)
      .def_static("from_values", &QGrid::from_values)
      .def_property_readonly("values", &QGrid::values);
  py::class_<TransformCurve>(m, "TransformCurve")
      .def_property_readonly("q", [](const TransformCurve& c) { return c.qgrid.values(); })
      .def_readonly("Q", &TransformCurve::Q)
      .def_readonly("Qprime", &TransformCurve::Qprime)
      .def_readonly("M", &TransformCurve::Mcal)
      .def_readonly("ode_residual", &TransformCurve::ode_residual);
  m.def("q_value", &q_value);
  m.def("q_transform", &q_transform, py::arg("profile"), py::arg("kernel"), py::arg("qgrid") = QGrid::standard(),
        py::call_guard<py::gil_scoped_release>());
  m.def("qbar", &qbar);
  m.def("qbar_curve", &qbar_curve);
  m.def("weighted_norm", &weighted_norm);

  py::class_<SingularityEstimate>(m, "SingularityEstimate")
      .def_readonly("q_star", &SingularityEstimate::q_star)
      .def_readonly("q_refined", &SingularityEstimate::q_refined)
      .def_readonly("rate_check", &SingularityEstimate::rate_check)
      .def_readonly("left_domain", &SingularityEstimate::left_domain)
      .def_readonly("iterates", &SingularityEstimate::iterates);
  m.def("locate_singularity", [](const Profile& p) { return locate_singularity(p); });
  m.def("rescale_to_unit_singularity", [](const Profile& p) { return rescale_to_unit_singularity(p); });
  m.def("h_kernel", &h_kernel);
  m.def("h_tilde", &h_tilde);
  m.def("h_tilde_limit", &h_tilde_limit);

  m.def(
      "run_estimates",
      [](const Profile& p, const CoagulationKernel& k, bool reconstruct_u) {
        EstimateSettings s;
        s.reconstruct_u = reconstruct_u;
        py::gil_scoped_release nogil;
        return run_estimates(p, k, s).to_json();
      },
      py::arg("profile"), py::arg("kernel"), py::arg("reconstruct_u") = false,
      "estimate ledger as a JSON string");
  m.def("contraction_probe", &contraction_probe);

  py::class_<State>(m, "State")
      .def_readonly("grid", &State::grid)
      .def_readonly("phi", &State::phi)
      .def_readonly("time", &State::time);
  m.def(
      "evolve",
      [](const CoagulationKernel& k, const std::function<double(double)>& phi0, double t_end,
         std::vector<double> snapshots) {
        const State s0 = initial_state(dynamics_grid(), phi0);
        EvolveSettings st;
        st.snapshots = std::move(snapshots);
        py::gil_scoped_release nogil;
        return evolve(k, s0, t_end, st).snapshots;
      },
      py::arg("kernel"), py::arg("phi0"), py::arg("t_end"), py::arg("snapshots") = std::vector<double>{});
  m.def("scaled_profile", py::overload_cast<const State&>(&scaled_profile));
}
