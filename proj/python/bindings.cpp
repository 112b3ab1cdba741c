#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <limits>

#include "nsoc/adjoint_optimizer.hpp"
#include "nsoc/errors.hpp"
#include "nsoc/experiment.hpp"
#include "nsoc/grid.hpp"
#include "nsoc/scalar_kernel.hpp"
#include "nsoc/sensitivity.hpp"
#include "nsoc/state_solver.hpp"
#include "nsoc/verify.hpp"

namespace py = pybind11;
using namespace nsoc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using DiscPtr = std::shared_ptr<Discretization>;  // pybind11 holders cannot be const-qualified

Field to_field(const Grid& grid, const Array& a) {
  if (a.ndim() != 1 || static_cast<std::size_t>(a.size()) != grid.size()) {
    throw GridMismatch("expected a 1-D array with one value per interior node (" + std::to_string(grid.size()) + ")");
  }
  return Field(grid, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(std::span<const double> v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<double> bound(const Grid& grid, const py::object& b, double fallback) {
  if (b.is_none()) return std::vector<double>(grid.size(), fallback);
  if (py::isinstance<py::float_>(b) || py::isinstance<py::int_>(b)) {
    return std::vector<double>(grid.size(), b.cast<double>());
  }
  return to_field(grid, b.cast<Array>()).vector();
}

ControlProblem control_problem(const DiscPtr& disc, double alpha, const Array& target, double nu,
                               const py::object& lower, const py::object& upper) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const Grid& g = disc->grid();
  return ControlProblem(disc, Exponent(alpha), to_field(g, target), nu, bound(g, lower, -inf), bound(g, upper, inf));
}

py::tuple interval(const Interval& i) { return py::make_tuple(i.lower, i.lower_closed, i.upper, i.upper_closed); }

}  // namespace

PYBIND11_MODULE(_nsoc, m) {
  m.doc() = "Semilinear elliptic state equation with a non-Lipschitz power term: solver, sensitivities, optimal control";

  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<GridMismatch>(m, "GridMismatch", PyExc_ValueError);

  m.def("phi", py::vectorize([](double s, double a) { return phi(s, Exponent(a)); }), py::arg("s"), py::arg("alpha"));
  m.def("potential", py::vectorize([](double s, double a) { return potential(s, Exponent(a)); }), py::arg("s"),
        py::arg("alpha"));
  m.def("prox_potential", py::vectorize([](double v, double t, double a) { return prox_potential(v, t, Exponent(a)); }),
        py::arg("v"), py::arg("t"), py::arg("alpha"));
  m.def(
      "expansion_residuals",
      [](double x, double t, double z, double beta) {
        const auto r = expansion_residuals(x, t, z, Exponent(beta));
        return py::make_tuple(r.r1, r.r2, r.r3);
      },
      py::arg("x"), py::arg("t"), py::arg("z"), py::arg("beta"));

  py::class_<Discretization, DiscPtr>(m, "Discretization")
      .def(py::init([](int dim, int n) { return std::const_pointer_cast<Discretization>(Discretization::make(dim, n)); }), py::arg("dim"), py::arg("n"))
      .def_property_readonly("dim", [](const Discretization& d) { return d.grid().dim(); })
      .def_property_readonly("n", [](const Discretization& d) { return d.grid().cells(); })
      .def_property_readonly("h", [](const Discretization& d) { return d.grid().spacing(); })
      .def_property_readonly("size", [](const Discretization& d) { return d.grid().size(); })
      .def_property_readonly("mass", [](const Discretization& d) { return to_array(d.mass()); })
      .def_property_readonly("coords",
                             [](const Discretization& d) {
                               const auto& g = d.grid();
                               py::array_t<double> out({static_cast<py::ssize_t>(g.size()), py::ssize_t{2}});
                               auto w = out.mutable_unchecked<2>();
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                 const auto c = g.coord(i);
                                 w(i, 0) = c[0];
                                 w(i, 1) = c[1];
                               }
                               return out;
                             })
      .def("l2_inner", [](const Discretization& d, const Array& v, const Array& w) {
        return d.l2_inner(to_field(d.grid(), v), to_field(d.grid(), w));
      })
      .def("h01_norm", [](const Discretization& d, const Array& v) { return d.h01_norm(to_field(d.grid(), v)); })
      .def("hminus1_norm",
           [](const Discretization& d, const Array& v) { return d.hminus1_norm(to_field(d.grid(), v)); });

  m.def(
      "manufactured_instance",
      [](const DiscPtr& d, const std::string& name, double alpha) {
        const auto inst = manufactured_instance(name, d->grid(), Exponent(alpha));
        return py::make_tuple(to_array(inst.u.values()), to_array(inst.y_exact.values()));
      },
      py::arg("disc"), py::arg("name"), py::arg("alpha"));

  m.def(
      "solve_state",
      [](const DiscPtr& d, double alpha, const Array& u, double tol, const std::string& method) {
        SolveOptions o;
        o.tol = tol;
        o.method = parse_solve_method(method);
        const StateProblem p(d, Exponent(alpha), to_field(d->grid(), u));
        const auto sol = solve_state(p, o);
        py::dict out;
        out["y"] = to_array(sol.y.values());
        out["iterations"] = sol.report.iterations;
        out["residual"] = sol.report.residual;
        out["energy"] = sol.report.energy;
        out["restarts"] = sol.report.restarts;
        return out;
      },
      py::arg("disc"), py::arg("alpha"), py::arg("u"), py::arg("tol") = 1e-10, py::arg("method") = "accel_prox");

  m.def(
      "pde_residual",
      [](const DiscPtr& d, double alpha, const Array& y, const Array& u) {
        const StateProblem p(d, Exponent(alpha), to_field(d->grid(), u));
        return pde_residual(to_field(d->grid(), y), p.u, p);
      },
      py::arg("disc"), py::arg("alpha"), py::arg("y"), py::arg("u"));

  m.def(
      "apply_S_prime",
      [](const DiscPtr& d, double alpha, const Array& y, const Array& h, double eps_dead) {
        const auto sys = build_sensitivity(d, to_field(d->grid(), y), Exponent(alpha), eps_dead);
        return to_array(apply_S_prime(sys, to_field(d->grid(), h)).values());
      },
      py::arg("disc"), py::arg("alpha"), py::arg("y"), py::arg("h"), py::arg("eps_dead") = -1.0);

  m.def(
      "frechet_remainder_study",
      [](const DiscPtr& d, double alpha, const Array& u, const Array& h, const std::vector<double>& taus) {
        const StateProblem p(d, Exponent(alpha), to_field(d->grid(), u));
        return frechet_remainder_study(p, to_field(d->grid(), h), taus).rows;
      },
      py::arg("disc"), py::arg("alpha"), py::arg("u"), py::arg("h"), py::arg("taus"));

  m.def(
      "reduced_gradient",
      [](const DiscPtr& d, double alpha, const Array& target, double nu, const Array& u, const py::object& lower,
         const py::object& upper) {
        const auto cp = control_problem(d, alpha, target, nu, lower, upper);
        const auto rg = reduced_gradient(to_field(d->grid(), u), cp);
        py::dict out;
        out["g"] = to_array(rg.g.values());
        out["p"] = to_array(rg.p.values());
        out["y"] = to_array(rg.y.values());
        out["objective"] = rg.objective;
        return out;
      },
      py::arg("disc"), py::arg("alpha"), py::arg("target"), py::arg("nu"), py::arg("u"), py::arg("lower") = py::none(),
      py::arg("upper") = py::none());

  m.def(
      "optimize",
      [](const DiscPtr& d, double alpha, const Array& target, double nu, const Array& u0, const py::object& lower,
         const py::object& upper, double tol, long max_iter, int samples, std::uint64_t seed) {
        const auto cp = control_problem(d, alpha, target, nu, lower, upper);
        const auto r = projected_gradient_solve(cp, to_field(d->grid(), u0), tol, max_iter);
        const auto k = kkt_residual(r.u, cp);
        py::dict out;
        out["u"] = to_array(r.u.values());
        out["converged"] = r.converged;
        out["iterations"] = r.history.iterations;
        out["objective_history"] = r.history.objective;
        out["kkt_residual"] = k.residual;
        out["projection_residual"] = k.projection_residual;
        out["bouligand_gap"] = bouligand_gap(r.u, cp, samples, seed);
        return out;
      },
      py::arg("disc"), py::arg("alpha"), py::arg("target"), py::arg("nu"), py::arg("u0"), py::arg("lower") = py::none(),
      py::arg("upper") = py::none(), py::arg("tol") = 1e-8, py::arg("max_iter") = 500, py::arg("samples") = 200,
      py::arg("seed") = 20240611);

  m.def("embedding_exponents", [](int d) {
    const auto e = embedding_exponents(d);
    return py::make_tuple(interval(e.primal), interval(e.dual));
  });
  m.def("admissible_adjoint_exponents", [](double s, int d) { return interval(admissible_adjoint_exponents(s, d)); },
        py::arg("s"), py::arg("d"));

  m.def(
      "run_property_suite",
      [](std::uint64_t seed, bool quick) {
        SuiteOptions o;
        o.seed = seed;
        o.quick = quick;
        py::list out;
        for (const auto& r : run_property_suite(o)) {
          py::dict row;
          row["name"] = r.name;
          row["passed"] = r.passed;
          row["detail"] = r.detail;
          row["seconds"] = r.seconds;
          out.append(row);
        }
        return out;
      },
      py::arg("seed") = 20240611, py::arg("quick") = false);

  m.def(
      "run_experiment",
      [](const std::string& command, const std::map<std::string, std::string>& settings, const std::string& out_dir) {
        ExperimentConfig cfg;
        for (const auto& [k, v] : settings) set_config_value(cfg, k, v);
        cfg.command = command;
        if (command.rfind("study ", 0) == 0) {
          cfg.command = "study";
          cfg.study = command.substr(6);
        }
        const auto r = run_experiment(cfg, out_dir);
        py::dict report;
        for (const auto& [k, v] : r.report.lines()) report[py::str(k)] = v;
        return py::make_tuple(static_cast<int>(r.code), report, r.message);
      },
      py::arg("command"), py::arg("settings") = std::map<std::string, std::string>{}, py::arg("out_dir"));
}
