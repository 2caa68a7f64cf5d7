#include "glab/errors.hpp"
#include "glab/green.hpp"
#include "glab/kernel.hpp"
#include "glab/presets.hpp"
#include "glab/scenario.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace glab;

namespace {

Domain make_domain(int n, std::vector<double> lo, std::vector<double> hi, const std::string& mode) {
    if (static_cast<int>(lo.size()) != n || static_cast<int>(hi.size()) != n)
        throw PreconditionError("box corners must have n entries");
    Domain d;
    d.n = n;
    for (int a = 0; a < n; ++a) {
        d.lo[a] = lo[a];
        d.hi[a] = hi[a];
    }
    d.mode = boundary_mode_from_string(mode);
    d.validate();
    return d;
}

Point to_point(const std::vector<double>& x) {
    Point p{0.0, 0.0};
    for (std::size_t a = 0; a < x.size() && a < 2; ++a) p[a] = x[a];
    return p;
}

} // namespace

PYBIND11_MODULE(glab, m) {
    m.doc() = "Averaged Green's matrices of divergence-form parabolic systems";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<SolverError>(m, "SolverError", PyExc_ArithmeticError);

    py::class_<CoefficientField>(m, "CoefficientField")
        .def_property_readonly("n", &CoefficientField::dim)
        .def_property_readonly("N", &CoefficientField::system_size)
        .def_property_readonly("lambda_", &CoefficientField::lambda)
        .def_property_readonly("Lambda_bound", &CoefficientField::Lambda_bound)
        .def_property_readonly("name", &CoefficientField::name)
        .def("__call__", [](const CoefficientField& c, double t, const std::vector<double>& x, int a, int b,
                            int i, int j) { return c(t, to_point(x), a, b, i, j); });

    m.def("preset", [](const std::string& name, int n, int N, const std::map<std::string, double>& params) {
        return presets::make(name, n, N, params);
    }, py::arg("name"), py::arg("n") = 1, py::arg("N") = 1, py::arg("params") = std::map<std::string, double>{});
    m.def("preset_names", &presets::names);
    m.def("transpose_coefficients", &transpose_coefficients);

    py::class_<ParabolicityReport>(m, "ParabolicityReport")
        .def_readonly("lambda_est", &ParabolicityReport::lambda_est)
        .def_readonly("Lambda_est", &ParabolicityReport::Lambda_est)
        .def_readonly("ok", &ParabolicityReport::ok);

    py::class_<Mesh>(m, "Mesh")
        .def(py::init([](int n, std::vector<int> cells, double tau, std::vector<double> lo,
                         std::vector<double> hi, const std::string& mode, double t0) {
                 std::array<int, 2> c{1, 1};
                 for (std::size_t a = 0; a < cells.size() && a < 2; ++a) c[a] = cells[a];
                 return Mesh(make_domain(n, lo, hi, mode), c, tau, t0);
             }),
             py::arg("n"), py::arg("cells"), py::arg("tau"), py::arg("lo"), py::arg("hi"),
             py::arg("mode") = "periodic", py::arg("t0") = 0.0)
        .def_property_readonly("n", &Mesh::dim)
        .def_property_readonly("num_cells", &Mesh::num_cells)
        .def_property_readonly("tau", &Mesh::tau)
        .def("h", &Mesh::h)
        .def("time", &Mesh::time)
        .def("center", [](const Mesh& mesh, int cell) {
            const Point p = mesh.center(cell);
            return std::vector<double>(p.begin(), p.begin() + mesh.dim());
        })
        .def("nearest_cell", [](const Mesh& mesh, const std::vector<double>& x) {
            return mesh.nearest_cell(to_point(x));
        });

    m.def("validate_parabolicity", [](const CoefficientField& c, int samples, const Mesh& mesh) {
        return validate_parabolicity(c, samples, mesh.domain());
    }, py::arg("coeffs"), py::arg("sample_count"), py::arg("mesh"));

    py::class_<ThetaStepper>(m, "ThetaStepper")
        .def(py::init([](const Mesh& mesh, const CoefficientField& c, double theta, bool transposed) {
                 return ThetaStepper(mesh, OperatorSpec{c, mesh.domain(), transposed}, theta);
             }),
             py::arg("mesh"), py::arg("coeffs"), py::arg("theta") = 1.0, py::arg("transposed") = false)
        .def_property_readonly("slice_size", &ThetaStepper::slice_size)
        .def("step", &ThetaStepper::step)
        .def("step_adjoint", &ThetaStepper::step_adjoint)
        .def("solve_forward", [](const ThetaStepper& s, const Slice& g, int k_start, int k_end) {
            return solve_forward(s, g, no_source(), k_start, k_end).slices;
        })
        .def("solve_backward", [](const ThetaStepper& s, const Slice& g, int k_start, int k_end) {
            return solve_backward(s, g, no_source(), k_start, k_end).slices;
        })
        .def("propagator", [](const ThetaStepper& s, int k_from, int k_to) {
            return propagator(s, k_from, k_to).matrix;
        });

    m.def("averaged_green_column", [](const ThetaStepper& s, int k, int cell, int column, double rho, int k_T) {
        return averaged_green_column(s, {k, cell}, column, rho, k_T).field.slices;
    }, py::arg("stepper"), py::arg("k"), py::arg("cell"), py::arg("column"), py::arg("rho"), py::arg("k_T"));

    m.def("heat_kernel", [](double t, const std::vector<double>& x) { return heat_kernel(t, x); });

    m.def("run_scenario", [](const std::filesystem::path& path, int jobs) {
        const Scenario sc = load_scenario(path);
        py::gil_scoped_release release;
        return report_json(run_scenario(sc, {jobs}));
    }, py::arg("path"), py::arg("jobs") = 1, "Runs a scenario file and returns the JSON report.");

    m.def("run_scenario_text", [](const std::string& text, int jobs) {
        const Scenario sc = parse_scenario(text);
        py::gil_scoped_release release;
        return report_json(run_scenario(sc, {jobs}));
    }, py::arg("text"), py::arg("jobs") = 1);

    m.def("check_names", &check_names);
}
