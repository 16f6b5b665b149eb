#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wdrcc/grid.hpp"
#include "wdrcc/levelset.hpp"
#include "wdrcc/opf.hpp"
#include "wdrcc/solver.hpp"
#include "wdrcc/stochastics.hpp"

#define STRINGIFY(x) #x
#define MACRO_STRINGIFY(x) STRINGIFY(x)

namespace py = pybind11;
using namespace wdrcc;

PYBIND11_MODULE(_core, m) {
    m.doc() =
        "Wasserstein-robust two-sided chance constraints via conic inner "
        "approximations, with a DC optimal power flow application";

    // ---- risk function and level curve ----

    py::class_<RiskSpec>(m, "RiskSpec",
                         "Violation budget epsilon and Wasserstein radius delta")
        .def(py::init<double, double>(), py::arg("epsilon"), py::arg("delta"))
        .def_readonly("epsilon", &RiskSpec::epsilon)
        .def_readonly("delta", &RiskSpec::delta)
        .def("__repr__", [](const RiskSpec& s) {
            return "RiskSpec(epsilon=" + std::to_string(s.epsilon) +
                   ", delta=" + std::to_string(s.delta) + ")";
        });

    py::class_<Band>(m, "Band", "Two-sided band [ell, u]")
        .def(py::init<double, double>(), py::arg("ell"), py::arg("u"))
        .def_readwrite("ell", &Band::ell)
        .def_readwrite("u", &Band::u)
        .def("__repr__", [](const Band& b) {
            return "Band(ell=" + std::to_string(b.ell) + ", u=" + std::to_string(b.u) + ")";
        });

    py::class_<LevelPolyline>(m, "LevelPolyline",
                              "Vertices on the level curve g = delta, decreasing ell")
        .def_readonly("spec", &LevelPolyline::spec)
        .def_readonly("points", &LevelPolyline::points)
        .def("to_json", &LevelPolyline::to_json)
        .def_static("from_json", &LevelPolyline::from_json, py::arg("text"));

    py::class_<ApproxBound>(m, "ApproxBound",
                            "Certified ratio: sup of g/delta over the boundary <= bound")
        .def_readonly("tau_sq_max", &ApproxBound::tau_sq_max)
        .def_readonly("tail_upper", &ApproxBound::tail_upper)
        .def_readonly("tail_lower", &ApproxBound::tail_lower)
        .def_readonly("bound", &ApproxBound::bound);

    m.def("eval_g", [](const RiskSpec& s, const Band& b) { return eval_g(s, b); },
          py::arg("spec"), py::arg("band"));
    m.def("eval_g",
          [](const RiskSpec& s, double ell, double u) { return eval_g(s, Band{ell, u}); },
          py::arg("spec"), py::arg("ell"), py::arg("u"),
          "Worst-case violation mass of the band under the Wasserstein ball");
    m.def("eval_g_var_form",
          [](const RiskSpec& s, double ell, double u) {
              return eval_g_var_form(s, Band{ell, u});
          },
          py::arg("spec"), py::arg("ell"), py::arg("u"));
    m.def("eval_gbar", &eval_gbar, py::arg("spec"), py::arg("u"));
    m.def("eval_gunder", &eval_gunder, py::arg("spec"), py::arg("ell"));
    m.def("solve_symmetric_u0",
          [](const RiskSpec& s) { return solve_symmetric_u0(s); }, py::arg("spec"),
          "Apex of the level curve: u0 with g(-u0, u0) = delta");
    m.def("solve_asymptotes", [](const RiskSpec& s) { return solve_asymptotes(s); },
          py::arg("spec"));
    m.def("solve_u_on_levelset",
          [](const RiskSpec& s, double ell) { return solve_u_on_levelset(s, ell); },
          py::arg("spec"), py::arg("ell"));
    m.def("construct_points",
          [](const RiskSpec& s, int n) { return construct_points(s, n); }, py::arg("spec"),
          py::arg("n_points"));
    m.def("polyline_contains", &polyline_contains, py::arg("polyline"), py::arg("band"));
    m.def("z0_membership",
          [](const RiskSpec& s, const Band& b) { return z0_membership(s, b); },
          py::arg("spec"), py::arg("band"));
    m.def("apx_bound",
          [](const RiskSpec& s, const LevelPolyline& p) { return apx_bound(s, p); },
          py::arg("spec"), py::arg("polyline"));
    m.def("max_g_on_boundary",
          [](const RiskSpec& s, const LevelPolyline& p) { return max_g_on_boundary(s, p); },
          py::arg("spec"), py::arg("polyline"));

    // ---- conic solver ----

    py::enum_<SolveStatus>(m, "SolveStatus")
        .value("optimal", SolveStatus::optimal)
        .value("infeasible", SolveStatus::infeasible)
        .value("unbounded", SolveStatus::unbounded)
        .value("max_iter", SolveStatus::max_iter);

    py::class_<SolverOptions>(m, "SolverOptions")
        .def(py::init<>())
        .def_readwrite("tol", &SolverOptions::tol)
        .def_readwrite("tol_soft", &SolverOptions::tol_soft)
        .def_readwrite("max_iter", &SolverOptions::max_iter)
        .def_readwrite("verbose", &SolverOptions::verbose);

    py::class_<KktResiduals>(m, "KktResiduals")
        .def_readonly("primal", &KktResiduals::primal)
        .def_readonly("dual", &KktResiduals::dual)
        .def_readonly("gap", &KktResiduals::gap);

    py::class_<Solution>(m, "Solution")
        .def_readonly("status", &Solution::status)
        .def_readonly("x", &Solution::x)
        .def_readonly("objective", &Solution::objective)
        .def_readonly("residuals", &Solution::residuals)
        .def_readonly("iterations", &Solution::iterations);

    m.def(
        "solve_conic_json",
        [](const std::string& text, const SolverOptions& opts) {
            return solve(ConicProgram::from_json(text), opts);
        },
        py::arg("program_json"), py::arg("options") = SolverOptions{},
        "Solve a serialized conic program (conic-program/1 document)");

    // ---- grid ----

    py::class_<Bus>(m, "Bus")
        .def_readonly("id", &Bus::id)
        .def_readonly("type", &Bus::type)
        .def_readonly("pd_mw", &Bus::pd_mw);

    py::class_<Generator>(m, "Generator")
        .def_readonly("bus", &Generator::bus)
        .def_readonly("pmin_mw", &Generator::pmin_mw)
        .def_readonly("pmax_mw", &Generator::pmax_mw)
        .def_readonly("c2", &Generator::c2)
        .def_readonly("c1", &Generator::c1)
        .def_readonly("c0", &Generator::c0);

    py::class_<Branch>(m, "Branch")
        .def_readonly("from_bus", &Branch::from)
        .def_readonly("to_bus", &Branch::to)
        .def_readonly("x", &Branch::x)
        .def_readonly("rate_mw", &Branch::rate_mw);

    py::class_<Network>(m, "Network")
        .def_readonly("base_mva", &Network::base_mva)
        .def_readonly("buses", &Network::buses)
        .def_readonly("gens", &Network::gens)
        .def_readonly("branches", &Network::branches)
        .def_readonly("slack_bus", &Network::slack_bus)
        .def("bus_index", &Network::bus_index, py::arg("external_id"))
        .def("total_load_mw", &Network::total_load_mw)
        .def("__repr__", [](const Network& n) {
            return "Network(" + std::to_string(n.buses.size()) + " buses, " +
                   std::to_string(n.branches.size()) + " branches, " +
                   std::to_string(n.gens.size()) + " gens)";
        });

    py::class_<DcOperators>(m, "DcOperators")
        .def_readonly("bbus", &DcOperators::bbus)
        .def_readonly("bpinv", &DcOperators::bpinv)
        .def_readonly("ptdf", &DcOperators::ptdf);

    m.def("parse_case", &parse_case, py::arg("text"), py::arg("filename") = "<case>");
    m.def("parse_case_file", &parse_case_file, py::arg("path"));
    m.def("dc_operators", &dc_operators, py::arg("network"));

    // ---- dispatch ----

    py::class_<WindFarm>(m, "WindFarm")
        .def(py::init<int, double>(), py::arg("bus"), py::arg("forecast_mw"))
        .def_readwrite("bus", &WindFarm::bus)
        .def_readwrite("forecast_mw", &WindFarm::forecast_mw);

    py::class_<WindFleet>(m, "WindFleet")
        .def(py::init([](std::vector<WindFarm> farms) {
                 WindFleet f;
                 f.farms = std::move(farms);
                 return f;
             }),
             py::arg("farms"))
        .def_readwrite("farms", &WindFleet::farms)
        .def("validate", &WindFleet::validate, py::arg("network"))
        .def("forecast_mw", &WindFleet::forecast_mw);

    py::class_<MomentEstimate>(m, "MomentEstimate")
        .def_readonly("mean", &MomentEstimate::mean)
        .def_readonly("cov", &MomentEstimate::cov)
        .def_readonly("sample_count", &MomentEstimate::sample_count);

    m.def("estimate_moments", &estimate_moments, py::arg("samples"),
          "Sample mean and unbiased covariance, one draw per row");

    py::class_<OpfSettings>(m, "OpfSettings")
        .def(py::init([](double eps_gen, double eps_branch, double delta, int pieces) {
                 OpfSettings s{eps_gen, eps_branch, delta, pieces};
                 s.validate();
                 return s;
             }),
             py::arg("eps_gen") = 0.05, py::arg("eps_branch") = 0.05,
             py::arg("delta") = 0.05, py::arg("pieces") = 7)
        .def_readwrite("eps_gen", &OpfSettings::eps_gen)
        .def_readwrite("eps_branch", &OpfSettings::eps_branch)
        .def_readwrite("delta", &OpfSettings::delta)
        .def_readwrite("pieces", &OpfSettings::pieces);

    py::enum_<BandKind>(m, "BandKind")
        .value("generator", BandKind::generator)
        .value("branch", BandKind::branch);

    py::class_<Dispatch>(m, "Dispatch")
        .def_readonly("status", &Dispatch::status)
        .def_readonly("objective", &Dispatch::objective)
        .def_readonly("pbar_mw", &Dispatch::pbar_mw)
        .def_readonly("alpha", &Dispatch::alpha)
        .def_readonly("theta", &Dispatch::theta)
        .def_readonly("scale", &Dispatch::scale)
        .def_readonly("residuals", &Dispatch::residuals)
        .def_readonly("iterations", &Dispatch::iterations);

    py::class_<OpfModel>(m, "OpfModel")
        .def_readonly("num_gens", &OpfModel::num_gens)
        .def_readonly("num_buses", &OpfModel::num_buses)
        .def_readonly("num_farms", &OpfModel::num_farms)
        .def("program_json", [](const OpfModel& mod) { return mod.program.to_json(); })
        .def(
            "solve",
            [](const OpfModel& mod, const SolverOptions& opts) {
                return extract_dispatch(mod, solve(mod.program, opts));
            },
            py::arg("options") = SolverOptions{},
            "Solve the assembled program and decode the dispatch");

    m.def("assemble", &assemble, py::arg("network"), py::arg("operators"), py::arg("fleet"),
          py::arg("moments"), py::arg("settings"), py::arg("gen_polyline"),
          py::arg("branch_polyline"),
          "Robust dispatch with affine recourse and two-sided bands");
    m.def("assemble_deterministic", &assemble_deterministic, py::arg("network"),
          py::arg("operators"), py::arg("fleet"),
          "Dispatch at the forecast with hard limits and no recourse");

    py::class_<BandGeometry>(m, "BandGeometry")
        .def_readonly("kind", &BandGeometry::kind)
        .def_readonly("element", &BandGeometry::element)
        .def_readonly("coef", &BandGeometry::coef)
        .def_readonly("lo", &BandGeometry::lo)
        .def_readonly("hi", &BandGeometry::hi);

    m.def("band_geometry", &band_geometry, py::arg("network"), py::arg("operators"),
          py::arg("fleet"), py::arg("dispatch"),
          "Each band as lo <= coef . xi <= hi at a fixed operating point");

    // ---- stochastics ----

    py::enum_<Marginal::Family>(m, "Family")
        .value("weibull", Marginal::Family::weibull)
        .value("gaussian", Marginal::Family::gaussian);

    py::class_<Marginal>(m, "Marginal", "Centered error distribution of one site")
        .def_static("weibull", &Marginal::weibull, py::arg("shape"), py::arg("scale"))
        .def_static("gaussian", &Marginal::gaussian, py::arg("mean"), py::arg("std"))
        .def_readonly("family", &Marginal::family)
        .def_readonly("a", &Marginal::a)
        .def_readonly("b", &Marginal::b)
        .def("analytic_mean", &Marginal::analytic_mean)
        .def("quantile", &Marginal::quantile, py::arg("u"));

    py::class_<TruthModel>(m, "TruthModel")
        .def(py::init([](std::vector<Marginal> sites) {
                 TruthModel t;
                 t.sites = std::move(sites);
                 t.validate();
                 return t;
             }),
             py::arg("sites"))
        .def_readonly("sites", &TruthModel::sites);

    m.def("sample", &sample, py::arg("model"), py::arg("n"), py::arg("seed"),
          "Deterministic centered draws, one row per draw and one column per site");

    py::class_<OosResult>(m, "OosResult")
        .def_readonly("satisfaction", &OosResult::satisfaction)
        .def_readonly("per_band", &OosResult::per_band)
        .def_readonly("sample_count", &OosResult::sample_count);

    m.def("oos_satisfaction", &oos_satisfaction, py::arg("dispatch"), py::arg("network"),
          py::arg("operators"), py::arg("fleet"), py::arg("samples"),
          "Fraction of sample rows satisfying every band jointly");

#ifdef VERSION_INFO
    m.attr("__version__") = MACRO_STRINGIFY(VERSION_INFO);
#else
    m.attr("__version__") = "dev";
#endif
}
