#include "wdrcc/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wdrcc/levelset.hpp"
#include "wdrcc/opf.hpp"
#include "wdrcc/solver.hpp"
#include "wdrcc/stochastics.hpp"

namespace wdrcc {

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitNumerical = 3;

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// ---- run configuration -------------------------------------------------

// One wind site: where it feeds in, the forecast, and the distribution
// its errors are drawn from when evaluating out of sample.
struct SiteSpec {
    WindFarm farm;
    Marginal truth;
    bool per_unit = false;  // truth parameters given in p.u. of base MVA
};

struct RunConfig {
    std::vector<SiteSpec> sites;
    OpfSettings risk;
    int train_samples = 100;
    std::uint64_t train_seed = 1;
    json snapshot;  // the exact JSON this config was read from
};

Marginal parse_truth(const json& t) {
    const std::string family = t.at("family").get<std::string>();
    if (family == "weibull")
        return Marginal::weibull(t.at("shape").get<double>(), t.at("scale").get<double>());
    if (family == "gaussian")
        return Marginal::gaussian(t.at("mean").get<double>(), t.at("std").get<double>());
    throw std::runtime_error("unknown truth family '" + family + "'");
}

RunConfig parse_config(const json& j) {
    RunConfig cfg;
    cfg.snapshot = j;
    for (const json& w : j.at("wind")) {
        SiteSpec site;
        site.farm.bus = w.at("bus").get<int>();
        site.farm.forecast_mw = w.at("forecast_mw").get<double>();
        const json& t = w.at("truth");
        site.truth = parse_truth(t);
        site.truth.validate();
        if (t.contains("units")) {
            const std::string u = t["units"].get<std::string>();
            if (u == "per_unit") site.per_unit = true;
            else if (u != "mw") throw std::runtime_error("truth units must be mw or per_unit");
        }
        cfg.sites.push_back(site);
    }
    if (cfg.sites.empty()) throw std::runtime_error("config lists no wind sites");
    if (j.contains("risk")) {
        const json& r = j["risk"];
        if (r.contains("eps_gen")) cfg.risk.eps_gen = r["eps_gen"].get<double>();
        if (r.contains("eps_branch")) cfg.risk.eps_branch = r["eps_branch"].get<double>();
        if (r.contains("delta")) cfg.risk.delta = r["delta"].get<double>();
        if (r.contains("pieces")) cfg.risk.pieces = r["pieces"].get<int>();
    }
    if (j.contains("training")) {
        const json& t = j["training"];
        if (t.contains("samples")) cfg.train_samples = t["samples"].get<int>();
        if (t.contains("seed")) cfg.train_seed = t["seed"].get<std::uint64_t>();
    }
    return cfg;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    return j;
}

RunConfig load_config(const std::string& path) { return parse_config(read_json_file(path)); }

WindFleet fleet_of(const RunConfig& cfg) {
    WindFleet fleet;
    for (const SiteSpec& s : cfg.sites) fleet.farms.push_back(s.farm);
    return fleet;
}

// Truth model in megawatts; per-unit parameters scale by the case base.
TruthModel truth_of(const RunConfig& cfg, double base_mva) {
    TruthModel tm;
    for (const SiteSpec& s : cfg.sites) {
        Marginal m = s.truth;
        if (s.per_unit) {
            if (m.family == Marginal::Family::weibull) m.b *= base_mva;  // scale
            else {
                m.a *= base_mva;  // mean
                m.b *= base_mva;  // std
            }
        }
        tm.sites.push_back(m);
    }
    return tm;
}

// ---- artifacts ----------------------------------------------------------

std::string manifest_path(const std::string& artifact) { return artifact + ".manifest.json"; }

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << body;
    if (!out) throw std::runtime_error("short write to " + path);
}

void write_manifest(const std::string& artifact, const std::string& command,
                    const json& config_snapshot, const json& seeds,
                    const std::map<std::string, double>& timings_ms) {
    json m{{"schema", "manifest/1"},
           {"command", command},
           {"config", config_snapshot},
           {"seed", seeds},
           {"timings_ms", timings_ms},
           {"outputs", json::array({artifact})}};
    write_text(manifest_path(artifact), m.dump(2) + "\n");
}

// ---- trace --------------------------------------------------------------

struct TraceArgs {
    double epsilon = 0.05;
    double delta = 0.05;
    int pieces = 21;
    int grid = 60;
    std::string out = "trace.csv";
};

int cmd_trace(const TraceArgs& a) {
    auto t0 = std::chrono::steady_clock::now();
    RiskSpec spec(a.epsilon, a.delta);
    if (a.grid < 2) throw std::runtime_error("grid resolution must be at least 2");
    LevelPolyline poly = construct_points(spec, a.pieces);

    // Window: a margin past the apex shows the whole curve plus the
    // asymptotes on both axes.
    const double u0 = solve_symmetric_u0(spec);
    const double span = u0 + 2.0;

    std::string csv;
    csv += "# schema: trace/1\n";
    csv += "# manifest: " + manifest_path(a.out) + "\n";
    csv += "part,ell,u,g\n";
    for (int i = 0; i < a.grid; ++i) {
        // Strictly negative ell, strictly positive u.
        double ell = -span + (span - 1e-3) * i / (a.grid - 1.0);
        for (int k = 0; k < a.grid; ++k) {
            double u = 1e-3 + (span - 1e-3) * k / (a.grid - 1.0);
            csv += "grid," + fmt(ell) + "," + fmt(u) + "," +
                   fmt(eval_g(spec, {ell, u})) + "\n";
        }
    }
    for (const Band& p : poly.points)
        csv += "curve," + fmt(p.ell) + "," + fmt(p.u) + "," +
               fmt(eval_g(spec, {p.ell, p.u})) + "\n";
    write_text(a.out, csv);
    write_manifest(a.out, "trace",
                   json{{"epsilon", a.epsilon},
                        {"delta", a.delta},
                        {"pieces", a.pieces},
                        {"grid", a.grid}},
                   json(), {{"total", ms_since(t0)}});
    return kExitOk;
}

// ---- apxbd --------------------------------------------------------------

struct ApxbdArgs {
    std::string out = "apxbd.csv";
};

int cmd_apxbd(const ApxbdArgs& a) {
    auto t0 = std::chrono::steady_clock::now();
    const double epsv[] = {0.01, 0.05};
    const double deltav[] = {0.01, 0.05, 0.1};
    const int nv[] = {3, 5, 9, 19, 29};

    std::string csv;
    csv += "# schema: apxbd/1\n";
    csv += "# manifest: " + manifest_path(a.out) + "\n";
    csv += "epsilon,delta,n,tau_sq_max,tail_upper,tail_lower,bound\n";
    for (double eps : epsv)
        for (double delta : deltav)
            for (int n : nv) {
                RiskSpec spec(eps, delta);
                ApproxBound b = apx_bound(spec, construct_points(spec, n));
                csv += fmt(eps) + "," + fmt(delta) + "," + std::to_string(n) + "," +
                       fmt(b.tau_sq_max) + "," + fmt(b.tail_upper) + "," +
                       fmt(b.tail_lower) + "," + fmt(b.bound) + "\n";
            }
    write_text(a.out, csv);
    write_manifest(a.out, "apxbd", json(), json(), {{"total", ms_since(t0)}});
    return kExitOk;
}

// ---- solve-opf ----------------------------------------------------------

struct SolveArgs {
    std::string case_path;
    std::string config_path;
    std::string out = "dispatch.json";
    // Negative/zero sentinels mean "keep the config value".
    double epsilon = -1.0;
    double delta = -1.0;
    int pieces = 0;
    std::int64_t seed = -1;
    int samples = 0;
};

json dispatch_to_json(const Dispatch& d, const OpfModel& model) {
    json out;
    out["status"] = to_string(d.status);
    out["objective"] = d.objective;
    out["iterations"] = d.iterations;
    out["residuals"] = {{"primal", d.residuals.primal},
                        {"dual", d.residuals.dual},
                        {"relative_gap", d.residuals.gap}};
    out["pbar_mw"] = std::vector<double>(d.pbar_mw.begin(), d.pbar_mw.end());
    out["alpha"] = std::vector<double>(d.alpha.begin(), d.alpha.end());
    out["theta"] = std::vector<double>(d.theta.begin(), d.theta.end());
    out["bands"] = json::array();
    for (size_t i = 0; i < model.bands.size(); ++i) {
        const BandRef& b = model.bands[i];
        out["bands"].push_back(
            {{"kind", b.kind == BandKind::generator ? "generator" : "branch"},
             {"element", b.element},
             {"scale", d.scale[i]}});
    }
    return out;
}

int status_exit_code(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return kExitOk;
        case SolveStatus::infeasible:
        case SolveStatus::unbounded: return kExitInfeasible;
        case SolveStatus::max_iter: return kExitNumerical;
    }
    return kExitNumerical;
}

int cmd_solve_opf(const SolveArgs& a) {
    std::map<std::string, double> timings;
    auto t0 = std::chrono::steady_clock::now();

    RunConfig cfg = load_config(a.config_path);
    if (a.epsilon > 0.0) cfg.risk.eps_gen = cfg.risk.eps_branch = a.epsilon;
    if (a.delta > 0.0) cfg.risk.delta = a.delta;
    if (a.pieces > 0) cfg.risk.pieces = a.pieces;
    if (a.seed >= 0) cfg.train_seed = static_cast<std::uint64_t>(a.seed);
    if (a.samples > 0) cfg.train_samples = a.samples;
    cfg.risk.validate();

    Network net = parse_case_file(a.case_path);
    DcOperators ops = dc_operators(net);
    timings["parse"] = ms_since(t0);

    auto t1 = std::chrono::steady_clock::now();
    WindFleet fleet = fleet_of(cfg);
    fleet.validate(net);
    TruthModel truth = truth_of(cfg, net.base_mva);
    Eigen::MatrixXd train = sample(truth, cfg.train_samples, cfg.train_seed);
    MomentEstimate moments = estimate_moments(train);

    RiskSpec gen_spec(cfg.risk.eps_gen, cfg.risk.delta);
    RiskSpec branch_spec(cfg.risk.eps_branch, cfg.risk.delta);
    LevelPolyline gen_poly = construct_points(gen_spec, cfg.risk.pieces);
    LevelPolyline branch_poly = cfg.risk.eps_branch == cfg.risk.eps_gen
                                    ? gen_poly
                                    : construct_points(branch_spec, cfg.risk.pieces);
    OpfModel model = assemble(net, ops, fleet, moments, cfg.risk, gen_poly, branch_poly);
    timings["assemble"] = ms_since(t1);

    auto t2 = std::chrono::steady_clock::now();
    Solution sol = solve(model.program);
    Dispatch d = extract_dispatch(model, sol);
    timings["solve"] = ms_since(t2);
    timings["total"] = ms_since(t0);

    json out = dispatch_to_json(d, model);
    out["schema"] = "dispatch/1";
    out["manifest"] = manifest_path(a.out);
    out["case"] = a.case_path;
    out["config"] = cfg.snapshot;
    out["risk"] = {{"eps_gen", cfg.risk.eps_gen},
                   {"eps_branch", cfg.risk.eps_branch},
                   {"delta", cfg.risk.delta},
                   {"pieces", cfg.risk.pieces}};
    out["training"] = {{"samples", cfg.train_samples}, {"seed", cfg.train_seed}};
    out["timings_ms"] = timings;
    write_text(a.out, out.dump(2) + "\n");
    write_manifest(a.out, "solve-opf", cfg.snapshot, json(cfg.train_seed), timings);

    if (d.status != SolveStatus::optimal)
        std::fprintf(stderr, "solve-opf: status %s (primal %.2e dual %.2e gap %.2e)\n",
                     to_string(d.status), d.residuals.primal, d.residuals.dual,
                     d.residuals.gap);
    return status_exit_code(d.status);
}

// ---- oos ----------------------------------------------------------------

struct OosArgs {
    std::vector<std::string> dispatch_paths;  // one, or two for a paired run
    std::string case_path;    // falls back to the dispatch's embedded path
    std::string config_path;  // falls back to the dispatch's embedded config
    int samples = 10000;
    std::vector<std::uint64_t> seeds;
    std::string out = "oos.csv";
    bool per_band = false;
};

struct LoadedDispatch {
    Dispatch d;
    json raw;
};

LoadedDispatch load_dispatch(const std::string& path) {
    json j = read_json_file(path);
    LoadedDispatch ld;
    ld.raw = j;
    const std::string status = j.at("status").get<std::string>();
    if (status != "optimal")
        throw std::runtime_error(path + ": dispatch status is '" + status +
                                 "', nothing to evaluate");
    ld.d.status = SolveStatus::optimal;
    auto vec = [&j](const char* key) {
        std::vector<double> v = j.at(key).get<std::vector<double>>();
        return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<int>(v.size())).eval();
    };
    ld.d.pbar_mw = vec("pbar_mw");
    ld.d.alpha = vec("alpha");
    ld.d.theta = vec("theta");
    return ld;
}

// Mean and normal-approximation 95% interval over per-seed results.
struct Summary {
    double mean = 0.0, lo = 0.0, hi = 0.0;
    bool has_ci = false;
};

Summary summarize(const std::vector<double>& v) {
    Summary s;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    if (v.size() >= 2) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
        double half = 1.96 * sd / std::sqrt(static_cast<double>(v.size()));
        s.lo = s.mean - half;
        s.hi = s.mean + half;
        s.has_ci = true;
    }
    return s;
}

int cmd_oos(const OosArgs& a) {
    std::map<std::string, double> timings;
    auto t0 = std::chrono::steady_clock::now();
    if (a.dispatch_paths.empty() || a.dispatch_paths.size() > 2)
        throw std::runtime_error("oos takes one dispatch, or two for a paired run");

    std::vector<LoadedDispatch> disp;
    for (const std::string& p : a.dispatch_paths) disp.push_back(load_dispatch(p));

    std::string case_path = a.case_path;
    if (case_path.empty()) case_path = disp[0].raw.value("case", std::string());
    if (case_path.empty()) throw std::runtime_error("no --case and none embedded");
    RunConfig cfg = a.config_path.empty() ? parse_config(disp[0].raw.at("config"))
                                          : load_config(a.config_path);

    Network net = parse_case_file(case_path);
    DcOperators ops = dc_operators(net);
    WindFleet fleet = fleet_of(cfg);
    fleet.validate(net);
    TruthModel truth = truth_of(cfg, net.base_mva);

    std::vector<std::uint64_t> seeds = a.seeds;
    if (seeds.empty()) seeds = {1, 2, 3, 4, 5};

    const int ncols = static_cast<int>(disp.size());
    std::vector<std::vector<double>> oos(ncols);
    std::vector<OosResult> last(ncols);
    for (std::uint64_t seed : seeds) {
        Eigen::MatrixXd xs = sample(truth, a.samples, seed);
        for (int c = 0; c < ncols; ++c) {
            OosResult r = oos_satisfaction(disp[c].d, net, ops, fleet, xs);
            oos[c].push_back(r.satisfaction);
            last[c] = std::move(r);
        }
    }
    timings["evaluate"] = ms_since(t0);

    std::string csv;
    csv += "# schema: oos/1\n";
    csv += "# manifest: " + manifest_path(a.out) + "\n";
    const bool paired = ncols == 2;
    csv += paired ? "kind,seed,samples,oos,ci_lo,ci_hi,oos_baseline,baseline_ci_lo,"
                    "baseline_ci_hi\n"
                  : "kind,seed,samples,oos,ci_lo,ci_hi\n";
    for (size_t i = 0; i < seeds.size(); ++i) {
        csv += "seed," + std::to_string(seeds[i]) + "," + std::to_string(a.samples) + "," +
               fmt(oos[0][i]) + ",,";
        if (paired) csv += "," + fmt(oos[1][i]) + ",,";
        csv += "\n";
    }
    Summary s0 = summarize(oos[0]);
    csv += "summary,," + std::to_string(a.samples) + "," + fmt(s0.mean) + "," +
           (s0.has_ci ? fmt(s0.lo) : "") + "," + (s0.has_ci ? fmt(s0.hi) : "");
    if (paired) {
        Summary s1 = summarize(oos[1]);
        csv += "," + fmt(s1.mean) + "," + (s1.has_ci ? fmt(s1.lo) : "") + "," +
               (s1.has_ci ? fmt(s1.hi) : "");
    }
    csv += "\n";
    if (a.per_band) {
        // Diagnostic rows: per-band satisfaction from the last seed.
        std::vector<BandGeometry> bands = band_geometry(net, ops, fleet, disp[0].d);
        for (size_t k = 0; k < bands.size(); ++k) {
            csv += std::string("band:") +
                   (bands[k].kind == BandKind::generator ? "generator" : "branch") + ":" +
                   std::to_string(bands[k].element) + ",," + std::to_string(a.samples) +
                   "," + fmt(last[0].per_band[static_cast<int>(k)]) + ",,";
            if (paired) csv += "," + fmt(last[1].per_band[static_cast<int>(k)]) + ",,";
            csv += "\n";
        }
    }
    write_text(a.out, csv);

    timings["total"] = ms_since(t0);
    write_manifest(a.out, "oos",
                   json{{"dispatch", a.dispatch_paths},
                        {"case", case_path},
                        {"config", cfg.snapshot},
                        {"samples", a.samples}},
                   json(seeds), timings);
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{
        "Distributionally robust two-sided chance constraints: level-curve "
        "tooling and robust DC dispatch"};
    app.require_subcommand(1);

    TraceArgs targs;
    CLI::App* trace = app.add_subcommand(
        "trace", "Emit a g(ell,u) grid and the level-curve points as CSV");
    trace->add_option("--epsilon", targs.epsilon, "Violation budget in (0, 1/2)");
    trace->add_option("--delta", targs.delta, "Wasserstein radius > 0");
    trace->add_option("--pieces", targs.pieces, "Level-curve points (odd, >= 3)");
    trace->add_option("--samples", targs.grid, "Grid resolution per axis");
    trace->add_option("--out", targs.out, "Output CSV path");

    ApxbdArgs aargs;
    CLI::App* apxbd = app.add_subcommand(
        "apxbd", "Tabulate approximation bounds over the standard parameter grid");
    apxbd->add_option("--out", aargs.out, "Output CSV path");

    SolveArgs sargs;
    CLI::App* solve = app.add_subcommand(
        "solve-opf", "Robust DC dispatch: parse, estimate moments, assemble, solve");
    solve->add_option("--case", sargs.case_path, "MATPOWER-style case file")->required();
    solve->add_option("--config", sargs.config_path, "Run configuration JSON")->required();
    solve->add_option("--epsilon", sargs.epsilon,
                      "Override both violation budgets from the config");
    solve->add_option("--delta", sargs.delta, "Override the Wasserstein radius");
    solve->add_option("--pieces", sargs.pieces, "Override the polyline size");
    solve->add_option("--seed", sargs.seed, "Override the training seed");
    solve->add_option("--samples", sargs.samples, "Override the training sample count");
    solve->add_option("--out", sargs.out, "Output dispatch JSON path");

    OosArgs oargs;
    CLI::App* oos = app.add_subcommand(
        "oos", "Out-of-sample satisfaction of one dispatch (or a 2DRC/CC pair)");
    oos->add_option("dispatch", oargs.dispatch_paths, "Dispatch JSON (one or two paths)")
        ->required()
        ->expected(1, 2);
    oos->add_option("--case", oargs.case_path, "Case file (default: embedded in dispatch)");
    oos->add_option("--config", oargs.config_path,
                    "Truth configuration JSON (default: embedded in dispatch)");
    oos->add_option("--samples", oargs.samples, "Evaluation draws per seed");
    oos->add_option("--seed", oargs.seeds, "Evaluation seeds (repeatable)");
    oos->add_option("--out", oargs.out, "Output CSV path");
    oos->add_flag("--per-band", oargs.per_band, "Append per-band diagnostic rows");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (trace->parsed()) return cmd_trace(targs);
        if (apxbd->parsed()) return cmd_apxbd(aargs);
        if (solve->parsed()) return cmd_solve_opf(sargs);
        if (oos->parsed()) return cmd_oos(oargs);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace wdrcc
