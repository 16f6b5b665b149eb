#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "wdrcc/opf.hpp"

using namespace wdrcc;

namespace {

std::string data_path(const std::string& name) {
    return std::string(WDRCC_DATA_DIR) + "/" + name;
}

MomentEstimate analytic_moments(const Eigen::VectorXd& mean, const Eigen::VectorXd& stds) {
    MomentEstimate est;
    est.mean = mean;
    est.cov = stds.array().square().matrix().asDiagonal();
    est.factor = factor_covariance(est.cov);
    est.sample_count = 0;
    return est;
}

// Weibull standard deviation in units of the scale parameter.
double weibull_std(double k) {
    double g1 = std::tgamma(1.0 + 1.0 / k);
    double g2 = std::tgamma(1.0 + 2.0 / k);
    return std::sqrt(g2 - g1 * g1);
}

struct Case118Setup {
    Network net;
    DcOperators ops;
    WindFleet fleet;
    MomentEstimate moments;
};

// The four-farm 118-bus configuration used across the robust tests:
// analytic moments of zero-mean Weibull errors (scale 100 MW, shapes
// 1.2 / 3.5 / 0.5 / 4.0) so results do not depend on a sampler.
Case118Setup make_case118() {
    Case118Setup s{parse_case_file(data_path("case118.m")), {}, {}, {}};
    s.ops = dc_operators(s.net);
    s.fleet.farms = {{2, 80.0}, {7, 80.0}, {43, 80.0}, {86, 80.0}};
    Eigen::VectorXd stds(4);
    stds << 100.0 * weibull_std(1.2), 100.0 * weibull_std(3.5), 100.0 * weibull_std(0.5),
        100.0 * weibull_std(4.0);
    s.moments = analytic_moments(Eigen::VectorXd::Zero(4), stds);
    return s;
}

double solve_cost(const OpfModel& model, SolveStatus* status = nullptr) {
    SolverOptions opts;
    Solution sol = solve(model.program, opts);
    if (status) *status = sol.status;
    return sol.objective;
}

}  // namespace

TEST_CASE("moment estimation matches hand formulas") {
    SUBCASE("two samples in one dimension") {
        Eigen::MatrixXd s(2, 1);
        s << 1.0, 5.0;
        MomentEstimate est = estimate_moments(s);
        CHECK(est.mean[0] == doctest::Approx(3.0));
        CHECK(est.cov(0, 0) == doctest::Approx(8.0));  // (1-3)^2 + (5-3)^2 over m-1
        CHECK(est.sample_count == 2);
    }
    SUBCASE("constant samples give a ridged zero covariance") {
        Eigen::MatrixXd s = Eigen::MatrixXd::Constant(8, 3, 2.5);
        MomentEstimate est = estimate_moments(s);
        CHECK(est.mean.isApproxToConstant(2.5));
        CHECK(est.cov.norm() == doctest::Approx(0.0));
        CHECK(est.factor.ridged);
        CHECK(est.factor.L.norm() > 0.0);
    }
    SUBCASE("large standard normal sample recovers identity moments") {
        std::mt19937 rng(20240817);
        std::normal_distribution<double> n01;
        Eigen::MatrixXd s(10000, 2);
        for (int i = 0; i < s.rows(); ++i)
            for (int j = 0; j < s.cols(); ++j) s(i, j) = n01(rng);
        MomentEstimate est = estimate_moments(s);
        CHECK(est.mean.cwiseAbs().maxCoeff() < 0.05);
        CHECK((est.cov - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.05);
        CHECK_FALSE(est.factor.ridged);
    }
    SUBCASE("too few samples") {
        CHECK_THROWS_AS(estimate_moments(Eigen::MatrixXd::Zero(1, 3)), std::invalid_argument);
    }
}

TEST_CASE("settings validation") {
    OpfSettings ok;
    CHECK_NOTHROW(ok.validate());
    OpfSettings bad = ok;
    bad.eps_gen = 0.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ok;
    bad.eps_branch = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ok;
    bad.delta = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ok;
    bad.pieces = 4;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ok;
    bad.pieces = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("fleet validation") {
    Network net = parse_case_file(data_path("case30.m"));
    WindFleet bad_bus{{{999, 10.0}}};
    CHECK_THROWS_AS(bad_bus.validate(net), std::out_of_range);
    WindFleet bad_mw{{{5, -1.0}}};
    CHECK_THROWS_AS(bad_mw.validate(net), std::invalid_argument);
}

TEST_CASE("emitted block and row counts follow the band arithmetic") {
    Network net = parse_case_file(data_path("case39.m"));
    DcOperators ops = dc_operators(net);
    WindFleet fleet{{{4, 50.0}, {14, 40.0}, {27, 30.0}, {33, 60.0}}};
    Eigen::VectorXd stds = Eigen::VectorXd::Constant(4, 20.0);
    MomentEstimate moments = analytic_moments(Eigen::VectorXd::Zero(4), stds);

    OpfSettings cfg;
    cfg.pieces = 7;
    RiskSpec spec(cfg.eps_gen, cfg.delta);
    LevelPolyline poly = construct_points(spec, cfg.pieces);

    OpfModel model = assemble(net, ops, fleet, moments, cfg, poly, poly);
    const int ng = 10;
    int limited = 0;
    for (const Branch& br : net.branches)
        if (br.rate_mw > 0.0) ++limited;
    const int nbands = ng + limited;

    CHECK(model.bands.size() == size_t(nbands));
    CHECK(model.program.socs().size() == size_t(nbands));
    // alpha nonnegativity plus (N+1) membership rows per band.
    CHECK(model.program.inequalities().size() == size_t(ng + (cfg.pieces + 1) * nbands));
    // convex combination + total balance + (nb-1) nodal rows + slack pin.
    CHECK(model.program.equalities().size() == size_t(net.buses.size() + 2));
    // pbar, alpha, theta, one scale per band.
    CHECK(model.program.num_variables() == 2 * ng + int(net.buses.size()) + nbands);
    for (const BandRef& b : model.bands) CHECK(b.handle.num_ineq == cfg.pieces + 1);
}

TEST_CASE("zero-uncertainty robust dispatch approaches the deterministic optimum") {
    Network net = parse_case_file(data_path("case30.m"));
    DcOperators ops = dc_operators(net);
    WindFleet fleet{{{5, 20.0}, {11, 15.0}, {21, 25.0}}};

    // Constant training samples: zero covariance, ridge only.
    Eigen::MatrixXd samples = Eigen::MatrixXd::Zero(16, 3);
    MomentEstimate moments = estimate_moments(samples);
    REQUIRE(moments.factor.ridged);

    OpfSettings cfg;
    cfg.delta = 1e-6;
    cfg.pieces = 5;
    RiskSpec spec(cfg.eps_gen, cfg.delta);
    LevelPolyline poly = construct_points(spec, cfg.pieces);

    SolveStatus st;
    OpfModel robust = assemble(net, ops, fleet, moments, cfg, poly, poly);
    double robust_cost = solve_cost(robust, &st);
    REQUIRE(st == SolveStatus::optimal);

    OpfModel det = assemble_deterministic(net, ops, fleet);
    double det_cost = solve_cost(det, &st);
    REQUIRE(st == SolveStatus::optimal);

    // Shrinking the uncertainty to the ridge leaves only a vanishing gap,
    // and the robust feasible set is contained in the deterministic one.
    CHECK(robust_cost >= det_cost - 1e-6 * std::abs(det_cost));
    CHECK(robust_cost == doctest::Approx(det_cost).epsilon(1e-4));
}

TEST_CASE("deterministic dispatch respects limits and balance") {
    Network net = parse_case_file(data_path("case39.m"));
    DcOperators ops = dc_operators(net);
    WindFleet fleet{{{4, 100.0}, {14, 150.0}}};
    OpfModel det = assemble_deterministic(net, ops, fleet);
    Solution sol = solve(det.program);
    REQUIRE(sol.status == SolveStatus::optimal);
    Dispatch d = extract_dispatch(det, sol);

    double total = d.pbar_mw.sum() + 250.0;
    CHECK(total == doctest::Approx(net.total_load_mw()).epsilon(1e-6));
    for (int g = 0; g < det.num_gens; ++g) {
        CHECK(d.pbar_mw[g] >= net.gens[g].pmin_mw - 1e-5);
        CHECK(d.pbar_mw[g] <= net.gens[g].pmax_mw + 1e-5);
    }
    CHECK(d.alpha.size() == 0);
    CHECK(d.scale.empty());
}

TEST_CASE("infeasible capacity is reported, not crashed") {
    // Two buses, one 10 MW generator, 50 MW of load.
    std::string txt = R"(
mpc.baseMVA = 100;
mpc.bus = [
    1 3 0  0 0 0 1 1 0 135 1 1.06 0.94;
    2 1 50 0 0 0 1 1 0 135 1 1.06 0.94;
];
mpc.gen = [
    1 0 0 0 0 1 100 1 10 0 0 0 0 0 0 0 0 0 0 0 0;
];
mpc.gencost = [
    2 0 0 3 0.1 10 0;
];
mpc.branch = [
    1 2 0 0.1 0 100 100 100 0 0 1 -360 360;
];
)";
    Network net = parse_case(txt);
    DcOperators ops = dc_operators(net);
    OpfModel det = assemble_deterministic(net, ops, WindFleet{});
    Solution sol = solve(det.program);
    CHECK((sol.status == SolveStatus::infeasible || sol.status == SolveStatus::unbounded));
}

TEST_CASE("solved 118-bus robust dispatch: every band passes the exact membership test") {
    Case118Setup s = make_case118();
    OpfSettings cfg;  // eps 0.05 / 0.05, delta 0.05, 7 pieces
    RiskSpec spec(cfg.eps_gen, cfg.delta);
    LevelPolyline poly = construct_points(spec, cfg.pieces);

    OpfModel model = assemble(s.net, s.ops, s.fleet, s.moments, cfg, poly, poly);
    auto t0 = std::chrono::steady_clock::now();
    Solution sol = solve(model.program);
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - t0)
                  .count();
    MESSAGE("118-bus solve: ", ms, " ms, ", sol.iterations, " iterations");
    REQUIRE(sol.status == SolveStatus::optimal);

    Dispatch d = extract_dispatch(model, sol);
    CHECK(d.alpha.sum() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(d.alpha.minCoeff() >= -1e-7);

    // Reconstruct each band's (x, ell, u) from the dispatch and check it
    // against the exact safe set, independently of the emitted rows.
    Tolerances loose;
    loose.abs_tol = 1e-6;
    loose.root_tol = 1e-6;
    const int nf = model.num_farms;
    int checked = 0;
    for (const BandRef& band : model.bands) {
        Eigen::VectorXd x(nf);
        double lo, hi;
        if (band.kind == BandKind::generator) {
            int g = band.element;
            x.setConstant(-d.alpha[g]);
            lo = s.net.gens[g].pmin_mw - d.pbar_mw[g];
            hi = s.net.gens[g].pmax_mw - d.pbar_mw[g];
        } else {
            const Branch& br = s.net.branches[band.element];
            int bi = s.net.bus_index(br.from), bj = s.net.bus_index(br.to);
            double beta = 1.0 / br.x;
            Eigen::VectorXd w = s.ops.bpinv.row(bi) - s.ops.bpinv.row(bj);
            double shift = 0.0;
            for (int g = 0; g < model.num_gens; ++g)
                shift += w[s.net.bus_index(s.net.gens[g].bus)] * d.alpha[g];
            for (int k = 0; k < nf; ++k)
                x[k] = beta * (w[s.net.bus_index(s.fleet.farms[size_t(k)].bus)] - shift);
            double fbar = beta * (d.theta[bi] - d.theta[bj]);
            lo = -br.rate_mw - fbar;
            hi = br.rate_mw - fbar;
        }
        CHECK(z_membership(spec, s.moments.mean, s.moments.factor.L, x, Band{lo, hi}, loose));
        ++checked;
    }
    CHECK(checked == int(model.bands.size()));
}

TEST_CASE("robust cost is monotone in the radius and in the polyline size") {
    Case118Setup s = make_case118();

    SUBCASE("nondecreasing in delta") {
        double prev = -1e300;
        for (double delta : {0.01, 0.05, 0.1}) {
            OpfSettings cfg;
            cfg.delta = delta;
            cfg.pieces = 5;
            RiskSpec spec(cfg.eps_gen, delta);
            LevelPolyline poly = construct_points(spec, cfg.pieces);
            SolveStatus st;
            double cost = solve_cost(assemble(s.net, s.ops, s.fleet, s.moments, cfg, poly, poly),
                                     &st);
            CAPTURE(delta);
            REQUIRE(st == SolveStatus::optimal);
            CHECK(cost >= prev - 1e-5 * std::abs(cost));
            prev = cost;
        }
    }
    SUBCASE("nonincreasing in the polyline size") {
        double prev = 1e300;
        for (int n : {3, 5, 9}) {
            OpfSettings cfg;
            cfg.pieces = n;
            RiskSpec spec(cfg.eps_gen, cfg.delta);
            LevelPolyline poly = construct_points(spec, cfg.pieces);
            SolveStatus st;
            double cost = solve_cost(assemble(s.net, s.ops, s.fleet, s.moments, cfg, poly, poly),
                                     &st);
            CAPTURE(n);
            REQUIRE(st == SolveStatus::optimal);
            CHECK(cost <= prev + 1e-5 * std::abs(cost));
            prev = cost;
        }
    }
}
