#include "wdrcc/opf.hpp"

#include <stdexcept>
#include <string>

namespace wdrcc {

void WindFleet::validate(const Network& net) const {
    for (const WindFarm& f : farms) {
        net.bus_index(f.bus);  // throws on unknown bus
        if (!(f.forecast_mw >= 0.0))
            throw std::invalid_argument("wind forecast must be nonnegative at bus " +
                                        std::to_string(f.bus));
    }
}

Eigen::VectorXd WindFleet::forecast_mw() const {
    Eigen::VectorXd mu(static_cast<int>(farms.size()));
    for (size_t i = 0; i < farms.size(); ++i) mu[static_cast<int>(i)] = farms[i].forecast_mw;
    return mu;
}

MomentEstimate estimate_moments(const Eigen::MatrixXd& samples) {
    const int m = static_cast<int>(samples.rows());
    const int d = static_cast<int>(samples.cols());
    if (m < 2) throw std::invalid_argument("moment estimation needs at least 2 samples");
    if (d < 1) throw std::invalid_argument("moment estimation needs at least 1 column");

    MomentEstimate est;
    est.sample_count = m;
    est.mean = samples.colwise().mean();
    Eigen::MatrixXd centered = samples.rowwise() - est.mean.transpose();
    est.cov = (centered.transpose() * centered) / double(m - 1);
    est.cov = 0.5 * (est.cov + est.cov.transpose().eval());
    est.factor = factor_covariance(est.cov);
    return est;
}

void OpfSettings::validate() const {
    if (!(eps_gen > 0.0 && eps_gen < 0.5))
        throw std::invalid_argument("generation violation budget must lie in (0, 1/2)");
    if (!(eps_branch > 0.0 && eps_branch < 0.5))
        throw std::invalid_argument("flow violation budget must lie in (0, 1/2)");
    if (!(delta > 0.0)) throw std::invalid_argument("radius must be positive");
    if (pieces < 3 || pieces % 2 == 0)
        throw std::invalid_argument("polyline size must be odd and at least 3");
}

namespace {

Eigen::VectorXd bus_wind_vector(const Network& net, const WindFleet& fleet) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<int>(net.buses.size()));
    for (const WindFarm& f : fleet.farms) w[net.bus_index(f.bus)] += f.forecast_mw;
    return w;
}

void add_cost_and_balance(OpfModel& model, const Network& net, const DcOperators& ops,
                          const Eigen::VectorXd& bus_wind_mw, const std::vector<int>& pbar,
                          const std::vector<int>& theta) {
    ConicProgram& prog = model.program;
    const int ng = static_cast<int>(net.gens.size());
    const int nb = static_cast<int>(net.buses.size());

    for (int g = 0; g < ng; ++g) {
        const Generator& gen = net.gens[g];
        if (gen.c2 > 0.0) prog.add_quadratic_cost(pbar[g], gen.c2);
        if (gen.c1 != 0.0) prog.add_linear_cost(pbar[g], gen.c1);
        prog.add_constant_cost(gen.c0);
    }

    // Total balance: sum pbar + sum wind forecast = total load.
    AffineExpr balance = AffineExpr::lit(bus_wind_mw.sum() - net.total_load_mw());
    for (int g = 0; g < ng; ++g) balance = balance + AffineExpr::var(pbar[g]);
    prog.add_equality(balance);

    // Per-bus DC balance, slack row dropped; slack angle pinned to zero.
    const int slack = net.bus_index(net.slack_bus);
    for (int b = 0; b < nb; ++b) {
        if (b == slack) continue;
        AffineExpr row = AffineExpr::lit(net.buses[b].pd_mw - bus_wind_mw[b]);
        for (int c = 0; c < nb; ++c) {
            double w = ops.bbus(b, c);
            if (w != 0.0) row = row + AffineExpr::var(theta[c], w);
        }
        for (int g = 0; g < ng; ++g)
            if (net.bus_index(net.gens[g].bus) == b) row = row - AffineExpr::var(pbar[g]);
        prog.add_equality(row);
    }
    prog.add_equality(AffineExpr::var(theta[slack]));
}

}  // namespace

OpfModel assemble(const Network& net, const DcOperators& ops, const WindFleet& fleet,
                  const MomentEstimate& moments, const OpfSettings& cfg,
                  const LevelPolyline& gen_poly, const LevelPolyline& branch_poly) {
    cfg.validate();
    fleet.validate(net);
    const int nf = static_cast<int>(fleet.farms.size());
    if (nf < 1) throw std::invalid_argument("robust dispatch needs at least one wind site");
    if (moments.mean.size() != nf || moments.factor.L.rows() != nf)
        throw std::invalid_argument("moment dimension does not match the wind fleet");
    if (gen_poly.spec.epsilon != cfg.eps_gen || branch_poly.spec.epsilon != cfg.eps_branch ||
        gen_poly.spec.delta != cfg.delta || branch_poly.spec.delta != cfg.delta)
        throw std::invalid_argument("polyline risk spec does not match the settings");

    OpfModel model;
    ConicProgram& prog = model.program;
    const int ng = static_cast<int>(net.gens.size());
    const int nb = static_cast<int>(net.buses.size());
    model.num_gens = ng;
    model.num_buses = nb;
    model.num_farms = nf;

    std::vector<int> pbar, alpha, theta;
    model.pbar0 = prog.num_variables();
    for (int g = 0; g < ng; ++g) pbar.push_back(prog.add_variable("p" + std::to_string(g)));
    model.alpha0 = prog.num_variables();
    for (int g = 0; g < ng; ++g) alpha.push_back(prog.add_variable("a" + std::to_string(g)));
    model.theta0 = prog.num_variables();
    for (int b = 0; b < nb; ++b) theta.push_back(prog.add_variable("th" + std::to_string(b)));

    Eigen::VectorXd bus_wind = bus_wind_vector(net, fleet);
    add_cost_and_balance(model, net, ops, bus_wind, pbar, theta);

    // Participation factors form a convex combination.
    AffineExpr asum = AffineExpr::lit(-1.0);
    for (int g = 0; g < ng; ++g) asum = asum + AffineExpr::var(alpha[g]);
    prog.add_equality(asum);
    for (int g = 0; g < ng; ++g) prog.add_inequality(-1.0 * AffineExpr::var(alpha[g]));

    // Generator bands: pmin <= pbar_g - alpha_g * (1' xi) <= pmax.
    for (int g = 0; g < ng; ++g) {
        const Generator& gen = net.gens[g];
        std::vector<AffineExpr> row(nf, -1.0 * AffineExpr::var(alpha[g]));
        AffineExpr hi = AffineExpr::lit(gen.pmax_mw) - AffineExpr::var(pbar[g]);
        AffineExpr lo = AffineExpr::lit(gen.pmin_mw) - AffineExpr::var(pbar[g]);
        DrccHandle h =
            add_two_sided_drcc(prog, row, lo, hi, moments.mean, moments.factor.L, gen_poly);
        model.bands.push_back({BandKind::generator, g, h});
    }

    // Flow bands: the branch flow responds to the error at wind bus k
    // through the network, and to the recourse -alpha * (1' xi) at every
    // generator bus; both responses ride on the angle pseudoinverse.
    const int ne = static_cast<int>(net.branches.size());
    for (int e = 0; e < ne; ++e) {
        const Branch& br = net.branches[e];
        if (br.rate_mw <= 0.0) continue;  // unlimited
        const int bi = net.bus_index(br.from);
        const int bj = net.bus_index(br.to);
        const double beta = 1.0 / br.x;

        // w = Bpinv' (e_i - e_j); symmetric Bpinv, so rows serve.
        Eigen::VectorXd w = ops.bpinv.row(bi) - ops.bpinv.row(bj);
        AffineExpr shift;  // w' alpha_full, alpha lifted to buses
        for (int g = 0; g < ng; ++g) {
            double wg = w[net.bus_index(net.gens[g].bus)];
            if (wg != 0.0) shift = shift + AffineExpr::var(alpha[g], wg);
        }
        std::vector<AffineExpr> row;
        row.reserve(nf);
        for (int k = 0; k < nf; ++k) {
            double wk = w[net.bus_index(fleet.farms[static_cast<size_t>(k)].bus)];
            row.push_back(beta * (AffineExpr::lit(wk) - shift));
        }
        AffineExpr fbar = beta * (AffineExpr::var(theta[bi]) - AffineExpr::var(theta[bj]));
        AffineExpr hi = AffineExpr::lit(br.rate_mw) - fbar;
        AffineExpr lo = AffineExpr::lit(-br.rate_mw) - fbar;
        DrccHandle h =
            add_two_sided_drcc(prog, row, lo, hi, moments.mean, moments.factor.L, branch_poly);
        model.bands.push_back({BandKind::branch, e, h});
    }
    return model;
}

OpfModel assemble_deterministic(const Network& net, const DcOperators& ops,
                                const WindFleet& fleet) {
    fleet.validate(net);
    OpfModel model;
    ConicProgram& prog = model.program;
    const int ng = static_cast<int>(net.gens.size());
    const int nb = static_cast<int>(net.buses.size());
    model.num_gens = ng;
    model.num_buses = nb;
    model.num_farms = static_cast<int>(fleet.farms.size());

    std::vector<int> pbar, theta;
    model.pbar0 = prog.num_variables();
    for (int g = 0; g < ng; ++g) pbar.push_back(prog.add_variable("p" + std::to_string(g)));
    model.theta0 = prog.num_variables();
    for (int b = 0; b < nb; ++b) theta.push_back(prog.add_variable("th" + std::to_string(b)));

    Eigen::VectorXd bus_wind = bus_wind_vector(net, fleet);
    add_cost_and_balance(model, net, ops, bus_wind, pbar, theta);

    for (int g = 0; g < ng; ++g) {
        prog.add_inequality(AffineExpr::var(pbar[g]) - net.gens[g].pmax_mw);
        prog.add_inequality(net.gens[g].pmin_mw - AffineExpr::var(pbar[g]));
    }
    const int ne = static_cast<int>(net.branches.size());
    for (int e = 0; e < ne; ++e) {
        const Branch& br = net.branches[e];
        if (br.rate_mw <= 0.0) continue;
        const double beta = 1.0 / br.x;
        AffineExpr fbar = beta * (AffineExpr::var(theta[net.bus_index(br.from)]) -
                                  AffineExpr::var(theta[net.bus_index(br.to)]));
        prog.add_inequality(fbar - br.rate_mw);
        prog.add_inequality(-1.0 * fbar - br.rate_mw);
    }
    return model;
}

std::vector<BandGeometry> band_geometry(const Network& net, const DcOperators& ops,
                                        const WindFleet& fleet, const Dispatch& d) {
    fleet.validate(net);
    const int ng = static_cast<int>(net.gens.size());
    const int nb = static_cast<int>(net.buses.size());
    const int nf = static_cast<int>(fleet.farms.size());
    if (d.pbar_mw.size() != ng || d.theta.size() != nb)
        throw std::invalid_argument("dispatch does not match the network");
    if (d.alpha.size() != 0 && d.alpha.size() != ng)
        throw std::invalid_argument("participation vector does not match the generators");
    const bool recourse = d.alpha.size() == ng;

    std::vector<BandGeometry> out;
    for (int g = 0; g < ng; ++g) {
        const Generator& gen = net.gens[g];
        BandGeometry b{BandKind::generator, g,
                       Eigen::VectorXd::Constant(nf, recourse ? -d.alpha[g] : 0.0),
                       gen.pmin_mw - d.pbar_mw[g], gen.pmax_mw - d.pbar_mw[g]};
        out.push_back(std::move(b));
    }
    const int ne = static_cast<int>(net.branches.size());
    for (int e = 0; e < ne; ++e) {
        const Branch& br = net.branches[e];
        if (br.rate_mw <= 0.0) continue;
        const int bi = net.bus_index(br.from);
        const int bj = net.bus_index(br.to);
        const double beta = 1.0 / br.x;
        Eigen::VectorXd w = ops.bpinv.row(bi) - ops.bpinv.row(bj);
        double shift = 0.0;
        if (recourse)
            for (int g = 0; g < ng; ++g) shift += w[net.bus_index(net.gens[g].bus)] * d.alpha[g];
        BandGeometry b{BandKind::branch, e, Eigen::VectorXd(nf), 0.0, 0.0};
        for (int k = 0; k < nf; ++k)
            b.coef[k] = beta * (w[net.bus_index(fleet.farms[static_cast<size_t>(k)].bus)] - shift);
        double fbar = beta * (d.theta[bi] - d.theta[bj]);
        b.lo = -br.rate_mw - fbar;
        b.hi = br.rate_mw - fbar;
        out.push_back(std::move(b));
    }
    return out;
}

Dispatch extract_dispatch(const OpfModel& model, const Solution& sol) {
    Dispatch d;
    d.status = sol.status;
    d.objective = sol.objective;
    d.residuals = sol.residuals;
    d.iterations = sol.iterations;
    if (sol.x.size() < model.program.num_variables()) return d;

    d.pbar_mw = sol.x.segment(model.pbar0, model.num_gens);
    if (model.alpha0 >= 0) d.alpha = sol.x.segment(model.alpha0, model.num_gens);
    d.theta = sol.x.segment(model.theta0, model.num_buses);
    d.scale.reserve(model.bands.size());
    for (const BandRef& b : model.bands) d.scale.push_back(sol.x[b.handle.scale_var]);
    return d;
}

}  // namespace wdrcc
