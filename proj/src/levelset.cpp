#include "wdrcc/levelset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "wdrcc/rootfind.hpp"

namespace wdrcc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_band(const Band& b) {
    if (std::isnan(b.ell) || std::isnan(b.u))
        throw std::domain_error("Band: NaN endpoint");
    if (b.ell > b.u) throw std::invalid_argument("Band: ell must be <= u");
}

// Integrand of g at offset t.
double psi(const RiskSpec& spec, const Band& b, double t) {
    return std_cdf(b.u - t) - std_cdf(b.ell + t) - (1.0 - spec.epsilon);
}

}  // namespace

void RiskSpec::validate() const {
    if (!std::isfinite(epsilon) || !(epsilon > 0.0) || !(epsilon < 0.5))
        throw std::invalid_argument("RiskSpec: epsilon must lie in (0, 0.5)");
    if (!std::isfinite(delta) || !(delta >= 1e-8))
        throw std::invalid_argument("RiskSpec: delta must be >= 1e-8");
}

double eval_gbar(const RiskSpec& spec, double u) {
    if (std::isnan(u)) throw std::domain_error("eval_gbar: NaN input");
    if (u == kInf) throw std::domain_error("eval_gbar: u must be < +inf");
    double ze = std_quantile(1.0 - spec.epsilon);
    if (u <= ze) return 0.0;
    return cdf_antiderivative(u) - cdf_antiderivative(ze) - (1.0 - spec.epsilon) * (u - ze);
}

double eval_gunder(const RiskSpec& spec, double ell) { return eval_gbar(spec, -ell); }

double truncation_point(const RiskSpec& spec, const Band& b, const Tolerances& tol) {
    if (psi(spec, b, 0.0) <= 0.0) return 0.0;
    double hi = 1.0;
    while (psi(spec, b, hi) > 0.0) {
        hi *= 2.0;
        if (hi > 1e200) throw BracketError("truncation_point: no sign change found");
    }
    return brent_root([&](double t) { return psi(spec, b, t); }, 0.0, hi, tol.root_tol);
}

double eval_g(const RiskSpec& spec, const Band& b, const Tolerances& tol) {
    check_band(b);
    bool lo_inf = (b.ell == -kInf);
    bool hi_inf = (b.u == kInf);
    if (lo_inf && hi_inf)
        throw std::domain_error("eval_g: band unbounded on both sides");
    if (lo_inf) return eval_gbar(spec, b.u);
    if (hi_inf) return eval_gunder(spec, b.ell);
    if (psi(spec, b, 0.0) <= 0.0) return 0.0;
    double tstar = truncation_point(spec, b, tol);
    return (cdf_antiderivative(b.u) - cdf_antiderivative(b.u - tstar)) -
           (cdf_antiderivative(b.ell + tstar) - cdf_antiderivative(b.ell)) -
           (1.0 - spec.epsilon) * tstar;
}

double eval_g_var_form(const RiskSpec& spec, const Band& b, const Tolerances& tol) {
    check_band(b);
    if (!std::isfinite(b.ell) || !std::isfinite(b.u))
        throw std::domain_error("eval_g_var_form: endpoints must be finite");
    // Survival of the distance to the band's complement under a standard
    // normal: S(t) = Phi(u-t) - Phi(ell+t), defined for t >= 0.
    auto survival = [&](double t) { return std_cdf(b.u - t) - std_cdf(b.ell + t); };
    double s0 = survival(0.0);
    if (s0 < 1.0 - spec.epsilon)
        throw std::domain_error("eval_g_var_form: requires Phi(u) - Phi(ell) >= 1 - eps");
    double target = 1.0 - spec.epsilon;
    if (s0 == target) return 0.0;
    double hi = 1.0;
    while (survival(hi) > target) {
        hi *= 2.0;
        if (hi > 1e200) throw BracketError("eval_g_var_form: VaR bracket failed");
    }
    double var = brent_root([&](double t) { return survival(t) - target; }, 0.0, hi,
                            tol.root_tol);
    if (var <= 0.0) return 0.0;
    return adaptive_simpson([&](double t) { return survival(t) - target; }, 0.0, var,
                            tol.quad_tol);
}

Band solve_asymptotes(const RiskSpec& spec, const Tolerances& tol) {
    double ze = std_quantile(1.0 - spec.epsilon);
    double lo = ze, hi = ze + 1.0;
    while (eval_gbar(spec, hi) <= spec.delta) {
        hi = ze + 2.0 * (hi - ze);
        if (hi > 1e200) throw BracketError("solve_asymptotes: bracket failed");
    }
    double ustar = brent_root([&](double u) { return eval_gbar(spec, u) - spec.delta; },
                              lo, hi, tol.root_tol);
    return Band{-ustar, ustar};
}

double solve_symmetric_u0(const RiskSpec& spec, const Tolerances& tol) {
    double lo = std_quantile(1.0 - 0.5 * spec.epsilon);
    double hi = lo + 1.0;
    auto f = [&](double u) { return eval_g(spec, Band{-u, u}, tol) - spec.delta; };
    while (f(hi) <= 0.0) {
        hi = lo + 2.0 * (hi - lo);
        if (hi > 1e200) throw BracketError("solve_symmetric_u0: bracket failed");
    }
    return brent_root(f, lo, hi, tol.root_tol);
}

double solve_u_on_levelset(const RiskSpec& spec, double ell, const Tolerances& tol) {
    if (!std::isfinite(ell)) throw std::domain_error("solve_u_on_levelset: ell must be finite");
    if (eval_gunder(spec, ell) <= spec.delta)
        throw NoRootError("solve_u_on_levelset: gunder(ell) <= delta, level curve not reached");
    // Smallest u with positive g: where the band's mass is exactly 1-eps.
    double p = 1.0 - spec.epsilon + std_cdf(ell);
    double lo = std_quantile(p);
    auto f = [&](double u) { return eval_g(spec, Band{ell, u}, tol) - spec.delta; };
    double hi = lo + 1.0;
    while (f(hi) <= 0.0) {
        hi = lo + 2.0 * (hi - lo);
        if (hi > 1e200) throw BracketError("solve_u_on_levelset: bracket failed");
    }
    return brent_root(f, lo, hi, tol.root_tol);
}

LevelPolyline construct_points(const RiskSpec& spec, int n_points, const Tolerances& tol) {
    if (n_points < 3 || n_points % 2 == 0)
        throw std::invalid_argument("construct_points: n_points must be odd and >= 3");
    int m = (n_points - 1) / 2;
    double u0 = solve_symmetric_u0(spec, tol);
    double lbar = solve_asymptotes(spec, tol).ell;
    double h = (lbar + u0) / (m + 1);

    std::vector<Band> upper(m);
    for (int i = 1; i <= m; ++i) {
        double ell = -u0 + i * h;
        upper[i - 1] = Band{ell, solve_u_on_levelset(spec, ell, tol)};
    }
    LevelPolyline poly{spec, {}};
    poly.points.reserve(n_points);
    for (int i = m - 1; i >= 0; --i) poly.points.push_back(upper[i]);
    poly.points.push_back(Band{-u0, u0});
    for (int i = 0; i < m; ++i) poly.points.push_back(Band{-upper[i].u, -upper[i].ell});
    poly.validate(tol);
    return poly;
}

void LevelPolyline::validate(const Tolerances& tol) const {
    spec.validate();
    tol.validate();
    int n = static_cast<int>(points.size());
    if (n < 3 || n % 2 == 0)
        throw std::invalid_argument("LevelPolyline: point count must be odd and >= 3");
    for (int i = 0; i < n; ++i) {
        const Band& b = points[i];
        if (!std::isfinite(b.ell) || !std::isfinite(b.u) || !(b.ell < 0.0) || !(b.u > 0.0))
            throw std::invalid_argument("LevelPolyline: vertices must satisfy ell < 0 < u");
        if (i > 0 && (!(b.ell < points[i - 1].ell) || !(b.u < points[i - 1].u)))
            throw std::invalid_argument("LevelPolyline: vertices must strictly decrease");
        double resid = std::abs(eval_g(spec, b, tol) - spec.delta);
        if (resid > 10.0 * tol.root_tol)
            throw std::invalid_argument("LevelPolyline: vertex off the level curve");
        const Band& mirror = points[n - 1 - i];
        if (std::abs(b.ell + mirror.u) > 1e-9 || std::abs(b.u + mirror.ell) > 1e-9)
            throw std::invalid_argument("LevelPolyline: vertices must be symmetric");
    }
}

std::string LevelPolyline::to_json() const {
    nlohmann::json j;
    j["epsilon"] = spec.epsilon;
    j["delta"] = spec.delta;
    auto arr = nlohmann::json::array();
    for (const Band& b : points) arr.push_back({b.ell, b.u});
    j["points"] = arr;
    return j.dump(2);
}

LevelPolyline LevelPolyline::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    RiskSpec spec(j.at("epsilon").get<double>(), j.at("delta").get<double>());
    LevelPolyline poly{spec, {}};
    for (const auto& p : j.at("points")) {
        if (!p.is_array() || p.size() != 2)
            throw std::invalid_argument("LevelPolyline: each point must be [ell, u]");
        poly.points.push_back(Band{p[0].get<double>(), p[1].get<double>()});
    }
    poly.validate();
    return poly;
}

bool polyline_contains(const LevelPolyline& poly, const Band& band) {
    check_band(band);
    const auto& pts = poly.points;
    int n = static_cast<int>(pts.size());
    if (band.ell > pts.front().ell) return false;
    if (band.u < pts.back().u) return false;
    for (int i = 0; i + 1 < n; ++i) {
        double dl = pts[i].ell - pts[i + 1].ell;
        double du = pts[i].u - pts[i + 1].u;
        if ((band.u - pts[i].u) * dl < du * (band.ell - pts[i].ell)) return false;
    }
    return true;
}

bool z0_membership(const RiskSpec& spec, const Band& band, const Tolerances& tol) {
    return eval_g(spec, band, tol) >= spec.delta - tol.abs_tol;
}

bool z_membership(const RiskSpec& spec, const Eigen::VectorXd& mu, const Eigen::MatrixXd& L,
                  const Eigen::VectorXd& x, const Band& band, const Tolerances& tol) {
    check_band(band);
    if (mu.size() != x.size() || L.rows() != x.size() || L.cols() != x.size())
        throw std::invalid_argument("z_membership: dimension mismatch");
    double shift = mu.dot(x);
    double dual = (L.transpose() * x).norm();
    if (dual == 0.0) return band.ell <= shift && shift <= band.u;
    return z0_membership(
        spec, Band{(band.ell - shift) / dual, (band.u - shift) / dual}, tol);
}

namespace {

// d/dlambda of g along the chord p1 + lambda (p2 - p1), via Leibniz on
// the truncated integral (the boundary term vanishes at t*).
double chord_derivative(const RiskSpec& spec, const Band& p1, const Band& p2, double lambda,
                        const Tolerances& tol) {
    Band p{(1.0 - lambda) * p1.ell + lambda * p2.ell,
           (1.0 - lambda) * p1.u + lambda * p2.u};
    if (psi(spec, p, 0.0) <= 0.0) return 0.0;
    double tstar = truncation_point(spec, p, tol);
    double dup = std_cdf(p.u) - std_cdf(p.u - tstar);
    double dlow = std_cdf(p.ell + tstar) - std_cdf(p.ell);
    return (p2.u - p1.u) * dup - (p2.ell - p1.ell) * dlow;
}

double chord_value(const RiskSpec& spec, const Band& p1, const Band& p2, double lambda,
                   const Tolerances& tol) {
    return eval_g(spec,
                  Band{(1.0 - lambda) * p1.ell + lambda * p2.ell,
                       (1.0 - lambda) * p1.u + lambda * p2.u},
                  tol);
}

}  // namespace

double segment_tau(const RiskSpec& spec, const Band& p1, const Band& p2,
                   const Tolerances& tol) {
    check_band(p1);
    check_band(p2);
    double g1 = eval_g(spec, p1, tol), g2 = eval_g(spec, p2, tol);
    if (std::abs(g1 - spec.delta) > 100.0 * tol.root_tol ||
        std::abs(g2 - spec.delta) > 100.0 * tol.root_tol)
        throw std::invalid_argument("segment_tau: endpoints must lie on the level curve");
    double scale = std::max({1.0, std::abs(p1.ell), std::abs(p1.u)});
    if (std::abs(p1.ell - p2.ell) < 1e-13 * scale && std::abs(p1.u - p2.u) < 1e-13 * scale)
        return 1.0;

    // Work with h = sqrt(g): h is concave along the chord, equal to
    // sqrt(delta) at both ends. The tangent from the left endpoint and
    // the chord of h meet at lambda*, where the ratio peaks.
    double h0 = std::sqrt(g1), h1 = std::sqrt(g2);
    double dh0 = chord_derivative(spec, p1, p2, 0.0, tol) / (2.0 * h0);
    double dh1 = chord_derivative(spec, p1, p2, 1.0, tol) / (2.0 * h1);
    double den = dh0 - dh1;
    if (!(den > 1e-15)) return 1.0;
    double lam = (h1 - h0 - dh1) / den;
    lam = std::clamp(lam, 0.0, 1.0);
    double tangent = h0 + dh0 * lam;
    double secant = h0 + (h1 - h0) * lam;
    if (!(secant > 0.0)) return 1.0;
    return std::max(1.0, tangent / secant);
}

double endpoint_derivative_fd_check(const RiskSpec& spec, const Band& p1, const Band& p2) {
    Tolerances tol;
    const double h = 1e-5;
    double worst = 0.0;
    for (double lam : {0.0, 0.5, 1.0}) {
        double analytic = chord_derivative(spec, p1, p2, lam, tol);
        double fd = (chord_value(spec, p1, p2, lam + h, tol) -
                     chord_value(spec, p1, p2, lam - h, tol)) /
                    (2.0 * h);
        worst = std::max(worst, std::abs(analytic - fd));
    }
    return worst;
}

ApproxBound apx_bound(const RiskSpec& spec, const LevelPolyline& poly, const Tolerances& tol) {
    poly.validate(tol);
    double tau_sq = 1.0;
    for (size_t i = 0; i + 1 < poly.points.size(); ++i) {
        double t = segment_tau(spec, poly.points[i], poly.points[i + 1], tol);
        tau_sq = std::max(tau_sq, t * t);
    }
    double tail_up = eval_gbar(spec, poly.points.back().u) / spec.delta;
    double tail_lo = eval_gunder(spec, poly.points.front().ell) / spec.delta;
    return ApproxBound{tau_sq, tail_up, tail_lo,
                       std::max({tau_sq, tail_up, tail_lo})};
}

double max_g_on_boundary(const RiskSpec& spec, const LevelPolyline& poly,
                         const Tolerances& tol) {
    poly.validate(tol);
    double best = 0.0;
    for (size_t i = 0; i + 1 < poly.points.size(); ++i) {
        const Band& a = poly.points[i];
        const Band& b = poly.points[i + 1];
        best = std::max(best, golden_max([&](double lam) {
                            return chord_value(spec, a, b, lam, tol);
                        }, 0.0, 1.0, 1e-10));
    }
    best = std::max(best, eval_gbar(spec, poly.points.back().u));
    best = std::max(best, eval_gunder(spec, poly.points.front().ell));
    return best;
}

}  // namespace wdrcc
