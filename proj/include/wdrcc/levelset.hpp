#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wdrcc/gaussian.hpp"

namespace wdrcc {

// Risk parameters of a distributionally robust two-sided chance
// constraint: violation budget epsilon, Wasserstein radius delta
// (radius measured per unit of the dual norm of the row vector).
struct RiskSpec {
    double epsilon;
    double delta;

    RiskSpec(double eps, double del) : epsilon(eps), delta(del) { validate(); }
    void validate() const;
};

// A two-sided band [ell, u]; ell <= u is required wherever a Band is
// consumed. Infinite endpoints are allowed for one side at a time.
struct Band {
    double ell;
    double u;
};

// Piecewise-linear inner approximation of the level set
// { (ell,u) : g(ell,u) = delta }, vertices sorted by decreasing ell
// (equivalently decreasing u). Odd count, symmetric under
// (ell,u) -> (-u,-ell), each vertex on the level curve.
struct LevelPolyline {
    RiskSpec spec;
    std::vector<Band> points;

    void validate(const Tolerances& tol = {}) const;
    std::string to_json() const;
    static LevelPolyline from_json(const std::string& text);
};

// Decomposition of the inner-approximation quality certificate:
// bound = max(tau_sq_max, tail upper ratio, tail lower ratio) >= 1,
// and sup over the approximation boundary of g/delta <= bound.
struct ApproxBound {
    double tau_sq_max;
    double tail_upper;
    double tail_lower;
    double bound;
};

// g(ell,u) = integral_0^inf [Phi(u-t) - Phi(ell+t) - (1-eps)]+ dt,
// evaluated semi-analytically: the integrand is strictly decreasing
// where positive, so after locating its root t* the integral collapses
// to differences of the cdf antiderivative. Accepts ell = -inf or
// u = +inf (not both); requires ell <= u and no NaN.
double eval_g(const RiskSpec& spec, const Band& band, const Tolerances& tol = {});

// Same value through the variational identity
// g = integral_0^VaR (P[dist >= t] - (1-eps)) dt with dist the distance
// to the complement of [ell,u]. Defined only when
// Phi(u) - Phi(ell) >= 1 - eps; used as an independent tie-breaker.
double eval_g_var_form(const RiskSpec& spec, const Band& band, const Tolerances& tol = {});

// One-sided limits: gbar(u) = lim_{ell->-inf} g, gunder(ell) = lim_{u->+inf} g.
double eval_gbar(const RiskSpec& spec, double u);
double eval_gunder(const RiskSpec& spec, double ell);

// Largest t with Phi(u-t) - Phi(ell+t) - (1-eps) >= 0, or 0 when the
// integrand starts nonpositive. Exposed for derivative formulas.
double truncation_point(const RiskSpec& spec, const Band& band, const Tolerances& tol = {});

// Asymptotes of the level curve: u* solves gbar(u*) = delta and
// ell* = -u*. Returned as (ell*, u*).
Band solve_asymptotes(const RiskSpec& spec, const Tolerances& tol = {});

// Apex of the level curve: u0 with g(-u0, u0) = delta.
double solve_symmetric_u0(const RiskSpec& spec, const Tolerances& tol = {});

// For ell strictly left of the asymptote (gunder(ell) > delta), the
// unique u with g(ell,u) = delta. Throws NoRootError otherwise.
double solve_u_on_levelset(const RiskSpec& spec, double ell, const Tolerances& tol = {});

// Level-curve sampling: apex point, (n_points-1)/2 grid points between
// apex and asymptote paired through the level curve, plus their mirror
// images. n_points must be odd and >= 3.
LevelPolyline construct_points(const RiskSpec& spec, int n_points, const Tolerances& tol = {});

// Membership of (ell,u) in the polyhedron induced by the polyline:
// ell <= ell_1, u >= u_N, and below every chord extension.
bool polyline_contains(const LevelPolyline& poly, const Band& band);

// Membership in the exact standardized safe set: g(ell,u) >= delta
// up to tol.abs_tol.
bool z0_membership(const RiskSpec& spec, const Band& band, const Tolerances& tol = {});

// Membership of a raw row: ell <= x'xi <= u must be robustly satisfied
// for xi with mean mu and covariance factor L (Sigma = L L'). Reduces
// to z0_membership after standardizing by the dual norm |L'x|_2; the
// zero row degenerates to ell <= 0 <= u.
bool z_membership(const RiskSpec& spec, const Eigen::VectorXd& mu, const Eigen::MatrixXd& L,
                  const Eigen::VectorXd& x, const Band& band, const Tolerances& tol = {});

// Curvature certificate of Lemma-2 type for one chord of the level
// curve: both endpoints must satisfy g = delta (within tol.root_tol);
// returns tau >= 1 with sup over the chord of g <= tau^2 * delta.
double segment_tau(const RiskSpec& spec, const Band& p1, const Band& p2,
                   const Tolerances& tol = {});

// Max abs difference between the analytic chord derivative of g and a
// central finite difference (step 1e-5), over lambda in {0, 1/2, 1}.
double endpoint_derivative_fd_check(const RiskSpec& spec, const Band& p1, const Band& p2);

// Certified approximation ratio of the polyline against the true safe set.
ApproxBound apx_bound(const RiskSpec& spec, const LevelPolyline& poly,
                      const Tolerances& tol = {});

// Direct scan: max of g over the boundary of the induced polyhedron
// (golden-section per chord plus the two tail suprema).
double max_g_on_boundary(const RiskSpec& spec, const LevelPolyline& poly,
                         const Tolerances& tol = {});

}  // namespace wdrcc
