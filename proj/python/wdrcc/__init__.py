"""Wasserstein-robust two-sided chance constraints via conic inner
approximations, applied to chance-constrained DC optimal power flow.

The heavy lifting lives in the compiled extension; this package re-exports
it and adds one convenience wrapper for the common end-to-end pipeline.
"""

from wdrcc._core import (
    ApproxBound,
    Band,
    BandGeometry,
    BandKind,
    Branch,
    Bus,
    DcOperators,
    Dispatch,
    Family,
    Generator,
    KktResiduals,
    LevelPolyline,
    Marginal,
    MomentEstimate,
    Network,
    OosResult,
    OpfModel,
    OpfSettings,
    RiskSpec,
    Solution,
    SolveStatus,
    SolverOptions,
    TruthModel,
    WindFarm,
    WindFleet,
    __version__,
    apx_bound,
    assemble,
    assemble_deterministic,
    band_geometry,
    construct_points,
    dc_operators,
    estimate_moments,
    eval_g,
    eval_g_var_form,
    eval_gbar,
    eval_gunder,
    max_g_on_boundary,
    oos_satisfaction,
    parse_case,
    parse_case_file,
    polyline_contains,
    sample,
    solve_asymptotes,
    solve_conic_json,
    solve_symmetric_u0,
    solve_u_on_levelset,
    z0_membership,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]


def solve_dispatch(network, fleet, moments, settings=None, operators=None, options=None):
    """Assemble and solve one robust dispatch instance.

    Builds the DC operators and level polylines from ``settings`` (defaults
    when omitted), then returns the decoded :class:`Dispatch`.
    """
    settings = settings or OpfSettings()
    operators = operators or dc_operators(network)
    gen_poly = construct_points(RiskSpec(settings.eps_gen, settings.delta), settings.pieces)
    if settings.eps_branch == settings.eps_gen:
        branch_poly = gen_poly
    else:
        branch_poly = construct_points(
            RiskSpec(settings.eps_branch, settings.delta), settings.pieces
        )
    model = assemble(network, operators, fleet, moments, settings, gen_poly, branch_poly)
    return model.solve(options) if options is not None else model.solve()
