"""End-to-end chart construction: cutoff, continuation, B, G and F = G o H."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dbar import DbarConfig, compose_F, cr_residual, solve_G
from .errors import NoConvergence, RoughACSError, TooFewBlocks
from .grid import Field, MapField, complex_jacobian, map_jacobian
from .malgrange import ContinuationConfig, continuation, extract_B
from .spaces import bmo_norm, regularity_profile
from .structures import BeltramiMatrix, cutoff_periodize, inner_region

HOLOMORPHY_TOL = 1e-4


@dataclass
class ChartResult:
    A: BeltramiMatrix
    H: MapField = None
    E: BeltramiMatrix = None
    B: BeltramiMatrix = None
    G: MapField = None
    F: MapField = None
    trace: object = None
    report: dict = field(default_factory=dict)


def second_derivatives(F: MapField) -> np.ndarray:
    """All complex second derivatives of F (the affine part drops out)."""
    g = F.grid
    dz, dzb = complex_jacobian(F.disp, g)
    first = np.concatenate([dz, dzb]).reshape((-1,) + g.shape)
    d2z, d2zb = complex_jacobian(first, g)
    return np.concatenate([d2z, d2zb]).reshape((-1,) + g.shape)


def derivative_field(F: MapField) -> Field:
    """dF/dz and dF/dzbar as one multi-component field."""
    g = F.grid
    Fz, Fzb = map_jacobian(F)
    return Field(g, np.concatenate([Fz, Fzb]).reshape((-1,) + g.shape))


def regularity_diagnostics(F: MapField) -> dict:
    """Zygmund exponent of DF, bmo and sup of the second derivatives."""
    g = F.grid
    out = {}
    try:
        out["dF_profile"] = regularity_profile(derivative_field(F)).to_dict()
    except TooFewBlocks as exc:
        out["dF_profile"] = {"error": str(exc)}
    d2 = Field(g, second_derivatives(F))
    out["d2F_bmo"] = bmo_norm(d2).value
    out["d2F_sup"] = d2.sup()
    return out


def build_chart(
    A: BeltramiMatrix,
    cfg: ContinuationConfig = None,
    dcfg: DbarConfig = None,
    cutoff=True,
    radius=0.4,
    mollify=None,
    r=None,
    s=None,
    p=None,
    tol=HOLOMORPHY_TOL,
    diagnostics=True,
) -> ChartResult:
    """Run the whole factorization for Beltrami data A.

    Stage failures raise with ``stage`` in {"admission", "continuation",
    "extract", "dbar"}; the partial result is attached as ``exc.partial``.
    """
    cfg = cfg or ContinuationConfig()
    dcfg = dcfg or DbarConfig()
    raw, localize = A, None
    if cutoff:
        localize = lambda X: cutoff_periodize(X, radius, mollify)  # noqa: E731
        A = localize(raw)
    res = ChartResult(A)
    rep = res.report
    rep["A_sup"] = A.sup_norm()
    rep["cutoff"] = {"enabled": bool(cutoff), "radius": radius if cutoff else None, "mollify": mollify if cutoff else None}
    stage = "admission"
    try:
        if not rep["A_sup"] < 1.0:
            raise NoConvergence(f"||A|| = {rep['A_sup']:.3g} >= 1: no contraction is possible", stage="admission")
        stage = "continuation"
        res.H, res.E, res.trace = continuation(raw, cfg, localize=localize)
        rep["trace"] = res.trace.to_dict()
        stage = "extract"
        res.B, ext, _ = extract_B(res.E, res.H, r, s, p)
        rep["extract"] = ext.to_dict()
        stage = "dbar"
        res.G, grep_ = solve_G(res.B, dcfg)
        rep["dbar"] = grep_.to_dict()
        res.F = compose_F(res.G, res.H)
    except RoughACSError as exc:
        if getattr(exc, "stage", None) in (None, "newton", "invert"):
            exc.stage = stage
        exc.partial = res
        raise
    region = inner_region(A.grid, radius) if cutoff else None
    cr = cr_residual(res.F, A, r, s if s is not None else 0.0, p if p is not None else 2.0, region)
    rep["cr_residual"] = cr.to_dict()
    rep["F_c1_distance"] = cr.c1_distance
    b_int = rep["extract"]["integrability"]["sup"]
    rep["holomorphic"] = bool(cr.relative_sup <= tol and b_int <= tol)
    rep["holomorphy_tol"] = tol
    if diagnostics:
        rep["regularity"] = regularity_diagnostics(res.F)
    return res
