"""Factorization engine: find H with div B = 0 where E = B o H.

Given Beltrami data A, a map H close to the identity determines
E = B o H through

    E = -(dHbar/dzbar - A dHbar/dz)^{-1} (dH/dzbar - A dH/dz),

and the residual Psi(H) = (sum_j dB_j/dzeta_j) o H is evaluated with the
chain rule, using DK o H = DH^{-1} for K = H^{-1}. Psi = 0 is solved by a
damped quasi-Newton iteration preconditioned with the periodic right
inverse of Delta/4, and continued along a homotopy in t from A_0 = 0.

Linearized at (id, 0), Psi(id + h) = -Delta h / 4 + O(h^2), so the
Newton correction is +Gtilde(Psi).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import AdmissibilityLost, InvalidParameter, NoConvergence, SingularFactor, SingularJacobian
from .grid import (
    Field,
    MapField,
    c1_distance,
    complex_jacobian,
    conditions,
    inv_laplacian,
    map_jacobian,
    resample_dilate,
)
from .interp import compose, invert_map
from .spaces import smooth_step, sobolev_norm, zygmund_norm
from .structures import BeltramiMatrix, _lead, _trail, integrability_residual

LINEARIZATION_SIGN = -1  # D_H Psi(id, 0) h = LINEARIZATION_SIGN * Delta h / 4
FACTOR_COND = 1e12
HOMOTOPIES = ("dilation", "scaling")


@dataclass
class ContinuationConfig:
    t_steps: int = 8
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    damping: float = 1.0
    homotopy_kind: str = "dilation"
    delta_c1: float = 2.0
    min_step: float = 1.0 / 16
    interp: str = "auto"
    anderson: int = 5
    path_tol: float = 1e-6

    def __post_init__(self):
        aliases = {"dilate": "dilation", "scale": "scaling"}
        self.homotopy_kind = aliases.get(self.homotopy_kind, self.homotopy_kind)
        if self.homotopy_kind not in HOMOTOPIES:
            raise InvalidParameter(f"homotopy must be one of {HOMOTOPIES}, got {self.homotopy_kind!r}")
        if int(self.t_steps) < 1:
            raise InvalidParameter("t_steps must be >= 1")
        self.t_steps = int(self.t_steps)
        if not self.newton_tol > 0:
            raise InvalidParameter("newton_tol must be positive")
        if int(self.newton_max_iter) < 1:
            raise InvalidParameter("newton_max_iter must be >= 1")
        if not 0 < self.damping <= 1:
            raise InvalidParameter("damping must lie in (0, 1]")
        if not self.delta_c1 > 0:
            raise InvalidParameter("delta_c1 must be positive")
        if not self.path_tol > 0:
            raise InvalidParameter("path_tol must be positive")
        if int(self.anderson) < 0:
            raise InvalidParameter("anderson depth must be >= 0")
        self.anderson = int(self.anderson)
        if not 0 < self.min_step <= 1:
            raise InvalidParameter("min_step must lie in (0, 1]")

    def to_dict(self):
        return asdict(self)


@dataclass
class StepRecord:
    t: float
    iterations: int
    residuals: list
    c1_distance: float
    E0: float
    div_residual: float
    steps_taken: list = field(default_factory=list)
    accelerated: int = 0
    stalled: bool = False

    def to_dict(self):
        return {
            "t": self.t,
            "iterations": self.iterations,
            "residuals": [float(r) for r in self.residuals],
            "c1_distance": float(self.c1_distance),
            "E0": float(self.E0),
            "div_residual": float(self.div_residual),
            "steps_taken": [float(s) for s in self.steps_taken],
            "accelerated": int(self.accelerated),
            "stalled": bool(self.stalled),
        }


@dataclass
class SolveTrace:
    steps: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {"config": self.config, "steps": [s.to_dict() for s in self.steps]}

    @property
    def total_iterations(self):
        return sum(s.iterations for s in self.steps)


def rms(f: Field) -> float:
    """Discrete L2 norm normalized by the point count (root mean square)."""
    return float(np.sqrt(np.mean(np.abs(f.values) ** 2))) if f.values.size else 0.0


def _mm(A, M):
    """Pointwise (A M) for (n, n, *grid) stacks."""
    return np.einsum("jk...,kl...->jl...", A, M)


def phi(H: MapField, A_t: BeltramiMatrix) -> BeltramiMatrix:
    """E = B o H from H and the Beltrami data."""
    g = H.grid
    if A_t.grid != g:
        from .errors import GridMismatch

        raise GridMismatch("phi: H and A live on different grids")
    Hz, Hzb = map_jacobian(H)
    X = Hz.conj() - _mm(A_t.a, Hzb.conj())
    Y = Hzb - _mm(A_t.a, Hz)
    Xm = _trail(X, g.m)
    n = g.n
    if n == 1:
        den = Xm[..., 0, 0]
        bad = np.abs(den) < 1.0 / FACTOR_COND
        if np.any(bad):
            idx = np.unravel_index(int(np.argmax(bad)), g.shape)
            raise SingularFactor(f"factor dHbar/dzbar - A dHbar/dz vanishes at node {idx}", idx, math.inf)
        return BeltramiMatrix(g, -(Y / X))
    cond = conditions(Xm.reshape(-1, n, n))
    worst = int(np.argmax(np.where(np.isfinite(cond), cond, np.inf)))
    if not cond[worst] < FACTOR_COND:
        idx = np.unravel_index(worst, g.shape)
        raise SingularFactor(f"factor is singular at node {idx} (condition {cond[worst]:.3g})", idx, float(cond[worst]))
    E = -np.linalg.solve(Xm, _trail(Y, g.m))
    return BeltramiMatrix(g, _lead(E, g.m))


def chain_matrix(H: MapField) -> np.ndarray:
    """(DK) o H = DH^{-1} in complex block form, trailing axes (2n, 2n).

    Rows index (z_k, zbar_k) of K, columns (zeta_m, zetabar_m):
    out[k, m] = dK_k/dzeta_m o H and out[n + k, m] = dKbar_k/dzeta_m o H.
    """
    g = H.grid
    n = g.n
    Hz, Hzb = map_jacobian(H)
    T = lambda a: _trail(a, g.m)  # noqa: E731
    Mz, Mzb = np.swapaxes(T(Hz), -1, -2), np.swapaxes(T(Hzb), -1, -2)  # [m, k] = dH_m/dz_k
    M = np.concatenate(
        [np.concatenate([Mz, Mzb], axis=-1), np.concatenate([Mzb.conj(), Mz.conj()], axis=-1)],
        axis=-2,
    )
    if n == 1:
        det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
        if np.any(np.abs(det) < 1.0 / FACTOR_COND):
            idx = np.unravel_index(int(np.argmin(np.abs(det))), g.shape)
            raise SingularJacobian(f"DH is singular at node {idx}", idx, math.inf)
        inv = np.empty_like(M)
        inv[..., 0, 0], inv[..., 1, 1] = M[..., 1, 1] / det, M[..., 0, 0] / det
        inv[..., 0, 1], inv[..., 1, 0] = -M[..., 0, 1] / det, -M[..., 1, 0] / det
        return inv
    try:
        return np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise SingularJacobian("DH is singular somewhere on the grid") from exc


def psi(H: MapField, A_t: BeltramiMatrix, E: BeltramiMatrix = None) -> Field:
    """Psi_l = sum_j (dB_jl/dzeta_j) o H via the chain rule."""
    g = H.grid
    n = g.n
    if E is None:
        E = phi(H, A_t)
    dz, dzb = complex_jacobian(E.a.reshape((n * n,) + g.shape), g)
    dz = dz.reshape((n, n, n) + g.shape)  # [k, j, l] = dE_jl/dz_k
    dzb = dzb.reshape((n, n, n) + g.shape)
    Minv = _lead(chain_matrix(H), g.m)  # (2n, 2n, *grid)
    out = np.zeros((n,) + g.shape, complex)
    for l in range(n):
        for j in range(n):
            for k in range(n):
                out[l] += Minv[k, j] * dz[k, j, l] + Minv[n + k, j] * dzb[k, j, l]
    return Field(g, out)


def gtilde(h: Field) -> Field:
    """4 (G h - G h(0)) with G the mean-zero periodic inverse Laplacian."""
    v = inv_laplacian(h)
    return Field(h.grid, 4.0 * (v.values - v.at_origin()[(...,) + (None,) * h.grid.m]))


def _psi_safe(H, A_t):
    try:
        E = phi(H, A_t)
        return psi(H, A_t, E), E
    except SingularFactor:
        return None, None


def _anderson(xs, fs, beta):
    """Type-II Anderson mixing from the recent iterates and their corrections."""
    x, f = xs[-1], fs[-1]
    dX = np.stack([a - b for a, b in zip(xs[1:], xs[:-1])], axis=1)
    dF = np.stack([a - b for a, b in zip(fs[1:], fs[:-1])], axis=1)
    gamma = np.linalg.lstsq(dF, f, rcond=1e-10)[0]
    return x + beta * f - (dX + beta * dF) @ gamma


def newton_solve(A_t: BeltramiMatrix, H_init: MapField, cfg: ContinuationConfig = None, t=1.0, accept=None):
    """Damped quasi-Newton iteration H <- H + s Gtilde(Psi(H)) with frozen preconditioner.

    With ``cfg.anderson > 0`` the step is first tried as an Anderson
    (multisecant) combination of the last few corrections; it is kept only
    if the residual drops. Otherwise the plain step s starts at
    ``cfg.damping`` and is halved while the residual does not decrease,
    down to ``cfg.min_step``. Returns ``(H, StepRecord)``.

    If ``accept`` is given, a solve that stalls (iteration cap or damping
    exhausted) with residual <= accept returns instead of raising; the
    record is marked ``stalled``.
    """
    cfg = cfg or ContinuationConfig()
    H = H_init.normalized()
    g = H.grid
    d0 = c1_distance(H)
    if not d0 < cfg.delta_c1:
        raise AdmissibilityLost(f"initial map is not admissible: ||H - id||_C1 = {d0:.3g}", last=H_init, stage="newton")
    P, E = _psi_safe(H, A_t)
    if P is None:
        raise SingularFactor("phi is not defined at the initial map")
    res = rms(P)
    history = [res]
    steps = []
    accelerated = 0
    xs, fs = [], []
    it = 0
    stalled = False
    while res > cfg.newton_tol:
        if it >= cfg.newton_max_iter:
            if accept is not None and res <= accept:
                stalled = True
                break
            raise NoConvergence(
                f"Newton iteration cap {cfg.newton_max_iter} reached at t={t:.4g}, residual {res:.3g}",
                last=H,
                stage="newton",
            )
        d = gtilde(P).values
        xs.append(H.disp.ravel())
        fs.append(d.ravel())
        del xs[: -(cfg.anderson + 1)], fs[: -(cfg.anderson + 1)]
        Hn = None
        if cfg.anderson > 0 and len(xs) > 1:
            x = _anderson(xs, fs, cfg.damping).reshape(H.disp.shape)
            Ht = MapField(g, x, H.P, H.Q).normalized()
            Pt, Et = _psi_safe(Ht, A_t)
            rt = rms(Pt) if Pt is not None else math.inf
            if rt < res and c1_distance(Ht) < cfg.delta_c1:
                Hn, Pn, En, rn, s = Ht, Pt, Et, rt, cfg.damping
                accelerated += 1
            else:
                xs, fs = xs[-1:], fs[-1:]
        if Hn is None:
            s = cfg.damping
            while True:
                Hn = MapField(g, H.disp + s * d, H.P, H.Q).normalized()
                Pn, En = _psi_safe(Hn, A_t)
                rn = rms(Pn) if Pn is not None else math.inf
                if rn < res:
                    break
                s /= 2
                if s < cfg.min_step:
                    if accept is not None and res <= accept:
                        stalled = True
                        break
                    raise NoConvergence(
                        f"damping exhausted at t={t:.4g}: residual {res:.3g} does not decrease",
                        last=H,
                        stage="newton",
                    )
            if stalled:
                break
            if s != cfg.damping:
                xs, fs = [], []
        dist = c1_distance(Hn)
        if not dist < cfg.delta_c1:
            raise AdmissibilityLost(
                f"iterate left the admissible ball at t={t:.4g}: ||H - id||_C1 = {dist:.3g} >= {cfg.delta_c1}",
                last=H,
                stage="newton",
            )
        H, P, E, res = Hn, Pn, En, rn
        history.append(res)
        steps.append(s)
        it += 1
    rec = StepRecord(
        t=float(t),
        iterations=it,
        residuals=history,
        c1_distance=c1_distance(H),
        E0=float(np.linalg.norm(E.at_origin(), 2)),
        div_residual=res,
        steps_taken=steps,
        accelerated=accelerated,
        stalled=stalled,
    )
    return H, rec


def box_window(grid) -> np.ndarray:
    """Separable smooth window: 1 for |x_a| <= 0.4 L, 0 for |x_a| >= 0.48 L."""
    w = np.ones(grid.shape)
    for c in grid.coords(centered=True):
        r = np.abs(c) / grid.L
        w = w * smooth_step(1.0 + (r - 0.4) / 0.08)
    return w


def homotopy(A: BeltramiMatrix, t: float, kind="dilation", localize=None) -> BeltramiMatrix:
    """A_t: the dilation A(t z) or the scaling t A.

    Without ``localize`` the dilation is windowed to stay periodic and
    replaced by the constant A(0) outside the window. With it, ``A`` is the
    raw data and A_t = localize(A(t .)), so the support stays on the same
    ball for every t and A_1 = localize(A).
    """
    g = A.grid
    if kind == "scaling":
        At = BeltramiMatrix(g, t * A.a)
        return localize(At) if localize is not None else At
    if t == 1.0:
        return localize(A) if localize is not None else A
    n = g.n
    vals = resample_dilate(A.as_field(), t).values.reshape((n, n) + g.shape)
    if localize is not None:
        return localize(BeltramiMatrix(g, vals))
    w = box_window(g)
    # outside the window fall back to A(0), which is what A(tz) tends to as t -> 0
    a0 = A.at_origin()[(...,) + (None,) * g.m]
    return BeltramiMatrix(g, vals * w + a0 * (1.0 - w))


def continuation(A: BeltramiMatrix, cfg: ContinuationConfig = None, H0: MapField = None, localize=None):
    """Solve Psi(H, A_t) = 0 for t = 1/M, ..., 1 with warm starts.

    Returns ``(H, E, trace)`` with E = phi(H, A_1). When ``localize`` is
    given, ``A`` is the raw data and A_1 = localize(A). Any Newton failure
    is re-raised with the failing t and the last good H attached.

    Intermediate steps only supply warm starts, and for n >= 2 the
    windowed A_t need not be integrable, so Psi = 0 may have no exact
    solution there. A step with t < 1 that stalls below ``cfg.path_tol``
    is accepted; t = 1 must reach ``cfg.newton_tol``.
    """
    cfg = cfg or ContinuationConfig()
    g = A.grid
    H = H0 if H0 is not None else MapField.identity(g)
    trace = SolveTrace(config=cfg.to_dict())
    for i in range(1, cfg.t_steps + 1):
        t = i / cfg.t_steps
        A_t = homotopy(A, t, cfg.homotopy_kind, localize)
        try:
            H, rec = newton_solve(A_t, H, cfg, t, accept=cfg.path_tol if i < cfg.t_steps else None)
        except NoConvergence as exc:
            err = type(exc)(f"continuation failed at t={t:.4g}: {exc}", last=H, stage="continuation")
            err.t = t
            err.trace = trace
            raise err from exc
        trace.steps.append(rec)
    E = phi(H, A_t)
    return H, E, trace


@dataclass
class ExtractReport:
    B0: float
    div_sup: float
    div_rms: float
    integrability: dict
    norms: dict

    def to_dict(self):
        return {
            "B0": float(self.B0),
            "div_sup": float(self.div_sup),
            "div_rms": float(self.div_rms),
            "integrability": self.integrability,
            "norms": self.norms,
        }


def divergence(B: BeltramiMatrix) -> Field:
    """sum_j dB_j/dzeta_j, an n-component field."""
    g = B.grid
    n = g.n
    dz, _ = complex_jacobian(B.a.reshape((n * n,) + g.shape), g)
    dz = dz.reshape((n, n, n) + g.shape)
    return Field(g, sum(dz[j, j] for j in range(n)))


def extract_B(E: BeltramiMatrix, H: MapField, r=None, s=None, p=None, method="auto", tol=1e-11):
    """B = E o H^{-1} on the zeta grid, with its diagnostics."""
    g = E.grid
    n = g.n
    K = invert_map(H, tol=tol, method=method)
    Bf = compose(E.as_field(), K, method)
    B = BeltramiMatrix(g, Bf.values.reshape((n, n) + g.shape))
    div = divergence(B)
    ir = integrability_residual(B, r, s if s is not None else 0.0, p if p is not None else 2.0)
    norms = {"sup": B.sup_norm()}
    if r is not None:
        norms["zygmund"] = max(zygmund_norm(B.entry(j, k), r).value for j in range(n) for k in range(n))
    if s is not None and p is not None:
        norms["sobolev"] = max(sobolev_norm(B.entry(j, k), s, p).value for j in range(n) for k in range(n))
    rep = ExtractReport(
        B0=float(np.linalg.norm(B.at_origin(), 2)),
        div_sup=div.sup(),
        div_rms=rms(div),
        integrability=ir.to_dict(),
        norms=norms,
    )
    return B, rep, K
