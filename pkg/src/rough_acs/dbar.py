"""d-bar solves: the Beltrami oracle (n = 1), the system dG/dzetabar = B dG/dzeta,
chart composition and chart diagnostics."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidParameter, NoConvergence
from .grid import (
    Field,
    MapField,
    apply_multiplier,
    c1_distance,
    check_same_grid,
    complex_jacobian,
    spectral_norms,
    d_zbar,
    dz_symbol,
    dzbar_symbol,
    inv_laplacian,
    map_jacobian,
)
from .interp import compose
from .malgrange import _mm, chain_matrix, rms
from .spaces import product, sobolev_norm, zygmund_norm
from .structures import BeltramiMatrix, _lead, _trail


@dataclass
class DbarConfig:
    picard_tol: float = 1e-12
    picard_max_iter: int = 100
    neumann_tol: float = 1e-13
    neumann_max_terms: int = 400

    def __post_init__(self):
        if not (self.picard_tol > 0 and self.neumann_tol > 0):
            raise InvalidParameter("tolerances must be positive")
        if int(self.picard_max_iter) < 1 or int(self.neumann_max_terms) < 1:
            raise InvalidParameter("iteration caps must be >= 1")

    def to_dict(self):
        return asdict(self)


def _need_n1(grid, what):
    if grid.n != 1:
        raise InvalidParameter(f"{what} is defined for n = 1 only")


def beurling_symbol(grid) -> np.ndarray:
    """(xi1 - i xi2) / (xi1 + i xi2), zero at the origin."""
    _need_n1(grid, "the Beurling transform")
    k = grid.frequencies()
    num = k[0] - 1j * k[1]
    den = k[0] + 1j * k[1]
    out = np.zeros(np.broadcast_shapes(num.shape, den.shape), complex)
    nz = den != 0
    out[nz] = num[nz] / den[nz]
    return out


def beurling(u: Field) -> Field:
    """The multiplier d_z d_zbar^{-1}: unimodular off the zero mode."""
    return apply_multiplier(u, beurling_symbol(u.grid))


def dbar_inverse(h: Field, j=0) -> Field:
    """Mean-zero periodic v with dv/dzbar_j = h - mean(h) along z_j only.

    Only meaningful for fields depending on z_j; used for n = 1.
    """
    g = h.grid
    sym = dzbar_symbol(g, j)
    inv = np.zeros(np.broadcast_shapes(sym.shape, g.shape), complex)
    nz = np.broadcast_to(sym, inv.shape) != 0
    inv[nz] = 1.0 / np.broadcast_to(sym, inv.shape)[nz]
    return apply_multiplier(h, inv)


@dataclass
class BeltramiSolution:
    f: MapField
    terms: int
    ratios: list
    residual: float
    relative_residual: float

    def to_dict(self):
        return {
            "terms": self.terms,
            "ratios": [float(r) for r in self.ratios],
            "residual": float(self.residual),
            "relative_residual": float(self.relative_residual),
        }


def solve_beltrami(mu: Field, cfg: DbarConfig = None) -> BeltramiSolution:
    """Periodic-plus-linear solution f = z + c zbar + periodic of df/dzbar = mu df/dz.

    Neumann iteration for h = mu + mu S(h) with S the Beurling transform;
    then f = z + mean(h) zbar + dbar^{-1}(h - mean h), normalized f(0) = 0.
    """
    cfg = cfg or DbarConfig()
    g = mu.grid
    _need_n1(g, "solve_beltrami")
    k = mu.sup()
    if not k < 1.0:
        raise NoConvergence(f"Beltrami coefficient has sup {k:.3g} >= 1: the Neumann series does not contract", stage="neumann")
    S = beurling_symbol(g)
    m = mu.values
    h = m.copy()
    ratios = []
    prev = None
    for it in range(1, cfg.neumann_max_terms + 1):
        from .grid import fft, ifft

        hn = m + m * ifft(fft(h, g) * S, g)
        diff = float(np.sqrt(np.mean(np.abs(hn - h) ** 2)))
        if prev is not None and prev > 0:
            ratios.append(diff / prev)
        prev = diff
        h = hn
        if diff <= cfg.neumann_tol * max(1.0, float(np.sqrt(np.mean(np.abs(h) ** 2)))):
            break
    else:
        raise NoConvergence(f"Neumann series hit the cap of {cfg.neumann_max_terms} terms", stage="neumann")
    hf = Field(g, h)
    c = complex(hf.mean()[0])
    disp = dbar_inverse(hf).values
    f = MapField(g, disp, None, np.array([[c]])).normalized()
    Fz, Fzb = map_jacobian(f)
    R = Fzb[0, 0] - m[0] * Fz[0, 0]
    res = float(np.sqrt(np.mean(np.abs(R) ** 2)))
    rel = res / float(np.sqrt(np.mean(np.abs(Fz[0, 0]) ** 2)))
    return BeltramiSolution(f, it, ratios, res, rel)


@dataclass
class DbarReport:
    compatibility: float
    defect: float
    means: list

    def to_dict(self):
        return {"compatibility": float(self.compatibility), "defect": float(self.defect), "means": _cjson(self.means)}


def _cjson(x):
    a = np.asarray(x)
    if np.iscomplexobj(a):
        return np.stack([a.real, a.imag], axis=-1).tolist()
    return a.tolist()


def solve_dbar_system(f: Field) -> tuple:
    """u = 4 G(sum_j df_j/dzeta_j): the least-squares solution of du/dzetabar_j = f_j.

    ``f`` carries n components (one per j); the system is solvable in the
    periodic class iff the f_j are mean-zero and compatible
    (df_j/dzetabar_k = df_k/dzetabar_j). Both defects are reported.
    """
    g = f.grid
    n = g.n
    if f.ncomp != n:
        raise InvalidParameter(f"solve_dbar_system needs {n} components, got {f.ncomp}")
    from .grid import fft, ifft

    hat = fft(f.values, g)
    div = sum(hat[j] * dz_symbol(g, j) for j in range(n))
    u = 4 * inv_laplacian(Field(g, ifft(div, g))).values[0]
    comp = 0.0
    for j in range(n):
        for k in range(j + 1, n):
            c = ifft(hat[j] * dzbar_symbol(g, k) - hat[k] * dzbar_symbol(g, j), g)
            comp = max(comp, float(np.abs(c).max()))
    uh = fft(u, g)
    defect = max(float(np.abs(ifft(uh * dzbar_symbol(g, j), g) - f.values[j]).max()) for j in range(n))
    return Field(g, u), DbarReport(comp, defect, f.mean().tolist())


@dataclass
class GReport:
    iterations: int
    increments: list
    residual_sup: float
    compatibility: float
    defect: float
    warning: str = ""

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "increments": [float(x) for x in self.increments],
            "residual_sup": float(self.residual_sup),
            "compatibility": float(self.compatibility),
            "defect": float(self.defect),
            "warning": self.warning,
        }


COMPAT_WARN = 1e-6


def solve_G(B: BeltramiMatrix, cfg: DbarConfig = None):
    """Picard iteration for dG/dzetabar = B dG/dzeta with G(0) = 0.

    G = zeta + Q zetabar + g: for each component l the right-hand sides
    f_j = (B dG/dzeta)_{jl} split into their means, which fix Q[l, j], and
    a mean-zero part handed to solve_dbar_system.
    """
    cfg = cfg or DbarConfig()
    g = B.grid
    n = g.n
    if not B.sup_norm() < 1.0:
        raise NoConvergence(f"||B|| = {B.sup_norm():.3g} >= 1: Picard iteration cannot contract", stage="dbar")
    G = MapField.identity(g)
    incs = []
    comp = defect = 0.0
    for it in range(1, cfg.picard_max_iter + 1):
        Gz, _ = map_jacobian(G)
        F = _mm(B.a, Gz)  # F[j, l] = sum_k b_jk dG_l/dzeta_k
        disp = np.empty((n,) + g.shape, complex)
        Q = np.empty((n, n), complex)
        comp = defect = 0.0
        for l in range(n):
            fl = Field(g, F[:, l])
            means = fl.mean()
            Q[l] = means
            u, rep = solve_dbar_system(fl - means[(...,) + (None,) * g.m])
            disp[l] = u.values[0]
            comp = max(comp, rep.compatibility)
            defect = max(defect, rep.defect)
        Gn = MapField(g, disp, None, Q).normalized()
        inc = max(float(np.abs(Gn.disp - G.disp).max()), float(np.abs(Gn.Q - G.Q).max()))
        incs.append(inc)
        G = Gn
        if inc <= cfg.picard_tol:
            break
        if it > 5 and inc > 0.99 * incs[-2]:
            raise NoConvergence(f"Picard iteration stagnates at increment {inc:.3g}", last=G, stage="dbar")
    else:
        raise NoConvergence(f"Picard iteration cap reached, increment {incs[-1]:.3g}", last=G, stage="dbar")
    Gz, Gzb = map_jacobian(G)
    res = float(np.abs(Gzb - _mm(B.a, Gz)).max())
    warn = ""
    if comp > COMPAT_WARN:
        warn = f"large compatibility defect {comp:.3g}: B is not formally integrable"
    return G, GReport(it, incs, res, comp, defect, warn)


def compose_F(G: MapField, H: MapField, method="auto") -> MapField:
    """F = G o H, normalized F(0) = 0."""
    check_same_grid(G, H)
    return compose(G, H, method).normalized()


@dataclass
class CRReport:
    sup: float
    l2: float
    relative_sup: float
    sobolev: float
    c1_distance: float
    zygmund: float = None

    def to_dict(self):
        d = {
            "sup": float(self.sup),
            "l2": float(self.l2),
            "relative_sup": float(self.relative_sup),
            "sobolev": float(self.sobolev),
            "c1_distance": float(self.c1_distance),
        }
        if self.zygmund is not None:
            d["zygmund"] = float(self.zygmund)
        return d


def cr_residual_field(F: MapField, A: BeltramiMatrix, route="auto") -> np.ndarray:
    """dF/dzbar - A dF/dz as an (n, n, *grid) stack, products routed by roughness."""
    g = check_same_grid(F, A)
    n = g.n
    Fz, Fzb = map_jacobian(F)
    R = Fzb.copy()
    for j in range(n):
        for l in range(n):
            for k in range(n):
                R[j, l] -= product(A.entry(j, k), Field(g, Fz[k, l]), route).values[0]
    return R, Fz


def cr_residual(F: MapField, A: BeltramiMatrix, r=None, s=0.0, p=2.0, region=None) -> CRReport:
    """Residual of dF/dzbar = A dF/dz, optionally restricted to a mask."""
    g = F.grid
    R, Fz = cr_residual_field(F, A)
    mask = np.ones(g.shape, bool) if region is None else np.broadcast_to(region, g.shape)
    sup = float(np.abs(R[..., mask]).max())
    den = float(np.abs(Fz[..., mask]).max())
    l2 = float(np.sqrt(np.mean(np.abs(R) ** 2)))
    f = Field(g, R.reshape((g.n * g.n,) + g.shape))
    sob = sobolev_norm(f, s - 1, p).value
    zyg = zygmund_norm(f, r - 1).value if r is not None else None
    return CRReport(sup, l2, sup / den if den else math.inf, sob, c1_distance(F), zyg)


@dataclass
class ChartComparison:
    ratio: float
    dbar_sup: float
    d_sup: float
    points: int

    def to_dict(self):
        return {"ratio": _finite(self.ratio), "dbar_sup": float(self.dbar_sup), "d_sup": float(self.d_sup), "points": self.points}


def _finite(x):
    return float(x) if math.isfinite(x) else "inf"


def compare_charts(F1: MapField, F2: MapField, region=None) -> ChartComparison:
    """How far W = F2 o F1^{-1} is from holomorphic on a region.

    DW at F1(z) equals DF2(z) DF1(z)^{-1}, so W is examined at the image
    points of the grid nodes in ``region`` (default: all nodes) without
    inverting F1. Returns sup|dW/dzetabar| / sup|dW/dzeta|.
    """
    g = check_same_grid(F1, F2)
    n = g.n
    M1inv = chain_matrix(F1)  # (..., 2n, 2n) = D(F1^{-1}) o F1
    F2z, F2zb = map_jacobian(F2)
    T = lambda a: np.swapaxes(_trail(a, g.m), -1, -2)  # noqa: E731  [l, k] = dF_l/dz_k
    top = np.concatenate([T(F2z), T(F2zb)], axis=-1)  # rows W, columns (z, zbar)
    DW = top @ M1inv  # rows W_l, columns (zeta, zetabar)
    mask = np.ones(g.shape, bool) if region is None else np.broadcast_to(region, g.shape)
    Wz = DW[mask][:, :, :n]
    Wzb = DW[mask][:, :, n:]
    dz = float(spectral_norms(Wz).max())
    dzb = float(spectral_norms(Wzb).max())
    ratio = dzb / dz if dz > 0 else math.inf
    return ChartComparison(ratio, dzb, dz, int(np.count_nonzero(mask)))
