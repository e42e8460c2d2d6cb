"""Littlewood-Paley calculus and function-space norms on periodic grids.

Blocks are indexed k = -1, 0, ..., K with K = log2(N/2). With ``theta`` a
smooth step (1 on [0, 1], 0 on [2, inf)) the symbols are

    beta_{-1}(xi) = theta(2|xi|),
    beta_k(xi)    = theta(|xi| / 2^k) - theta(|xi| / 2^(k-1)),   0 <= k < K,
    beta_K(xi)    = 1 - theta(|xi| / 2^(K-1)),

on the integer frequency lattice, so they telescope to exactly 1 and block
k >= 0 lives in the annulus 2^(k-1) <= |xi| <= 2^(k+1).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import InvalidParameter, TooFewBlocks
from .grid import Field, Grid, check_same_grid, fft, ifft, partial_symbol, workers


def smooth_step(r):
    """C-infinity step: 1 for r <= 1, 0 for r >= 2."""
    r = np.asarray(r, dtype=float)
    a = np.clip(2.0 - r, 0.0, 1.0)
    b = np.clip(r - 1.0, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        fa = np.where(a > 0, np.exp(-1.0 / np.where(a > 0, a, 1.0)), 0.0)
        fb = np.where(b > 0, np.exp(-1.0 / np.where(b > 0, b, 1.0)), 0.0)
    return fa / (fa + fb)


@lru_cache(maxsize=16)
def block_symbols(grid: Grid) -> np.ndarray:
    """Stack of dyadic symbols, index 0 <-> block k = -1."""
    r = grid.freq_norm()
    K = grid.kmax
    th = [smooth_step(r / 2.0 ** j) for j in range(-1, K)]  # theta(|xi|/2^j), j=-1..K-1
    out = [th[0]]
    for k in range(0, K):
        out.append(th[k + 1] - th[k])
    out.append(1.0 - th[K])
    out = np.array(out)
    out.setflags(write=False)
    return out


def block_indices(grid: Grid) -> list:
    return list(range(-1, grid.kmax + 1))


@dataclass
class LPDecomposition:
    grid: Grid
    blocks: np.ndarray  # (nblocks, ncomp, *shape)
    symbols: np.ndarray

    @property
    def ks(self):
        return block_indices(self.grid)

    def block(self, k) -> Field:
        return Field(self.grid, self.blocks[k + 1])

    def partial_sum(self, k) -> np.ndarray:
        """S_k u = sum of blocks -1..k (zero for k < -1)."""
        if k < -1:
            return np.zeros_like(self.blocks[0])
        return self.blocks[: k + 2].sum(axis=0)

    def total(self) -> Field:
        return Field(self.grid, self.blocks.sum(axis=0))


def lp_decompose(u: Field) -> LPDecomposition:
    g = u.grid
    sym = block_symbols(g)
    hat = fft(u.values, g)
    blocks = np.stack([ifft(hat * s, g) for s in sym])
    return LPDecomposition(g, blocks, sym)


# --------------------------------------------------------------------------
# paraproducts


def _prefix_sums(lp):
    """S_k for k = -1..K as a stack (index k+1)."""
    return np.cumsum(lp.blocks, axis=0)


def paraproduct(u: Field, v: Field, gap=2) -> Field:
    """T_u v = sum_k S_{k-gap}(u) Delta_k v."""
    g = check_same_grid(u, v)
    lu, lv = lp_decompose(u), lp_decompose(v)
    return Field(g, _para(lu, lv, gap))


def _para(lu, lv, gap):
    S = _prefix_sums(lu)
    out = np.zeros(np.broadcast_shapes(lu.blocks.shape[1:], lv.blocks.shape[1:]), complex)
    for k in lv.ks:
        j = k - gap
        if j < -1:
            continue
        out += S[j + 1] * lv.blocks[k + 1]
    return out


def _rem(lu, lv, gap):
    out = np.zeros(np.broadcast_shapes(lu.blocks.shape[1:], lv.blocks.shape[1:]), complex)
    for k in lu.ks:
        for l in lv.ks:
            if abs(k - l) < gap:
                out += lu.blocks[k + 1] * lv.blocks[l + 1]
    return out


def remainder(u: Field, v: Field, gap=2) -> Field:
    """R(u, v) = sum over |k - l| < gap of Delta_k u Delta_l v."""
    g = check_same_grid(u, v)
    return Field(g, _rem(lp_decompose(u), lp_decompose(v), gap))


def bony_terms(u: Field, v: Field, gap=2):
    """(T_u v, T_v u, R(u, v)); their sum is the pointwise product."""
    g = check_same_grid(u, v)
    lu, lv = lp_decompose(u), lp_decompose(v)
    return (
        Field(g, _para(lu, lv, gap)),
        Field(g, _para(lv, lu, gap)),
        Field(g, _rem(lu, lv, gap)),
    )


def _band_from_hat(hat, grid):
    mag = np.abs(hat).max(axis=0)
    top = mag.max()
    if top == 0:
        return 0.0
    return float(grid.freq_norm()[mag > 1e-14 * top].max())


def band_limit(u: Field) -> float:
    """Largest |xi| (integer lattice) carrying non-negligible energy."""
    return _band_from_hat(fft(u.values, u.grid), u.grid)


PRODUCT_BUDGET = 2 ** 29  # bytes of block storage per batch in product()


def bony_from_blocks(bu, bv, gap=2):
    """T_u v + T_v u + R(u, v) from two lists of LP blocks (k = -1, 0, ...)."""
    nb = len(bu)
    out = np.zeros(np.broadcast_shapes(bu[0].shape, bv[0].shape), np.result_type(bu[0], bv[0]))
    Su = np.zeros_like(bu[0])  # S_{k-gap} u, grown as k increases
    Sv = np.zeros_like(bv[0])
    for i in range(nb):  # i = k + 1
        j = i - gap
        if j >= 0:
            Su += bu[j]
            Sv += bv[j]
            out += Su * bv[i]
            out += Sv * bu[i]
        for l in range(max(0, i - gap + 1), min(nb, i + gap)):
            out += bu[i] * bv[l]
    return out


def _bony_sum(hu, hv, grid, gap):
    sym = block_symbols(grid)
    bu = [ifft(hu * s, grid) for s in sym]
    bv = [ifft(hv * s, grid) for s in sym]
    return bony_from_blocks(bu, bv, gap)


def _bands(hat, grid):
    """Band limit of each component separately."""
    r = grid.freq_norm()
    out = np.zeros(hat.shape[0])
    for c in range(hat.shape[0]):
        mag = np.abs(hat[c])
        top = mag.max()
        if top > 0:
            out[c] = r[mag > 1e-14 * top].max()
    return out


def product(u: Field, v: Field, route="auto", gap=2) -> Field:
    """Pointwise product, formed through the Bony decomposition for rough factors.

    Components are routed one by one. ``route="auto"`` multiplies directly
    when both factors are band-limited below N/8, where no high-high
    interaction can alias, or when one factor is constant, where the
    decomposition collapses to a scalar multiple. Bony components are
    processed in batches to bound the block storage.
    """
    g = check_same_grid(u, v)
    if route not in ("auto", "bony", "pointwise"):
        raise InvalidParameter(f"unknown product route {route!r}")
    direct = u.values * v.values
    if route == "pointwise":
        return Field(g, direct)
    nc = direct.shape[0]
    fu, fv = fft(u.values, g), fft(v.values, g)
    hu = np.broadcast_to(fu, (nc,) + g.shape)
    hv = np.broadcast_to(fv, (nc,) + g.shape)
    if route == "auto":
        bu = np.broadcast_to(_bands(fu, g), nc)
        bv = np.broadcast_to(_bands(fv, g), nc)
        rough = ~((np.maximum(bu, bv) < g.N / 8) | (np.minimum(bu, bv) == 0))
    else:
        rough = np.ones(nc, bool)
    idx = np.flatnonzero(rough)
    per = 2 * (len(block_symbols(g)) + 2) * g.size * 16
    chunk = max(1, PRODUCT_BUDGET // per)
    for c in range(0, len(idx), chunk):
        sel = idx[c : c + chunk]
        direct[sel] = _bony_sum(hu[sel], hv[sel], g, gap)
    return Field(g, direct)


# --------------------------------------------------------------------------
# norms


@dataclass
class NormReport:
    space: str
    params: dict
    value: float
    profile: list = field(default_factory=list)

    def to_dict(self):
        return {
            "space": self.space,
            "params": self.params,
            "value": float(self.value),
            "profile": [[int(k), float(v)] for k, v in self.profile],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


OVERSAMPLE_BUDGET = 2 ** 21  # max points of the refined grid used for block sups


def _refined_sup(values, grid, q):
    """sup of the trigonometric interpolant, sampled q times finer per axis."""
    if q == 1:
        return float(np.abs(values).max())
    hat = fft(values, grid)
    N, M = grid.N, grid.N * q
    pad = np.zeros(values.shape[:1] + (M,) * grid.m, complex)
    idx = np.r_[0 : N // 2, M - N // 2 : M]
    pad[np.ix_(range(values.shape[0]), *([idx] * grid.m))] = hat
    fine = sfft.ifftn(pad, axes=tuple(range(1, grid.m + 1)), workers=workers()) * (M / N) ** grid.m
    return float(np.abs(fine).max())


def _oversample_factor(grid):
    q = 1
    while q < 4 and (2 * q * grid.N) ** grid.m <= OVERSAMPLE_BUDGET:
        q *= 2
    return q


def _block_sup(lp, oversample=None):
    """Block sup norms, measured on the interpolant refined ``oversample`` times.

    Grid samples of a block near the top of the spectrum can miss its peaks
    by a large factor; refinement keeps the error below a few percent.
    """
    q = _oversample_factor(lp.grid) if oversample is None else oversample
    return np.array([_refined_sup(b, lp.grid, q) for b in lp.blocks])


def zygmund_norm(u: Field, r: float, lp=None, oversample=None) -> NormReport:
    """max_k 2^{kr} ||Delta_k u||_inf, with the k = -1 block weighted 1."""
    lp = lp or lp_decompose(u)
    sups = _block_sup(lp, oversample)
    w = np.array([1.0 if k < 0 else 2.0 ** (k * r) for k in lp.ks])
    prof = list(zip(lp.ks, w * sups))
    return NormReport("zygmund", {"r": r}, float(np.max(w * sups)), prof)


def _lp_norm(values, grid, p):
    """Grid L^p norm with the cell-volume measure; max over components."""
    a = np.abs(values).reshape(values.shape[0], -1)
    return float(np.max((np.sum(a ** p, axis=1) * grid.cell_volume) ** (1.0 / p)))


def sobolev_norm(u: Field, s: float, p: float, lp=None) -> NormReport:
    """L^p norm of the square function (sum_k 4^{sk} |Delta_k u|^2)^{1/2}."""
    if p <= 1:
        raise InvalidParameter(f"Sobolev exponent p must exceed 1, got {p}")
    g = u.grid
    lp = lp or lp_decompose(u)
    sq = np.zeros(lp.blocks.shape[1:])
    prof = []
    for k in lp.ks:
        w = 1.0 if k < 0 else 4.0 ** (k * s)
        b2 = np.abs(lp.blocks[k + 1]) ** 2
        sq += w * b2
        prof.append((k, math.sqrt(w) * _lp_norm(lp.blocks[k + 1], g, p)))
    return NormReport("sobolev", {"s": s, "p": p}, _lp_norm(np.sqrt(sq), g, p), prof)


def bessel_norm(u: Field, s: float) -> NormReport:
    """Direct H^{s,2} norm ||(1 + |xi|^2)^{s/2} u||_{L^2} (calibration oracle)."""
    g = u.grid
    sym = (1.0 + g.freq_norm() ** 2) ** (s / 2)
    w = ifft(fft(u.values, g) * sym, g)
    return NormReport("bessel", {"s": s, "p": 2}, _lp_norm(w, g, 2))


def lp_norm(u: Field, p: float) -> float:
    if np.isinf(p):
        return u.sup()
    return _lp_norm(u.values, u.grid, p)


def sup_norm(u: Field) -> NormReport:
    return NormReport("sup", {}, u.sup())


def lipschitz_seminorm(u: Field) -> NormReport:
    """Largest forward-difference slope along any real axis."""
    g = u.grid
    best = 0.0
    prof = []
    for a in range(g.m):
        d = np.abs(np.roll(u.values, -1, axis=a + 1) - u.values).max() / g.spacing
        prof.append((a, float(d)))
        best = max(best, float(d))
    return NormReport("lipschitz", {}, best, prof)


def bmo_norm(u: Field) -> NormReport:
    """Dyadic-cube bmo norm: worst mean oscillation plus |mean u|.

    Cubes have side L / 2^j for j = 0 .. log2(N) - 2 (at least four nodes
    per side). Components are measured separately and the max is taken.
    """
    g = u.grid
    m = g.m
    jmax = int(round(math.log2(g.N))) - 2
    best = 0.0
    prof = []
    for j in range(jmax + 1):
        c = 2 ** j
        s = g.N // c
        shp = [u.ncomp]
        for _ in range(m):
            shp += [c, s]
        v = u.values.reshape(shp)
        inner = tuple(2 + 2 * i for i in range(m))
        mean_q = v.mean(axis=inner, keepdims=True)
        osc = np.abs(v - mean_q).mean(axis=inner)
        level = float(osc.max())
        prof.append((j, level))
        best = max(best, level)
    loc = float(np.abs(u.mean()).max())
    return NormReport("bmo", {"localization": loc}, best + loc, prof)


# --------------------------------------------------------------------------
# rough products and regularity


def rough_product_derivative(u: Field, v: Field, j: int, r=None, s=None, p=None, gap=2):
    """u * d_j v through the Bony decomposition, with per-term norm reports.

    ``j`` indexes a real axis. Returns ``(product, terms, reports)`` where
    ``terms`` maps "T_u dv", "T_dv u", "R" to Fields and ``reports`` holds
    each term's C^{r-1}_* and H^{s-1,p} norms when r, s, p are given.
    """
    g = check_same_grid(u, v)
    if not 0 <= j < g.m:
        raise InvalidParameter(f"real derivative index {j} out of range")
    dv = Field(g, ifft(fft(v.values, g) * partial_symbol(g, j), g))
    a, b, c = bony_terms(u, dv, gap)
    terms = {"T_u dv": a, "T_dv u": b, "R": c}
    reports = {}
    if r is not None:
        for name, t in terms.items():
            lp = lp_decompose(t)
            rep = {"zygmund": zygmund_norm(t, r - 1, lp).to_dict()}
            if s is not None and p is not None:
                rep["sobolev"] = sobolev_norm(t, s - 1, p, lp).to_dict()
            reports[name] = rep
    return a + b + c, terms, reports


@dataclass
class RegularityProfile:
    exponent: float
    fit_residual: float
    active: list
    block_sups: list
    super_smooth: bool

    def to_dict(self):
        return {
            "exponent": float(self.exponent),
            "fit_residual": float(self.fit_residual),
            "active_blocks": [int(k) for k in self.active],
            "block_sups": [[int(k), float(v)] for k, v in self.block_sups],
            "super_smooth": bool(self.super_smooth),
        }


def _ints(ks):
    return [int(k) for k in ks]


def _pairs(ks, sups):
    return [(int(k), float(v)) for k, v in zip(ks, sups)]


def regularity_profile(u: Field, floor=1e-13, kmin=0, kmax=None, oversample=None) -> RegularityProfile:
    """Least-squares Zygmund exponent from the decay of block sup norms.

    Fits log2 ||Delta_k u||_inf = c - rho k over the blocks k >= kmin whose
    norm exceeds ``floor`` times the largest block; rho is the exponent.
    Blocks at round-off level mark the field as super-smooth.
    """
    lp = lp_decompose(u)
    sups = _block_sup(lp, oversample)
    ks = np.array(lp.ks)
    top = sups.max() if sups.size else 0.0
    hi = ks.max() if kmax is None else kmax
    sel = (ks >= kmin) & (ks <= hi)
    active = sel & (sups > floor * max(top, 1e-300))
    super_smooth = np.count_nonzero(active) < 4 and bool(np.any(sel & ~active))
    if np.count_nonzero(active) < 4:
        if super_smooth:
            return RegularityProfile(math.inf, 0.0, _ints(ks[active]), _pairs(ks, sups), True)
        raise TooFewBlocks(f"need at least 4 active blocks, have {np.count_nonzero(active)}")
    x = ks[active].astype(float)
    y = np.log2(sups[active])
    slope, icpt = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    return RegularityProfile(float(-slope), resid, _ints(ks[active]), _pairs(ks, sups), super_smooth)


def gen_lacunary(grid: Grid, r: float, k_low: int, k_high: int, seed=0, axis=0) -> Field:
    """sum_{k=k_low}^{k_high} 2^{-kr} cos(2^k x + phi_k), random phases.

    The frequency 2^k sits where beta_k = 1 and every other symbol
    vanishes, so block k carries exactly the k-th term. At k = log2(N/2)
    the term is the Nyquist mode, which the grid only sees through cos(phi).
    """
    if r <= 0:
        raise InvalidParameter("lacunary exponent must be positive")
    if k_high > grid.kmax:
        raise InvalidParameter(f"k_high={k_high} exceeds log2(N/2)={grid.kmax}")
    if k_low < 0 or k_low > k_high:
        raise InvalidParameter("need 0 <= k_low <= k_high")
    rng = np.random.Generator(np.random.Philox(seed))
    phases = rng.uniform(0.0, 2 * math.pi, k_high - k_low + 1)
    x = grid.coords()[axis] * (2 * math.pi / grid.L)
    u = sum(2.0 ** (-k * r) * np.cos(2 ** k * x + ph) for k, ph in zip(range(k_low, k_high + 1), phases))
    return Field(grid, np.broadcast_to(u, grid.shape))
