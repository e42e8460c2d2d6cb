"""Almost complex structures near the standard one, and their Beltrami data.

A structure J is stored as a real 2n x 2n matrix per grid point acting on
the frame (d/dx1, d/dy1, ..., d/dxn, d/dyn). Near the standard structure
J0 it is encoded by a complex n x n field a: the -i eigenspace of J is
spanned by

    Zbar_j = d/dzbar_j - sum_k a_jk d/dz_k,

so a function f is J-holomorphic iff df/dzbar_j = sum_k a_jk df/dz_k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import GraphConditionFailed, InvalidParameter, SingularJacobian
from .grid import (
    Field,
    Grid,
    MapField,
    check_same_grid,
    complex_jacobian,
    conditions,
    fft,
    ifft,
    map_jacobian,
    partial_symbol,
    real_gradient,
    real_jacobian_from_complex,
    spectral_norms,
    workers,
)
from .spaces import (
    block_symbols,
    bony_from_blocks,
    gen_lacunary,
    lp_decompose,
    product,
    smooth_step,
    sobolev_norm,
    zygmund_norm,
)

SINGULAR_COND = 1e8
GRAPH_COND = 1e8


def _trail(a, m):
    """(r, c, *grid) -> (*grid, r, c)."""
    return np.moveaxis(np.moveaxis(a, 0, -1), 0, -1)


def _lead(a, m):
    """(*grid, r, c) -> (r, c, *grid)."""
    return np.moveaxis(np.moveaxis(a, -1, 0), -1, 0)


def point_norm_sup(a: np.ndarray) -> float:
    """max over points of the spectral norm of (r, c, *grid) matrices."""
    r, c = a.shape[:2]
    flat = a.reshape(r, c, -1)
    if r == 1 and c == 1:
        return float(np.abs(flat).max()) if flat.size else 0.0
    mats = np.moveaxis(flat, -1, 0)
    return float(spectral_norms(mats).max())


@dataclass(frozen=True, eq=False)
class BeltramiMatrix:
    """Complex n x n field; ``a[j, k]`` multiplies df/dz_k in row j."""

    grid: Grid
    a: np.ndarray  # (n, n, *shape)

    def __post_init__(self):
        n = self.grid.n
        a = np.asarray(self.a)
        try:
            a = np.broadcast_to(a, (n, n) + self.grid.shape)
        except ValueError:
            raise InvalidParameter(f"Beltrami data of shape {np.shape(self.a)} does not fit the grid") from None
        a = np.array(a, dtype=complex)
        if not np.all(np.isfinite(a)):
            raise InvalidParameter("Beltrami entries must be finite")
        object.__setattr__(self, "a", a)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.n, grid.n) + grid.shape, complex))

    @classmethod
    def constant(cls, grid, value):
        v = np.asarray(value, complex)
        if v.ndim == 0:
            v = v * np.eye(grid.n)
        v = v.reshape(grid.n, grid.n)
        return cls(grid, v[(...,) + (None,) * grid.m])

    def entry(self, j, k) -> Field:
        return Field(self.grid, self.a[j, k])

    def row(self, j) -> Field:
        """Row j as an n-component field."""
        return Field(self.grid, self.a[j])

    def sup_norm(self) -> float:
        return point_norm_sup(self.a)

    def at_origin(self) -> np.ndarray:
        return self.a[(slice(None), slice(None)) + (0,) * self.grid.m].copy()

    def as_field(self) -> Field:
        """All n^2 entries as one field, row-major."""
        n = self.grid.n
        return Field(self.grid, self.a.reshape((n * n,) + self.grid.shape))

    @classmethod
    def from_field(cls, f: Field):
        n = f.grid.n
        return cls(f.grid, f.values.reshape((n, n) + f.grid.shape))

    def matrices(self) -> np.ndarray:
        """View with trailing matrix axes, (*shape, n, n)."""
        return _trail(self.a, self.grid.m)


@dataclass(frozen=True, eq=False)
class StructureField:
    """Real 2n x 2n matrix J per grid point, (*shape, 2n, 2n)."""

    grid: Grid
    J: np.ndarray
    tol: float = 1e-10

    def __post_init__(self):
        m = self.grid.m
        J = np.asarray(self.J)
        if J.shape != self.grid.shape + (m, m):
            raise InvalidParameter(f"structure of shape {J.shape} does not fit the grid")
        if np.iscomplexobj(J):
            if np.abs(J.imag).max() > self.tol:
                raise InvalidParameter("structure matrices must be real")
            J = J.real
        J = np.array(J, dtype=float)
        if not np.all(np.isfinite(J)):
            raise InvalidParameter("structure entries must be finite")
        err = float(np.abs(J @ J + np.eye(m)).max())
        if err > self.tol * max(1.0, float(np.abs(J).max()) ** 2):
            raise InvalidParameter(f"J^2 + I is {err:.3g} away from zero")
        object.__setattr__(self, "J", J)

    @classmethod
    def standard(cls, grid):
        return cls(grid, np.broadcast_to(standard_J(grid.n), grid.shape + (grid.m, grid.m)).copy())

    def at_origin(self) -> np.ndarray:
        return self.J[(0,) * self.grid.m].copy()


@dataclass(frozen=True, eq=False)
class VectorField:
    """Real vector field in the coordinate frame, components (2n, *shape)."""

    grid: Grid
    v: np.ndarray

    def __post_init__(self):
        m = self.grid.m
        v = np.asarray(self.v)
        try:
            v = np.broadcast_to(v, (m,) + self.grid.shape)
        except ValueError:
            raise InvalidParameter(f"vector field of shape {np.shape(self.v)} does not fit the grid") from None
        if np.iscomplexobj(v):
            v = v.real
        v = np.array(v, dtype=float)
        if not np.all(np.isfinite(v)):
            raise InvalidParameter("vector field entries must be finite")
        object.__setattr__(self, "v", v)

    @classmethod
    def coordinate(cls, grid, a):
        v = np.zeros((grid.m,) + grid.shape)
        v[a] = 1.0
        return cls(grid, v)

    def sup(self) -> float:
        return float(np.abs(self.v).max())


def standard_J(n) -> np.ndarray:
    blk = np.array([[0.0, -1.0], [1.0, 0.0]])
    return np.kron(np.eye(n), blk)


def _frames(n):
    """Complex frame vectors d/dz_k and d/dzbar_k in the real basis, as columns."""
    dz = np.zeros((2 * n, n), complex)
    dzb = np.zeros((2 * n, n), complex)
    for k in range(n):
        dz[2 * k, k], dz[2 * k + 1, k] = 0.5, -0.5j
        dzb[2 * k, k], dzb[2 * k + 1, k] = 0.5, 0.5j
    return dz, dzb


def _to_complex_coeffs(v, n):
    """Real-basis vectors (..., 2n, c) -> coefficients on d/dz (p) and d/dzbar (q)."""
    vx, vy = v[..., 0::2, :], v[..., 1::2, :]
    return vx + 1j * vy, vx - 1j * vy


# --------------------------------------------------------------------------
# dictionary


def beltrami_from_map(F: MapField) -> BeltramiMatrix:
    """The A for which F solves dF/dzbar = A dF/dz, namely A = M1 M0^{-1}."""
    g = F.grid
    Fz, Fzb = map_jacobian(F)
    M0 = _trail(Fz, g.m)
    M1 = _trail(Fzb, g.m)
    cond = conditions(M0.reshape(-1, g.n, g.n))
    worst = int(np.argmax(cond))
    if not cond[worst] < SINGULAR_COND:
        idx = np.unravel_index(worst, g.shape)
        raise SingularJacobian(f"dF/dz is singular at node {idx} (condition {cond[worst]:.3g})", idx, float(cond[worst]))
    A = np.linalg.solve(np.swapaxes(M0, -1, -2), np.swapaxes(M1, -1, -2))
    return BeltramiMatrix(g, _lead(np.swapaxes(A, -1, -2), g.m))


def structure_from_beltrami(A: BeltramiMatrix) -> StructureField:
    """J with -i eigenspace spanned by dzbar_j - sum_k a_jk dz_k."""
    g = A.grid
    n, m = g.n, g.m
    if not A.sup_norm() < 1.0:
        raise InvalidParameter(f"Beltrami data must satisfy ||a|| < 1, got {A.sup_norm():.3g}")
    dz, dzb = _frames(n)
    a = A.matrices()  # (*shape, n, n)
    # columns Zbar_j = dzb[:, j] - sum_k a_jk dz[:, k]
    Zb = dzb - dz @ np.swapaxes(a, -1, -2)
    W = np.concatenate([Zb, Zb.conj()], axis=-1)
    lam = np.concatenate([-1j * np.ones(n), 1j * np.ones(n)])
    J = np.linalg.solve(np.swapaxes(W, -1, -2), np.swapaxes(W * lam, -1, -2))
    J = np.swapaxes(J, -1, -2)
    return StructureField(g, J.real)


def _graph_from_J(J, n):
    """a per point from J (..., 2n, 2n), with the condition of the graph block."""
    m = 2 * n
    dz, dzb = _frames(n)
    Pi = 0.5 * (np.eye(m) + 1j * J)
    w = Pi @ dzb  # (..., 2n, n): columns w_j in the -i eigenspace
    p, q = _to_complex_coeffs(w, n)  # w_j = sum_k p[k, j] dz_k + q[k, j] dzbar_k
    alpha = np.swapaxes(q, -1, -2)
    beta = np.swapaxes(p, -1, -2)
    cond = conditions(alpha)
    return alpha, beta, cond


def beltrami_from_structure(J: StructureField) -> BeltramiMatrix:
    """Read a off the -i eigenspace of J as a graph over span{d/dzbar_j}."""
    g = J.grid
    n = g.n
    alpha, beta, cond = _graph_from_J(J.J, n)
    bad = ~(cond < GRAPH_COND)
    if np.any(bad):
        idx = np.unravel_index(int(np.argmax(np.where(np.isfinite(cond), cond, np.inf))), g.shape)
        raise GraphConditionFailed(f"-i eigenspace of J is not a graph over d/dzbar at node {idx}")
    a = -np.linalg.solve(alpha, beta)
    return BeltramiMatrix(g, _lead(a, g.m))


# --------------------------------------------------------------------------
# integrability


def _products(us, vs, grid):
    """Elementwise products u_i v_i through the Bony route."""
    return product(Field(grid, us), Field(grid, vs)).values


def _bracket(X, Y, grid):
    """[X, Y]^a = X^b d_b Y^a - Y^b d_b X^a."""
    m = grid.m
    dX = real_gradient(X, grid).real  # dX[b, a] = d_b X^a
    dY = real_gradient(Y, grid).real
    us = np.concatenate([np.repeat(X, m, axis=0), np.repeat(Y, m, axis=0)])  # index (b, a)
    vs = np.concatenate([dY.reshape((m * m,) + grid.shape), dX.reshape((m * m,) + grid.shape)])
    pr = _products(us, vs, grid).reshape((2, m, m) + grid.shape)
    return (pr[0].sum(axis=0) - pr[1].sum(axis=0)).real


def _apply_J(J, X, grid):
    """(J X)^a = sum_b J_ab X^b."""
    m = grid.m
    Jl = np.moveaxis(J.reshape(grid.shape + (m * m,)), -1, 0)  # index (a, b)
    pr = _products(Jl, np.tile(X, (m,) + (1,) * grid.m), grid).reshape((m, m) + grid.shape)
    return pr.sum(axis=1).real


def nijenhuis(J: StructureField, X: VectorField, Y: VectorField, r=None, s=None, p=None) -> VectorField:
    """N(X, Y) = [X, Y] - [JX, JY] + J[X, JY] + J[JX, Y].

    Every product of rough factors goes through the paraproduct
    decomposition; for band-limited data it reduces to pointwise algebra.
    When r, s, p are given the norms of N are attached as ``reports``.
    """
    g = check_same_grid(J, X, Y)
    x, y = X.v, Y.v
    Jx, Jy = _apply_J(J.J, x, g), _apply_J(J.J, y, g)
    N = _bracket(x, y, g) - _bracket(Jx, Jy, g) + _apply_J(J.J, _bracket(x, Jy, g), g) + _apply_J(J.J, _bracket(Jx, y, g), g)
    out = VectorField(g, N)
    if r is not None:
        f = Field(g, N)
        lp = lp_decompose(f)
        rep = {"sup": float(np.abs(N).max()), "zygmund": zygmund_norm(f, r - 1, lp).to_dict()}
        if s is not None and p is not None:
            rep["sobolev"] = sobolev_norm(f, s - 1, p, lp).to_dict()
        object.__setattr__(out, "reports", rep)
    return out


def nijenhuis_coordinate(J: StructureField, gap=2) -> np.ndarray:
    """N(d_a, d_b)^e for all coordinate pairs, shape (m, m, m, *grid).

    On coordinate fields every term is a J entry times a first derivative
    of a J entry:
        N(d_a, d_b)^e = sum_c  J_ec d_a J_cb - J_ec d_b J_ca
                             - J_ca d_c J_eb + J_cb d_c J_ea,
    so each J entry is decomposed once and each derivative field is
    streamed through its eight Bony products.
    """
    g = J.grid
    m, N = g.m, g.N
    axes = tuple(range(-m, 0))
    sym = block_symbols(g)[..., : N // 2 + 1]
    w = workers()

    def blocks(hat):
        return [sfft.irfftn(hat * s, s=g.shape, axes=axes, workers=w) for s in sym]

    Jhat = sfft.rfftn(np.moveaxis(J.J, (-2, -1), (0, 1)), axes=axes, workers=w)
    JB = [[blocks(Jhat[p, q]) for q in range(m)] for p in range(m)]
    # odd symbols of real fields drop the unpaired Nyquist plane (the real part
    # of the complex-FFT derivative does the same)
    kk = []
    for d in range(m):
        k = np.broadcast_to(partial_symbol(g, d), g.shape).copy()
        k[(slice(None),) * d + (N // 2,)] = 0.0
        kk.append(k[..., : N // 2 + 1])
    out = np.zeros((m, m, m) + g.shape)
    for d in range(m):
        for p in range(m):
            for q in range(m):
                DB = blocks(Jhat[p, q] * kk[d])
                for x in range(m):
                    P = bony_from_blocks(JB[d][x], DB, gap)
                    out[x, q, p] -= P
                    out[q, x, p] += P
                for e in range(m):
                    P = bony_from_blocks(JB[e][p], DB, gap)
                    out[d, q, e] += P
                    out[q, d, e] -= P
    return out


def nijenhuis_coordinate_sup(J: StructureField) -> float:
    """max over pairs of coordinate fields of sup |N(d_a, d_b)|."""
    return float(np.abs(nijenhuis_coordinate(J)).max())


@dataclass
class IntegrabilityReport:
    pairs: dict  # (j, k) -> Field with n components
    sup: float
    sobolev: float
    vacuous: bool
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "sup": float(self.sup),
            "sobolev": float(self.sobolev),
            "vacuous": bool(self.vacuous),
            "pairs": {f"{j},{k}": float(v.sup()) for (j, k), v in self.pairs.items()},
            **self.details,
        }


def integrability_residual(A: BeltramiMatrix, r=None, s=0.0, p=2.0) -> IntegrabilityReport:
    """Residual of the formal integrability condition for each pair j < k.

    Component l of pair (j, k) is
        d a_jl/dzbar_k + sum_m a_jm d a_kl/dz_m - d a_kl/dzbar_j - sum_m a_km d a_jl/dz_m.
    """
    g = A.grid
    n = g.n
    if n == 1:
        return IntegrabilityReport({}, 0.0, 0.0, True, {"note": "no pairs j < k when n = 1"})
    dz, dzb = complex_jacobian(A.a.reshape((n * n,) + g.shape), g)
    dz = dz.reshape((n, n, n) + g.shape)  # dz[m, j, l] = d a_jl / dz_m
    dzb = dzb.reshape((n, n, n) + g.shape)
    pairs = {}
    sup = 0.0
    sob = 0.0
    for j in range(n):
        for k in range(j + 1, n):
            res = np.empty((n,) + g.shape, complex)
            for l in range(n):
                acc = dzb[k, j, l] - dzb[j, k, l]
                for mm in range(n):
                    acc = acc + product(A.entry(j, mm), Field(g, dz[mm, k, l])).values[0]
                    acc = acc - product(A.entry(k, mm), Field(g, dz[mm, j, l])).values[0]
                res[l] = acc
            f = Field(g, res)
            pairs[(j, k)] = f
            sup = max(sup, f.sup())
            sob = max(sob, sobolev_norm(f, s - 1, p).value)
    details = {}
    if r is not None:
        details["zygmund"] = max(zygmund_norm(f, r - 1).value for f in pairs.values())
    return IntegrabilityReport(pairs, sup, sob, False, details)


# --------------------------------------------------------------------------
# normalization and localization


@dataclass
class LinearChange:
    """Record of the constant real-linear change x -> L x."""

    L: np.ndarray

    @property
    def inverse(self):
        return np.linalg.inv(self.L)

    def to_dict(self):
        return {"L": self.L.tolist()}


def _normalizer(J0p, n):
    m = 2 * n
    dz, _ = _frames(n)
    u = 0.5 * (np.eye(m) - 1j * J0p) @ dz  # +i eigenvectors
    M = np.empty((m, m))
    M[:, 0::2] = (2 * u).real
    M[:, 1::2] = -(2 * u).imag
    if np.linalg.cond(M) > 1e6:
        w, V = np.linalg.eig(J0p)
        u = V[:, np.argsort(-w.imag)[:n]]
        M[:, 0::2] = u.real
        M[:, 1::2] = -u.imag
    return np.linalg.inv(M)


def normalize_origin(J: StructureField):
    """Conjugate J by a constant real L with L J(0) L^{-1} = J0.

    The conjugation is applied pointwise on the same grid; the returned
    record keeps L for mapping charts back.
    """
    g = J.grid
    J0p = J.at_origin()
    L = _normalizer(J0p, g.n)
    Linv = np.linalg.inv(L)
    Jn = L @ J.J @ Linv
    Jn[(0,) * g.m] = standard_J(g.n)  # exact at the origin
    return StructureField(g, Jn, tol=max(J.tol, 1e-9)), LinearChange(L)


def radial_cutoff(grid: Grid, radius_fraction: float) -> np.ndarray:
    """Smooth chi: 1 for |x| <= R/2, 0 for |x| >= R, with R = fraction * L."""
    if not 0.0 < radius_fraction <= 0.45:
        raise InvalidParameter(f"radius fraction must lie in (0, 0.45], got {radius_fraction}")
    R = radius_fraction * grid.L
    rho = np.sqrt(sum(c ** 2 for c in grid.coords(centered=True)))
    return smooth_step(2.0 * rho / R)


def inner_region(grid: Grid, radius_fraction: float) -> np.ndarray:
    """Boolean mask of the region where the cutoff equals one."""
    R = radius_fraction * grid.L
    rho = np.sqrt(sum(c ** 2 for c in grid.coords(centered=True)))
    return np.broadcast_to(rho <= R / 2, grid.shape)


def gaussian_mollify(values: np.ndarray, grid: Grid, scale: float) -> np.ndarray:
    """Gaussian low-pass with width N / (2 scale) in frequency.

    The kernel is positive with unit mass, so pointwise norms cannot grow.
    """
    if not scale > 0:
        raise InvalidParameter("mollify scale must be positive")
    kc = grid.N / (2.0 * scale)
    sym = np.exp(-0.5 * (grid.freq_norm() / kc) ** 2)
    return ifft(fft(values, grid) * sym, grid)


def cutoff_periodize(A: BeltramiMatrix, radius_fraction=0.4, mollify_scale=None) -> BeltramiMatrix:
    """chi * A, optionally mollified; vanishes near the box boundary."""
    g = A.grid
    chi = radial_cutoff(g, radius_fraction)
    a = A.a
    if mollify_scale is not None:
        a = gaussian_mollify(a, g, mollify_scale)
    return BeltramiMatrix(g, a * chi)


# --------------------------------------------------------------------------
# generators


@dataclass
class GeneratedStructure:
    A: BeltramiMatrix
    kind: str
    params: dict
    seed: int
    F_true: MapField = None

    def metadata(self):
        return {"kind": self.kind, "params": self.params, "seed": int(self.seed), "ground_truth": self.F_true is not None}


KINDS = ("pullback", "random-holder", "lipschitz-kink", "constant", "nonintegrable")


def _rng(seed):
    return np.random.Generator(np.random.Philox(int(seed)))


def _random_band_limited(grid: Grid, ncomp: int, band: float, rng) -> np.ndarray:
    """Complex trigonometric polynomial with random coefficients on |xi| <= band."""
    r = grid.freq_norm()
    mask = (r <= band) & (r > 0)
    coef = np.zeros((ncomp,) + grid.shape, complex)
    k = int(np.count_nonzero(mask))
    for c in range(ncomp):
        vals = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        coef[c][mask] = vals / (1.0 + r[mask] ** 2)
    return ifft(coef, grid) * grid.size


def pullback_map(grid: Grid, amp=0.2, band=3.0, seed=0) -> MapField:
    """z + h(z) with h band-limited, dh/dzbar(0) = 0, h(0) = 0 and sup|Dh| = amp."""
    n, m = grid.n, grid.m
    rng = _rng(seed)
    h = _random_band_limited(grid, n, band, rng)
    ex = (...,) + (None,) * m
    _, dzb = complex_jacobian(h, grid)
    C = dzb[(slice(None), slice(None)) + (0,) * m]  # C[k, l] = dh_l/dzbar_k (0)
    c = grid.coords(centered=False)
    s = 2 * math.pi / grid.L
    for l in range(n):
        for k in range(n):
            # psi(z_k) = sin x_k - i sin y_k has dpsi/dzbar_k(0) = 1, dpsi/dz_k(0) = 0
            h[l] = h[l] - C[k, l] * (np.sin(s * c[2 * k]) - 1j * np.sin(s * c[2 * k + 1])) / s
    F0 = MapField(grid, h)
    Hz, Hzb = map_jacobian(F0)
    D = real_jacobian_from_complex(Hz - np.eye(n)[ex], Hzb)
    lip = float(spectral_norms(D).max())
    h = h * (amp / lip) if lip > 0 else h
    return MapField(grid, h).normalized()


def _lacunary_mu(grid, params, seed):
    r = float(params.get("r", 0.6))
    k_low = int(params.get("k_low", 3))
    k_high = int(params.get("k_high", grid.kmax - 1))
    u = gen_lacunary(grid, r, k_low, k_high, seed)
    u = u - complex(u.at_origin()[0])  # a(0) = 0
    amp = float(params.get("amp", 0.3))
    if params.get("normalize", "zygmund") == "sup":
        scale = amp / u.sup()
    else:
        scale = amp / zygmund_norm(u, r).value
    return u.values[0] * scale


def _kink_mu(grid, params):
    amp = float(params.get("amp", 0.3))
    c = grid.coords(centered=True)
    d = np.sqrt(c[0] ** 2 + c[1] ** 2) * np.ones(grid.shape)
    phase = np.exp(1j * float(params.get("phase", 0.0)))
    return amp * phase * d / d.max()


def gen_structure(kind: str, grid: Grid, params=None, seed=0) -> GeneratedStructure:
    """Deterministic test structures.

    kinds: pullback (integrable, with ground truth F), random-holder (n = 1,
    lacunary entries of prescribed C^r), lipschitz-kink (n = 1, scaled
    distance to the origin), constant, nonintegrable (n = 2, a_01 = c sin x2).
    """
    params = dict(params or {})
    n = grid.n
    if kind not in KINDS:
        raise InvalidParameter(f"unknown structure kind {kind!r}; expected one of {KINDS}")
    if kind in ("random-holder", "lipschitz-kink") and n != 1:
        raise InvalidParameter(f"kind {kind!r} needs n = 1: integrability cannot be guaranteed for n = 2")
    if kind == "nonintegrable" and n != 2:
        raise InvalidParameter("kind 'nonintegrable' needs n = 2")
    amp = float(params.get("amp", 0.3 if kind != "nonintegrable" else 0.2))
    if not amp >= 0:
        raise InvalidParameter("amp must be non-negative")
    params["amp"] = amp
    F_true = None
    if kind == "pullback":
        band = float(params.setdefault("band", 3.0))
        F_true = pullback_map(grid, amp, band, seed)
        A = beltrami_from_map(F_true)
    elif kind == "random-holder":
        params.setdefault("r", 0.6)
        A = BeltramiMatrix(grid, _lacunary_mu(grid, params, seed)[None, None])
    elif kind == "lipschitz-kink":
        A = BeltramiMatrix(grid, _kink_mu(grid, params)[None, None])
    elif kind == "constant":
        value = params.get("value", amp)
        if np.ndim(value) == 0 and n == 2 and "value" not in params:
            value = amp * np.array([[0.6, 0.5j], [-0.3, 0.4]]) / np.linalg.norm([[0.6, 0.5j], [-0.3, 0.4]], 2)
        A = BeltramiMatrix.constant(grid, value)
        params["value"] = np.asarray(value).tolist() if np.ndim(value) else value
    else:
        x2 = grid.coords(centered=False)[2] * (2 * math.pi / grid.L)
        a = np.zeros((2, 2) + grid.shape, complex)
        a[0, 1] = amp * np.sin(x2)
        A = BeltramiMatrix(grid, a)
    return GeneratedStructure(A, kind, params, seed, F_true)
