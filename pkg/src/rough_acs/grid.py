"""Periodic grids over C^n and spectral calculus on them.

Fields live on the torus [0, L)^{2n} sampled at ``N`` points per real axis,
with axis order (x1, y1, ..., xn, yn). Complex coordinates are
z_j = x_j + i y_j. Linear parts of maps use the centered representative of
each coordinate, i.e. values in [-L/2, L/2), so that the origin sits at
grid index 0.

Discrete derivatives use the FFT frequency ordering throughout, including
the unpaired Nyquist mode -N/2. Keeping that mode (instead of zeroing it)
makes ``4 * d_z d_zbar`` equal to the discrete Laplacian on every mode,
which the Newton iteration in :mod:`rough_acs.malgrange` relies on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatch, InvalidParameter

_WORKERS = 1


def set_threads(n: int) -> None:
    """Set the worker count used by every FFT in the package."""
    global _WORKERS
    if n < 1:
        raise InvalidParameter("thread count must be >= 1")
    _WORKERS = int(n)


def workers():
    return _WORKERS


@dataclass(frozen=True)
class Grid:
    n: int
    N: int
    L: float = 2 * math.pi

    def __post_init__(self):
        if self.n not in (1, 2):
            raise InvalidParameter(f"complex dimension must be 1 or 2, got {self.n}")
        if self.N < 8 or self.N & (self.N - 1):
            raise InvalidParameter(f"N must be a power of 2 >= 8, got {self.N}")
        if not self.L > 0:
            raise InvalidParameter(f"period must be positive, got {self.L}")

    @property
    def m(self) -> int:
        """Real dimension."""
        return 2 * self.n

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.m

    @property
    def size(self) -> int:
        return self.N ** self.m

    @property
    def spacing(self) -> float:
        return self.L / self.N

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.m

    @property
    def kmax(self) -> int:
        """Index of the top Littlewood-Paley block, log2(N/2)."""
        return int(round(math.log2(self.N // 2)))

    def axis_coords(self, centered=False) -> np.ndarray:
        x = np.arange(self.N) * self.spacing
        if centered:
            x = np.where(np.arange(self.N) >= self.N // 2, x - self.L, x)
        return x

    def coords(self, centered=False) -> list:
        """Broadcastable coordinate arrays, one per real axis."""
        x = self.axis_coords(centered)
        return [_along(x, a, self.m) for a in range(self.m)]

    def z(self, j: int, centered=True) -> np.ndarray:
        """Complex coordinate z_j as a full grid array."""
        c = self.coords(centered)
        return np.broadcast_to(c[2 * j] + 1j * c[2 * j + 1], self.shape)

    def frequencies(self) -> list:
        """Signed integer frequencies per axis (FFT order), broadcastable."""
        f = np.fft.fftfreq(self.N, 1.0 / self.N)
        return [_along(f, a, self.m) for a in range(self.m)]

    def wavenumbers(self) -> list:
        s = 2 * math.pi / self.L
        return [s * f for f in self.frequencies()]

    def freq_norm(self) -> np.ndarray:
        """Euclidean norm of the integer frequency vector on the full lattice."""
        return np.sqrt(sum(f ** 2 for f in self.frequencies()))


def _along(v, axis, m):
    shape = [1] * m
    shape[axis] = -1
    return np.reshape(v, shape)


def make_grid(n: int, N: int, L: float = 2 * math.pi) -> Grid:
    return Grid(int(n), int(N), float(L))


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples of an ``ncomp``-component function on ``grid``.

    ``values`` has shape ``(ncomp, *grid.shape)``.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == self.grid.m:
            v = v[None]
        if v.ndim != self.grid.m + 1:
            raise GridMismatch(f"values of shape {v.shape} do not fit grid {self.grid.shape}")
        try:
            v = np.broadcast_to(v, v.shape[:1] + self.grid.shape)
        except ValueError:
            raise GridMismatch(f"values of shape {v.shape} do not fit grid {self.grid.shape}") from None
        v = np.array(v, dtype=complex) if not v.flags.writeable or v.dtype != complex else v
        if not np.all(np.isfinite(v)):
            raise InvalidParameter("field samples must be finite")
        object.__setattr__(self, "values", v)

    @property
    def ncomp(self) -> int:
        return self.values.shape[0]

    def component(self, i) -> "Field":
        return Field(self.grid, self.values[i : i + 1])

    def __getitem__(self, i):
        return self.values[i]

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def at_origin(self) -> np.ndarray:
        return self.values[(slice(None),) + (0,) * self.grid.m]

    def mean(self) -> np.ndarray:
        # contiguous rows keep numpy's pairwise summation; strided reductions lose ~N^m eps
        return np.ascontiguousarray(self.values.reshape(self.ncomp, -1)).mean(axis=1)

    def _other(self, other):
        if isinstance(other, Field):
            check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return Field(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)

    def conj(self):
        return Field(self.grid, self.values.conj())


def check_same_grid(*objs) -> Grid:
    grids = {o.grid for o in objs}
    if len(grids) != 1:
        raise GridMismatch(f"objects live on different grids: {grids}")
    return objs[0].grid


def as_field(grid: Grid, values) -> Field:
    return values if isinstance(values, Field) else Field(grid, values)


@dataclass(frozen=True, eq=False)
class MapField:
    """A map C^n -> C^n of the form z + P z + Q conj(z) + h(z).

    ``disp`` (shape ``(n, *grid.shape)``) holds the periodic part h; ``P`` and
    ``Q`` are constant complex n x n matrices acting on the column vector z.
    The maps built in this package are all periodic (P = Q = 0) except for
    the charts G and F, whose z-bar coefficients carry the mean of B.
    """

    grid: Grid
    disp: np.ndarray
    P: np.ndarray = field(default=None)
    Q: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.grid.n
        d = np.asarray(self.disp, dtype=complex)
        if d.shape != (n,) + self.grid.shape:
            raise GridMismatch(f"displacement shape {d.shape} does not fit grid")
        if not np.all(np.isfinite(d)):
            raise InvalidParameter("map samples must be finite")
        object.__setattr__(self, "disp", d)
        for name in ("P", "Q"):
            val = getattr(self, name)
            val = np.zeros((n, n), complex) if val is None else np.asarray(val, complex).reshape(n, n)
            object.__setattr__(self, name, val)

    @classmethod
    def identity(cls, grid: Grid) -> "MapField":
        return cls(grid, np.zeros((grid.n,) + grid.shape, complex))

    @classmethod
    def from_field(cls, f: Field, P=None, Q=None) -> "MapField":
        return cls(f.grid, f.values, P, Q)

    @property
    def displacement(self) -> Field:
        return Field(self.grid, self.disp)

    @property
    def is_periodic(self) -> bool:
        return not (np.any(self.P) or np.any(self.Q))

    def linear_part(self, z=None) -> np.ndarray:
        """(P z + Q conj z) at the given points (default: centered grid nodes)."""
        g = self.grid
        if z is None:
            z = np.stack([g.z(j) for j in range(g.n)])
        return np.einsum("lk,k...->l...", self.P, z) + np.einsum("lk,k...->l...", self.Q, z.conj())

    def values(self) -> np.ndarray:
        """Map values H(z) at the centered grid nodes, shape (n, *shape)."""
        g = self.grid
        z = np.stack([g.z(j) for j in range(g.n)])
        return z + self.linear_part(z) + self.disp

    def origin_value(self) -> np.ndarray:
        return self.disp[(slice(None),) + (0,) * self.grid.m].copy()

    def normalized(self) -> "MapField":
        """Shift so that the map sends 0 to 0."""
        return MapField(self.grid, self.disp - self.origin_value()[(...,) + (None,) * self.grid.m], self.P, self.Q)

    def conj(self) -> "MapField":
        """The map z -> conj(H(z))."""
        n = self.grid.n
        # conj(z + Pz + Qz̄ + h) = z̄ + P̄ z̄ + Q̄ z + h̄ ; z̄ = z - 2i Im z is not affine-periodic
        # so z̄ is written as z + (-1)·z + 1·z̄.
        return MapField(self.grid, self.disp.conj(), self.Q.conj() - np.eye(n), self.P.conj() + np.eye(n))

    def apply_linear(self, M) -> "MapField":
        """The map z -> M H(z) for a constant complex matrix M."""
        n = self.grid.n
        M = np.asarray(M, complex)
        return MapField(
            self.grid,
            np.einsum("lk,k...->l...", M, self.disp),
            M @ (np.eye(n) + self.P) - np.eye(n),
            M @ self.Q,
        )


# --------------------------------------------------------------------------
# transforms and multipliers


def _axes(grid):
    return tuple(range(-grid.m, 0))


def fft(values: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.fftn(values, axes=_axes(grid), workers=_WORKERS)


def ifft(values: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.ifftn(values, axes=_axes(grid), workers=_WORKERS)


def apply_multiplier(u: Field, sigma) -> Field:
    """Fourier multiplier with symbol ``sigma`` on the integer frequency lattice.

    ``sigma`` is either an array broadcastable to the grid shape or a
    callable receiving the signed integer frequency arrays (one per real
    axis, broadcastable) and returning the symbol.
    """
    g = u.grid
    s = sigma(*g.frequencies()) if callable(sigma) else sigma
    s = np.broadcast_to(np.asarray(s), g.shape)
    if not np.all(np.isfinite(s)):
        raise InvalidParameter("multiplier symbol has non-finite values")
    return Field(g, ifft(fft(u.values, g) * s, g))


def dz_symbol(grid: Grid, j: int) -> np.ndarray:
    k = grid.wavenumbers()
    return 0.5 * (1j * k[2 * j] + k[2 * j + 1])


def dzbar_symbol(grid: Grid, j: int) -> np.ndarray:
    k = grid.wavenumbers()
    return 0.5 * (1j * k[2 * j] - k[2 * j + 1])


def partial_symbol(grid: Grid, a: int) -> np.ndarray:
    """Symbol of the real partial derivative along axis ``a``."""
    return 1j * grid.wavenumbers()[a]


def laplacian_symbol(grid: Grid) -> np.ndarray:
    return -sum(k ** 2 for k in grid.wavenumbers())


def _check_index(grid, j, top):
    if not 0 <= j < top:
        raise InvalidParameter(f"derivative index {j} out of range 0..{top - 1}")


def d_z(u: Field, j: int) -> Field:
    _check_index(u.grid, j, u.grid.n)
    return apply_multiplier(u, dz_symbol(u.grid, j))


def d_zbar(u: Field, j: int) -> Field:
    _check_index(u.grid, j, u.grid.n)
    return apply_multiplier(u, dzbar_symbol(u.grid, j))


def partial(u: Field, a: int) -> Field:
    _check_index(u.grid, a, u.grid.m)
    return apply_multiplier(u, partial_symbol(u.grid, a))


def laplacian(u: Field) -> Field:
    return apply_multiplier(u, laplacian_symbol(u.grid))


def inv_laplacian(h: Field) -> Field:
    """Mean-zero periodic solution v of Delta v = h - mean(h)."""
    g = h.grid
    lap = laplacian_symbol(g)
    inv = np.zeros(g.shape)
    nz = lap != 0
    inv[nz] = 1.0 / lap[nz]
    return apply_multiplier(h, inv)


def complex_jacobian(values: np.ndarray, grid: Grid):
    """All d/dz_k and d/dzbar_k of a stack of components from one FFT each.

    Returns ``(dz, dzb)`` with ``dz[k, c] = d values[c] / dz_k``.
    """
    hat = fft(values, grid)
    dz = np.stack([ifft(hat * dz_symbol(grid, k), grid) for k in range(grid.n)])
    dzb = np.stack([ifft(hat * dzbar_symbol(grid, k), grid) for k in range(grid.n)])
    return dz, dzb


def real_gradient(values: np.ndarray, grid: Grid) -> np.ndarray:
    """``out[a, c] = d values[c] / d x_a`` for every real axis a."""
    hat = fft(values, grid)
    return np.stack([ifft(hat * partial_symbol(grid, a), grid) for a in range(grid.m)])


# --------------------------------------------------------------------------
# map Jacobians


def map_jacobian(H: MapField):
    """Complex Jacobian blocks of a map, in the derivative-first orientation.

    Returns ``(Hz, Hzb)`` with ``Hz[j, l] = dH_l/dz_j`` and
    ``Hzb[j, l] = dH_l/dzbar_j`` -- the orientation of dF/dz in
    dF/dzbar = A dF/dz.
    """
    g = H.grid
    dz, dzb = complex_jacobian(H.disp, g)
    ex = (...,) + (None,) * g.m
    Hz = dz + (np.eye(g.n) + H.P).T[ex]
    Hzb = dzb + H.Q.T[ex]
    return Hz, Hzb


def real_jacobian_from_complex(Hz, Hzb) -> np.ndarray:
    """Real 2n x 2n Jacobian (trailing matrix axes) from complex blocks.

    Row 2l / 2l+1 holds d Re H_l / d Im H_l, column 2k / 2k+1 differentiates
    in x_k / y_k.
    """
    n = Hz.shape[0]
    shape = Hz.shape[2:]
    D = np.empty(shape + (2 * n, 2 * n))
    for l in range(n):
        for k in range(n):
            dx = Hz[k, l] + Hzb[k, l]  # d/dx = d/dz + d/dzbar
            dy = 1j * (Hz[k, l] - Hzb[k, l])  # d/dy = i(d/dz - d/dzbar)
            D[..., 2 * l, 2 * k] = dx.real
            D[..., 2 * l + 1, 2 * k] = dx.imag
            D[..., 2 * l, 2 * k + 1] = dy.real
            D[..., 2 * l + 1, 2 * k + 1] = dy.imag
    return D


def _singular_extremes(M: np.ndarray):
    """Largest and smallest singular values of stacked square matrices (trailing axes)."""
    k = M.shape[-1]
    if k == 1:
        a = np.abs(M[..., 0, 0])
        return a, a
    if k == 2:
        fro = np.sum(np.abs(M) ** 2, axis=(-1, -2))
        det = np.abs(M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0])
        disc = np.sqrt(np.maximum(fro ** 2 - 4 * det ** 2, 0.0))
        smax = np.sqrt((fro + disc) / 2)
        smin = np.where(smax > 0, det / np.where(smax > 0, smax, 1.0), 0.0)
        return smax, smin
    ev = np.linalg.eigvalsh(np.swapaxes(M.conj(), -1, -2) @ M)
    return np.sqrt(np.maximum(ev[..., -1], 0.0)), np.sqrt(np.maximum(ev[..., 0], 0.0))


def spectral_norms(M: np.ndarray) -> np.ndarray:
    """Pointwise spectral norms of stacked matrices (trailing axes)."""
    return _singular_extremes(M)[0]


def conditions(M: np.ndarray) -> np.ndarray:
    """Pointwise 2-norm condition numbers; inf where singular."""
    smax, smin = _singular_extremes(M)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(smin > 0, smax / np.where(smin > 0, smin, 1.0), np.inf)


def c1_distance(H: MapField) -> float:
    """||H - id||_{C^1}: sup of the displacement plus sup of its Jacobian norm."""
    g = H.grid
    d = H.linear_part() + H.disp
    Hz, Hzb = map_jacobian(H)
    ex = (...,) + (None,) * g.m
    D = real_jacobian_from_complex(Hz - np.eye(g.n)[ex], Hzb)
    sup0 = float(np.max(np.abs(d)))
    sup1 = float(np.max(spectral_norms(D)))
    return sup0 + sup1


# --------------------------------------------------------------------------
# resampling


def _trig_matrix(grid: Grid, pts: np.ndarray) -> np.ndarray:
    """E[p, f] = exp(i k_f x_p) / N, trigonometric interpolation along one axis."""
    k = 2 * math.pi / grid.L * np.fft.fftfreq(grid.N, 1.0 / grid.N)
    return np.exp(1j * np.outer(pts, k)) / grid.N


def resample_dilate(u: Field, t: float) -> Field:
    """Samples of z -> u(t z) via trigonometric interpolation.

    The dilated points t*z are separable, so this is one small dense
    matrix per axis.
    """
    if not 0.0 <= t <= 1.0:
        raise InvalidParameter(f"dilation factor must lie in [0, 1], got {t}")
    g = u.grid
    if t == 1.0:
        return Field(g, u.values.copy())
    Fm = np.fft.fft(np.eye(g.N), axis=0)  # DFT along one axis
    M = _trig_matrix(g, t * g.axis_coords(centered=True)) @ Fm
    v = u.values
    for a in range(g.m):
        v = np.moveaxis(np.tensordot(M, v, axes=([1], [a + 1])), 0, a + 1)
    return Field(g, v)
