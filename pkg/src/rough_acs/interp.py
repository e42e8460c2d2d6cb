"""Off-grid evaluation of periodic fields, map composition and inversion.

Every method here evaluates the same object, the trigonometric interpolant
of the samples (FFT mode ordering), so they differ only in cost and
rounding:

``direct``  dense Fourier sums, exact; cost ~ P * N^m.
``nufft``   type-2 non-uniform FFT (finufft); m = 4 runs one 3-D
            transform per frequency of the last axis, exact but its cost
            grows like N * P, so "auto" uses it for m = 4 only on small grids.
``taylor``  Taylor series about the nearest node with spectral derivatives;
            accurate for well-resolved (smooth) fields; the order is picked
            from a remainder bound on the spectrum.
``spline``  separable periodic B-splines (scipy.ndimage); low order, cheap.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import ndimage

from .errors import InvalidParameter, NoConvergence
from .grid import (
    Field,
    MapField,
    fft,
    ifft,
    map_jacobian,
    real_jacobian_from_complex,
    spectral_norms,
)

try:
    import finufft
except ImportError:  # pragma: no cover
    finufft = None

DIRECT_BUDGET = 3e7  # max P * N^m handled by the dense sums under method="auto"
TAYLOR_ORDER = {2: 16, 4: 12}  # caps; the order actually used comes from taylor_order
NUFFT_EPS = 1e-14
_TRACE = None


NUFFT4_BUDGET = 2**21  # max N * P for the sliced m = 4 transform under "auto"


def choose_method(grid, npts):
    cost = npts * grid.size
    if cost <= DIRECT_BUDGET:
        return "direct"
    if finufft is not None and (grid.m <= 3 or grid.N * npts <= NUFFT4_BUDGET):
        return "nufft"
    return "taylor"


def interpolate(u: Field, pts, method="auto", order=None) -> np.ndarray:
    """Values of the trigonometric interpolant of ``u`` at real points.

    Parameters
    ----------
    u : Field
    pts : array_like, shape (P, m)
        Real coordinates (x1, y1, ...); wrapped modulo the period.
    method : {"auto", "direct", "nufft", "taylor", "spline"}
    order : int, optional
        Taylor order or spline order.

    Returns
    -------
    ndarray of shape (ncomp, P)
    """
    g = u.grid
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[1] != g.m:
        raise InvalidParameter(f"points must have {g.m} coordinates")
    if not np.all(np.isfinite(pts)):
        raise InvalidParameter("interpolation points must be finite")
    pts = np.mod(pts, g.L)
    on = _node_indices(g, pts)
    if on is not None and method != "spline":
        return u.values.reshape(u.ncomp, -1)[:, on]
    if method == "auto":
        method = choose_method(g, len(pts))
    if method == "direct":
        return _direct(u, pts)
    if method == "nufft":
        return _nufft(u, pts)
    if method == "taylor":
        return _taylor(u, pts, order or TAYLOR_ORDER.get(g.m, 8))
    if method == "spline":
        return _spline(u, pts, order or 3)
    raise InvalidParameter(f"unknown interpolation method {method!r}")


def _node_indices(g, pts):
    """Flat grid indices when every point sits on a node (to 1e-14 L), else None."""
    idx = pts * (g.N / g.L)
    near = np.rint(idx)
    if np.max(np.abs(idx - near), initial=0.0) > 1e-14 * g.N:
        return None
    return np.ravel_multi_index(tuple((near.astype(np.int64) % g.N).T), g.shape)


def _direct(u, pts, chunk=2048):
    g = u.grid
    coef = fft(u.values, g) / g.size
    k = 2 * math.pi / g.L * np.fft.fftfreq(g.N, 1.0 / g.N)
    out = np.empty((u.ncomp, len(pts)), complex)
    for s in range(0, len(pts), chunk):
        p = pts[s : s + chunk]
        E = [np.exp(1j * np.outer(p[:, a], k)) for a in range(g.m)]
        for c in range(u.ncomp):
            # contract the first axis against E[0], then sweep the rest pointwise
            T = E[0] @ coef[c].reshape(g.N, -1)
            for a in range(1, g.m):
                T = np.einsum("pf,pf...->p...", E[a], T.reshape((len(p), g.N, -1)))
            out[c, s : s + chunk] = T.reshape(len(p))
    return out


def _nufft(u, pts):
    g = u.grid
    if finufft is None:
        raise InvalidParameter("nufft interpolation needs the finufft package")
    coef = fft(u.values, g) / g.size
    # with modeord=1 finufft accepts the FFT mode ordering as is
    x = [np.ascontiguousarray(pts[:, a] * (2 * math.pi / g.L)) for a in range(g.m)]
    out = np.empty((u.ncomp, len(pts)), complex)
    if g.m <= 3:
        fn = {1: finufft.nufft1d2, 2: finufft.nufft2d2, 3: finufft.nufft3d2}[g.m]
        for c in range(u.ncomp):
            out[c] = fn(*x, np.ascontiguousarray(coef[c]), isign=1, eps=NUFFT_EPS, modeord=1)
        return out
    # m = 4: sum over the last frequency of 3-D transforms in the first three axes
    k4 = np.fft.fftfreq(g.N, 1.0 / g.N)
    for c in range(u.ncomp):
        modes = np.ascontiguousarray(np.moveaxis(coef[c], -1, 0))  # (N4, N, N, N)
        vals = finufft.nufft3d2(*x[:3], modes, isign=1, eps=NUFFT_EPS, modeord=1)  # (N4, P)
        out[c] = np.einsum("fp,fp->p", vals, np.exp(1j * np.outer(k4, x[3])))
    return out


def multi_indices(m, order):
    for total in range(order + 1):
        for combo in itertools.combinations_with_replacement(range(m), total):
            alpha = [0] * m
            for a in combo:
                alpha[a] += 1
            yield tuple(alpha)


TAYLOR_RTOL = 1e-14
NOISE_FLOOR = 1e-14


def taylor_order(hat, k, dmax, max_order, rtol=TAYLOR_RTOL):
    """Smallest order whose remainder bound meets ``rtol`` relative to sum|u_hat|.

    For one mode the Taylor remainder of exp(i k.d) is at most
    (|k| |d|)^(q+1) / (q+1)!, so summing over the spectrum bounds the error.
    Modes below ``NOISE_FLOOR`` times the largest are left out of the bound.
    """
    a = np.abs(hat).reshape(hat.shape[0], -1).sum(axis=0)
    a[a < NOISE_FLOOR * a.max()] = 0.0  # rounding-level modes carry no information
    total = a.sum()
    if total == 0:
        return 0
    kd = np.sqrt(sum(kk ** 2 for kk in k)).reshape(-1) * dmax
    t = a.copy()
    for q in range(max_order + 1):
        t = t * kd / (q + 1)
        if t.sum() <= rtol * total:
            return q
    return max_order


def _taylor(u, pts, order):
    g = u.grid
    h = g.spacing
    idx = np.rint(pts / h).astype(np.int64)
    off = pts - idx * h
    idx %= g.N
    flat = np.ravel_multi_index(tuple(idx.T), g.shape)
    hat = fft(u.values, g)
    k = g.wavenumbers()
    dmax = float(np.sqrt((off ** 2).sum(axis=1)).max()) if len(off) else 0.0
    order = taylor_order(np.broadcast_to(hat, hat.shape), k, dmax, order)
    # powers of the offsets divided by factorials, per axis
    pw = [[off[:, a] ** q / math.factorial(q) for q in range(order + 1)] for a in range(g.m)]
    out = np.zeros((u.ncomp, len(pts)), complex)
    for alpha in multi_indices(g.m, order):
        sym = 1.0
        for a, q in enumerate(alpha):
            if q:
                sym = sym * (1j * k[a]) ** q
        d = ifft(hat * sym, g).reshape(u.ncomp, -1)[:, flat]
        w = 1.0
        for a, q in enumerate(alpha):
            w = w * pw[a][q]
        out += d * w
    return out


def _spline(u, pts, order):
    g = u.grid
    coords = (pts / g.spacing).T
    out = np.empty((u.ncomp, len(pts)), complex)
    for c in range(u.ncomp):
        re = ndimage.map_coordinates(u.values[c].real, coords, order=order, mode="grid-wrap")
        im = ndimage.map_coordinates(u.values[c].imag, coords, order=order, mode="grid-wrap")
        out[c] = re + 1j * im
    return out


# --------------------------------------------------------------------------
# maps


def _as_points(w):
    """Complex map values (n, ...) -> real points (P, 2n)."""
    n = w.shape[0]
    flat = w.reshape(n, -1)
    P = np.empty((flat.shape[1], 2 * n))
    P[:, 0::2] = flat.real.T
    P[:, 1::2] = flat.imag.T
    return P


def compose(u, H: MapField, method="auto"):
    """u o H sampled at the grid nodes.

    ``u`` may be a Field or a MapField; for maps the affine parts are
    combined exactly and only periodic parts are interpolated.
    """
    g = H.grid
    if u.grid != g:
        from .errors import GridMismatch

        raise GridMismatch("compose: grids differ")
    Hv = H.values()
    pts = _as_points(Hv)
    if isinstance(u, Field):
        vals = interpolate(u, pts, method)
        return Field(g, vals.reshape((u.ncomp,) + g.shape))
    n = g.n
    I = np.eye(n)
    G = u
    gH = interpolate(G.displacement, pts, method).reshape((n,) + g.shape)
    Pn = (I + G.P) @ (I + H.P) + G.Q @ H.Q.conj() - I
    Qn = (I + G.P) @ H.Q + G.Q @ (I + H.P).conj()
    disp = np.einsum("lk,k...->l...", I + G.P, H.disp) + np.einsum("lk,k...->l...", G.Q, H.disp.conj()) + gH
    return MapField(g, disp, Pn, Qn)


def invert_map(H: MapField, tol=1e-12, max_iter=60, method="auto") -> MapField:
    """K = H^{-1} sampled at the grid nodes.

    Solves H(z) = zeta pointwise at every node zeta. The iteration starts
    from the affine inverse applied to zeta - h(zeta), uses DH at the node
    as the initial Jacobian and refines it by pointwise Broyden updates.
    Requires the periodic part to be a contraction: sup ||D h|| < 1.
    """
    g = H.grid
    n = g.n
    m = g.m
    Hz, Hzb = map_jacobian(H)
    ex = (...,) + (None,) * g.m
    Dh = real_jacobian_from_complex(Hz - (np.eye(n) + H.P).T[ex], Hzb - H.Q.T[ex])
    lip = float(np.max(spectral_norms(Dh)))
    if lip >= 1.0:
        raise NoConvergence(f"displacement gradient norm {lip:.3g} >= 1; inversion is not a contraction", stage="invert")
    D = real_jacobian_from_complex(Hz, Hzb).reshape(-1, m, m)
    Binv = np.linalg.inv(D)
    znode = np.stack([g.z(j) for j in range(n)])
    zeta = _as_points(znode)
    # exact inverse of the affine part z -> (I+P) z + Q conj(z), in block form
    I = np.eye(n)
    blk = np.block([[I + H.P, H.Q], [H.Q.conj(), (I + H.P).conj()]])
    inv = np.linalg.inv(blk)
    PK, QK = inv[:n, :n] - I, inv[:n, n:]
    w = znode - H.disp
    w0 = w + np.einsum("lk,k...->l...", PK, w) + np.einsum("lk,k...->l...", QK, w.conj())
    z = _as_points(w0)
    disp = H.displacement
    res_prev = np.inf
    r_old = dz = None
    for it in range(max_iter):
        hz = interpolate(disp, z, method)  # (n, P)
        w = z[:, 0::2] + 1j * z[:, 1::2]
        Hw = w.T + H.P @ w.T + H.Q @ w.T.conj() + hz
        r = np.empty_like(z)
        r[:, 0::2] = Hw.real.T - zeta[:, 0::2]
        r[:, 1::2] = Hw.imag.T - zeta[:, 1::2]
        rn = np.linalg.norm(r, axis=1)
        res = float(np.max(rn))
        if _TRACE is not None:
            _TRACE.append(res)
        if res <= tol:
            break
        if not np.isfinite(res) or (it > 3 and res > 0.9 * res_prev):
            raise NoConvergence(f"map inversion stalled at residual {res:.3g}", stage="invert")
        # nodes already within tol stay put; updating them only feeds round-off into Binv
        live = rn > tol
        if dz is not None:
            # good Broyden update of the inverse Jacobian (Sherman-Morrison form)
            dr = r - r_old
            u = np.einsum("pab,pb->pa", Binv, dr)
            den = np.einsum("pa,pa->p", dz, u)
            scale = np.linalg.norm(dz, axis=1) * np.linalg.norm(u, axis=1)
            ok = live & (np.abs(den) > 1e-8 * scale) & (scale > 0)
            v = np.einsum("pa,pab->pb", dz, Binv)
            coef = np.where(ok, 1.0 / np.where(ok, den, 1.0), 0.0)
            Binv = Binv + np.einsum("pa,pb->pab", (dz - u) * coef[:, None], v)
        res_prev = res
        dz = -np.einsum("pab,pb->pa", Binv, r) * live[:, None]
        r_old = r
        z = z + dz
    else:
        raise NoConvergence(f"map inversion hit the iteration cap, residual {res:.3g}", stage="invert")
    w = (z[:, 0::2] + 1j * z[:, 1::2]).T.reshape((n,) + g.shape)
    K = MapField(g, np.zeros_like(w), PK, QK)
    return MapField(g, w - K.values(), PK, QK)
