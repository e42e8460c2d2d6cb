import math
import sys

import numpy as np
import pytest

from rough_acs.grid import Field, fft, ifft, make_grid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def band_limited(grid, ncomp=1, band=None, seed=0, decay=1.0):
    """Random complex trigonometric polynomial with modes |xi| <= band."""
    r = np.random.default_rng(seed)
    band = grid.N / 4 if band is None else band
    xi = grid.freq_norm()
    mask = (xi <= band) & (xi > 0)
    hat = np.zeros((ncomp,) + grid.shape, complex)
    for c in range(ncomp):
        hat[c][mask] = (r.standard_normal(mask.sum()) + 1j * r.standard_normal(mask.sum())) / (1 + xi[mask] ** 2) ** decay
    vals = ifft(hat, grid)
    return Field(grid, vals / np.abs(vals).max())


def direct_fourier_sum(u, pts):
    """Trigonometric interpolant evaluated by an explicit double loop over modes."""
    g = u.grid
    coef = fft(u.values, g) / g.size
    freqs = np.stack(np.meshgrid(*[np.fft.fftfreq(g.N, 1.0 / g.N)] * g.m, indexing="ij"), axis=-1).reshape(-1, g.m)
    c = coef.reshape(u.ncomp, -1)
    phase = np.exp(1j * (2 * math.pi / g.L) * pts @ freqs.T)
    return c @ phase.T


@pytest.fixture
def grid1():
    return make_grid(1, 64)


@pytest.fixture
def grid2():
    return make_grid(2, 8)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        terminalreporter.write_line(results[num])
