import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import band_limited
from rough_acs.errors import GridMismatch, InvalidParameter
from rough_acs.grid import (
    Field,
    MapField,
    apply_multiplier,
    c1_distance,
    conditions,
    d_z,
    d_zbar,
    fft,
    ifft,
    inv_laplacian,
    laplacian,
    make_grid,
    map_jacobian,
    partial,
    resample_dilate,
    spectral_norms,
)


def x1(g):
    return g.coords()[0]


def test_make_grid_n1():
    g = make_grid(1, 256, 2 * math.pi)
    assert g.shape == (256, 256) and g.m == 2 and g.size == 256 ** 2


def test_make_grid_n2_metadata():
    g = make_grid(2, 64)
    assert g.m == 4 and g.size == 64 ** 4 and g.shape == (64,) * 4


@pytest.mark.parametrize("n,N,L", [(1, 100, 1.0), (3, 16, 1.0), (1, 4, 1.0), (1, 16, 0.0), (1, 16, -2.0)])
def test_make_grid_rejects(n, N, L):
    with pytest.raises(InvalidParameter):
        make_grid(n, N, L)


def test_grid_points_and_spacing():
    g = make_grid(1, 16, 3.0)
    assert np.allclose(g.axis_coords(), np.arange(16) * 3.0 / 16)
    assert g.spacing == pytest.approx(3.0 / 16)


def test_multiplier_identity_roundtrip(rng):
    g = make_grid(1, 64)
    u = Field(g, rng.standard_normal((2,) + g.shape) + 1j * rng.standard_normal((2,) + g.shape))
    v = apply_multiplier(u, np.ones(g.shape))
    assert np.abs(v.values - u.values).max() <= 1e-13 * np.abs(u.values).max()


def test_multiplier_eigenfunctions():
    g = make_grid(1, 32)
    x = x1(g)
    u = Field(g, np.broadcast_to(np.exp(1j * x), g.shape)[None])
    v = apply_multiplier(u, lambda k1, k2: 1j * k1)
    assert np.abs(v.values - 1j * u.values).max() < 1e-13
    s = Field(g, np.broadcast_to(np.sin(2 * x), g.shape)[None] + 0j)
    w = apply_multiplier(s, lambda k1, k2: k1 ** 2 + k2 ** 2)
    assert np.abs(w.values - 4 * s.values).max() < 1e-12


def test_multiplier_rejects_nonfinite():
    g = make_grid(1, 8)
    with pytest.raises(InvalidParameter):
        apply_multiplier(Field(g, np.zeros((1, 8, 8))), np.full(g.shape, np.inf))


def test_complex_derivatives_of_y_independent_field():
    g = make_grid(1, 64)
    u = Field(g, np.broadcast_to(np.sin(x1(g)), g.shape)[None] + 0j)
    half_cos = 0.5 * np.cos(x1(g))
    assert np.abs(d_z(u, 0).values - half_cos).max() < 1e-13
    assert np.abs(d_zbar(u, 0).values - half_cos).max() < 1e-13


def test_dzbar_of_constant():
    g = make_grid(2, 8)
    u = Field(g, np.full((1,) + g.shape, 2.5 + 1j))
    assert np.abs(d_zbar(u, 1).values).max() == 0


def test_dzbar_against_finite_differences():
    g = make_grid(1, 256)
    x, y = g.coords()
    u = Field(g, (np.exp(1j * x) * np.exp(1j * y))[None])
    spec = d_zbar(u, 0).values[0]
    assert np.allclose(spec, 0.5j * (1 + 1j) * u.values[0], atol=1e-12)
    h = g.spacing
    v = u.values[0]
    dx = (np.roll(v, -1, 0) - np.roll(v, 1, 0)) / (2 * h) - (np.roll(v, -2, 0) - np.roll(v, 2, 0) - 2 * (np.roll(v, -1, 0) - np.roll(v, 1, 0))) / (12 * h)
    dy = (np.roll(v, -1, 1) - np.roll(v, 1, 1)) / (2 * h) - (np.roll(v, -2, 1) - np.roll(v, 2, 1) - 2 * (np.roll(v, -1, 1) - np.roll(v, 1, 1))) / (12 * h)
    fd = 0.5 * (dx + 1j * dy)
    assert np.abs(fd - spec).max() / np.abs(spec).max() <= 1e-6


def test_derivative_index_range():
    g = make_grid(1, 8)
    u = Field(g, np.zeros((1, 8, 8)))
    with pytest.raises(InvalidParameter):
        d_z(u, 1)
    with pytest.raises(InvalidParameter):
        partial(u, 2)


def test_inv_laplacian_examples():
    g = make_grid(1, 32)
    zero = Field(g, np.zeros((1,) + g.shape))
    assert np.abs(inv_laplacian(zero).values).max() == 0
    s = Field(g, np.broadcast_to(np.sin(x1(g)), g.shape)[None] + 0j)
    assert np.abs(inv_laplacian(s).values + s.values).max() < 1e-13
    c = Field(g, np.full((1,) + g.shape, 3.0 + 0j))
    assert np.abs(inv_laplacian(c).values).max() < 1e-15


@pytest.mark.parametrize("n,N", [(1, 64), (2, 8)])
def test_laplacian_identities(n, N):
    g = make_grid(n, N)
    h = band_limited(g, band=N / 2, seed=3)
    h = h + 0.7
    v = inv_laplacian(h)
    back = laplacian(v).values + h.mean()[:, None, None][(...,) + (None,) * (g.m - 2)]
    assert np.abs(back - h.values).max() <= 1e-10 * np.abs(h.values).max()
    assert abs(v.mean()[0]) < 1e-14
    # d_z and d_zbar commute, and 4 sum_j d_z d_zbar = Laplacian on every mode
    for j in range(n):
        c = d_z(d_zbar(h, j), j).values - d_zbar(d_z(h, j), j).values
        assert np.abs(c).max() <= 1e-12 * np.abs(h.values).max()
    lap4 = 4 * sum(d_z(d_zbar(h, j), j).values for j in range(n))
    lap = laplacian(h).values
    assert np.abs(lap4 - lap).max() <= 1e-11 * np.abs(lap).max()


@pytest.mark.parametrize("N", [8, 64, 1024])
def test_fft_roundtrip(N, rng):
    g = make_grid(1, N)
    u = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    back = ifft(fft(u, g), g)
    assert np.abs(back - u).max() <= 1e-12 * np.abs(u).max()


def test_resample_dilate_examples():
    g = make_grid(1, 256)
    x = g.coords(centered=True)[0]
    u = Field(g, np.broadcast_to(np.sin(x), g.shape)[None] + 0j)
    assert np.abs(resample_dilate(u, 1.0).values - u.values).max() <= 1e-13
    w = band_limited(g, seed=1)
    c = resample_dilate(w, 0.0).values
    assert np.abs(c - w.values[0, 0, 0]).max() <= 1e-13
    half = resample_dilate(u, 0.5).values
    assert np.abs(half - np.sin(x / 2)).max() <= 1e-10


def test_resample_dilate_range():
    g = make_grid(1, 8)
    with pytest.raises(InvalidParameter):
        resample_dilate(Field(g, np.zeros((1, 8, 8))), 1.5)


def test_field_grid_checks():
    g = make_grid(1, 8)
    with pytest.raises(GridMismatch):
        Field(g, np.zeros((1, 8, 4)))
    with pytest.raises(InvalidParameter):
        Field(g, np.full((1, 8, 8), np.nan))
    with pytest.raises(GridMismatch):
        Field(g, np.zeros((1, 8, 8))) + Field(make_grid(1, 16), np.zeros((1, 16, 16)))


def test_mapfield_identity_and_jacobian():
    g = make_grid(2, 8)
    H = MapField.identity(g)
    Hz, Hzb = map_jacobian(H)
    assert np.allclose(Hz[:, :, 0, 0, 0, 0], np.eye(2)) and np.abs(Hzb).max() == 0
    assert c1_distance(H) == 0


def test_mapfield_linear_parts():
    g = make_grid(1, 16)
    H = MapField(g, np.zeros((1,) + g.shape), None, [[0.3]])
    z = g.z(0)
    assert np.allclose(H.values()[0], z + 0.3 * z.conj())
    _, Hzb = map_jacobian(H)
    assert np.allclose(Hzb, 0.3)
    C = H.conj()
    assert np.allclose(C.values()[0], (z + 0.3 * z.conj()).conj())
    L = H.apply_linear([[2.0j]])
    assert np.allclose(L.values()[0], 2j * (z + 0.3 * z.conj()))


def test_normalized_sends_origin_to_origin(rng):
    g = make_grid(1, 16)
    H = MapField(g, rng.standard_normal((1,) + g.shape) * 0.01)
    assert H.normalized().origin_value()[0] == 0


def test_pointwise_matrix_helpers(rng):
    for k in (1, 2, 3):
        M = rng.standard_normal((50, k, k)) + 1j * rng.standard_normal((50, k, k))
        assert np.allclose(spectral_norms(M), np.linalg.norm(M, 2, axis=(1, 2)), rtol=1e-12)
        assert np.allclose(conditions(M), np.linalg.cond(M), rtol=1e-8)
    assert np.isinf(conditions(np.zeros((1, 2, 2)))[0])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from([8, 16, 32]))
def test_commuting_derivatives_property(seed, N):
    g = make_grid(1, N)
    u = band_limited(g, band=N / 2, seed=seed)
    c = d_z(d_zbar(u, 0), 0).values - d_zbar(d_z(u, 0), 0).values
    assert np.abs(c).max() <= 1e-12 * max(1.0, np.abs(u.values).max())


def test_mean_of_strided_values_is_accurate():
    g = make_grid(2, 16)
    c = np.array([0.3 - 0.1j, 0.07j])
    vals = np.moveaxis(np.broadcast_to(c, g.shape + (2,)).copy(), -1, 0)
    assert not vals.flags["C_CONTIGUOUS"]
    assert np.abs(Field(g, vals).mean() - c).max() <= 1e-15
