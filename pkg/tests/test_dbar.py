import numpy as np
import pytest

from conftest import band_limited
from rough_acs.errors import InvalidParameter, NoConvergence
from rough_acs.grid import Field, MapField, d_z, d_zbar, make_grid, map_jacobian
from rough_acs.dbar import (
    DbarConfig,
    beurling,
    compare_charts,
    compose_F,
    cr_residual,
    solve_G,
    solve_beltrami,
    solve_dbar_system,
)
from rough_acs.spaces import gen_lacunary
from rough_acs.structures import BeltramiMatrix, gen_structure, structure_from_beltrami


def l2(a):
    return float(np.sqrt(np.mean(np.abs(a) ** 2)))


def const(g, value, ncomp=1):
    return Field(g, np.full((ncomp,) + g.shape, complex(value)))


# --------------------------------------------------------------------------
# Beurling transform


def test_beurling_kills_constants():
    g = make_grid(1, 16)
    assert np.abs(beurling(const(g, 2 + 1j)).values).max() == 0


@pytest.mark.parametrize("N", [16, 64, 256])
def test_beurling_isometry(N):
    g = make_grid(1, N)
    u = band_limited(g, band=N / 2, seed=N)
    assert l2(beurling(u).values) == pytest.approx(l2(u.values - u.mean()[0]), rel=1e-12)


def test_beurling_multiplier_identity():
    g = make_grid(1, 64)
    v = band_limited(g, band=12, seed=1)
    assert np.abs(d_z(v, 0).values - beurling(d_zbar(v, 0)).values).max() <= 1e-11


def test_beurling_needs_n1():
    with pytest.raises(InvalidParameter):
        beurling(const(make_grid(2, 8), 1.0))


# --------------------------------------------------------------------------
# Beltrami oracle


def test_beltrami_zero_coefficient():
    g = make_grid(1, 32)
    sol = solve_beltrami(const(g, 0.0))
    assert np.abs(sol.f.values() - MapField.identity(g).values()).max() == 0


def test_beltrami_constant_coefficient():
    g = make_grid(1, 32)
    sol = solve_beltrami(const(g, 0.3))
    z = g.z(0)
    assert np.abs(sol.f.values()[0] - (z + 0.3 * z.conj())).max() <= 1e-10


def test_beltrami_lacunary_residual_and_contraction():
    g = make_grid(1, 512)
    u = gen_lacunary(g, 0.6, 3, g.kmax - 1, seed=7)
    mu = u * (0.3 / u.sup())
    sol = solve_beltrami(mu)
    assert sol.relative_residual <= 1e-8
    assert max(sol.ratios) <= 0.3 + 0.05


def test_beltrami_rejects_large_coefficient():
    g = make_grid(1, 16)
    with pytest.raises(NoConvergence):
        solve_beltrami(const(g, 1.0))


def test_beltrami_cap():
    g = make_grid(1, 32)
    mu = band_limited(g, band=4, seed=2) * 0.5
    with pytest.raises(NoConvergence):
        solve_beltrami(mu, DbarConfig(neumann_max_terms=2))


# --------------------------------------------------------------------------
# dbar system


@pytest.mark.parametrize("n,N", [(1, 32), (2, 8)])
def test_dbar_system_exact_data(n, N):
    g = make_grid(n, N)
    w = band_limited(g, band=N / 4, seed=3)
    f = Field(g, np.concatenate([d_zbar(w, j).values for j in range(n)]))
    u, rep = solve_dbar_system(f)
    assert np.abs(u.values - (w.values - w.mean()[0])).max() <= 1e-10
    assert rep.defect <= 1e-10 and rep.compatibility <= 1e-10


def test_dbar_system_zero():
    g = make_grid(2, 8)
    u, rep = solve_dbar_system(const(g, 0.0, 2))
    assert np.abs(u.values).max() == 0 and rep.defect == 0


def test_dbar_system_incompatible():
    g = make_grid(2, 8)
    x2 = g.coords()[2]
    f = np.zeros((2,) + g.shape, complex)
    f[0] = np.sin(x2)
    u, rep = solve_dbar_system(Field(g, f))
    assert rep.compatibility == pytest.approx(0.5, rel=1e-12)
    assert rep.defect >= 0.1


def test_dbar_system_component_count():
    with pytest.raises(InvalidParameter):
        solve_dbar_system(const(make_grid(2, 8), 0.0, 1))


# --------------------------------------------------------------------------
# solve_G


def test_G_for_zero_data():
    for g in (make_grid(1, 16), make_grid(2, 8)):
        G, rep = solve_G(BeltramiMatrix.zeros(g))
        assert np.abs(G.values() - MapField.identity(g).values()).max() == 0


def test_G_for_constant_data_n2():
    g = make_grid(2, 8)
    b = np.array([[0.1, 0.2j], [-0.15, 0.05 + 0.1j]])
    b *= 0.3 / np.linalg.norm(b, 2)
    B = BeltramiMatrix.constant(g, b)
    G, rep = solve_G(B)
    z = np.stack([g.z(0), g.z(1)])
    # G_l = zeta_l + sum_j b_jl conj(zeta_j)
    expect = z + np.einsum("jl,j...->l...", b, z.conj())
    assert np.abs(G.values() - expect).max() <= 1e-10
    assert rep.residual_sup <= 1e-10


def test_G_rejects_large_data():
    g = make_grid(2, 8)
    with pytest.raises(NoConvergence):
        solve_G(BeltramiMatrix.constant(g, 1.0))


def test_G_agrees_with_oracle_n1():
    g = make_grid(1, 64)
    mu = band_limited(g, band=3, seed=4)
    mu = mu * (0.3 / mu.sup())
    G, rep = solve_G(BeltramiMatrix(g, mu.values[None]))
    f = solve_beltrami(mu).f
    assert rep.residual_sup <= 1e-10
    assert compare_charts(G, f).ratio <= 1e-10


def test_G_compatibility_warning():
    g = make_grid(2, 8)
    B = gen_structure("nonintegrable", g, {"amp": 0.2}).A
    G, rep = solve_G(B)
    assert rep.compatibility > 1e-6 and "compatibility" in rep.warning


def test_dbar_config_validation():
    with pytest.raises(InvalidParameter):
        DbarConfig(picard_tol=0)
    with pytest.raises(InvalidParameter):
        DbarConfig(neumann_max_terms=0)


# --------------------------------------------------------------------------
# composition, residuals, comparison


def test_compose_with_identity():
    g = make_grid(1, 32)
    H = MapField(g, 0.1 * band_limited(g, seed=5).values).normalized()
    assert np.abs(compose_F(MapField.identity(g), H).values() - H.values()).max() <= 1e-13
    assert np.abs(compose_F(H, MapField.identity(g)).values() - H.values()).max() <= 1e-13


def test_cr_residual_examples():
    g = make_grid(1, 32)
    assert cr_residual(MapField.identity(g), BeltramiMatrix.zeros(g)).sup == 0
    F = MapField(g, np.zeros((1,) + g.shape), None, [[0.3]])
    rep = cr_residual(F, BeltramiMatrix.constant(g, 0.3))
    assert rep.sup <= 1e-12
    assert set(rep.to_dict()) >= {"sup", "l2", "relative_sup", "sobolev", "c1_distance"}


def test_cr_residual_of_ground_truth():
    g = make_grid(1, 64)
    gs = gen_structure("pullback", g, {"amp": 0.2}, seed=3)
    assert cr_residual(gs.F_true, gs.A).sup <= 1e-10


def test_compare_charts_examples():
    g = make_grid(1, 64)
    F = gen_structure("pullback", g, {"amp": 0.2}, seed=4).F_true
    assert compare_charts(F, F).ratio <= 1e-14
    L = 1.5 - 0.7j
    LF = MapField(g, L * F.disp, L * (np.eye(1) + F.P) - np.eye(1), L * F.Q)
    assert compare_charts(F, LF).ratio <= 1e-10
    assert compare_charts(F, F.conj()).ratio >= 0.5
    ident = MapField.identity(g)
    assert compare_charts(ident, ident.conj()).to_dict()["ratio"] == "inf"


def test_holomorphy_transfer():
    # each component of the true chart satisfies (X + i JX) f = 0 for coordinate X
    g = make_grid(1, 64)
    gs = gen_structure("pullback", g, {"amp": 0.2}, seed=6)
    J = structure_from_beltrami(gs.A).J
    Fz, Fzb = map_jacobian(gs.F_true)
    fx = Fz[0, 0] + Fzb[0, 0]
    fy = 1j * (Fz[0, 0] - Fzb[0, 0])
    grad = np.stack([fx, fy])
    for a in range(2):
        col = np.moveaxis(J[..., :, a], -1, 0)
        v = grad[a] + 1j * (col[0] * grad[0] + col[1] * grad[1])
        assert np.abs(v).max() <= 1e-6
