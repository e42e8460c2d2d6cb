"""Acceptance suite: one PASS/FAIL line per criterion.

Lines are collected in RESULTS and printed in the terminal summary (see
conftest). A criterion whose prescribed grid cannot fit in memory is
recorded as FAIL and marked xfail with the estimate, after the feasible
parts and the small-grid companion runs have been checked.
"""
import os
import time

import numpy as np
import pytest

from conftest import band_limited
from rough_acs.dbar import compare_charts, solve_beltrami
from rough_acs.errors import NoConvergence
from rough_acs.grid import Field, MapField, laplacian, make_grid
from rough_acs.malgrange import LINEARIZATION_SIGN, ContinuationConfig, gtilde, psi
from rough_acs.pipeline import build_chart, derivative_field, second_derivatives
from rough_acs.spaces import bessel_norm, bmo_norm, bony_terms, gen_lacunary, regularity_profile, sobolev_norm, zygmund_norm
from rough_acs.structures import BeltramiMatrix, gen_structure, inner_region, integrability_residual

RESULTS = {}

# measured peak memory per grid point (bytes) at n = 2, N = 16 and 32
BYTES_PER_POINT = {"psi": 1200, "check": 950, "pipeline": 1900}


def record(num, ok, detail, elapsed=None, bound=None):
    t = "" if elapsed is None else f" [{elapsed:.0f} s, bound {bound} s]"
    line = f"criterion {num:>2} {'PASS' if ok else 'FAIL'}  {detail}{t}"
    RESULTS[num] = line
    print(line)
    return ok


def available_bytes():
    try:
        with open("/proc/meminfo") as fh:
            for row in fh:
                if row.startswith("MemAvailable:"):
                    return int(row.split()[1]) * 1024
    except OSError:
        pass
    return os.sysconf("SC_AVPHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")


def infeasible(what, n, N):
    """Reason string when the job does not fit in memory, else None."""
    need = BYTES_PER_POINT[what] * float(N) ** (2 * n)
    have = available_bytes()
    if need <= 0.8 * have:
        return None
    return f"n={n} N={N} needs about {need / 2**30:.1f} GiB, {have / 2**30:.1f} GiB available"


def noise(g, seed):
    r = np.random.default_rng(seed)
    return Field(g, r.standard_normal((1,) + g.shape) + 1j * r.standard_normal((1,) + g.shape))


def l2(a):
    return float(np.linalg.norm(a))


# --------------------------------------------------------------------------


def test_criterion_01_bony_exactness():
    t0 = time.time()
    g = make_grid(1, 256)
    worst = 0.0
    for seed in range(20):
        u, v = noise(g, 2 * seed), noise(g, 2 * seed + 1)
        a, b, c = bony_terms(u, v)
        err = np.abs(u.values * v.values - a.values - b.values - c.values).max()
        worst = max(worst, err / (u.sup() * v.sup()))
    ok = worst <= 1e-12
    record(1, ok, f"Bony identity, 20 pairs N=256: worst relative error {worst:.2e} (tol 1e-12)", time.time() - t0, 5)
    assert ok


def _linearization_error(n, N, count):
    g = make_grid(n, N)
    A0 = BeltramiMatrix.zeros(g)
    eps = 1e-6
    worst = 0.0
    for seed in range(count):
        h = band_limited(g, ncomp=n, band=min(4, N / 4), seed=seed)
        plus = psi(MapField(g, eps * h.values), A0).values
        minus = psi(MapField(g, -eps * h.values), A0).values
        fd = (plus - minus) / (2 * eps)
        expect = LINEARIZATION_SIGN * laplacian(h).values / 4
        worst = max(worst, l2(fd - expect) / l2(expect))
    return worst


def test_criterion_02_linearization():
    t0 = time.time()
    e1 = _linearization_error(1, 64, 10)
    assert e1 <= 1e-5, f"n=1 N=64 relative error {e1:.2e}"
    e2c = _linearization_error(2, 16, 10)
    assert e2c <= 1e-5, f"n=2 N=16 companion relative error {e2c:.2e}"
    why = infeasible("psi", 2, 64)
    parts = f"n=1 N=64 rel err {e1:.2e}; n=2 N=16 companion {e2c:.2e} (tol 1e-5)"
    if why:
        record(2, False, f"Psi linearization: {parts}; n=2 N=64 not run: {why}", time.time() - t0, 30)
        pytest.xfail(why)
    e2 = _linearization_error(2, 64, 10)
    ok = e2 <= 1e-5
    record(2, ok, f"Psi linearization: {parts}; n=2 N=64 {e2:.2e}", time.time() - t0, 30)
    assert ok


def test_criterion_03_right_inverse():
    t0 = time.time()
    worst, origin = 0.0, 0.0
    for n, N in ((1, 64), (2, 32)):
        g = make_grid(n, N)
        for seed in range(10):
            h = band_limited(g, ncomp=1, seed=seed, decay=0.5)
            v = gtilde(h)
            back = laplacian(v).values / 4
            err = np.abs(back - (h.values - h.mean()[0])).max() / np.abs(h.values).max()
            worst = max(worst, err)
            origin = max(origin, float(np.abs(v.at_origin()).max()))
    ok = worst <= 1e-11 and origin == 0.0
    record(3, ok, f"right inverse, 10 h each at n=1 N=64 and n=2 N=32: {worst:.2e} (tol 1e-11), |Gh(0)| = {origin:g}", time.time() - t0, 5)
    assert ok


def test_criterion_04_exact_linear_charts():
    t0 = time.time()
    g1 = make_grid(1, 32)
    F1 = build_chart(BeltramiMatrix.constant(g1, 0.3), cutoff=False, diagnostics=False).F
    z = g1.z(0)
    e1 = np.abs(F1.values()[0] - (z + 0.3 * z.conj())).max()
    g2 = make_grid(2, 16)
    b = np.array([[0.1, 0.2j], [-0.15, 0.05 + 0.1j]])
    b = b * (0.3 / np.linalg.norm(b, 2))
    F2 = build_chart(BeltramiMatrix.constant(g2, b), cutoff=False, diagnostics=False).F
    zz = np.stack([g2.z(0), g2.z(1)])
    # row vector zeta + zetabar B^T, i.e. F_l = zeta_l + sum_j b_jl conj(zeta_j)
    expect = zz + np.einsum("jl,j...->l...", b, zz.conj())
    e2 = np.abs(F2.values() - expect).max()
    ok = e1 <= 1e-10 and e2 <= 1e-10
    record(4, ok, f"linear charts: n=1 mu=0.3 err {e1:.2e}, n=2 |B|=0.3 err {e2:.2e} (tol 1e-10)", time.time() - t0, 10)
    assert ok


def _pullback_run(n, N, band):
    g = make_grid(n, N)
    gs = gen_structure("pullback", g, {"amp": 0.2, "band": band}, seed=1)
    res = build_chart(gs.A, ContinuationConfig(t_steps=8), cutoff=False, diagnostics=False)
    rep = res.report
    vals = {
        "cr": rep["cr_residual"]["relative_sup"],
        "cmp": compare_charts(res.F, gs.F_true).ratio,
        "div": rep["extract"]["div_sup"],
        "bint": rep["extract"]["integrability"]["sup"],
    }
    ok = vals["cr"] <= 1e-6 and vals["cmp"] <= 1e-5 and vals["div"] <= 1e-7 and vals["bint"] <= 1e-6
    text = f"n={n} N={N}: cr {vals['cr']:.1e} cmp {vals['cmp']:.1e} div {vals['div']:.1e} Bint {vals['bint']:.1e}"
    return ok, text


@pytest.mark.slow
def test_criterion_05_pullback_recovery():
    t0 = time.time()
    ok1, t1 = _pullback_run(1, 128, 3.0)
    assert ok1, t1
    okc, tc = _pullback_run(2, 16, 3.0)
    assert okc, "companion " + tc
    tol = "(tol cr 1e-6, cmp 1e-5, div 1e-7, Bint 1e-6)"
    why = infeasible("pipeline", 2, 64)
    if why:
        record(5, False, f"pullback recovery {t1}; companion {tc}; n=2 N=64 not run: {why} {tol}", time.time() - t0, 300)
        pytest.xfail(why)
    ok2, t2 = _pullback_run(2, 64, 3.0)
    record(5, ok2, f"pullback recovery {t1}; {t2} {tol}", time.time() - t0, 300)
    assert ok2


@pytest.mark.slow
def test_criterion_06_oracle_agreement():
    t0 = time.time()
    g = make_grid(1, 64)
    region = inner_region(g, 0.4)
    ratios = []
    for seed in range(11, 16):
        mu = band_limited(g, band=3, seed=seed)
        mu = mu - complex(mu.at_origin()[0])
        mu = mu * (0.3 / mu.sup())
        res = build_chart(BeltramiMatrix(g, mu.values[None]), radius=0.4, diagnostics=False)
        oracle = solve_beltrami(Field(g, res.A.a[0])).f
        ratios.append(compare_charts(res.F, oracle, region).ratio)
    ok = max(ratios) <= 1e-5
    record(6, ok, f"oracle agreement, 5 smooth mu N=64: worst compare {max(ratios):.2e} (tol 1e-5)", time.time() - t0, 120)
    assert ok


def _check_pair(N):
    g = make_grid(2, N)
    good = integrability_residual(gen_structure("pullback", g, {"amp": 0.2, "band": 2.0}, seed=1).A).sup
    bad = integrability_residual(gen_structure("nonintegrable", g, {}, seed=1).A).sup
    return good, bad


@pytest.mark.slow
def test_criterion_07_integrability_discrimination():
    t0 = time.time()
    comp = {N: _check_pair(N) for N in (16, 32)}
    for N, (good, bad) in comp.items():
        assert good <= 1e-6 and bad >= 1e-2, f"companion N={N}: {good:.2e} / {bad:.2e}"
    b16, b32 = comp[16][1], comp[32][1]
    assert max(b16, b32) <= 2 * min(b16, b32)
    ctext = "; ".join(f"N={N} integrable {a:.1e} nonintegrable {b:.2e}" for N, (a, b) in comp.items())
    why = "; ".join(w for w in (infeasible("check", 2, 64), infeasible("check", 2, 128)) if w)
    if why:
        record(7, False, f"integrability check, companions {ctext}; N=64/128 not run: {why} (tol 1e-6 / 1e-2, factor 2)", time.time() - t0, 120)
        pytest.xfail(why)
    full = {N: _check_pair(N) for N in (64, 128)}
    b64, b128 = full[64][1], full[128][1]
    ok = all(a <= 1e-6 and b >= 1e-2 for a, b in full.values()) and max(b64, b128) <= 2 * min(b64, b128)
    text = "; ".join(f"N={N} integrable {a:.1e} nonintegrable {b:.2e}" for N, (a, b) in full.items())
    record(7, ok, f"integrability check {text}", time.time() - t0, 120)
    assert ok


@pytest.mark.slow
def test_criterion_08_rough_regularity():
    t0 = time.time()
    g = make_grid(1, 512)
    k_low, k_high = 3, g.kmax - 1
    gs = gen_structure("random-holder", g, {"r": 0.6, "amp": 0.3, "normalize": "sup", "k_low": k_low, "k_high": k_high}, seed=1)
    assert gs.A.sup_norm() == pytest.approx(0.3)
    res = build_chart(gs.A, diagnostics=False)
    # fit over the blocks the lacunary data occupies
    prof = regularity_profile(derivative_field(res.F), kmin=k_low, kmax=k_high)
    holo = res.report["holomorphic"]
    ok = holo and prof.exponent >= 0.5 and abs(prof.exponent - 0.6) <= 0.1
    record(8, ok, f"lacunary C^0.6 mu N=512: converged, holomorphic {holo}, exponent of DF {prof.exponent:.3f} (need >= 0.5, 0.6 +- 0.1)", time.time() - t0, 300)
    assert ok


@pytest.mark.slow
def test_criterion_09_lipschitz_bmo():
    t0 = time.time()
    bmos, sups = [], []
    for N in (256, 512, 1024):
        g = make_grid(1, N)
        gs = gen_structure("lipschitz-kink", g, {"amp": 0.3})
        # the kink data is periodic, so no cutoff
        res = build_chart(gs.A, cutoff=False, diagnostics=False)
        assert res.report["holomorphic"]
        d2 = Field(g, second_derivatives(res.F))
        bmos.append(bmo_norm(d2).value)
        sups.append(d2.sup())
    spread = max(bmos) / min(bmos)
    mono = all(b >= a for a, b in zip(sups, sups[1:]))
    ok = spread < 1.5 and mono
    detail = ", ".join(f"{b:.4f}" for b in bmos) + " / sup " + ", ".join(f"{s:.5f}" for s in sups)
    record(9, ok, f"kink N=256/512/1024: bmo(D2F) {detail}; spread {spread:.3f} (< 1.5), sup nondecreasing {mono}", time.time() - t0, 600)
    assert ok


def test_criterion_10_norm_calibration():
    t0 = time.time()
    zyg = []
    for r in (0.3, 0.6, 0.9):
        for seed in range(3):
            g = make_grid(1, 512)
            u = gen_lacunary(g, r, 2, g.kmax - 1, seed=seed)
            zyg.append(zygmund_norm(u, r).value)
    zerr = max(abs(z - 1.0) for z in zyg)
    sob = []
    g = make_grid(1, 256)
    rng = np.random.default_rng(7)
    for seed in range(20):
        u = band_limited(g, band=g.N / 2, seed=seed, decay=float(rng.uniform(0, 1)))
        s = float(rng.uniform(-1, 1.5))
        sob.append(sobolev_norm(u, s, 2).value / bessel_norm(u, s).value)
    serr = max(abs(x - 1.0) for x in sob)
    ok = zerr <= 0.1 and serr <= 0.25
    record(10, ok, f"calibration: zygmund within {zerr:.3f} of 1 (tol 0.1), square function vs multiplier within {serr:.3f} (tol 0.25)", time.time() - t0, 60)
    assert ok


@pytest.mark.slow
def test_criterion_11_negative_controls():
    t0 = time.time()
    g = make_grid(2, 16)
    res = build_chart(gen_structure("nonintegrable", g, {}).A, cutoff=False, diagnostics=False)
    rep = res.report
    cr, bint = rep["cr_residual"]["relative_sup"], rep["extract"]["integrability"]["sup"]
    flagged = rep["holomorphic"] is False and max(cr, bint) >= 1e-2
    raised = []
    for grid, value in ((make_grid(1, 16), 1.0), (make_grid(1, 16), 1.3), (make_grid(2, 8), 1.0)):
        try:
            build_chart(BeltramiMatrix.constant(grid, value), cutoff=False, diagnostics=False)
            raised.append(False)
        except NoConvergence:
            raised.append(True)
    try:
        solve_beltrami(Field(make_grid(1, 16), np.full((1, 16, 16), 1.0 + 0j)))
        raised.append(False)
    except NoConvergence:
        raised.append(True)
    ok = flagged and all(raised)
    record(11, ok, f"nonintegrable n=2 N=16: holomorphic {rep['holomorphic']}, cr {cr:.2e}, Bint {bint:.2e} (need >= 1e-2); |mu| >= 1 raised {sum(raised)}/{len(raised)}", time.time() - t0, 60)
    assert ok

