"""Regularity of the chart for a Hoelder-rough coefficient.

mu is a lacunary series in C^0.6 with sup 0.3; the chart F should be
C^1.6, so the dyadic blocks of DF decay like 2^(-0.6 k).
"""
import math

from rough_acs.grid import make_grid
from rough_acs.pipeline import build_chart, derivative_field
from rough_acs.spaces import regularity_profile
from rough_acs.structures import gen_structure

g = make_grid(1, 256)
k_low, k_high = 3, g.kmax - 1
gs = gen_structure("random-holder", g, {"r": 0.6, "amp": 0.3, "normalize": "sup", "k_low": k_low, "k_high": k_high}, seed=1)
res = build_chart(gs.A, diagnostics=False)
print("holomorphic:", res.report["holomorphic"], " relative CR residual:", f"{res.report['cr_residual']['relative_sup']:.1e}")

prof = regularity_profile(derivative_field(res.F), kmin=k_low, kmax=k_high)
for k, v in prof.block_sups:
    bar = "#" * max(0, int(40 + 4 * math.log2(v))) if v > 0 else ""
    print(f"k={k:2d}  {v:.3e}  {bar}")
print(f"fitted exponent of DF over blocks {k_low}..{k_high}: {prof.exponent:.3f}")
