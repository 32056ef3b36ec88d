"""Trace constants of the generating functions and the margin in their pointwise bound."""
import numpy as np

from kawaflat.genfun import build_family, pointwise_bound, min_order
from kawaflat.series import ps_eval

fam = build_family(10)
x = np.linspace(-1, 0, 256)
print("j   f_j(-1)        f_j'(-1)       g_j(-1)        g_j'(-1)       bound(-1)   worst |.|/bound")
for j in range(11):
    ratio = max(float(np.max(np.abs(ps_eval(p, x[:-1])) / pointwise_bound(j, x[:-1]))) for p in (fam.f[j], fam.g[j]))
    tf, tg = fam.traces_f[j], fam.traces_g[j]
    print(f"{j:2d} {tf[0]: .6e} {tf[1]: .6e} {tg[0]: .6e} {tg[1]: .6e} {float(pointwise_bound(j, -1.0)):.3e}   {ratio:.3f}")
print("series order needed for 1e-14 tails:", {J: min_order(J) for J in (0, 4, 8, 12)})
