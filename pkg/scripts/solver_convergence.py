"""Spatial and temporal convergence of the solver on an exact exponential mode.

The exact solution is exp(omega t) v(x), v a combination of exp(mu x) over the
roots of the dispersion relation.  A tiny dt isolates the spatial error; the
finest grids show the round-off floor of the fifth-derivative stencil.
"""
import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from conftest import exponential_mode  # noqa: E402

from kawaflat.kawahara_fd import BoundarySignal, GridState, SolverConfig, solve  # noqa: E402


def error(nx, dt, T=0.05, omega=-10.0):
    v = exponential_mode(omega)
    cfg = SolverConfig(nx=nx, T=T, dt=dt)
    bc = BoundarySignal(lambda t: np.exp(omega * t) * v(-1.0), lambda t: np.exp(omega * t) * v(-1.0, 1))
    tr = solve(GridState.from_function(v, cfg), cfg, bc, record=[T])
    return float(np.abs(tr.u[-1] - np.exp(omega * T) * v(cfg.x)).max())


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-nx", type=int, default=512)
    args = ap.parse_args()
    print("spatial (dt = 1e-5)")
    prev = None
    nx = 64
    while nx <= args.max_nx:
        e = error(nx, 1e-5)
        print(f"  nx={nx:5d}  err={e:.3e}" + (f"  ratio={prev / e:.2f}" if prev else ""))
        prev, nx = e, 2 * nx
    print("coupled (dt = dx/2)")
    prev = None
    for nx in (64, 128, 256):
        e = error(nx, None)
        print(f"  nx={nx:5d}  err={e:.3e}" + (f"  ratio={prev / e:.2f}" if prev else ""))
        prev = e


if __name__ == "__main__":
    main()
