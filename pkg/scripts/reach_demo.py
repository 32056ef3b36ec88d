"""Reach finite combinations of f_n, g_n from rest and report the terminal mismatch."""
import argparse
from pathlib import Path

from kawaflat.genfun import build_family
from kawaflat.kawahara_fd import SolverConfig
from kawaflat.reach import ReachTarget, check_membership, extract_coefficients, run_reach_experiment

TARGETS = {
    "0.1 f0 + 0.05 g0": ([0.1], [0.05]),
    "0.1 f1": ([0.0, 0.1], []),
    "0.2 f0 - 0.1 g1 + 0.05 f2": ([0.2, 0.0, 0.05], [0.0, -0.1]),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--jmax", type=int, default=8)
    ap.add_argument("--nx", type=int, default=256)
    ap.add_argument("--out", default="out/reach")
    args = ap.parse_args()
    fam = build_family(args.jmax)
    cfg = SolverConfig(nx=args.nx, T=1.0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k, (name, (c, b)) in enumerate(TARGETS.items()):
        t = ReachTarget.from_family(fam, c, b)
        diag = check_membership(t)
        co = extract_coefficients(t, 3)
        rep, ctrl, _ = run_reach_experiment(t, 0.5, 1.0, args.jmax, cfg, fam)
        ctrl.to_csv(out / f"controls_{k}.csv")
        print(f"{name:28s} member={diag.ok}  c[:4]={co.c.round(6).tolist()}  b[:4]={co.b.round(6).tolist()}")
        print(f"{'':28s} |u(T)-u1|/|u1| = {rep.target_error_l2 / rep.target_l2:.3e}  sup {rep.target_error_sup:.2e}")


if __name__ == "__main__":
    main()
