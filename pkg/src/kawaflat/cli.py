"""Command-line front end: configuration, orchestration and export.

Config files hold flat ``key = value`` lines (``#`` starts a comment);
command-line flags override file values.  Exit codes: 0 pass, 2 threshold
breach, 3 configuration error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Callable

import numpy as np

EXIT_OK, EXIT_BREACH, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3, 4
MODES = ("null-control", "reach", "simulate", "genfun-dump", "verify")

INITIAL_STATES: dict[str, Callable] = {
    "bump": lambda x: x**2 * (x + 1) ** 2,
    "sine-bump": lambda x: np.sin(2 * np.pi * x) * x**2 * (x + 1) ** 2,
    "zero": lambda x: 0.0 * x,
}
# built-in reach targets: (c, b) coefficients on f_n, g_n
BUILTIN_TARGETS = {
    "f0g0": ([0.1], [0.05]),
    "f1": ([0.0, 0.1], []),
    "zero": ([], []),
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    mode: str = "null-control"
    s: float = 3.0
    K: float = 1.0
    tau: float = 0.5
    T: float = 1.0
    J_max: int = 8
    N: int | None = None
    nx: int = 256
    theta: float = 0.5
    dt: float | None = None
    mu0: float = 0.0
    seed: int = 0
    output_dir: str = "out"
    u0: str = "bump"
    target: str = "f0g0"
    strict: bool = False
    emit_plotscript: bool = False
    samples: int = 200

    def to_json(self) -> dict:
        return asdict(self)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_ALIASES = {"jmax": "J_max", "order": "N", "out": "output_dir"}


def _convert(key: str, raw: Any) -> Any:
    if raw is None:
        return None
    default = getattr(ExperimentConfig(), key)
    typ = _FIELDS[key].type
    if isinstance(raw, str) and raw.strip().lower() in ("none", ""):
        if "None" in str(typ):
            return None
        raise ConfigError(f"{key} may not be empty")
    try:
        if isinstance(default, bool):
            if isinstance(raw, bool):
                return raw
            v = str(raw).strip().lower()
            if v not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return v in ("true", "1", "yes")
        if "int" in str(typ):
            return int(raw)
        if "float" in str(typ):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return str(raw)


def read_config_file(path) -> dict[str, str]:
    out = {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    for lineno, line in enumerate(p.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def parse_config(file: str | None = None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    """Merge file values and overrides (overrides win), then validate."""
    raw: dict[str, Any] = {}
    if file:
        raw.update(read_config_file(file))
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    vals: dict[str, Any] = {}
    for k, v in raw.items():
        key = _ALIASES.get(k, k).replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"unknown configuration key: {k}")
        vals[key] = _convert(key, v)
    cfg = ExperimentConfig(**vals)
    _validate(cfg, explicit=set(vals))
    return cfg


def _validate(cfg: ExperimentConfig, explicit: set[str]) -> None:
    if cfg.mode not in MODES:
        raise ConfigError(f"unknown mode {cfg.mode!r}; expected one of {', '.join(MODES)}")
    if "mu0" in explicit and cfg.mode != "simulate":
        raise ConfigError(f"mu0 is only supported in simulate mode, not {cfg.mode}")
    if cfg.mu0 < 0:
        raise ConfigError("mu0 must be non-negative")
    if cfg.mode in ("null-control", "reach", "simulate"):
        if not cfg.T > 0:
            raise ConfigError("T must be positive")
        if cfg.nx < 32:
            raise ConfigError("nx must be >= 32")
        if not 0.5 <= cfg.theta <= 1.0:
            raise ConfigError("theta must lie in [0.5, 1]")
        if cfg.dt is not None and not 0 < cfg.dt <= cfg.T:
            raise ConfigError("need 0 < dt <= T")
    if cfg.mode in ("null-control", "reach"):
        if not 0 < cfg.tau < cfg.T:
            raise ConfigError("need 0 < tau < T")
        if cfg.J_max < 0:
            raise ConfigError("J_max must be non-negative")
        if not cfg.K > 0:
            raise ConfigError("K must be positive")
    if cfg.mode == "null-control" and not 2.5 <= cfg.s < 5.0:
        raise ConfigError("s must lie in [5/2, 5) for null control")
    if cfg.mode in ("null-control", "simulate") and cfg.u0 not in INITIAL_STATES:
        raise ConfigError(f"unknown initial state {cfg.u0!r}; choose from {', '.join(INITIAL_STATES)}")
    if cfg.mode == "reach" and cfg.target not in BUILTIN_TARGETS and not Path(cfg.target).is_file():
        raise ConfigError(f"target {cfg.target!r} is neither a built-in name nor an existing file")
    if cfg.mode == "genfun-dump" and cfg.J_max < 0:
        raise ConfigError("J_max must be non-negative")
    if cfg.samples < 1:
        raise ConfigError("samples must be positive")


# --- artifacts ------------------------------------------------------------


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def _write_manifest(out: Path, cfg: ExperimentConfig, files: list[str], status: str) -> None:
    _write_json(out / "manifest.json", {"config": cfg.to_json(), "files": sorted(files), "status": status})


PLOT_TEMPLATE = '''"""Plot the CSV artifacts of a run (requires matplotlib)."""
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
for name in {files!r}:
    with open(here / name) as fh:
        rows = list(csv.reader(fh))
    head, data = rows[0], [[float(v) for v in r] for r in rows[1:]]
    cols = list(zip(*data))
    plt.figure()
    for k in range(1, len(head)):
        plt.plot(cols[0], cols[k], label=head[k])
    plt.xlabel(head[0])
    plt.legend()
    plt.title(name)
    plt.savefig(here / (Path(name).stem + ".png"), dpi=120)
if "--show" in sys.argv:
    plt.show()
'''


def _emit_plotscript(out: Path, csvs: list[str]) -> str:
    (out / "plot_results.py").write_text(PLOT_TEMPLATE.format(files=csvs))
    return "plot_results.py"


def _write_csv(path: Path, header: list[str], cols: list[np.ndarray]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(f"{float(v):.17g}" for v in row) + "\n")


# --- modes ----------------------------------------------------------------


def _solver_cfg(cfg: ExperimentConfig, mu0: float = 0.0):
    from .kawahara_fd import SolverConfig

    return SolverConfig(nx=cfg.nx, T=cfg.T, dt=cfg.dt, theta=cfg.theta, mu0=mu0)


def _run_null_control(cfg: ExperimentConfig, out: Path) -> tuple[int, list[str]]:
    from .flatness import run_null_control_experiment
    from .genfun import build_family
    from .kawahara_fd import GridState

    scfg = _solver_cfg(cfg)
    u0 = GridState.from_function(INITIAL_STATES[cfg.u0], scfg)
    fam = build_family(cfg.J_max, cfg.N)
    report, ctrl, _ = run_null_control_experiment(u0, cfg.s, cfg.tau, cfg.T, cfg.J_max, scfg, fam, K=cfg.K)
    data = report.to_json()
    data["config_echo"] = cfg.to_json()
    ok = report.final_l2 <= 1e-2 * report.u0_l2 and report.glue_error <= 5e-3 * max(report.u0_sup, 0.0)
    if report.u0_l2 == 0.0:
        ok = report.final_l2 == 0.0
    data["thresholds_met"] = bool(ok)
    _write_json(out / "report.json", data)
    ctrl.to_csv(out / "controls.csv")
    print(f"final_l2={report.final_l2:.6e} free_final_l2={report.free_final_l2:.6e} "
          f"glue_error={report.glue_error:.6e} tail_bound={report.tail_bound:.6e}")
    return (EXIT_OK if ok or not cfg.strict else EXIT_BREACH), ["report.json", "controls.csv"]


def _load_target(cfg: ExperimentConfig, fam):
    from .reach import ReachTarget

    if cfg.target in BUILTIN_TARGETS:
        c, b = BUILTIN_TARGETS[cfg.target]
        return ReachTarget.from_family(fam, c, b)
    return ReachTarget.load(cfg.target)


def _run_reach(cfg: ExperimentConfig, out: Path) -> tuple[int, list[str]]:
    from .genfun import build_family
    from .reach import run_reach_experiment

    fam = build_family(cfg.J_max, cfg.N)
    target = _load_target(cfg, fam)
    report, ctrl, _ = run_reach_experiment(target, cfg.tau, cfg.T, cfg.J_max, _solver_cfg(cfg), fam, K=cfg.K)
    data = report.to_json()
    data["config_echo"] = cfg.to_json()
    ok = report.target_error_l2 <= 1e-2 * report.target_l2 or report.target_error_l2 == 0.0
    data["thresholds_met"] = bool(ok)
    _write_json(out / "report.json", data)
    ctrl.to_csv(out / "controls.csv")
    print(f"target_error_l2={report.target_error_l2:.6e} target_error_sup={report.target_error_sup:.6e} "
          f"tail_bound={report.tail_bound:.6e}")
    return (EXIT_OK if ok or not cfg.strict else EXIT_BREACH), ["report.json", "controls.csv"]


def _run_simulate(cfg: ExperimentConfig, out: Path) -> tuple[int, list[str]]:
    from .kawahara_fd import GridState, norms, solve

    scfg = _solver_cfg(cfg, cfg.mu0)
    u0 = GridState.from_function(INITIAL_STATES[cfg.u0], scfg)
    traj = solve(u0, scfg)
    l2 = np.array([norms(traj.state(i))["l2"] for i in range(traj.times.size)])
    growth = float(np.max(np.diff(l2), initial=0.0) / l2[0]) if l2[0] > 0 else 0.0
    contraction = bool(growth <= 1e-10)
    _write_csv(out / "norms.csv", ["t", "l2"], [traj.times, l2])
    _write_csv(out / "final_state.csv", ["x", "u"], [traj.x, traj.u[-1]])
    _write_json(out / "report.json", {
        "initial_l2": float(l2[0]),
        "final_l2": float(l2[-1]),
        "max_step_growth_over_initial": growth,
        "contraction": contraction,
        "config_echo": cfg.to_json(),
    })
    print(f"initial_l2={l2[0]:.6e} final_l2={l2[-1]:.6e} contraction={contraction}")
    return (EXIT_OK if contraction or not cfg.strict else EXIT_BREACH), ["report.json", "norms.csv", "final_state.csv"]


def _run_genfun_dump(cfg: ExperimentConfig, out: Path) -> tuple[int, list[str]]:
    from .genfun import build_family

    fam = build_family(cfg.J_max, cfg.N)
    fam.dump(out / "fam.json")
    print(f"wrote J_max={fam.J_max} order={fam.order} family")
    return EXIT_OK, ["fam.json"]


def _run_verify(cfg: ExperimentConfig, out: Path) -> tuple[int, list[str]]:
    results = verify_suite(cfg.seed, cfg.samples)
    width = max(len(r["name"]) for r in results)
    for r in results:
        flag = "PASS" if r["passed"] else "FAIL"
        print(f"{r['name']:<{width}}  {flag}  value={r['value']:.3e}  threshold={r['threshold']:.3e}")
    _write_json(out / "verify_report.json", {"config": cfg.to_json(), "checks": results})
    ok = all(r["passed"] for r in results)
    return (EXIT_OK if ok else EXIT_BREACH), ["verify_report.json"]


_DISPATCH = {
    "null-control": _run_null_control,
    "reach": _run_reach,
    "simulate": _run_simulate,
    "genfun-dump": _run_genfun_dump,
    "verify": _run_verify,
}


def run(cfg: ExperimentConfig) -> int:
    """Dispatch one experiment and write its artifacts; returns the exit code."""
    from .flatness import TailDivergenceError
    from .kawahara_fd import SolverError
    from .reach import MembershipError

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            code, files = _DISPATCH[cfg.mode](cfg, out)
    except MembershipError as exc:
        print(f"error [{cfg.mode}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, TailDivergenceError, FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"numerical failure [{cfg.mode}]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if cfg.emit_plotscript:
        csvs = [f for f in files if f.endswith(".csv")]
        if csvs:
            files.append(_emit_plotscript(out, csvs))
    _write_manifest(out, cfg, files, "pass" if code == EXIT_OK else "breach")
    return code


# --- invariant suite ------------------------------------------------------


def _check(name: str, value: float, threshold: float, le: bool = True) -> dict:
    value = float(value)
    passed = value <= threshold if le else value >= threshold
    return {"name": name, "value": value, "threshold": float(threshold), "passed": bool(passed)}


def verify_suite(seed: int = 0, samples: int = 200) -> list[dict]:
    """Deterministic battery of identities and bounds; one dict per check."""
    from math import factorial

    from .genfun import (
        build_family,
        convolution_fj,
        convolution_gj,
        f0_closed,
        f0_closed_derivative,
        g0_closed,
        g0_closed_derivative,
        pointwise_bound,
        series_solve_P,
        sup_norm_derivatives,
        verify_Pk_identity,
        F0_IC,
        G0_IC,
    )
    from .gevrey import BumpParams, phi, phi_jet
    from .kawahara_fd import GridState, SolverConfig, norms, solve
    from .reach import ReachTarget, extract_coefficients, reconstruct_target, unique_continuation_holds
    from .series import PowerSeries, ps_apply_P_power, ps_eval

    rng = np.random.default_rng(seed)
    xs = np.linspace(-1.0, 0.0, 256)
    res = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        f0 = series_solve_P(None, F0_IC, 60)
        g0 = series_solve_P(None, G0_IC, 60)
        res.append(_check("closed_form_f0_g0", max(
            np.abs(ps_eval(f0, xs) - f0_closed(xs)).max(), np.abs(ps_eval(g0, xs) - g0_closed(xs)).max()), 1e-12))
        res.append(_check("constant_f0x", abs(f0_closed_derivative(-1.0, 1) - 0.54), 5e-3))
        res.append(_check("constant_f03x", abs(f0_closed_derivative(-1.0, 3) - 1.59), 5e-3))
        res.append(_check("constant_g0x", abs(g0_closed_derivative(-1.0, 1) + 0.18), 5e-3))
        fam = build_family(10)
        excess = max(
            float(np.max(np.abs(ps_eval(p, xs)) - pointwise_bound(j, xs)))
            for family in (fam.f, fam.g) for j, p in enumerate(family)
        )
        res.append(_check("pointwise_bound_excess", excess, 1e-14))
        fam5 = build_family(5, 80)
        res.append(_check("Pk_identity", max(
            verify_Pk_identity(fam5, k, j) for j in range(6) for k in range(j + 1)), 1e-9))
        conv = max(
            np.abs(convolution_fj(fam.f[0], fam.f[0], x=xs) - ps_eval(fam.f[1], xs)).max(),
            np.abs(convolution_gj(fam.g[0], fam.g[0], x=xs) - ps_eval(fam.g[1], xs)).max(),
        )
        res.append(_check("convolution_oracle", conv, 1e-9))
        r = np.linspace(0.01, 0.99, 1000)
        sym = 0.0
        jet_sym = 0.0
        for s in (2.0, 3.0, 5.0):
            p = BumpParams(s=s)
            sym = max(sym, float(np.abs(phi(r, p) + phi(1 - r, p) - 1).max()))
            for rv in (0.1, 0.3, 0.45):
                a, b = phi_jet(rv, p, 6).values, phi_jet(1 - rv, p, 6).values
                m = np.arange(1, 7)
                scale = np.maximum(np.abs(a[1:]), 1.0)
                jet_sym = max(jet_sym, float(np.max(np.abs(a[1:] + (-1.0) ** m * b[1:]) / scale)))
        res.append(_check("phi_symmetry", sym, 1e-14))
        res.append(_check("phi_jet_reflection", jet_sym, 1e-9))
        worst = -np.inf
        grid = np.linspace(-1.0, 0.0, 512)
        for _ in range(samples):
            deg = int(rng.integers(0, 26))
            poly = PowerSeries(0.0, rng.standard_normal(deg + 1) / np.array([factorial(k) for k in range(deg + 1)]) ** 0.5)
            n = int(rng.integers(1, 4))
            if poly.order < 5 * n:
                poly = PowerSeries(0.0, np.concatenate([poly.coeffs, np.zeros(5 * n - poly.order)]))
            lhs = float(np.abs(ps_eval(ps_apply_P_power(poly, n), grid)).max())
            rhs = 3.0**n * sup_norm_derivatives(poly, 5 * n, grid)
            worst = max(worst, lhs - rhs)
        res.append(_check("P_power_sup_margin", worst, 0.0))
        cfg = SolverConfig(nx=64, T=0.05)
        traj = solve(GridState.from_function(INITIAL_STATES["sine-bump"], cfg), cfg)
        l2 = np.array([norms(traj.state(i))["l2"] for i in range(traj.times.size)])
        res.append(_check("l2_contraction", np.max(np.diff(l2)) / l2[0], 1e-10))
        fam8 = build_family(8, 80)
        rt = 0.0
        for _ in range(5):
            c = rng.standard_normal(5)
            b = rng.standard_normal(5)
            t = ReachTarget.from_family(fam8, c, b)
            co = extract_coefficients(t, 8)
            rt = max(rt, float(np.abs(co.c[:5] - c).max()), float(np.abs(co.b[:5] - b).max()))
            rt = max(rt, float(np.abs(ps_eval(reconstruct_target(fam8, co), xs) - ps_eval(t.u1, xs)).max()))
        res.append(_check("reach_round_trip", rt, 1e-9))
        res.append(_check("unique_continuation", 0.0 if unique_continuation_holds(8) else 1.0, 0.0))
    return res


# --- argument parsing -----------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file")
    for name in ("s", "K", "tau", "T", "theta", "dt", "mu0"):
        p.add_argument(f"--{name}", dest=name, default=None)
    for name in ("J_max", "N", "nx", "seed", "samples"):
        p.add_argument(f"--{name}", dest=name, default=None)
    p.add_argument("--jmax", dest="J_max", default=None)
    p.add_argument("--order", dest="N", default=None)
    p.add_argument("--output-dir", "--out", dest="output_dir", default=None)
    p.add_argument("--u0", default=None)
    p.add_argument("--target", default=None)
    p.add_argument("--strict", action="store_const", const=True, default=None)
    p.add_argument("--emit-plotscript", dest="emit_plotscript", action="store_const", const=True, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kawaflat", description="Flatness-based boundary control experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for mode in ("null-control", "reach", "simulate", "verify"):
        _add_common(sub.add_parser(mode))
    g = sub.add_parser("genfun")
    gsub = g.add_subparsers(dest="action", required=True)
    _add_common(gsub.add_parser("dump"))
    r = sub.add_parser("run", help="mode taken from --mode or the config file")
    r.add_argument("--mode", default=None)
    _add_common(r)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    over = {k: v for k, v in vars(ns).items() if k not in ("command", "action", "config")}
    if ns.command == "genfun":
        over["mode"] = "genfun-dump"
    elif ns.command != "run":
        over["mode"] = ns.command
    try:
        cfg = parse_config(ns.config, over)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
