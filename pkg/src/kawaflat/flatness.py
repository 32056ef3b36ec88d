"""Flat parameterization of the controlled Kawahara equation.

A state is written as ``u(x, t) = sum_j f_j(x) y^(j)(t) + g_j(x) z^(j)(t)``,
where the flat outputs are ``y = d^3u(0, .)`` and ``z = d^4u(0, .)``.  The
boundary controls are the traces of this series at x = -1.  Null control uses
``y = phi_s((t - tau)/(T - tau)) * d^3 ubar(0, t)`` (and z with d^4), where
``ubar`` is the free evolution of the initial state.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field
from math import factorial, lgamma, log
from pathlib import Path

import numpy as np

from .genfun import GeneratingFamily, pointwise_bound
from .gevrey import BumpParams, step_jet
from .kawahara_fd import (
    BoundarySignal,
    GridState,
    SolverConfig,
    free_trace_derivatives,
    norms,
    solve,
)
from .series import CancellationWarning, Jet, ps_apply_P, ps_derivative, ps_eval

GLUE_WINDOW = 0.05  # fraction of (T - tau) after tau used by the glue check
TAIL_TERMS = 400


class TailDivergenceError(RuntimeError):
    """The extrapolated series tail is not yet decreasing at J_max."""


@dataclass
class TrajectoryPlan:
    """Derivative samples ``y^(j)(t_i)``, ``z^(j)(t_i)`` for j <= J_max + 1.

    The extra row J_max + 1 is needed for the time derivative of the
    truncated series (PDE residual) and for the tail fit.
    """

    times: np.ndarray
    J_max: int
    y_derivs: np.ndarray  # (J_max + 2, nt)
    z_derivs: np.ndarray
    s: float
    tau: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        for name in ("y_derivs", "z_derivs"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != (self.J_max + 2, self.times.size):
                raise ValueError(f"{name} must have shape (J_max + 2, len(times))")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} contains non-finite entries")
            setattr(self, name, a)

    @property
    def n_times(self) -> int:
        return self.times.size


@dataclass
class ControlSignal:
    times: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    tail_bound: float = 0.0

    def boundary_signal(self) -> BoundarySignal:
        return BoundarySignal.from_samples(self.times, self.h1, self.h2)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "h1", "h2"])
            for row in zip(self.times, self.h1, self.h2):
                w.writerow([f"{v:.17g}" for v in row])


@dataclass
class NullControlReport:
    final_l2: float
    free_final_l2: float
    glue_error: float
    tail_bound: float
    u0_l2: float
    u0_sup: float
    config_echo: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


# --- planning -------------------------------------------------------------


def _leibniz_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Leibniz product of two derivative stacks (rows = order)."""
    M = a.shape[0] - 1
    out = np.zeros_like(a)
    for n in range(M + 1):
        for j in range(n + 1):
            out[n] += factorial(n) // (factorial(j) * factorial(n - j)) * a[j] * b[n - j]
    return out


def _step_stack(times: np.ndarray, tau: float, T: float, p: BumpParams, M: int) -> np.ndarray:
    return np.column_stack([step_jet(t, tau, T, p, M).values for t in times])


def plan_null_control(
    u0: GridState,
    s: float,
    tau: float,
    T: float,
    J_max: int,
    cfg: SolverConfig,
    K: float = 1.0,
) -> TrajectoryPlan:
    """Flat outputs steering u0 to rest at T, sampled on the solver time grid."""
    if not 0.0 < tau < T:
        raise ValueError("need 0 < tau < T")
    if not 2.5 <= s < 5.0:
        raise ValueError("s must lie in [5/2, 5)")
    if abs(cfg.T - T) > 1e-12 * T:
        raise ValueError("solver horizon cfg.T must equal T")
    if cfg.mu0 != 0.0:
        raise ValueError("the flat parameterization does not support mu0 > 0")
    if J_max < 0:
        raise ValueError("J_max must be non-negative")
    times = cfg.times
    M = J_max + 1
    y = np.zeros((M + 1, times.size))
    z = np.zeros((M + 1, times.size))
    active = times > tau
    if np.any(active) and np.any(u0.u != 0.0):
        ta = times[active]
        tr = free_trace_derivatives(u0, cfg, ta, M, orders=(3, 4))
        phis = _step_stack(ta, tau, T, BumpParams(s=s, K=K), M)
        y[:, active] = _leibniz_rows(phis, tr[3])
        z[:, active] = _leibniz_rows(phis, tr[4])
    return TrajectoryPlan(times, J_max, y, z, s, tau)


def plan_from_jets(times, y_jets: list[Jet], z_jets: list[Jet], s: float, tau: float) -> TrajectoryPlan:
    """Assemble a plan from per-sample jets (orders must be J_max + 1)."""
    M = y_jets[0].M
    y = np.column_stack([j.values for j in y_jets])
    z = np.column_stack([j.values for j in z_jets])
    if y.shape[0] != M + 1 or z.shape[0] != M + 1:
        raise ValueError("inconsistent jet orders")
    return TrajectoryPlan(np.asarray(times, float), M - 1, y, z, s, tau)


# --- tail bounds ----------------------------------------------------------


def _envelope(Y: np.ndarray, s: float):
    """Fit ``log Y_j <= c + r j + s log j!`` over the observed rows.

    Returns ``(c, r)`` or None when every row vanishes.  The slope r comes
    from least squares, the offset c is raised until the fit envelopes the
    data.
    """
    j = np.arange(Y.size)
    ok = Y > 0
    if not np.any(ok):
        return None
    resid = np.log(Y[ok]) - s * np.array([lgamma(k + 1) for k in j[ok]])
    if ok.sum() >= 2:
        r = np.polyfit(j[ok], resid, 1)[0]
    else:
        r = 0.0
    c = float(np.max(resid - r * j[ok]))
    return c, float(r)


def _tail_terms(fit, s: float, start: int, shift: int, deriv: bool, x: float) -> np.ndarray:
    """Log of ``bound_j(x) * Yhat_{j+shift}`` for j = start, start+1, ..."""
    c, r = fit
    ax = abs(x)
    if ax == 0.0:
        return np.full(TAIL_TERMS, -np.inf)
    js = np.arange(start, start + TAIL_TERMS)
    p = 5 * js + (0 if deriv else 1)
    logb = js * log(2.0) + p * log(ax) - np.array([lgamma(k + 1) for k in p])
    k = js + shift
    logy = c + r * k + s * np.array([lgamma(q + 1) for q in k])
    return logb + logy


def series_tail_bound(plan: TrajectoryPlan, x: float = -1.0, deriv: bool = False, strict: bool = True) -> float:
    """A-posteriori bound on the dropped terms ``sum_{j > J_max}``.

    Combines the pointwise bound ``2^j |x|^(5j+1)/(5j+1)!`` on f_j, g_j (or
    ``2^j |x|^(5j)/(5j)!`` on their derivatives) with an extrapolated envelope
    of ``max_t |y^(j)|``.  With ``strict`` a tail that is still growing at
    J_max + 1 raises :class:`TailDivergenceError`.
    """
    total = 0.0
    for stack in (plan.y_derivs, plan.z_derivs):
        fit = _envelope(np.abs(stack).max(axis=1), plan.s)
        if fit is None:
            continue
        lt = _tail_terms(fit, plan.s, plan.J_max + 1, 0, deriv, x)
        if strict and lt[1] >= lt[0]:
            raise TailDivergenceError(
                f"series tail still growing at J_max={plan.J_max} (s={plan.s}); "
                "increase J_max or use a larger s"
            )
        with np.errstate(over="ignore"):
            total += float(np.exp(lt).sum())
    return total


# --- evaluation -----------------------------------------------------------


def _check_family(plan: TrajectoryPlan, fam: GeneratingFamily) -> None:
    if fam.J_max != plan.J_max:
        raise ValueError(f"J_max mismatch: plan {plan.J_max}, family {fam.J_max}")


def evaluate_flat_solution(
    plan: TrajectoryPlan, fam: GeneratingFamily, x, t_index: int, dx_order: int = 0
) -> tuple[np.ndarray | float, float]:
    """Partial sum of the flat series (or its ``dx_order``-th x-derivative).

    Returns ``(value, tail_bound)``; the bound covers the value only
    (``dx_order`` 0) and is reported as NaN otherwise.
    """
    _check_family(plan, fam)
    x = np.asarray(x, dtype=float)
    yv = plan.y_derivs[:, t_index]
    zv = plan.z_derivs[:, t_index]
    val = np.zeros_like(x)
    for j in range(plan.J_max + 1):
        if yv[j]:
            val = val + yv[j] * ps_eval(ps_derivative(fam.f[j], dx_order), x)
        if zv[j]:
            val = val + zv[j] * ps_eval(ps_derivative(fam.g[j], dx_order), x)
    if dx_order == 0:
        xm = float(np.max(np.abs(x))) if x.size else 0.0
        tail = series_tail_bound(plan, -xm, strict=False)
    else:
        tail = float("nan")
    return (val if val.ndim else float(val)), tail


def flat_residual(plan: TrajectoryPlan, fam: GeneratingFamily, x, t_indices) -> tuple[np.ndarray, np.ndarray]:
    """PDE residual ``u_t + P u`` of the truncated series and its bound.

    ``u_t`` shifts the derivative index (row j -> j + 1); ``P u`` applies P to
    the family series.  The exact residual of the truncated sum is
    ``f_J y^(J+1) + g_J z^(J+1)``, so the bound is
    ``2^J |x|^(5J+1)/(5J+1)! (|y^(J+1)| + |z^(J+1)|)``.
    Arrays have shape (len(t_indices), len(x)).
    """
    _check_family(plan, fam)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t_indices = np.atleast_1d(t_indices)
    toy = fam.variant == "toy"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CancellationWarning)
        Pf = np.array([ps_eval(ps_apply_P(p, toy=toy), x) for p in fam.f])
        Pg = np.array([ps_eval(ps_apply_P(p, toy=toy), x) for p in fam.g])
    F = np.array([ps_eval(p, x) for p in fam.f])
    G = np.array([ps_eval(p, x) for p in fam.g])
    J = plan.J_max
    Y = plan.y_derivs[:, t_indices]
    Z = plan.z_derivs[:, t_indices]
    ut = Y[1 : J + 2].T @ F + Z[1 : J + 2].T @ G
    Pu = Y[: J + 1].T @ Pf + Z[: J + 1].T @ Pg
    lb = pointwise_bound(J, x)
    bound = np.outer(np.abs(Y[J + 1]) + np.abs(Z[J + 1]), lb)
    return ut + Pu, bound


# --- controls -------------------------------------------------------------


def synthesize_controls(plan: TrajectoryPlan, fam: GeneratingFamily) -> ControlSignal:
    """Boundary data at x = -1 from the cached traces of the family."""
    _check_family(plan, fam)
    J = plan.J_max
    tf, tg = fam.traces_f, fam.traces_g
    Y = plan.y_derivs[: J + 1]
    Z = plan.z_derivs[: J + 1]
    h1 = tf[:, 0] @ Y + tg[:, 0] @ Z
    h2 = tf[:, 1] @ Y + tg[:, 1] @ Z
    tail = max(
        series_tail_bound(plan, -1.0, deriv=False, strict=False),
        series_tail_bound(plan, -1.0, deriv=True, strict=False),
    )
    return ControlSignal(plan.times.copy(), h1, h2, tail)


# --- end-to-end -----------------------------------------------------------


def run_null_control_experiment(
    u0: GridState,
    s: float,
    tau: float,
    T: float,
    J_max: int,
    cfg: SolverConfig,
    fam: GeneratingFamily | None = None,
    K: float = 1.0,
) -> tuple[NullControlReport, ControlSignal, TrajectoryPlan]:
    """Plan, synthesize and replay the controls through the solver from u0."""
    from .genfun import build_family

    if fam is None:
        fam = build_family(J_max)
    plan = plan_null_control(u0, s, tau, T, J_max, cfg, K=K)
    tail = series_tail_bound(plan, -1.0, strict=True)
    ctrl = synthesize_controls(plan, fam)
    controlled = solve(u0, cfg, ctrl.boundary_signal(), record=[T])
    free = solve(u0, cfg, None, record=[T])
    glue = glue_error(plan, fam, u0, cfg, tau, T)
    n0 = norms(u0)
    report = NullControlReport(
        final_l2=norms(controlled.final)["l2"],
        free_final_l2=norms(free.final)["l2"],
        glue_error=glue,
        tail_bound=max(tail, ctrl.tail_bound),
        u0_l2=n0["l2"],
        u0_sup=n0["sup"],
        config_echo={"s": s, "tau": tau, "T": T, "J_max": J_max, "K": K, **asdict(cfg)},
    )
    return report, ctrl, plan


def glue_error(
    plan: TrajectoryPlan, fam: GeneratingFamily, u0: GridState, cfg: SolverConfig, tau: float, T: float
) -> float:
    """Consistency of the flat representation with the free evolution.

    On the window ``(tau, tau + w (T - tau)]`` the series is built from the
    unmodulated traces ``y = d^3 ubar(0, t)``, ``z = d^4 ubar(0, t)`` (the
    flat outputs of the uncontrolled motion) and compared with the solver's
    free evolution, sup over x.
    """
    t_hi = tau + GLUE_WINDOW * (T - tau)
    idx = np.nonzero((plan.times > tau) & (plan.times <= t_hi))[0]
    if idx.size == 0 or not np.any(u0.u != 0.0):
        return 0.0
    idx = idx[:: max(1, idx.size // 10)]
    ts = plan.times[idx]
    tr = free_trace_derivatives(u0, cfg, ts, plan.J_max + 1, orders=(3, 4))
    free_plan = TrajectoryPlan(ts, plan.J_max, tr[3], tr[4], 1.0, tau)
    free = solve(u0, cfg, None, record=ts)
    worst = 0.0
    for k in range(ts.size):
        val, _ = evaluate_flat_solution(free_plan, fam, u0.x, k)
        worst = max(worst, float(np.abs(val - free.u[k]).max()))
    return worst


def dump_report(report: NullControlReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_json(), indent=1, sort_keys=True))


__all__ = [
    "ControlSignal",
    "NullControlReport",
    "TailDivergenceError",
    "TrajectoryPlan",
    "dump_report",
    "evaluate_flat_solution",
    "flat_residual",
    "glue_error",
    "plan_from_jets",
    "plan_null_control",
    "run_null_control_experiment",
    "series_tail_bound",
    "synthesize_controls",
]
