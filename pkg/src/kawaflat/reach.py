"""Reachability of analytic targets from rest.

For a target u1 with ``d^j P^n u1(0) = 0`` (j = 0, 1, 2, all n) the flat
outputs must satisfy ``y^(n)(T) = c_n = (-1)^n d^3 P^n u1(0)`` and
``z^(n)(T) = b_n = (-1)^n d^4 P^n u1(0)``.  Here ``y = F beta`` where F is the
degree-N Taylor polynomial at T with these coefficients and ``beta`` is the
cutoff ``1 - phi_2((t - tau)/(T - tau))``.  The finite polynomial meets the
interpolation conditions exactly; what is lost is the target tail beyond N,
which is estimated and reported.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from math import comb, e, factorial, lgamma
from pathlib import Path

import numpy as np

from .flatness import TrajectoryPlan, series_tail_bound, synthesize_controls
from .genfun import GeneratingFamily, build_family, pointwise_bound
from .gevrey import beta_jet
from .kawahara_fd import GridState, SolverConfig, norms, solve
from .series import CancellationWarning, PowerSeries, ps_apply_P, ps_derivative, ps_eval

ENTIRE_RADIUS = 1e16
MEMBERSHIP_RTOL = 1e-8


def r0_constant() -> float:
    return 2.0 * 6.0 ** (1.0 / 5.0) * e ** (1.0 / (5.0 * e))


class MembershipError(ValueError):
    def __init__(self, diagnostics: "MembershipDiagnostics"):
        self.diagnostics = diagnostics
        super().__init__(f"target is not in the reachable set: {diagnostics.summary()}")


@dataclass(frozen=True)
class ReachTarget:
    u1: PowerSeries
    R: float = ENTIRE_RADIUS
    N_check: int = 4

    def to_json(self) -> dict:
        return {"coeffs": self.u1.coeffs.tolist(), "radius": self.R}

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def from_json(cls, data: dict, N_check: int | None = None) -> ReachTarget:
        u1 = PowerSeries(0.0, data["coeffs"])
        R = float(data.get("radius", ENTIRE_RADIUS))
        if N_check is None:
            N_check = max(0, (u1.order - 3) // 5)
        return cls(u1, R, N_check)

    @classmethod
    def load(cls, path, N_check: int | None = None) -> ReachTarget:
        return cls.from_json(json.loads(Path(path).read_text()), N_check)

    @classmethod
    def from_family(cls, fam: GeneratingFamily, c, b, N_check: int | None = None) -> ReachTarget:
        """Finite combination ``sum c[n] f_n + b[n] g_n`` (entire, so R is 'infinite')."""
        u = np.zeros(fam.order + 1)
        for n, cn in enumerate(c):
            u += cn * fam.f[n].coeffs
        for n, bn in enumerate(b):
            u += bn * fam.g[n].coeffs
        if N_check is None:
            N_check = (fam.order - 4) // 5
        return cls(PowerSeries(0.0, u), ENTIRE_RADIUS, N_check)


@dataclass
class MembershipDiagnostics:
    radius_ok: bool
    bc_residuals: np.ndarray  # (N_check + 1, 3)
    scales: np.ndarray  # coefficient scale of P^n u1, per n

    @property
    def bc_ok(self) -> bool:
        tol = MEMBERSHIP_RTOL * np.maximum(self.scales, np.finfo(float).tiny)
        return bool(np.all(self.bc_residuals <= tol[:, None]))

    @property
    def ok(self) -> bool:
        return self.radius_ok and self.bc_ok

    def summary(self) -> str:
        return f"radius_ok={self.radius_ok}, max bc residual={self.bc_residuals.max():.3e}"


@dataclass(frozen=True)
class ReachCoefficients:
    c: np.ndarray
    b: np.ndarray
    N: int

    def __post_init__(self):
        c = np.zeros(self.N + 1)
        b = np.zeros(self.N + 1)
        cc, bb = np.asarray(self.c, float), np.asarray(self.b, float)
        c[: min(cc.size, self.N + 1)] = cc[: self.N + 1]
        b[: min(bb.size, self.N + 1)] = bb[: self.N + 1]
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b", b)

    def growth_fit(self) -> tuple[float, float]:
        """Fit ``|c_n|, |b_n| <= C H^n (5n)!``; returns (C, H), H = 0 if all vanish."""
        mags = np.maximum(np.abs(self.c), np.abs(self.b))
        n = np.arange(self.N + 1)
        ok = mags > 0
        if not np.any(ok):
            return 0.0, 0.0
        logs = np.log(mags[ok]) - np.array([lgamma(5 * k + 1) for k in n[ok]])
        slope = np.polyfit(n[ok], logs, 1)[0] if ok.sum() >= 2 else 0.0
        C = float(np.exp(np.max(logs - slope * n[ok])))
        return C, float(np.exp(slope))


def _P_powers(u: PowerSeries, n_max: int) -> list[PowerSeries]:
    out = [u]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CancellationWarning)
        for _ in range(n_max):
            out.append(ps_apply_P(out[-1]))
    return out


def _deriv_at_zero(p: PowerSeries, j: int) -> float:
    return float(p.coeffs[j] * factorial(j))


def check_membership(t: ReachTarget) -> MembershipDiagnostics:
    if t.u1.order < 5 * t.N_check + 3:
        raise ValueError(
            f"series order {t.u1.order} too small for N_check={t.N_check}; need {5 * t.N_check + 3}"
        )
    pw = _P_powers(t.u1, t.N_check)
    res = np.array([[abs(_deriv_at_zero(p, j)) for j in range(3)] for p in pw])
    scales = _abs_scales(t.u1, t.N_check)
    return MembershipDiagnostics(t.R > 2.0 * r0_constant(), res, scales)


def _abs_scales(u: PowerSeries, n_max: int) -> np.ndarray:
    """Round-off scale of each functional: the same map with all terms made positive."""
    p = PowerSeries(0.0, np.abs(u.coeffs))
    out = []
    for n in range(n_max + 1):
        out.append(max(_deriv_at_zero(p, j) for j in range(3)))
        if n < n_max:
            d = [ps_derivative(p, k).coeffs[: p.order - 4] for k in (1, 3, 5)]
            p = PowerSeries(0.0, d[0] + d[1] + d[2])
    return np.array(out)


def extract_coefficients(t: ReachTarget, N: int) -> ReachCoefficients:
    """``c_n = (-1)^n d^3 P^n u1(0)``, ``b_n = (-1)^n d^4 P^n u1(0)``, n <= N."""
    if t.u1.order < 5 * N + 4:
        raise ValueError(f"order exhausted: need series order >= {5 * N + 4}, have {t.u1.order}")
    pw = _P_powers(t.u1, N)
    sgn = np.array([(-1.0) ** n for n in range(N + 1)])
    c = sgn * np.array([_deriv_at_zero(p, 3) for p in pw])
    b = sgn * np.array([_deriv_at_zero(p, 4) for p in pw])
    return ReachCoefficients(c, b, N)


def reconstruct_target(fam: GeneratingFamily, co: ReachCoefficients) -> PowerSeries:
    """``sum_n c_n f_n + b_n g_n``."""
    if co.N > fam.J_max:
        raise ValueError(f"coefficients up to N={co.N} exceed family J_max={fam.J_max}")
    u = np.zeros(fam.order + 1)
    for n in range(co.N + 1):
        u += co.c[n] * fam.f[n].coeffs + co.b[n] * fam.g[n].coeffs
    return PowerSeries(0.0, u)


def _taylor_jet(coef: np.ndarray, t: float, T: float, M: int) -> np.ndarray:
    """Derivatives 0..M at t of ``sum_n coef[n] (t - T)^n / n!``."""
    d = t - T
    out = np.zeros(M + 1)
    N = coef.size - 1
    for m in range(min(M, N) + 1):
        acc = 0.0
        for n in range(N, m - 1, -1):
            acc = acc * d / (n - m + 1) + coef[n]
        out[m] = acc
    return out


def plan_reach(
    co: ReachCoefficients, tau: float, T: float, times, J_max: int | None = None, K: float = 1.0
) -> TrajectoryPlan:
    """Flat outputs ``y = F beta``, ``z = G beta`` sampled at ``times``.

    Rows 0..J_max + 1 are stored (J_max defaults to co.N).
    """
    if not 0.0 < tau < T:
        raise ValueError("need 0 < tau < T")
    J = co.N if J_max is None else J_max
    M = J + 1
    times = np.asarray(times, dtype=float)
    y = np.zeros((M + 1, times.size))
    z = np.zeros((M + 1, times.size))
    C = np.array([[float(comb(n, k)) if k <= n else 0.0 for k in range(M + 1)] for n in range(M + 1)])
    for i, t in enumerate(times):
        if t <= tau:
            continue
        bj = beta_jet(t, tau, T, M, K).values
        Fj = _taylor_jet(co.c, t, T, M)
        Gj = _taylor_jet(co.b, t, T, M)
        for n in range(M + 1):
            y[n, i] = np.dot(C[n, : n + 1] * Fj[: n + 1], bj[n::-1])
            z[n, i] = np.dot(C[n, : n + 1] * Gj[: n + 1], bj[n::-1])
    return TrajectoryPlan(times, J, y, z, 2.0, tau)


def coefficient_tail_bound(t: ReachTarget, N: int) -> float:
    """``sum_{N < n <= n_max} (|c_n| + |b_n|) 2^n / (5n+1)!`` with all available n.

    Bounds the part of the target the truncated plan does not steer, on [-1, 0].
    """
    n_max = (t.u1.order - 4) // 5
    if n_max <= N:
        return 0.0
    co = extract_coefficients(t, n_max)
    n = np.arange(N + 1, n_max + 1)
    return float(np.sum((np.abs(co.c[n]) + np.abs(co.b[n])) * np.array([pointwise_bound(int(k), 1.0) for k in n])))


def unique_continuation_matrix(N: int) -> np.ndarray:
    """Map from coefficients a_0..a_{5N+4} to ``d^j P^n u(0)``, rows ordered by 5n + j.

    Row (n, j) picks up ``(-1)^n (5n+j)! a_{5n+j}`` plus lower-index terms,
    so the matrix is lower triangular with non-zero diagonal.
    """
    dim = 5 * N + 5
    L = np.zeros((dim, dim))
    for k in range(dim):
        e_k = np.zeros(dim)
        e_k[k] = 1.0
        pw = _P_powers(PowerSeries(0.0, e_k), N)
        for n in range(N + 1):
            for j in range(5):
                if j <= pw[n].order:
                    L[5 * n + j, k] = _deriv_at_zero(pw[n], j)
    return L


def unique_continuation_holds(N: int) -> bool:
    """Vanishing of all ``d^j P^n u(0)`` (j <= 4, n <= N) forces a_0..a_{5N+4} = 0."""
    L = unique_continuation_matrix(N)
    return bool(np.all(np.triu(L, 1) == 0.0) and np.all(np.diag(L) != 0.0))


@dataclass
class ReachReport:
    target_error_sup: float
    target_error_l2: float
    tail_bound: float
    target_l2: float
    config_echo: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def run_reach_experiment(
    t: ReachTarget,
    tau: float,
    T: float,
    J_max: int,
    cfg: SolverConfig,
    fam: GeneratingFamily | None = None,
    K: float = 1.0,
):
    """Steer the solver from rest to u1 and measure the terminal mismatch."""
    diag = check_membership(t)
    if not diag.ok:
        raise MembershipError(diag)
    if abs(cfg.T - T) > 1e-12 * T:
        raise ValueError("solver horizon cfg.T must equal T")
    if cfg.mu0 != 0.0:
        raise ValueError("the flat parameterization does not support mu0 > 0")
    if fam is None:
        fam = build_family(J_max)
    co = extract_coefficients(t, J_max)
    plan = plan_reach(co, tau, T, cfg.times, J_max, K)
    ctrl = synthesize_controls(plan, fam)
    zero = GridState(cfg.x, np.zeros(cfg.nx + 2))
    final = solve(zero, cfg, ctrl.boundary_signal(), record=[T]).final
    target = ps_eval(t.u1, cfg.x)
    err = GridState(cfg.x, final.u - target)
    en = norms(err)
    tail = coefficient_tail_bound(t, J_max) + series_tail_bound(plan, -1.0, strict=False)
    report = ReachReport(
        target_error_sup=en["sup"],
        target_error_l2=en["l2"],
        tail_bound=tail,
        target_l2=norms(GridState(cfg.x, target))["l2"],
        config_echo={"tau": tau, "T": T, "J_max": J_max, "K": K, "R": t.R, **asdict(cfg)},
    )
    return report, ctrl, plan
