"""Generating functions f_j, g_j of the flat parameterization.

Both families solve the cascade ``P f_0 = 0``, ``P f_j = -f_{j-1}`` (same for
g) with initial data at x = 0: ``f_0'''(0) = 1``, ``g_0''''(0) = 1`` and all
other derivatives up to order four vanishing.  They are carried as power
series about 0, built from the coefficient recurrence of
``u' + u''' - u^(5) = -rhs``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import factorial, sqrt
from typing import Callable, Literal, Sequence
import warnings

import numpy as np

from .series import (
    CancellationWarning,
    PowerSeries,
    ps_apply_P,
    ps_derivative,
    ps_eval,
)

A_ROOT = (sqrt(5.0) + 1.0) / 2.0
B_ROOT = (sqrt(5.0) - 1.0) / 2.0

Variant = Literal["full", "toy"]

F0_IC = (0.0, 0.0, 0.0, 1.0, 0.0)
G0_IC = (0.0, 0.0, 0.0, 0.0, 1.0)


def f0_closed(x):
    a, b = A_ROOT, B_ROOT
    x = np.asarray(x, dtype=float)
    return np.sinh(sqrt(a) * x) / (sqrt(a) * (a + b)) - np.sin(sqrt(b) * x) / (sqrt(b) * (a + b))


def g0_closed(x):
    a, b = A_ROOT, B_ROOT
    x = np.asarray(x, dtype=float)
    return (
        np.cosh(sqrt(a) * x) / (a * (a + b))
        + np.cos(sqrt(b) * x) / (b * (a + b))
        - 1.0 / (a * (a + b))
        - 1.0 / (b * (a + b))
    )


def f0_closed_derivative(x, m: int):
    """m-th derivative of :func:`f0_closed`, exact."""
    a, b = A_ROOT, B_ROOT
    x = np.asarray(x, dtype=float)
    ra, rb = sqrt(a), sqrt(b)
    sh = np.sinh(ra * x) if m % 2 == 0 else np.cosh(ra * x)
    # d^m sin(rb x) = rb^m sin(rb x + m pi/2)
    return ra ** (m - 1) * sh / (a + b) - rb ** (m - 1) * np.sin(rb * x + m * np.pi / 2) / (a + b)


def g0_closed_derivative(x, m: int):
    if m == 0:
        return g0_closed(x)
    a, b = A_ROOT, B_ROOT
    x = np.asarray(x, dtype=float)
    ra, rb = sqrt(a), sqrt(b)
    ch = np.cosh(ra * x) if m % 2 == 0 else np.sinh(ra * x)
    return ra**m * ch / (a * (a + b)) + rb**m * np.cos(rb * x + m * np.pi / 2) / (b * (a + b))


def _recurrence(rhs: list | None, ic: Sequence[float], order: int, toy: bool, exact: bool) -> list:
    """Coefficients a_0..a_order; rational arithmetic when ``exact``."""
    num_t = Fraction if exact else float
    a = [num_t(0)] * (order + 1)
    for m in range(5):
        a[m] = num_t(ic[m]) / factorial(m)
    for k in range(order - 4):
        num = rhs[k] if rhs is not None and k < len(rhs) else num_t(0)
        if not toy:
            num = num + (k + 1) * a[k + 1] + (k + 1) * (k + 2) * (k + 3) * a[k + 3]
        a[k + 5] = num / ((k + 1) * (k + 2) * (k + 3) * (k + 4) * (k + 5))
    return a


def _check_rhs(rhs: PowerSeries | None, order: int) -> list | None:
    if rhs is None:
        return None
    if rhs.base_point != 0.0:
        raise ValueError("rhs must be expanded about 0")
    if rhs.order < order - 5:
        raise ValueError(f"rhs order {rhs.order} too small for target order {order}")
    return rhs.coeffs.tolist()


def series_solve_P(
    rhs: PowerSeries | None, ic: Sequence[float], order: int, toy: bool = False
) -> PowerSeries:
    """Power series u about 0 with ``P u = -rhs`` and ``u^(m)(0) = ic[m]``, m < 5.

    ``rhs=None`` means the homogeneous problem.  Coefficients come from
    ``a_{k+5} = [(k+1) a_{k+1} + (k+1)_3 a_{k+3} + r_k] / (k+1)_5``; the
    ``toy`` variant drops the first two terms (operator ``-d^5/dx^5`` alone).
    The recurrence runs in exact rational arithmetic on the (exactly
    converted) double inputs, so each coefficient is rounded once.
    """
    if len(ic) != 5:
        raise ValueError("need five initial values")
    if order < 4:
        raise ValueError("order must be at least 4")
    r = _check_rhs(rhs, order)
    r = None if r is None else [Fraction(v) for v in r]
    return PowerSeries(0.0, [float(v) for v in _recurrence(r, ic, order, toy, exact=True)])


def pointwise_bound(j: int, x) -> np.ndarray:
    """Pointwise bound ``2^j |x|^(5j+1) / (5j+1)!`` on |f_j|, |g_j|."""
    x = np.abs(np.asarray(x, dtype=float))
    return 2.0**j * x ** (5 * j + 1) / factorial(5 * j + 1)


def min_order(J_max: int, tol: float = 1e-14, toy: bool = False) -> int:
    """Smallest truncation N whose dropped tail is below ``tol`` on [-1, 0].

    Uses the majorant recurrence (absolute values everywhere), whose
    coefficients dominate those of every f_j, g_j; the tail at |x| = 1 is
    summed explicitly.
    """
    floor = 5 * J_max + 10
    big = floor + 200
    worst = np.zeros(big + 1)
    for ic in (F0_IC, G0_IC):
        prev = None
        for j in range(J_max + 1):
            a = np.abs(_recurrence(prev, ic if j == 0 else (0.0,) * 5, big, toy, exact=False))
            worst = np.maximum(worst, a)
            prev = a.tolist()
    tails = np.cumsum(worst[::-1])[::-1]  # tails[k] = sum_{i >= k}
    for N in range(floor, big):
        if tails[N + 1] < tol:
            return N
    return big


@dataclass(frozen=True)
class GeneratingFamily:
    J_max: int
    order: int
    f: tuple[PowerSeries, ...]
    g: tuple[PowerSeries, ...]
    traces_f: np.ndarray  # (J_max+1, 2): f_j(-1), f_j'(-1)
    traces_g: np.ndarray
    variant: Variant = "full"

    def derivative_family(self, kind: str, d: int) -> list[PowerSeries]:
        fam = self.f if kind == "f" else self.g
        return [ps_derivative(p, d) for p in fam]

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "J_max": self.J_max,
            "order": self.order,
            "f": [p.coeffs.tolist() for p in self.f],
            "g": [p.coeffs.tolist() for p in self.g],
        }

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def from_json(cls, data: dict) -> GeneratingFamily:
        f = tuple(PowerSeries(0.0, c) for c in data["f"])
        g = tuple(PowerSeries(0.0, c) for c in data["g"])
        return cls(
            J_max=int(data["J_max"]),
            order=int(data["order"]),
            f=f,
            g=g,
            traces_f=_traces(f),
            traces_g=_traces(g),
            variant=data.get("variant", "full"),
        )


def _traces(fam: Sequence[PowerSeries]) -> np.ndarray:
    return np.array([[ps_eval(p, -1.0), ps_eval(ps_derivative(p, 1), -1.0)] for p in fam])


def build_family(J_max: int, N: int | None = None, variant: Variant = "full") -> GeneratingFamily:
    if J_max < 0:
        raise ValueError("J_max must be non-negative")
    minimum = 5 * J_max + 10
    if N is None:
        N = min_order(J_max, toy=variant == "toy")
    if N < minimum:
        raise ValueError(f"order N={N} too small for J_max={J_max}; minimum is {minimum}")
    if variant not in ("full", "toy"):
        raise ValueError(f"unknown variant {variant!r}")
    toy = variant == "toy"
    zeros = (0.0,) * 5
    # the whole cascade stays rational; rounding happens once per coefficient
    f, g = [], []
    for ic, out in ((F0_IC, f), (G0_IC, g)):
        prev = None
        for j in range(J_max + 1):
            prev = _recurrence(prev, ic if j == 0 else zeros, N, toy, exact=True)
            out.append(PowerSeries(0.0, [float(v) for v in prev]))
    return GeneratingFamily(
        J_max=J_max,
        order=N,
        f=tuple(f),
        g=tuple(g),
        traces_f=_traces(f),
        traces_g=_traces(g),
        variant=variant,
    )


def _as_callable(fn) -> Callable:
    if isinstance(fn, PowerSeries):
        return lambda x: ps_eval(fn, x)
    return fn


def convolution_fj(f_prev, f0, quad_points: int = 32, x=None) -> np.ndarray:
    """``int_0^x int_0^y f0(y - xi) f_prev(xi) dxi dy`` by nested Gauss-Legendre.

    Independent cross-check of the series recurrence; not used by the pipelines.
    """
    if quad_points < 16:
        raise ValueError("quad_points must be >= 16")
    f_prev, f0 = _as_callable(f_prev), _as_callable(f0)
    xs = np.linspace(-1.0, 0.0, 101) if x is None else np.atleast_1d(np.asarray(x, float))
    nodes, weights = np.polynomial.legendre.leggauss(quad_points)
    s, ws = 0.5 * (nodes + 1.0), 0.5 * weights  # rule on [0, 1]
    out = np.empty(xs.size)
    for i, xv in enumerate(xs):
        ys = xv * s
        inner = np.array([yv * np.dot(ws, f0(yv - yv * s) * f_prev(yv * s)) for yv in ys])
        out[i] = xv * np.dot(ws, inner)
    return out


def convolution_gj(g_prev, g0, quad_points: int = 32, x=None) -> np.ndarray:
    """``int_0^x g0(x - xi) g_prev(xi) dxi`` by Gauss-Legendre."""
    if quad_points < 16:
        raise ValueError("quad_points must be >= 16")
    g_prev, g0 = _as_callable(g_prev), _as_callable(g0)
    xs = np.linspace(-1.0, 0.0, 101) if x is None else np.atleast_1d(np.asarray(x, float))
    nodes, weights = np.polynomial.legendre.leggauss(quad_points)
    s, ws = 0.5 * (nodes + 1.0), 0.5 * weights
    return np.array([xv * np.dot(ws, g0(xv - xv * s) * g_prev(xv * s)) for xv in xs])


def verify_Pk_identity(fam: GeneratingFamily, k: int, j: int) -> float:
    """Relative coefficient mismatch between ``P^k f_j`` and ``(-1)^k f_{j-k}``.

    The same check runs on the g family; the larger discrepancy is returned.
    """
    if not 0 <= k <= j <= fam.J_max:
        raise ValueError("need 0 <= k <= j <= J_max")
    if fam.order - 5 * k < 0:
        raise ValueError("order exhausted")
    toy = fam.variant == "toy"
    worst = 0.0
    for family in (fam.f, fam.g):
        p = family[j]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CancellationWarning)
            for _ in range(k):
                if p.order < 5:
                    raise ValueError("order exhausted")
                p = ps_apply_P(p, toy=toy)
        ref = (-1) ** k * family[j - k].coeffs[: p.order + 1]
        scale = np.abs(ref).max()
        worst = max(worst, float(np.abs(p.coeffs - ref).max() / scale))
    return worst


def sup_norm_derivatives(p: PowerSeries, upto: int, grid) -> float:
    """Sum over i <= upto of sup_grid |p^(i)|: the discrete ``||p||_{upto,inf}``."""
    total = 0.0
    for i in range(upto + 1):
        if i > p.order:
            break
        total += float(np.abs(ps_eval(ps_derivative(p, i), grid)).max())
    return total
