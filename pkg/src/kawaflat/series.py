"""Truncated power series and derivative jets.

A :class:`PowerSeries` stores Taylor coefficients ``a_k`` about a base point,
so it represents ``sum_k a_k (x - x0)**k`` for ``k <= order``.  Differentiation
shrinks the order instead of padding with zeros, which keeps the accuracy loss
visible.

A :class:`Jet` stores derivative *values* ``f^(m)(t)`` for ``m <= M`` at a
single point.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import comb, factorial
from typing import Callable, Sequence

import numpy as np

CANCELLATION_RATIO = 1e12


class CancellationWarning(RuntimeWarning):
    """Intermediate terms dwarf the result of an operation."""


def _check_cancellation(intermediate: float, result: float, what: str) -> None:
    if intermediate > CANCELLATION_RATIO * result and intermediate > 0.0:
        warnings.warn(
            f"{what}: intermediate magnitude {intermediate:.3e} vs result {result:.3e}",
            CancellationWarning,
            stacklevel=3,
        )


@dataclass(frozen=True)
class PowerSeries:
    base_point: float
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coeffs must be a non-empty 1-d array")
        if not np.all(np.isfinite(c)):
            raise ValueError("coeffs must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "base_point", float(self.base_point))

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, x):
        return ps_eval(self, x)

    def __add__(self, other: PowerSeries) -> PowerSeries:
        return ps_add(self, other)

    def __sub__(self, other: PowerSeries) -> PowerSeries:
        return ps_add(self, ps_scale(other, -1.0))

    def __neg__(self) -> PowerSeries:
        return ps_scale(self, -1.0)

    def __mul__(self, c: float) -> PowerSeries:
        return ps_scale(self, c)

    __rmul__ = __mul__

    def truncate(self, order: int) -> PowerSeries:
        if order > self.order:
            raise ValueError("cannot raise truncation order by truncating")
        return PowerSeries(self.base_point, self.coeffs[: order + 1])


def zero_series(order: int, base_point: float = 0.0) -> PowerSeries:
    return PowerSeries(base_point, np.zeros(order + 1))


def polynomial(coeffs: Sequence[float], order: int | None = None, base_point: float = 0.0) -> PowerSeries:
    """Exact representation of a polynomial, zero padded up to ``order``."""
    c = np.asarray(coeffs, dtype=float)
    if order is None:
        order = c.size - 1
    if order < c.size - 1 and np.any(c[order + 1 :] != 0.0):
        raise ValueError("order below polynomial degree")
    out = np.zeros(order + 1)
    n = min(order + 1, c.size)
    out[:n] = c[:n]
    return PowerSeries(base_point, out)


def taylor(derivs: Callable[[int], float], order: int, base_point: float = 0.0) -> PowerSeries:
    """Series from a callable returning the m-th derivative at the base point."""
    return PowerSeries(base_point, [derivs(k) / factorial(k) for k in range(order + 1)])


def ps_eval(p: PowerSeries, x):
    """Horner evaluation; works on scalars and arrays."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("evaluation point must be finite")
    dx = x - p.base_point
    acc = np.zeros_like(dx)
    for a in p.coeffs[::-1]:
        acc = acc * dx + a
    return acc if acc.ndim else float(acc)


def _falling(m: np.ndarray, k: int) -> np.ndarray:
    # (m+1)(m+2)...(m+k)
    out = np.ones(m.size)
    for i in range(1, k + 1):
        out *= m + i
    return out


def ps_derivative(p: PowerSeries, k: int) -> PowerSeries:
    if k < 0:
        raise ValueError("derivative order must be non-negative")
    if k > p.order:
        raise ValueError("derivative order exceeds truncation")
    if k == 0:
        return p
    m = np.arange(p.order - k + 1, dtype=float)
    return PowerSeries(p.base_point, p.coeffs[k:] * _falling(m, k))


def ps_add(a: PowerSeries, b: PowerSeries) -> PowerSeries:
    """Sum of two series; the result carries the smaller truncation order."""
    if a.base_point != b.base_point:
        raise ValueError("base points differ")
    n = min(a.order, b.order) + 1
    return PowerSeries(a.base_point, a.coeffs[:n] + b.coeffs[:n])


def ps_scale(p: PowerSeries, c: float) -> PowerSeries:
    return PowerSeries(p.base_point, c * p.coeffs)


def ps_apply_P(p: PowerSeries, toy: bool = False) -> PowerSeries:
    """Apply ``P = d/dx + d^3/dx^3 - d^5/dx^5`` (only ``-d^5/dx^5`` when ``toy``)."""
    if p.order < 5:
        raise ValueError(f"P needs order >= 5, got {p.order}")
    n = p.order - 4
    d5 = ps_derivative(p, 5).coeffs
    if toy:
        return PowerSeries(p.base_point, -d5)
    d1 = ps_derivative(p, 1).coeffs[:n]
    d3 = ps_derivative(p, 3).coeffs[:n]
    out = d1 + d3 - d5
    big = max(np.abs(d1).max(), np.abs(d3).max(), np.abs(d5).max())
    _check_cancellation(big, float(np.abs(out).max()), "ps_apply_P")
    return PowerSeries(p.base_point, out)


def ps_apply_P_power(p: PowerSeries, n: int, toy: bool = False) -> PowerSeries:
    for _ in range(n):
        p = ps_apply_P(p, toy=toy)
    return p


@dataclass(frozen=True)
class Jet:
    point: float
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("values must be a non-empty 1-d array")
        if not np.all(np.isfinite(v)):
            raise ValueError("jet values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "point", float(self.point))

    @property
    def M(self) -> int:
        return self.values.size - 1


def constant_jet(c: float, point: float, M: int) -> Jet:
    v = np.zeros(M + 1)
    v[0] = c
    return Jet(point, v)


def _binomial_rows(M: int) -> np.ndarray:
    return np.array([[comb(n, j) for j in range(M + 1)] for n in range(M + 1)], dtype=float)


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Leibniz product of two jets at the same point."""
    if a.point != b.point:
        raise ValueError("jets live at different points")
    if a.M != b.M:
        raise ValueError("jets have different orders")
    C = _binomial_rows(a.M)
    out = np.empty(a.M + 1)
    for n in range(a.M + 1):
        out[n] = np.dot(C[n, : n + 1] * a.values[: n + 1], b.values[n::-1])
    return Jet(a.point, out)


def jet_compose_affine(j: Jet, scale: float, shift: float) -> Jet:
    """Jet of ``t -> F(scale * t + shift)`` given the jet of ``F`` at ``r``.

    The result sits at the preimage ``t = (r - shift) / scale``.
    """
    if scale == 0:
        raise ValueError("scale must be non-zero")
    powers = scale ** np.arange(j.M + 1)
    return Jet((j.point - shift) / scale, j.values * powers)
