"""Gevrey step function phi_s and the cutoff beta.

phi_s(r) = 1 for r <= 0, 0 for r >= 1 and, in between,

    exp(-K/(1-r)^sigma) / (exp(-K/r^sigma) + exp(-K/(1-r)^sigma)),  sigma = 1/(s-1).

Derivatives are obtained by Taylor-mode propagation: every intermediate is a
truncated Taylor polynomial in the local offset ``r - r0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .series import Jet, jet_compose_affine

MAX_JET_ORDER = 40
ENDPOINT_EPS = 1e-12
# beyond this exponent the transition term is below exp(-700): treat as flat
EXP_CUTOFF = 700.0


@dataclass(frozen=True)
class BumpParams:
    s: float = 5.0
    K: float = 1.0
    sigma: float = field(init=False)

    def __post_init__(self):
        if not self.s > 1.0:
            raise ValueError("Gevrey order s must exceed 1")
        if not self.K > 0.0:
            raise ValueError("K must be positive")
        object.__setattr__(self, "sigma", 1.0 / (self.s - 1.0))
        assert self.sigma == 1.0 / (self.s - 1.0)


# Taylor-coefficient arithmetic: arrays c with c[k] = f^(k)(r0) / k!.

def _t_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)[: a.size]


def _t_exp(a: np.ndarray) -> np.ndarray:
    n = a.size
    e = np.zeros(n)
    e[0] = np.exp(a[0])
    k = np.arange(n)
    for m in range(1, n):
        e[m] = np.dot(k[1 : m + 1] * a[1 : m + 1], e[m - 1 :: -1][: m]) / m
    return e


def _t_pow(a: np.ndarray, alpha: float) -> np.ndarray:
    """(a)^alpha for a[0] > 0, via m a0 p_m = sum_k (alpha k - (m - k)) a_k p_{m-k}."""
    n = a.size
    p = np.zeros(n)
    p[0] = a[0] ** alpha
    for m in range(1, n):
        k = np.arange(1, m + 1)
        p[m] = np.dot((alpha * k - (m - k)) * a[k], p[m - k]) / (m * a[0])
    return p


def _t_recip(a: np.ndarray) -> np.ndarray:
    n = a.size
    q = np.zeros(n)
    q[0] = 1.0 / a[0]
    for m in range(1, n):
        q[m] = -np.dot(a[1 : m + 1], q[m - 1 :: -1][:m]) / a[0]
    return q


def _to_jet(r0: float, c: np.ndarray) -> Jet:
    return Jet(r0, c * np.array([factorial(k) for k in range(c.size)], dtype=float))


def phi(r, p: BumpParams):
    """phi_s evaluated pointwise (scalar or array)."""
    r = np.asarray(r, dtype=float)
    out = np.where(r <= 0.0, 1.0, 0.0)
    inside = (r > 0.0) & (r < 1.0)
    if np.any(inside):
        ri = r[inside]
        # phi = 1 / (1 + exp(E)),  E = K((1-r)^-sigma - r^-sigma)
        E = p.K * ((1.0 - ri) ** (-p.sigma) - ri ** (-p.sigma))
        q = np.exp(-np.abs(E))
        val = np.where(E <= 0.0, 1.0 / (1.0 + q), q / (1.0 + q))
        out = out.astype(float)
        out[inside] = val
    return out if out.ndim else float(out)


def phi_jet(r: float, p: BumpParams, M: int) -> Jet:
    if M < 0:
        raise ValueError("M must be non-negative")
    if M > MAX_JET_ORDER:
        raise ValueError(f"jet order {M} exceeds cap {MAX_JET_ORDER}")
    r = float(r)
    flat = np.zeros(M + 1)
    if r <= ENDPOINT_EPS:
        flat[0] = 1.0
        return Jet(r, flat)
    if r >= 1.0 - ENDPOINT_EPS:
        return Jet(r, flat)
    n = M + 1
    lo = np.zeros(n)  # r0 + dr
    hi = np.zeros(n)  # 1 - r0 - dr
    lo[0], hi[0] = r, 1.0 - r
    if n > 1:
        lo[1], hi[1] = 1.0, -1.0
    E0 = p.K * ((1.0 - r) ** (-p.sigma) - r ** (-p.sigma))
    if E0 < -EXP_CUTOFF:
        flat[0] = 1.0
        return Jet(r, flat)
    if E0 > EXP_CUTOFF:
        return Jet(r, flat)
    E = p.K * (_t_pow(hi, -p.sigma) - _t_pow(lo, -p.sigma))
    one = np.zeros(n)
    one[0] = 1.0
    if E[0] <= 0.0:
        val = _t_recip(one + _t_exp(E))
    else:
        q = _t_exp(-E)
        val = _t_mul(q, _t_recip(one + q))
    return _to_jet(r, val)


def beta_jet(t: float, tau: float, T: float, M: int, K: float = 1.0) -> Jet:
    """Jet at t of ``beta(t) = 1 - phi_2((t - tau) / (T - tau))``."""
    if not 0.0 < tau < T:
        raise ValueError("need 0 < tau < T")
    scale = 1.0 / (T - tau)
    r = (t - tau) * scale
    j = jet_compose_affine(phi_jet(r, BumpParams(s=2.0, K=K), M), scale, -tau * scale)
    v = -j.values
    v[0] += 1.0
    return Jet(t, v)


def step_jet(t: float, tau: float, T: float, p: BumpParams, M: int) -> Jet:
    """Jet at t of ``phi_s((t - tau) / (T - tau))``."""
    if not 0.0 < tau < T:
        raise ValueError("need 0 < tau < T")
    scale = 1.0 / (T - tau)
    j = jet_compose_affine(phi_jet((t - tau) * scale, p, M), scale, -tau * scale)
    return Jet(t, j.values)
