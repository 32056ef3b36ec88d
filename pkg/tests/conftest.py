"""Shared independent oracles for the test suite."""
from __future__ import annotations

import mpmath as mp
import numpy as np
import pytest


def exponential_mode(omega: float = -10.0, c4: float = 0.3):
    """Exact separable solution ``u = exp(omega t) v(x)`` of u_t + P u = 0.

    v is a combination of exp(mu x) over the five roots of
    ``-mu^5 + mu^3 + mu + omega = 0`` with v(0) = v'(0) = v''(0) = 0,
    v'''(0) = 1, v''''(0) = c4, so it meets the three right boundary
    conditions exactly.  Returns ``v(x, d)`` (d-th derivative).
    """
    roots = np.roots([-1.0, 0.0, 1.0, 0.0, 1.0, omega])
    V = np.array([roots**m for m in range(5)])
    c = np.linalg.solve(V, np.array([0, 0, 0, 1.0, c4], dtype=complex))

    def v(x, d: int = 0):
        x = np.asarray(x, dtype=float)
        return (np.exp(np.multiply.outer(x, roots)) * (c * roots**d)).sum(-1).real

    return v


def mp_phi(r, s: float, K: float = 1.0):
    """phi_s in multiprecision, written from the defining quotient."""
    r = mp.mpf(r)
    if r <= 0:
        return mp.mpf(1)
    if r >= 1:
        return mp.mpf(0)
    sigma = 1 / (mp.mpf(s) - 1)
    a = mp.exp(-K / (1 - r) ** sigma)
    b = mp.exp(-K / r**sigma)
    return a / (a + b)


def mp_central_weights(m: int, p: int):
    """Exact central weights on offsets -p..p for the m-th derivative."""
    offs = list(range(-p, p + 1))
    n = len(offs)
    A = mp.matrix(n, n)
    for k in range(n):
        for i, o in enumerate(offs):
            A[k, i] = mp.mpf(o) ** k
    rhs = mp.matrix(n, 1)
    rhs[m] = mp.factorial(m)
    w = mp.lu_solve(A, rhs)
    return offs, [w[i] for i in range(n)]


def mp_fd_derivative(fn, r: float, m: int, h: float = 1e-3, dps: int = 60) -> float:
    """Eighth-order central difference of ``fn`` evaluated in high precision."""
    if m == 0:
        with mp.workdps(dps):
            return float(fn(r))
    p = 4 + (m - 1) // 2
    with mp.workdps(dps):
        offs, w = mp_central_weights(m, p)
        hh = mp.mpf(h)
        acc = mp.fsum(wi * fn(mp.mpf(r) + o * hh) for o, wi in zip(offs, w))
        return float(acc / hh**m)


@pytest.fixture(scope="session")
def family8():
    from kawaflat.genfun import build_family

    return build_family(8, 80)


@pytest.fixture(scope="session")
def family10():
    from kawaflat.genfun import build_family

    return build_family(10)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
