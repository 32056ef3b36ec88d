"""Finite-difference solver for the linear Kawahara boundary-control problem.

    u_t + u_x + u_xxx (+ mu0 u_xxxx) - u_xxxxx = 0   on (-1, 0)
    u(0) = u_x(0) = u_xx(0) = 0,   u(-1) = h1(t),   u_x(-1) = h2(t)

Nodes x_0 = -1, ..., x_{nx+1} = 0.  The five boundary conditions replace the
two rows at x = -1 and the three rows at x = 0; every other row carries the
centred second-order stencils for d/dx, d^3/dx^3 and d^5/dx^5 (off-centred
for d^5 next to x = -1).  Time stepping is the theta scheme on the resulting
differential-algebraic system, with optional implicit-Euler start-up steps
(two half steps each) that remove the stiff modes the trapezoidal rule does
not damp.

This module is the verification oracle; it shares no code with the series
machinery.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import lru_cache
from math import ceil, factorial
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

C_CFL = 0.5


class SolverError(RuntimeError):
    pass


def fd_weights(offsets: Sequence[float], deriv: int) -> np.ndarray:
    """Weights w with sum_i w_i f(x + o_i h) ~ h^deriv f^(deriv)(x).

    Solves the local Vandermonde system ``sum_i w_i o_i^k = k! delta_{k,deriv}``.
    """
    o = np.asarray(offsets, dtype=float)
    if deriv >= o.size:
        raise ValueError("need more nodes than the derivative order")
    V = np.vander(o, o.size, increasing=True).T
    rhs = np.zeros(o.size)
    rhs[deriv] = factorial(deriv)
    return np.linalg.solve(V, rhs)


@dataclass(frozen=True)
class SolverConfig:
    nx: int = 256
    T: float = 1.0
    dt: float | None = None
    theta: float = 0.5
    mu0: float = 0.0
    startup_steps: int = 4

    def __post_init__(self):
        if self.nx < 32:
            raise ValueError("nx must be >= 32")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0.5, 1]")
        if self.mu0 < 0:
            raise ValueError("mu0 must be non-negative")
        dt = min(C_CFL * self.dx, self.T) if self.dt is None else float(self.dt)
        if not 0 < dt <= self.T:
            raise ValueError("need 0 < dt <= T")
        # round dt down so that T is reached in a whole number of steps
        n = ceil(self.T / dt - 1e-9)
        object.__setattr__(self, "dt", self.T / n)

    @property
    def dx(self) -> float:
        return 1.0 / (self.nx + 1)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-1.0, 0.0, self.nx + 2)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass
class GridState:
    x: np.ndarray
    u: np.ndarray
    t: float = 0.0

    @classmethod
    def from_function(cls, fn: Callable, cfg: SolverConfig, t: float = 0.0) -> GridState:
        x = cfg.x
        return cls(x, np.asarray(fn(x), dtype=float) * np.ones_like(x), t)


@dataclass
class BoundarySignal:
    h1: Callable[[float], float]
    h2: Callable[[float], float]

    @classmethod
    def zero(cls) -> BoundarySignal:
        return cls(lambda t: 0.0, lambda t: 0.0)

    @classmethod
    def from_samples(cls, times, h1, h2) -> BoundarySignal:
        times, h1, h2 = (np.asarray(a, dtype=float) for a in (times, h1, h2))
        if not (np.all(np.isfinite(h1)) and np.all(np.isfinite(h2))):
            raise ValueError("boundary samples must be finite")
        return cls(lambda t: float(np.interp(t, times, h1)), lambda t: float(np.interp(t, times, h2)))


@dataclass
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    u: np.ndarray  # (n_records, n_nodes)

    def state(self, i: int) -> GridState:
        return GridState(self.x, self.u[i].copy(), float(self.times[i]))

    @property
    def final(self) -> GridState:
        return self.state(-1)


@dataclass(frozen=True)
class _Operator:
    K: sp.csr_matrix
    B: sp.csr_matrix
    pde: np.ndarray


def _stencil_rows(nx: int, mu0: float) -> tuple[sp.csr_matrix, sp.csr_matrix, np.ndarray]:
    N = nx + 2
    h = 1.0 / (nx + 1)
    K = sp.lil_matrix((N, N))
    B = sp.lil_matrix((N, N))
    pde = np.zeros(N, dtype=bool)
    c1, c3, c4 = (fd_weights(np.arange(-k, k + 1), d) for k, d in ((1, 1), (2, 3), (2, 4)))
    c5 = fd_weights(np.arange(-3, 4), 5)
    o5_left = np.arange(-2, 5)
    c5_left = fd_weights(o5_left, 5)
    for i in range(2, N - 3):
        pde[i] = True
        row = np.zeros(N)
        row[i - 1 : i + 2] -= c1 / h
        row[i - 2 : i + 3] -= c3 / h**3
        if mu0:
            row[i - 2 : i + 3] -= mu0 * c4 / h**4
        if i - 3 < 0:
            row[i + o5_left] += c5_left / h**5
        else:
            row[i - 3 : i + 4] += c5 / h**5
        nz = np.nonzero(row)[0]
        K[i, nz] = row[nz]
    B[0, 0] = 1.0
    B[1, 0:3] = fd_weights([0, 1, 2], 1) / h
    B[N - 1, N - 1] = 1.0
    B[N - 2, N - 3 :] = fd_weights([-2, -1, 0], 1) / h
    B[N - 3, N - 4 :] = fd_weights([-3, -2, -1, 0], 2) / h**2
    return K.tocsr(), B.tocsr(), pde


@lru_cache(maxsize=16)
def _operator(nx: int, mu0: float) -> _Operator:
    K, B, pde = _stencil_rows(nx, mu0)
    return _Operator(K, B, pde)


@lru_cache(maxsize=32)
def _factor(nx: int, mu0: float, dt: float, theta: float):
    op = _operator(nx, mu0)
    L = sp.diags(op.pde.astype(float)) - dt * theta * op.K + op.B
    lu = spla.splu(L.tocsc())
    if not np.all(np.isfinite(lu.U.diagonal())) or np.any(lu.U.diagonal() == 0):
        raise SolverError("singular step matrix: bad dt/dx combination")
    return L.tocsr(), lu


def generator(cfg: SolverConfig) -> sp.csr_matrix:
    """Discrete spatial operator (rows of the PDE nodes), approximating -P."""
    return _operator(cfg.nx, cfg.mu0).K


def _bc_rhs(N: int, t: float, bc: BoundarySignal) -> np.ndarray:
    r = np.zeros(N)
    r[0] = bc.h1(t)
    r[1] = bc.h2(t)
    return r


def _theta_step(u: np.ndarray, t_new: float, dt: float, theta: float, cfg: SolverConfig, bc) -> np.ndarray:
    op = _operator(cfg.nx, cfg.mu0)
    L, lu = _factor(cfg.nx, cfg.mu0, dt, theta)
    rhs = np.where(op.pde, u + dt * (1.0 - theta) * (op.K @ u), 0.0)
    rhs += _bc_rhs(u.size, t_new, bc)
    out = lu.solve(rhs)
    out += lu.solve(rhs - L @ out)  # one refinement sweep tightens the boundary rows
    if not np.all(np.isfinite(out)):
        raise SolverError("non-finite state after step")
    return out


def step(state: GridState, cfg: SolverConfig, bc: BoundarySignal, damped: bool = False) -> GridState:
    """Advance one dt.  ``damped`` replaces the theta step by two implicit-Euler half steps."""
    if state.u.size != cfg.nx + 2:
        raise ValueError("state does not match the configured grid")
    u = state.u
    t_new = state.t + cfg.dt
    if damped:
        u = _theta_step(u, state.t + 0.5 * cfg.dt, 0.5 * cfg.dt, 1.0, cfg, bc)
        u = _theta_step(u, t_new, 0.5 * cfg.dt, 1.0, cfg, bc)
    else:
        u = _theta_step(u, t_new, cfg.dt, cfg.theta, cfg, bc)
    return GridState(state.x, u, t_new)


def solve(
    u0: GridState,
    cfg: SolverConfig,
    bc: BoundarySignal | None = None,
    record: Iterable[float] | None = None,
) -> Trajectory:
    """March from u0.t to cfg.T; snapshots at ``record`` (all steps when None).

    Record times are snapped to the nearest step.
    """
    bc = BoundarySignal.zero() if bc is None else bc
    n = cfg.n_steps
    if record is None:
        idx = np.arange(n + 1)
    else:
        rec = np.asarray(list(record), dtype=float)
        if np.any(rec < -1e-12) or np.any(rec > cfg.T + 1e-12):
            raise ValueError("record times must lie in [0, T]")
        idx = np.unique(np.rint(rec / cfg.dt).astype(int))
    wanted = set(idx.tolist())
    out = np.empty((idx.size, cfg.nx + 2))
    k = 0
    state = GridState(u0.x, u0.u.astype(float).copy(), 0.0)
    if 0 in wanted:
        out[k] = state.u
        k += 1
    for i in range(1, n + 1):
        state = step(state, cfg, bc, damped=i <= cfg.startup_steps)
        if i in wanted:
            out[k] = state.u
            k += 1
    return Trajectory(idx * cfg.dt, u0.x, out)


_TRACE_NODES = 8


def trace_weights(nx: int, order: int) -> np.ndarray:
    """One-sided weights for d^order u / dx^order at x = 0 from the last 8 nodes."""
    h = 1.0 / (nx + 1)
    return fd_weights(np.arange(-_TRACE_NODES + 1, 1), order) / h**order


def boundary_traces(state: GridState, orders: Iterable[int] = (3, 4)) -> dict[int, float]:
    nx = state.u.size - 2
    orders = set(orders)
    if not orders <= {3, 4}:
        raise ValueError("only third and fourth derivative traces are supported")
    if nx < 64:
        raise ValueError("boundary trace extraction needs nx >= 64")
    tail = state.u[-_TRACE_NODES:]
    return {k: float(trace_weights(nx, k) @ tail) for k in sorted(orders)}


def _trap(v: np.ndarray, h: float) -> float:
    return h * (v.sum() - 0.5 * (v[0] + v[-1]))


def norms(state: GridState) -> dict[str, float]:
    u = state.u
    h = state.x[1] - state.x[0]
    ux = np.gradient(u, h, edge_order=2)
    uxx = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2
    l2sq = _trap(u * u, h)
    h1sq = _trap(ux * ux, h)
    semi = _trap(uxx * uxx, h)
    return {
        "l2": float(np.sqrt(l2sq)),
        "h2_semi": float(np.sqrt(semi)),
        "h2": float(np.sqrt(l2sq + h1sq + semi)),
        "sup": float(np.abs(u).max()),
    }


def export_snapshots(traj: Trajectory, outdir) -> Path:
    """CSV ``x,u`` per snapshot plus ``manifest.json`` {times, files}."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = []
    for i, t in enumerate(traj.times):
        name = f"snapshot_{i:05d}.csv"
        with open(outdir / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "u"])
            for xv, uv in zip(traj.x, traj.u[i]):
                w.writerow([repr(float(xv)), repr(float(uv))])
        files.append(name)
    manifest = outdir / "manifest.json"
    manifest.write_text(json.dumps({"times": [float(t) for t in traj.times], "files": files}, indent=1))
    return manifest


# Semi-discrete free evolution in the eigenbasis of the discrete generator.


@dataclass(frozen=True)
class ModalBasis:
    eigvals: np.ndarray
    vecs: np.ndarray  # eigenvectors on the PDE nodes
    prolong: np.ndarray  # PDE-node values -> all nodes (zero boundary data)
    interior: np.ndarray


@lru_cache(maxsize=8)
def modal_basis(nx: int, mu0: float = 0.0) -> ModalBasis:
    """Eigen-decomposition of the generator restricted to zero boundary data."""
    op = _operator(nx, mu0)
    K = op.K.toarray()
    B = op.B.toarray()
    p = np.nonzero(op.pde)[0]
    b = np.nonzero(~op.pde)[0]
    E = -np.linalg.solve(B[np.ix_(b, b)], B[np.ix_(b, p)])
    S = np.zeros((nx + 2, p.size))
    S[p, np.arange(p.size)] = 1.0
    S[b] = E
    A = K[p] @ S
    lam, V = sla.eig(A)
    return ModalBasis(lam, V, S, p)


def free_trace_derivatives(
    u0: GridState, cfg: SolverConfig, times: Sequence[float], M: int, orders: Sequence[int] = (3, 4)
) -> dict[int, np.ndarray]:
    """``d^m/dt^m`` of the boundary traces of the free evolution, m <= M.

    Uses ``d_t^m u = A^m u`` for the semi-discrete flow ``u' = A u``; in the
    eigenbasis of A the factor ``lambda^m exp(lambda t)`` is formed per mode,
    so stiff modes are filtered instead of amplified.
    Returns ``{order: array (M+1, len(times))}``.
    """
    basis = modal_basis(cfg.nx, cfg.mu0)
    coef = np.linalg.solve(basis.vecs, u0.u[basis.interior].astype(complex))
    times = np.asarray(times, dtype=float)
    lam = basis.eigvals
    loglam = np.log(lam.astype(complex))
    out = {}
    for k in orders:
        w = trace_weights(cfg.nx, k)
        ell = w @ basis.prolong[-_TRACE_NODES:]
        q = (ell @ basis.vecs) * coef
        res = np.zeros((M + 1, times.size))
        for m in range(M + 1):
            with np.errstate(under="ignore"):
                phase = np.exp(m * loglam[:, None] + lam[:, None] * times[None, :])
            res[m] = (q @ phase).real
        out[k] = res
    return out


def free_state_modal(u0: GridState, cfg: SolverConfig, t: float) -> GridState:
    """Semi-discrete free evolution at time t (exact in time)."""
    basis = modal_basis(cfg.nx, cfg.mu0)
    coef = np.linalg.solve(basis.vecs, u0.u[basis.interior].astype(complex))
    with np.errstate(under="ignore"):
        up = (basis.vecs @ (coef * np.exp(basis.eigvals * t))).real
    return GridState(u0.x, basis.prolong @ up, t)
