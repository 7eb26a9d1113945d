"""Collocation discretization and time stepping of a quadratic PIE.

The state ``v`` is stored by its values at ``n`` Gauss-Legendre nodes and is
interpolated by the degree ``n-1`` Lagrange polynomial through them.  All
operator matrices are built by evaluating the exact polynomial kernels on
Gauss-Legendre rules split at each node (Duffy-mapped on triangles), so they
reproduce the exact symbolic action on polynomial ``v`` up to rounding.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.interpolate import BarycentricInterpolator
from scipy.linalg import lu_factor, lu_solve

from .pde2pie import PDESpec, PIESpec
from .pialgebra import Interval, PIOp
from .tensorpi import TensorPIOp

__all__ = [
    "Discretization",
    "Trajectory",
    "BlowUp",
    "gauss_legendre",
    "op_matrix",
    "tensor_matrix",
    "discretize",
    "integrate",
    "lyapunov_trace",
    "pde_residual",
    "symmetric_spectrum",
    "write_csv",
]

log = logging.getLogger(__name__)


class BlowUp(RuntimeError):
    """State norm exceeded the blow-up threshold during time stepping."""

    def __init__(self, t: float, norm: float, trajectory: "Trajectory"):
        super().__init__(f"state norm {norm:.3g} exceeded 1e8 at t = {t:.6g}")
        self.t = t
        self.trajectory = trajectory


def gauss_legendre(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = npleg.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def _lagrange(nodes: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Matrix mapping nodal values to values at ``pts`` (shape pts.shape + (n,))."""
    interp = BarycentricInterpolator(nodes, np.eye(len(nodes)))
    return interp(np.ravel(pts)).reshape(np.shape(pts) + (len(nodes),))


def _quad_order(n: int, degree: int) -> int:
    return max(8, (n + degree) // 2 + 2)


def op_matrix(op: PIOp, nodes: np.ndarray, out_pts: np.ndarray | None = None, nq: int | None = None) -> np.ndarray:
    """Matrix of a scalar PI operator: nodal values of v -> values of Rv at ``out_pts``."""
    if not op.is_scalar:
        raise ValueError("op_matrix needs a scalar operator")
    a, b = float(op.domain.a), float(op.domain.b)
    out = nodes if out_pts is None else np.asarray(out_pts, dtype=float)
    n = len(nodes)
    nq = nq or _quad_order(n, max(op.max_degree(), 0))
    t, wt = gauss_legendre(nq, 0.0, 1.0)
    M = np.zeros((len(out), n))
    if op.r0:
        r0 = op.r0.eval_float(s=out)
        M += r0[:, None] * _lagrange(nodes, out)
    for k, lo_side in ((op.r1, True), (op.r2, False)):
        if not k:
            continue
        if lo_side:
            th = a + (out[:, None] - a) * t[None, :]
            wq = (out[:, None] - a) * wt[None, :]
        else:
            th = out[:, None] + (b - out[:, None]) * t[None, :]
            wq = (b - out[:, None]) * wt[None, :]
        kv = k.eval_float(s=np.broadcast_to(out[:, None], th.shape), th=th)
        M += np.einsum("iq,iqj->ij", kv * wq, _lagrange(nodes, th))
    return M


def tensor_matrix(B: TensorPIOp, nodes: np.ndarray, nq: int | None = None) -> np.ndarray:
    """``Bh`` with ``(B[v (x) v])(x_i) = Bh[i] @ kron(v, v)``."""
    a, b = float(B.domain.a), float(B.domain.b)
    n = len(nodes)
    deg = max(k.degree() for k in B.kernels())
    nq = nq or _quad_order(n, max(deg, 0))
    t, wt = gauss_legendre(nq, 0.0, 1.0)
    T1, T2 = np.meshgrid(t, t, indexing="ij")
    W2 = np.outer(wt, wt)
    Bh = np.zeros((n, n, n))
    for i, x in enumerate(nodes):
        regions = []
        if B.B1:  # et <= th <= x
            th = a + (x - a) * T1
            et = a + (th - a) * T2
            regions.append((B.B1, th, et, W2 * (x - a) * (th - a)))
        if B.B2:  # et <= x <= th
            th = x + (b - x) * T1
            et = a + (x - a) * T2
            regions.append((B.B2, th, et, W2 * (b - x) * (x - a)))
        if B.B3:  # x <= et <= th
            th = x + (b - x) * T1
            et = x + (th - x) * T2
            regions.append((B.B3, th, et, W2 * (b - x) * (th - x)))
        for k, th, et, wq in regions:
            kv = k.eval_float(s=np.full(th.shape, x), th=th, et=et) * wq
            Lt = _lagrange(nodes, th.ravel())
            Le = _lagrange(nodes, et.ravel())
            Bh[i] += Lt.T @ (kv.ravel()[:, None] * Le)
    return Bh.reshape(n, n * n)


@dataclass
class Discretization:
    domain: Interval
    nodes: np.ndarray
    weights: np.ndarray
    Th: np.ndarray
    Ah: np.ndarray
    Bh: np.ndarray
    Rh: list[np.ndarray]
    pie: PIESpec = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.nodes)

    def quad(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(self.Bh @ np.kron(v, v))


def discretize(pie: PIESpec, n: int) -> Discretization:
    if n < 4:
        raise ValueError("need at least 4 nodes")
    a, b = float(pie.domain.a), float(pie.domain.b)
    x, w = gauss_legendre(n, a, b)
    Th = op_matrix(pie.T, x)
    cond = np.linalg.cond(Th)
    if not np.isfinite(cond) or cond > 1e14:
        raise np.linalg.LinAlgError(
            f"discretized T is singular (cond {cond:.3g}); the problem may be ill-posed or n too small"
        )
    Ah = op_matrix(pie.A, x)
    Bh = tensor_matrix(pie.B, x)
    Rh = [op_matrix(R, x) for R in pie.Rj]
    return Discretization(pie.domain, x, w, Th, Ah, Bh, Rh, pie)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (k, n) nodal values of v
    u: np.ndarray  # (k, n) nodal values of u = T v
    V: np.ndarray | None = None
    dt: float = 0.0

    def __post_init__(self):
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def u_norms(self, weights: np.ndarray) -> np.ndarray:
        return np.sqrt(np.einsum("kn,n,kn->k", self.u, weights, self.u))


def integrate(
    disc: Discretization,
    v0: np.ndarray,
    t_end: float,
    dt: float,
    save_every: int = 1,
    blowup: float = 1e8,
) -> Trajectory:
    """IMEX BDF2 stepping of ``Th v' = Ah v + Bh (v (x) v)``.

    The linear part is implicit and the quadratic part is extrapolated.  The
    first step is an IMEX Euler step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    nsteps = int(round(t_end / dt))
    if nsteps < 1 or abs(nsteps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("t_end must be a positive multiple of dt")
    Th, Ah = disc.Th, disc.Ah
    v = np.array(v0, dtype=float)
    times, states = [0.0], [v.copy()]

    def finish():
        st = np.array(states)
        return Trajectory(np.array(times), st, st @ Th.T, dt=dt)

    euler = lu_factor(Th - dt * Ah)
    bdf = lu_factor(3.0 * Th - 2.0 * dt * Ah)
    N_prev = disc.quad(v)
    v_prev = v
    v = lu_solve(euler, Th @ v + dt * N_prev)
    for k in range(1, nsteps + 1):
        if k > 1:
            N_cur = disc.quad(v)
            rhs = 4.0 * (Th @ v) - Th @ v_prev + 2.0 * dt * (2.0 * N_cur - N_prev)
            v_prev, v, N_prev = v, lu_solve(bdf, rhs), N_cur
        nv = float(np.max(np.abs(v)))
        if not np.isfinite(nv) or nv > blowup:
            raise BlowUp(k * dt, nv, finish())
        if k % save_every == 0 or k == nsteps:
            times.append(k * dt)
            states.append(v.copy())
    return finish()


def symmetric_spectrum(op: PIOp, n: int = 32) -> np.ndarray:
    """Eigenvalues of the weighted, symmetrized Nystrom matrix of a self-adjoint operator."""
    a, b = float(op.domain.a), float(op.domain.b)
    x, w = gauss_legendre(n, a, b)
    M = op_matrix(op, x)
    sw = np.sqrt(w)
    S = sw[:, None] * M / sw[None, :]
    return np.linalg.eigvalsh(0.5 * (S + S.T))


def lyapunov_trace(traj: Trajectory, P: PIOp, disc: Discretization) -> tuple[np.ndarray, float]:
    """``V(t_k) = <u, P u>`` by quadrature; also returns the largest relative increase."""
    Ph = op_matrix(P, disc.nodes)
    V = np.einsum("kn,n,kn->k", traj.u, disc.weights, traj.u @ Ph.T)
    traj.V = V
    ups = np.diff(V) / np.maximum(np.abs(V[:-1]), 1e-300)
    return V, float(max(0.0, ups.max())) if len(ups) else 0.0


def pde_residual(
    traj: Trajectory,
    spec: PDESpec,
    disc: Discretization,
    fine: int | None = None,
) -> np.ndarray:
    """L2 norm of ``sum alpha_i d^i u + sum beta_ij d^i u d^j u - u_t`` per interior snapshot.

    ``u`` is rebuilt from ``v`` on a finer Gauss-Legendre grid, fitted by a
    Legendre series and differentiated spectrally; ``u_t`` is a centered
    difference of consecutive snapshots.
    """
    a, b = float(disc.domain.a), float(disc.domain.b)
    m = fine or 2 * disc.n
    xf, wf = gauss_legendre(m, a, b)
    Tf = op_matrix(disc.pie.T, disc.nodes, out_pts=xf)
    uf = traj.states @ Tf.T
    z = 2.0 * (xf - a) / (b - a) - 1.0
    V = npleg.legvander(z, m - 1)
    coefs = np.linalg.solve(V, uf.T)  # (m, k)
    scale = 2.0 / (b - a)
    N = spec.order
    derivs = [uf.T]
    c = coefs
    for _ in range(N):
        c = npleg.legder(c, axis=0) * scale
        derivs.append(npleg.legval(z, c).T)
    rhs = np.zeros_like(uf.T)
    for i, al in enumerate(spec.alpha):
        if al:
            rhs += al.eval_float(s=xf)[:, None] * derivs[i]
    for (i, j), be in spec.beta.items():
        rhs += be.eval_float(s=xf)[:, None] * derivs[i] * derivs[j]
    t = traj.times
    ut = (uf[2:] - uf[:-2]) / (t[2:] - t[:-2])[:, None]
    res = rhs[:, 1:-1].T - ut
    return np.sqrt(res**2 @ wf)


def write_csv(path, traj: Trajectory, weights: np.ndarray, residual: Sequence[float] | None = None):
    """Columns t, V, u_norm, residual (residual blank at the end points)."""
    norms = traj.u_norms(weights)
    res = [None] * len(traj.times)
    if residual is not None and len(residual) == len(traj.times) - 2:
        res[1:-1] = list(residual)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "V", "u_norm", "residual"])
        for k, t in enumerate(traj.times):
            V = "" if traj.V is None else repr(float(traj.V[k]))
            r = "" if res[k] is None else repr(float(res[k]))
            wr.writerow([repr(float(t)), V, repr(float(norms[k])), r])
