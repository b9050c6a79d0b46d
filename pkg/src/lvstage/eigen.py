"""Principal eigenvalues of Neumann operators and their delayed variants.

All operators here are Metzler (nonnegative off-diagonals), so the principal
eigenvalue is the spectral bound and shifted inverse iteration with a shift
above it keeps the iterate strictly positive.  The shift starts at the
Gershgorin bound (max row sum + 1) and is tightened with the
Collatz-Wielandt upper bound ``max_i (A x)_i / x_i`` as the iterate improves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .errors import BracketFailure, CouplingSignError, NonConvergence, NotASteadyState, SingularSystemError
from .grid import Grid, ShiftedSolver, build_laplacian
from .model import ModelParams
from .steady import coupled_residual

TOL_NEUTRAL = 1e-7
TOL_RESIDUAL = 1e-10
TOL_ROOT = 1e-10
MAX_ITER = 10_000

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class EigenResult:
    value: float
    eigenfunction: np.ndarray | tuple[np.ndarray, np.ndarray]
    iterations: int
    residual: float


def _inverse_iteration(apply, factor, sigma0, weights, scale, x0=None, max_iter=MAX_ITER):
    n = weights.shape[0]
    x = np.ones(n) if x0 is None else np.maximum(np.asarray(x0, dtype=float), 0) + 1e-3
    x /= x.max()
    tol_res = max(TOL_RESIDUAL, 64 * _EPS * scale)
    tol_mu = 16 * _EPS * scale
    margin = max(1e-8 * scale, 1e-12)
    sigma, solver = sigma0, factor(sigma0)
    history = []
    for it in range(1, max_iter + 1):
        y = solver.solve(x)
        if not np.all(y > 0):
            # shift fell below the spectral bound through rounding: back off
            sigma = sigma + max(1.0, abs(sigma)) * 1e-3 + 1.0
            solver = factor(sigma)
            x = np.ones(n)
            history.clear()
            continue
        x = y / y.max()
        Ax = apply(x)
        mu = float(np.dot(weights, x * Ax) / np.dot(weights, x * x))
        res = float(np.max(np.abs(Ax - mu * x)))
        history.append(mu)
        if len(history) >= 3 and res <= tol_res:
            tol = max(1e-12 * max(1.0, abs(mu)), tol_mu)
            if abs(history[-1] - history[-2]) <= tol and abs(history[-2] - history[-3]) <= tol:
                return EigenResult(mu, x, it, res)
        live = x > 1e-150
        upper = float(np.max(Ax[live] / x[live]))
        lower = float(np.min(Ax[live] / x[live]))
        target = upper + max(1e-3 * (upper - lower), margin)
        if target < sigma - margin:
            try:
                solver, sigma = factor(target), target
            except SingularSystemError:
                pass
    raise NonConvergence(f"inverse iteration did not converge in {max_iter} iterations (residual {res:.3g})")


def mu1(d: float, w, grid: Grid, x0=None) -> EigenResult:
    """Principal eigenvalue of ``d * Laplacian + w`` with no-flux ends."""
    w = grid.check_field(w, "w")
    op = build_laplacian(grid, d).plus_diagonal(w)
    scale = float(np.max(np.abs(op.diag) + np.r_[0.0, op.sub] + np.r_[op.sup, 0.0]))
    return _inverse_iteration(
        op.apply,
        lambda s: ShiftedSolver(op, s),
        float(np.max(w)) + 1.0,
        grid.weights,
        scale,
        x0,
    )


class _SparseShifted:
    def __init__(self, M, sigma):
        A = (sigma * sp.identity(M.shape[0], format="csc") - M).tocsc()
        try:
            self.lu = spla.splu(A)
        except RuntimeError as exc:
            raise SingularSystemError(str(exc)) from exc
        scale = float(abs(A).sum(axis=1).max())
        if np.min(np.abs(self.lu.U.diagonal())) < 1e-14 * scale:
            raise SingularSystemError(f"sigma*I - M singular to working precision (sigma={sigma:g})")

    def solve(self, rhs):
        return self.lu.solve(rhs)


def cooperative_mu(d1, d2, a11, a12, a21, a22, grid: Grid, x0=None) -> EigenResult:
    """Principal eigenvalue of the block operator

        [ d1*Lap + a11      a12       ]
        [     a21       d2*Lap + a22  ]

    with diagonal (pointwise) couplings ``a12, a21 >= 0``.  The eigenfunction
    is returned as a pair normalized so the larger maximum is 1; it is
    strictly positive whenever both couplings are nonzero somewhere.
    """
    a11, a12, a21, a22 = (grid.check_field(a, nm) for a, nm in zip((a11, a12, a21, a22), ("a11", "a12", "a21", "a22")))
    for name, a in (("a12", a12), ("a21", a21)):
        if np.min(a) < -1e-12:
            raise CouplingSignError(f"coupling {name} must be nonnegative (min {np.min(a):.3g})")
    a12, a21 = np.maximum(a12, 0.0), np.maximum(a21, 0.0)
    L1, L2 = build_laplacian(grid, d1), build_laplacian(grid, d2)
    B1, B2 = L1.plus_diagonal(a11), L2.plus_diagonal(a22)
    n = grid.n

    def tri(op):
        return sp.diags([op.sub, op.diag, op.sup], [-1, 0, 1])

    M = sp.bmat([[tri(B1), sp.diags(a12)], [sp.diags(a21), tri(B2)]], format="csr")

    def apply(x):
        return np.concatenate([B1 @ x[:n] + a12 * x[n:], B2 @ x[n:] + a21 * x[:n]])

    scale = float(abs(M).sum(axis=1).max())
    sigma0 = float(max(np.max(a11 + a12), np.max(a21 + a22))) + 1.0
    weights = np.concatenate([grid.weights, grid.weights])
    x0 = None if x0 is None else np.concatenate(x0)
    res = _inverse_iteration(apply, lambda s: _SparseShifted(M, s), sigma0, weights, scale, x0)
    x = res.eigenfunction
    return EigenResult(res.value, (x[:n].copy(), x[n:].copy()), res.iterations, res.residual)


def _bracketed_root(g, bound, what):
    lo, hi = -bound, bound
    glo, ghi = g(lo), g(hi)
    if not (glo > 0 > ghi):
        raise BracketFailure(f"{what}: no sign change on [{lo:g}, {hi:g}] (g={glo:.3g}, {ghi:.3g})")
    root = brentq(g, lo, hi, xtol=1e-14, rtol=4 * _EPS, maxiter=500)
    return root


def delayed_scalar_principal(d, tau, gamma, m, q, grid: Grid) -> float:
    """Real root of ``lam = mu1(d, exp(-gamma*tau - lam*tau) * m - q)``.

    The right side is nonincreasing in ``lam`` when m >= 0, so the root is
    unique and has the sign of ``mu1(d, exp(-gamma*tau) * m - q)``.
    """
    m = grid.check_field(m, "m")
    q = grid.check_field(q, "q")
    if np.min(m) < 0:
        raise ValueError("m must be nonnegative")
    if tau == 0:
        return mu1(d, math.exp(-gamma * tau) * m - q, grid).value

    state = {"x": None}

    def g(lam):
        r = mu1(d, math.exp(-gamma * tau - lam * tau) * m - q, grid, x0=state["x"])
        state["x"] = r.eigenfunction
        return r.value - lam

    mu0 = mu1(d, math.exp(-gamma * tau) * m - q, grid)
    state["x"] = mu0.eigenfunction
    bound = abs(mu0.value) + float(np.max(m)) + 1.0
    root = _bracketed_root(g, bound, "delayed scalar eigenvalue")
    _check_root(g, root, d, grid)
    return root


def _check_root(g, root, d, grid):
    floor = max(TOL_ROOT, 256 * _EPS * 4 * d / grid.h**2)
    val = g(root)
    if abs(val) > floor:
        raise NonConvergence(f"fixed point residual {val:.3g} exceeds {floor:.3g}")


@dataclass(frozen=True)
class LinearizationData:
    """Coefficients of the competition system linearized at ``(u, v)``."""

    u: np.ndarray
    v: np.ndarray
    self1: np.ndarray  # 2u + c v
    self2: np.ndarray  # b u + 2v
    coup12: np.ndarray  # c u
    coup21: np.ndarray  # b v

    @classmethod
    def at(cls, u, v, b, c) -> LinearizationData:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if np.min(u) < 0 or np.min(v) < 0:
            raise NotASteadyState("linearization point must be nonnegative")
        return cls(u, v, 2 * u + c * v, b * u + 2 * v, c * u, b * v)


def system_coefficients(lin: LinearizationData, params: ModelParams, m1, m2, s: float):
    """Cooperative-form coefficients at growth rate ``s`` (delay factors exp(-s*tau))."""
    a11 = math.exp(-params.gamma1 * params.tau1 - s * params.tau1) * m1 - lin.self1
    a22 = math.exp(-params.gamma2 * params.tau2 - s * params.tau2) * m2 - lin.self2
    return a11, lin.coup12, lin.coup21, a22


def undelayed_system_mu(lin: LinearizationData, params: ModelParams, grid: Grid) -> EigenResult:
    """lambda_1: principal eigenvalue of the linearization with delays dropped from the exponent."""
    m1, m2 = params.growth(grid)
    return cooperative_mu(params.d1, params.d2, *system_coefficients(lin, params, m1, m2, 0.0), grid)


def delayed_system_principal(
    lin: LinearizationData, params: ModelParams, grid: Grid, steady_tol: float = 1e-8
) -> float:
    """Principal eigenvalue of the delayed linearization at a steady state.

    Computed as the fixed point ``s = h(s)`` where ``h(s)`` is the cooperative
    principal eigenvalue with delayed growth terms weighted by
    ``exp(-gamma_i tau_i - s tau_i)``; ``h`` is nonincreasing, so the fixed
    point is unique and shares the sign of ``h(0)``.
    """
    m1, m2 = params.growth(grid)
    res = coupled_residual(
        lin.u, lin.v, params.d1, params.d2, params.delta1 * m1, params.delta2 * m2,
        params.b, params.c, grid,
    )
    if res > steady_tol:
        raise NotASteadyState(f"(u, v) is not a steady state: residual {res:.3g} > {steady_tol:g}")

    def h(s, x0=None):
        return cooperative_mu(params.d1, params.d2, *system_coefficients(lin, params, m1, m2, s), grid, x0=x0)

    h0 = h(0.0)
    if params.tau1 == 0 and params.tau2 == 0:
        return h0.value
    state = {"x": h0.eigenfunction}

    def g(s):
        r = h(s, state["x"])
        state["x"] = r.eigenfunction
        return r.value - s

    bound = abs(h0.value) + float(max(np.max(m1), np.max(m2))) + 1.0
    root = _bracketed_root(g, bound, "delayed system eigenvalue")
    _check_root(g, root, max(params.d1, params.d2), grid)
    return root


def neutral_sign(value: float, tol: float = TOL_NEUTRAL) -> int:
    """Sign with a neutral band: |value| < tol counts as zero."""
    if value > tol:
        return 1
    if value < -tol:
        return -1
    return 0
