"""Steady states: the scalar logistic profile theta and the coupled
coexistence state of the undelayed competition system.

theta solves ``d * theta'' + delta * m * theta - theta^2 = 0`` with no-flux
ends, ``delta = exp(-gamma * tau)``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ExtinctProfile, NonConvergence, SingularSystemError, ValidationError
from .grid import Grid, ShiftedSolver, build_laplacian

log = logging.getLogger(__name__)

TOL_STEADY = 1e-10
MARCH_DT = 0.1


@dataclass(frozen=True)
class ThetaSolution:
    theta: np.ndarray
    residual: float
    delta: float
    iterations: int
    method: str


def _tolerance(tol, lap, scale):
    # rounding floor of evaluating the stencil: ~eps * |A|_inf * |theta|
    floor = 64 * np.finfo(float).eps * 4.0 * abs(lap.diag[0]) * max(scale, 1.0)
    return max(tol, floor)


def theta_residual(theta, d, delta, m, grid):
    lap = build_laplacian(grid, d)
    return lap @ theta + theta * (delta * m - theta)


def _newton(lap, r, guess, tol, max_iter):
    theta = guess.copy()
    F = lap @ theta + theta * (r - theta)
    norm = np.max(np.abs(F))
    for it in range(1, max_iter + 1):
        if norm <= tol:
            return theta, norm, it - 1
        jac = lap.plus_diagonal(r - 2.0 * theta)
        step = ShiftedSolver(jac, 0.0).solve(F)  # -J step = F
        alpha = 1.0
        while True:
            trial = theta + alpha * step
            Ft = lap @ trial + trial * (r - trial)
            nt = np.max(np.abs(Ft))
            if nt < (1 - 1e-4 * alpha) * norm or alpha < 1e-6:
                break
            alpha *= 0.5
        theta, F, norm = trial, Ft, nt
    if norm <= tol:
        return theta, norm, max_iter
    raise NonConvergence(f"Newton stalled at residual {norm:.3g} after {max_iter} iterations")


def _march(lap, r, guess, tol, dt, max_steps):
    # linearly implicit Euler: (I/dt - A + diag(theta_k)) theta_{k+1} = theta_k/dt + r*theta_k
    theta = guess.copy()
    for k in range(1, max_steps + 1):
        solver = ShiftedSolver(lap.plus_diagonal(-theta), 1.0 / dt)
        theta = solver.solve(theta / dt + r * theta)
        if k % 10 == 0 or k == max_steps:
            res = np.max(np.abs(lap @ theta + theta * (r - theta)))
            if res <= tol:
                return theta, res, k
    raise NonConvergence(f"time marching did not reach residual {tol:g} in {max_steps} steps")


def _solve_logistic(d, delta, m, grid, *, tol, method, max_iter, guess):
    m = grid.check_field(m, "m")
    if not d > 0:
        raise ValidationError(f"diffusion rate must be positive, got {d}")
    if np.any(m < 0):
        raise ValidationError("growth profile must be nonnegative")
    r = delta * m
    if not np.max(r) > 0:
        raise ExtinctProfile(f"delta*m <= 0 everywhere (delta={delta:g}); theta collapses to 0")
    if np.any(m == 0):
        warnings.warn("growth profile vanishes at some nodes; theta may touch zero", stacklevel=3)
    lap = build_laplacian(grid, d)
    x0 = r.copy() if guess is None else np.asarray(guess, dtype=float).copy()
    x0 = np.maximum(x0, 1e-3 * np.max(r))
    tol = _tolerance(tol, lap, float(np.max(r)))

    if method == "newton":
        try:
            theta, res, its = _newton(lap, r, x0, tol, max_iter)
            if np.min(theta) > 0:
                return ThetaSolution(theta, res, delta, its, "newton")
            log.debug("Newton converged to a non-positive state; falling back to marching")
        except (NonConvergence, SingularSystemError) as exc:
            log.debug("Newton failed (%s); falling back to marching", exc)
        method = "march"
    if method == "march":
        theta, res, its = _march(lap, r, x0, tol, MARCH_DT, max_steps=200_000)
    else:
        raise ValidationError(f"unknown steady-state method {method!r}")
    if not np.max(theta) > 0:
        raise ExtinctProfile("steady profile collapsed to zero")
    return ThetaSolution(theta, res, delta, its, method)


def solve_theta(
    d: float,
    tau: float,
    gamma: float,
    m,
    grid: Grid,
    *,
    tol: float = TOL_STEADY,
    method: str = "newton",
    max_iter: int = 100,
    guess=None,
) -> ThetaSolution:
    """Positive steady state of the scalar delayed logistic equation.

    Damped Newton from ``delta * m``; if that fails or lands on a
    non-positive state, linearly implicit time marching with dt = 0.1.
    ``method="march"`` skips Newton (used as an independent cross-check).
    """
    if tau < 0 or gamma < 0:
        raise ValidationError("tau and gamma must be nonnegative")
    delta = math.exp(-gamma * tau)
    return _solve_logistic(d, delta, m, grid, tol=tol, method=method, max_iter=max_iter, guess=guess)


def rescaled_theta(delta: float, d: float, m, grid: Grid, **kw) -> ThetaSolution:
    """theta for a given survival factor ``delta`` in (0, 1]."""
    if not 0 < delta <= 1:
        raise ValidationError(f"delta must lie in (0, 1], got {delta}")
    return _solve_logistic(
        d, delta, m, grid,
        tol=kw.get("tol", TOL_STEADY), method=kw.get("method", "newton"),
        max_iter=kw.get("max_iter", 100), guess=kw.get("guess"),
    )


# -- coupled system ---------------------------------------------------------


def coupled_residual(U, V, d1, d2, r1, r2, b, c, grid) -> float:
    """Sup-norm residual of the undelayed stationary competition system.

    ``r1, r2`` are the effective growth fields ``exp(-gamma_i tau_i) m_i``.
    """
    A1 = build_laplacian(grid, d1)
    A2 = build_laplacian(grid, d2)
    F1 = A1 @ U + U * (r1 - U - c * V)
    F2 = A2 @ V + V * (r2 - b * U - V)
    return float(max(np.max(np.abs(F1)), np.max(np.abs(F2))))


def _sparse(op):
    return sp.diags([op.sub, op.diag, op.sup], [-1, 0, 1], format="csr")


@dataclass(frozen=True)
class CoexistenceState:
    U: np.ndarray
    V: np.ndarray
    residual: float
    method: str


def solve_coexistence(
    d1, d2, r1, r2, b, c, grid: Grid, *, guess=None, tol: float = TOL_STEADY, max_iter: int = 60,
    march: bool = True,
) -> CoexistenceState:
    """Componentwise-positive steady state of the undelayed system.

    Newton with backtracking from ``guess`` (default: half of each theta);
    if Newton fails or lands on a semitrivial state, march the parabolic
    system (which is attracted to the coexistence state whenever one is
    globally stable) and polish with Newton.
    """
    r1 = grid.check_field(r1, "r1")
    r2 = grid.check_field(r2, "r2")
    A1 = build_laplacian(grid, d1)
    A2 = build_laplacian(grid, d2)
    n = grid.n
    if guess is None:
        th1 = _solve_logistic(d1, 1.0, r1, grid, tol=tol, method="newton", max_iter=100, guess=None).theta
        th2 = _solve_logistic(d2, 1.0, r2, grid, tol=tol, method="newton", max_iter=100, guess=None).theta
        guess = (0.5 * th1, 0.5 * th2)
    tol = _tolerance(tol, A1 if d1 >= d2 else A2, float(max(np.max(r1), np.max(r2))))
    L1, L2 = _sparse(A1), _sparse(A2)

    def F(U, V):
        return np.concatenate([A1 @ U + U * (r1 - U - c * V), A2 @ V + V * (r2 - b * U - V)])

    def newton(U, V):
        res = F(U, V)
        norm = np.max(np.abs(res))
        for _ in range(max_iter):
            if norm <= tol:
                break
            J = sp.bmat(
                [
                    [L1 + sp.diags(r1 - 2 * U - c * V), sp.diags(-c * U)],
                    [sp.diags(-b * V), L2 + sp.diags(r2 - b * U - 2 * V)],
                ],
                format="csc",
            )
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", spla.MatrixRankWarning)
                step = spla.spsolve(J, -res)
            if not np.all(np.isfinite(step)):
                raise NonConvergence("singular Jacobian in coexistence Newton")
            alpha = 1.0
            while True:
                Ut, Vt = U + alpha * step[:n], V + alpha * step[n:]
                rt = F(Ut, Vt)
                nt = np.max(np.abs(rt))
                if nt < (1 - 1e-4 * alpha) * norm or alpha < 1e-6:
                    break
                alpha *= 0.5
            U, V, res, norm = Ut, Vt, rt, nt
        if norm > tol:
            raise NonConvergence(f"coexistence Newton stalled at residual {norm:.3g}")
        return U, V, norm

    def positive(U, V):
        return np.min(U) > 1e-8 and np.min(V) > 1e-8

    U0, V0 = (np.asarray(g, dtype=float).copy() for g in guess)
    try:
        U, V, res = newton(U0, V0)
        if positive(U, V):
            return CoexistenceState(U, V, res, "newton")
    except NonConvergence as exc:
        log.debug("coexistence Newton failed: %s", exc)
    if not march:
        raise NonConvergence("Newton did not reach a componentwise-positive steady state")

    # parabolic marching, linearly implicit with dt = 0.1 (stays positive)
    dt = MARCH_DT
    U, V = np.maximum(U0, 1e-3), np.maximum(V0, 1e-3)
    for k in range(200_000):
        U, V = (
            ShiftedSolver(A1.plus_diagonal(-(U + c * V)), 1.0 / dt).solve(U / dt + r1 * U),
            ShiftedSolver(A2.plus_diagonal(-(b * U + V)), 1.0 / dt).solve(V / dt + r2 * V),
        )
        if k % 50 == 0 and np.max(np.abs(F(U, V))) < 1e-6:
            break
    else:
        raise NonConvergence("marching to the coexistence state did not settle")
    U, V, res = newton(U, V)
    if not positive(U, V):
        raise NonConvergence("no componentwise-positive steady state found")
    return CoexistenceState(U, V, res, "march+newton")
