"""Uniform 1D node grid on [0, L], Neumann diffusion operators and the
cosine-series heat kernel of the no-flux interval.

Fields are plain float arrays of length ``grid.n``; the node ``j`` sits at
``x_j = j * h`` with ``h = L / (n - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import lapack

from .errors import SingularSystemError, ValidationError

#: tolerance below which a "nonnegative" field value still counts as >= 0
EPS_POS = 1e-10

#: default number of cosine modes in the heat kernel series
KERNEL_TERMS = 400

_PIVOT_TOL = 1e-14


@dataclass(frozen=True)
class Grid:
    length: float
    n: int

    def __post_init__(self):
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValidationError(f"grid length must be positive, got {self.length}")
        if int(self.n) != self.n or self.n < 3:
            raise ValidationError(f"grid needs n >= 3 nodes, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return self.length / (self.n - 1)

    @cached_property
    def x(self) -> np.ndarray:
        x = np.linspace(0.0, self.length, self.n)
        x.flags.writeable = False
        return x

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights."""
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        w.flags.writeable = False
        return w

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f))

    def mean(self, f) -> float:
        return self.integrate(f) / self.length

    def refined(self) -> Grid:
        """Grid with every interval halved (n -> 2n - 1); shares all old nodes."""
        return Grid(self.length, 2 * self.n - 1)

    def check_field(self, f, name: str = "field") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.n,):
            raise ValidationError(f"{name} has shape {f.shape}, grid expects ({self.n},)")
        return f


@dataclass(frozen=True)
class TridiagonalOperator:
    """Row j reads ``sub[j-1]*u[j-1] + diag[j]*u[j] + sup[j]*u[j+1]``."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    @property
    def n(self) -> int:
        return self.diag.shape[0]

    def apply(self, u: np.ndarray) -> np.ndarray:
        out = self.diag * u
        out[1:] += self.sub * u[:-1]
        out[:-1] += self.sup * u[1:]
        return out

    __matmul__ = apply

    def plus_diagonal(self, w) -> TridiagonalOperator:
        return TridiagonalOperator(self.sub, self.diag + np.asarray(w, dtype=float), self.sup)

    def scaled(self, factor: float) -> TridiagonalOperator:
        return TridiagonalOperator(factor * self.sub, factor * self.diag, factor * self.sup)

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)


def build_laplacian(grid: Grid, d: float) -> TridiagonalOperator:
    """``d * Laplacian`` with ghost-point Neumann closure.

    Interior rows are ``(1, -2, 1) * d / h^2``; the ghost node mirrors the
    neighbour so the end rows become ``(-2, 2)`` and ``(2, -2)``.
    """
    if not d > 0:
        raise ValidationError(f"diffusion rate must be positive, got {d}")
    n = grid.n
    c = d / grid.h**2
    sub = np.full(n - 1, c)
    sup = np.full(n - 1, c)
    diag = np.full(n, -2.0 * c)
    sup[0] = 2.0 * c
    sub[-1] = 2.0 * c
    return TridiagonalOperator(sub, diag, sup)


class ShiftedSolver:
    """LU factorization of ``sigma*I - op``, reusable for many right-hand sides."""

    def __init__(self, op: TridiagonalOperator, sigma: float):
        dl = -np.asarray(op.sub, dtype=float)
        d = sigma - np.asarray(op.diag, dtype=float)
        du = -np.asarray(op.sup, dtype=float)
        scale = float(np.max(np.abs(d) + np.abs(np.r_[0.0, dl]) + np.abs(np.r_[du, 0.0])))
        self.sigma = sigma
        self._factors = lapack.dgttrf(dl, d, du)
        info = self._factors[-1]
        pivots = np.abs(self._factors[1])
        if info != 0 or scale == 0.0 or pivots.min() < _PIVOT_TOL * scale:
            raise SingularSystemError(
                f"sigma*I - op is singular to working precision (sigma={sigma:g}, "
                f"min pivot {pivots.min():.3g}, scale {scale:.3g})"
            )

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        dl, d, du, du2, ipiv, _ = self._factors
        x, info = lapack.dgttrs(dl, d, du, du2, ipiv, np.asarray(rhs, dtype=float))
        if info != 0:
            raise SingularSystemError(f"tridiagonal back-substitution failed (info={info})")
        return x


def solve_shifted(op: TridiagonalOperator, sigma: float, rhs) -> np.ndarray:
    """Solve ``(sigma*I - op) u = rhs``."""
    return ShiftedSolver(op, sigma).solve(rhs)


@dataclass(frozen=True)
class KernelMatrix:
    grid: Grid
    entries: np.ndarray
    weights: np.ndarray
    terms: int
    tail_bound: float

    def apply(self, f: np.ndarray) -> np.ndarray:
        """Quadrature of ``integral G(x, y) f(y) dy`` at every node x."""
        return self.entries @ (self.weights * f)

    def row_sums(self) -> np.ndarray:
        return self.entries @ self.weights


def heat_kernel(
    grid: Grid,
    dtilde: float,
    t: float,
    terms: int = KERNEL_TERMS,
    delta_mode: bool = False,
) -> KernelMatrix:
    """Truncated cosine series of the Neumann heat kernel on (0, L).

    Modes above the grid's Nyquist index ``n - 1`` are unresolvable on the
    nodes and are dropped; at the Nyquist index the coefficient is ``1/L``
    (its discrete norm is ``L``, not ``L/2``), which makes the truncation
    exactly the discrete cosine transform: rows integrate to 1, kernels
    compose as a semigroup, and ``dtilde -> 0`` gives the quadrature
    identity.
    """
    if terms < 1:
        raise ValidationError(f"kernel needs at least one series term, got {terms}")
    if not t > 0:
        raise ValidationError(f"kernel time must be positive, got {t}")
    if dtilde < 0:
        raise ValidationError(f"kernel diffusion must be nonnegative, got {dtilde}")
    w = grid.weights
    if dtilde * t == 0.0:
        if not delta_mode:
            raise ValidationError("dtilde*t = 0 makes the kernel a delta; pass delta_mode=True")
        return KernelMatrix(grid, np.diag(1.0 / w), w, 0, 0.0)

    L = grid.length
    k_eff = min(int(terms), grid.n - 1)
    k = np.arange(k_eff + 1)
    rate = math.pi**2 * dtilde * t / L**2
    coef = np.full(k_eff + 1, 2.0 / L)
    coef[0] = 1.0 / L
    if k_eff == grid.n - 1:
        coef[-1] = 1.0 / L
    coef *= np.exp(-(k**2) * rate)
    modes = np.cos(np.outer(grid.x, k) * (math.pi / L))
    entries = (modes * coef) @ modes.T
    entries = 0.5 * (entries + entries.T)
    tail = math.exp(-(k_eff**2) * rate) / -math.expm1(-rate)
    return KernelMatrix(grid, entries, w, k_eff, tail)
