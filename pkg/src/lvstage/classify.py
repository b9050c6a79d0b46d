"""Region decomposition of parameter space and predicted global dynamics."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .eigen import TOL_NEUTRAL, mu1, neutral_sign
from .errors import ContinuumCheckFailed, InconsistentSigns, OrderViolation, ValidationError
from .grid import Grid
from .model import ModelParams
from .steady import TOL_STEADY, coupled_residual, rescaled_theta, solve_coexistence, solve_theta

__all__ = [
    "ModelParams",
    "Region",
    "RegionLabel",
    "OutcomeKind",
    "Outcome",
    "classify",
    "predicted_outcome",
    "delta_thresholds",
    "ThresholdReport",
]


class Region(str, enum.Enum):
    S_u = "S_u"
    S_v = "S_v"
    S_minus = "S_minus"
    S_u0 = "S_u0"
    S_v0 = "S_v0"
    S_00 = "S_00"
    #: both semitrivial states stable; only possible under strong competition (bc > 1)
    bistable = "bistable"

    def swapped(self) -> Region:
        return {
            Region.S_u: Region.S_v, Region.S_v: Region.S_u,
            Region.S_u0: Region.S_v0, Region.S_v0: Region.S_u0,
        }.get(self, self)


@dataclass(frozen=True)
class RegionLabel:
    region: Region
    mu_uv: float  # stability of (theta1, 0) against invasion by V
    mu_vu: float  # stability of (0, theta2) against invasion by U
    theta1: np.ndarray = field(repr=False)
    theta2: np.ndarray = field(repr=False)
    tol_neutral: float = TOL_NEUTRAL

    @property
    def near_neutral(self) -> bool:
        return min(abs(self.mu_uv), abs(self.mu_vu)) < self.tol_neutral


def label_from_signs(mu_uv: float, mu_vu: float, tol: float = TOL_NEUTRAL, strong: bool = False) -> Region:
    su, sv = neutral_sign(mu_uv, tol), neutral_sign(mu_vu, tol)
    if su < 0 and sv < 0:
        if strong:
            return Region.bistable
        raise InconsistentSigns(
            f"both semitrivial states linearly stable (mu_uv={mu_uv:.3g}, mu_vu={mu_vu:.3g})"
        )
    if su < 0:
        return Region.S_u
    if sv < 0:
        return Region.S_v
    if su > 0 and sv > 0:
        return Region.S_minus
    if su == 0 and sv == 0:
        return Region.S_00
    return Region.S_u0 if su == 0 else Region.S_v0


def classify(params: ModelParams, grid: Grid, tol_neutral: float = TOL_NEUTRAL) -> RegionLabel:
    if params.bc > 1:
        warnings.warn(
            f"bc = {params.bc:g} > 1: signs are classified but no outcome is predicted",
            stacklevel=2,
        )
    m1, m2 = params.growth(grid)
    th1 = solve_theta(params.d1, params.tau1, params.gamma1, m1, grid).theta
    th2 = solve_theta(params.d2, params.tau2, params.gamma2, m2, grid).theta
    mu_uv = mu1(params.d2, params.delta2 * m2 - params.b * th1, grid).value
    mu_vu = mu1(params.d1, params.delta1 * m1 - params.c * th2, grid).value
    region = label_from_signs(mu_uv, mu_vu, tol_neutral, strong=params.bc > 1)
    return RegionLabel(region, mu_uv, mu_vu, th1, th2, tol_neutral)


class OutcomeKind(str, enum.Enum):
    U_wins = "U_wins"
    V_wins = "V_wins"
    UniqueCoexistence = "UniqueCoexistence"
    ContinuumAttractor = "ContinuumAttractor"
    Unknown = "Unknown"


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    #: named candidate limit states (U, V)
    targets: dict = field(default_factory=dict, repr=False)
    #: for the continuum: the profile theta1 and c, family (rho*theta1, (1-rho)*theta1/c)
    family_theta: np.ndarray | None = field(default=None, repr=False)
    family_c: float | None = None
    residual: float | None = None

    def family_member(self, rho: float) -> tuple[np.ndarray, np.ndarray]:
        if self.family_theta is None:
            raise ValueError("outcome has no continuum of steady states")
        return rho * self.family_theta, (1 - rho) * self.family_theta / self.family_c

    def distance_to_family(self, U, V) -> tuple[float, float]:
        """(sup distance, best rho) from (U, V) to the segment of the family."""
        th, c = self.family_theta, self.family_c
        # (U, V) ~ (rho*th, th/c - rho*th/c): least squares in rho
        a = np.concatenate([th, -th / c])
        r = np.concatenate([U, V - th / c])
        rho = float(np.clip(np.dot(a, r) / np.dot(a, a), 0.0, 1.0))
        Ur, Vr = self.family_member(rho)
        return float(max(np.max(np.abs(U - Ur)), np.max(np.abs(V - Vr)))), rho


def predicted_outcome(label: RegionLabel, params: ModelParams, grid: Grid) -> Outcome:
    th1, th2 = label.theta1, label.theta2
    zero = np.zeros(grid.n)
    if params.bc > 1:
        return Outcome(
            OutcomeKind.Unknown,
            {"U_wins": (th1, zero), "V_wins": (zero, th2)},
        )
    r = label.region
    if r in (Region.S_u, Region.S_u0):
        return Outcome(OutcomeKind.U_wins, {"U_wins": (th1, zero)})
    if r in (Region.S_v, Region.S_v0):
        return Outcome(OutcomeKind.V_wins, {"V_wins": (zero, th2)})
    m1, m2 = params.growth(grid)
    if r is Region.S_minus:
        st = solve_coexistence(
            params.d1, params.d2, params.delta1 * m1, params.delta2 * m2,
            params.b, params.c, grid, guess=(0.5 * th1, 0.5 * th2),
        )
        return Outcome(OutcomeKind.UniqueCoexistence, {"coexistence": (st.U, st.V)}, residual=st.residual)
    gap = float(np.max(np.abs(th1 - params.c * th2)))
    if gap > 1e-6:
        raise ContinuumCheckFailed(f"neutral point but |theta1 - c*theta2| = {gap:.3g} > 1e-6")
    out = Outcome(OutcomeKind.ContinuumAttractor, {}, family_theta=th1, family_c=params.c)
    res = max(
        coupled_residual(*out.family_member(rho), params.d1, params.d2,
                         params.delta1 * m1, params.delta2 * m2, params.b, params.c, grid)
        for rho in (0.25, 0.5, 0.75)
    )
    return Outcome(out.kind, {}, family_theta=th1, family_c=params.c, residual=res)


# -- Example B: thresholds in the survival factor delta = exp(-gamma1*tau1) --


class ThresholdCase(str, enum.Enum):
    i = "i"
    ii = "ii"
    iii1 = "iii1"
    iii2 = "iii2"


@dataclass(frozen=True)
class ThresholdReport:
    delta1: float | None  # root of f2 (U invades (0, theta2) above it)
    delta2: float | None  # root of f1 (V invades (theta1, 0) below it)
    case: ThresholdCase
    f1_at_1: float
    f2_at_1: float
    regimes: list = field(default_factory=list)

    @property
    def delta_tilde(self) -> float | None:
        return self.delta1 if self.case is ThresholdCase.ii else None


def _f1(delta, d1, d2, b, m1, m2, grid):
    if delta == 0:
        return mu1(d2, m2, grid).value
    th = rescaled_theta(delta, d1, m1, grid).theta
    return mu1(d2, m2 - b * th, grid).value


def _f2(delta, d1, c, m1, th2, grid):
    return mu1(d1, delta * m1 - c * th2, grid).value


def threshold_functions(d1, d2, b, c, m1, m2, grid: Grid):
    """Return ``(f1, f2)`` as callables of delta in [0, 1]."""
    m1 = grid.check_field(m1, "m1")
    m2 = grid.check_field(m2, "m2")
    th2 = solve_theta(d2, 0.0, 0.0, m2, grid).theta
    return (
        lambda delta: _f1(delta, d1, d2, b, m1, m2, grid),
        lambda delta: _f2(delta, d1, c, m1, th2, grid),
    )


def _root(f, xtol=1e-10):
    return brentq(f, 0.0, 1.0, xtol=xtol, rtol=1e-14)


def _s(delta):
    return -math.log(delta)


def delta_thresholds(d1, d2, b, c, m1, m2, grid: Grid, tol_neutral: float = TOL_NEUTRAL) -> ThresholdReport:
    """Survival-factor thresholds for the model with tau2 = gamma2 = 0.

    ``f1(delta) = mu1(d2, m2 - b*theta_{1,delta})`` decreases and
    ``f2(delta) = mu1(d1, delta*m1 - c*theta2)`` increases in delta; their
    roots on (0, 1) split the gamma1*tau1 axis into competitive regimes.
    """
    if b * c > 1:
        raise ValidationError(f"thresholds need bc <= 1, got {b * c:g}")
    f1, f2 = threshold_functions(d1, d2, b, c, m1, m2, grid)
    f1_1, f2_1 = f1(1.0), f2(1.0)
    s1, s2 = neutral_sign(f1_1, tol_neutral), neutral_sign(f2_1, tol_neutral)
    inf = math.inf
    if s1 < 0 and s2 < 0:
        raise InconsistentSigns(f"f1(1) = {f1_1:.3g} and f2(1) = {f2_1:.3g} are both negative")
    if s1 >= 0 and s2 <= 0:
        regimes = [(0.0, inf, "V_wins")]
        return ThresholdReport(None, None, ThresholdCase.i, f1_1, f2_1, regimes)
    if s1 >= 0:
        dt = _root(f2)
        regimes = [(0.0, _s(dt), "UniqueCoexistence"), (_s(dt), inf, "V_wins")]
        return ThresholdReport(dt, None, ThresholdCase.ii, f1_1, f2_1, regimes)
    delta1, delta2 = _root(f2), _root(f1)
    if delta1 > delta2 + 1e-8:
        raise OrderViolation(f"delta1 = {delta1:.10g} exceeds delta2 = {delta2:.10g}")
    if abs(delta1 - delta2) <= 1e-8:
        regimes = [
            (0.0, _s(delta1), "U_wins"),
            (_s(delta1), _s(delta1), "ContinuumAttractor"),
            (_s(delta1), inf, "V_wins"),
        ]
        return ThresholdReport(delta1, delta2, ThresholdCase.iii2, f1_1, f2_1, regimes)
    regimes = [
        (0.0, _s(delta2), "U_wins"),
        (_s(delta2), _s(delta1), "UniqueCoexistence"),
        (_s(delta1), inf, "V_wins"),
    ]
    return ThresholdReport(delta1, delta2, ThresholdCase.iii1, f1_1, f2_1, regimes)


def regime_at(report: ThresholdReport, s: float) -> str:
    """Predicted outcome at gamma1*tau1 = s."""
    for lo, hi, outcome in report.regimes:
        if lo == hi and abs(s - lo) <= 1e-12:
            return outcome
    for lo, hi, outcome in report.regimes:
        if lo < hi and lo <= s < hi:
            return outcome
    return report.regimes[-1][2]


def monotone_on_grid(f, increasing: bool, points: int = 20) -> tuple[bool, np.ndarray, np.ndarray]:
    deltas = np.linspace(0.05, 1.0, points)
    vals = np.array([f(x) for x in deltas])
    diffs = np.diff(vals)
    ok = bool(np.all(diffs > 0)) if increasing else bool(np.all(diffs < 0))
    return ok, deltas, vals
