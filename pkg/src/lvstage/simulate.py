"""Method-of-lines integration of the delayed competition systems.

One step from ``t_k`` to ``t_{k+1}``: backward Euler for diffusion, forward
Euler for reaction and delayed terms, lagged values linearly interpolated
between stored steps.  Four right-hand sides:

* ``local``        recruitment ``exp(-gamma_i tau_i) m_i(x) W(x, t - tau_i)``
* ``nonlocal``     same recruitment smoothed by the immature-stage heat kernel
* ``nodelay``      recruitment ``exp(-gamma_i tau_i) m_i(x) W(x, t)``
* ``interaction``  no maturation term; competitor enters with a lag
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .errors import NumericalError, OrderViolation, PositivityBreach, ValidationError, MismatchedOutcome
from .grid import EPS_POS, KERNEL_TERMS, Grid, ShiftedSolver, build_laplacian, heat_kernel
from .model import ModelParams
from .profiles import Profile, as_profile, sample

log = logging.getLogger(__name__)

CONV_TOL = 1e-3
DWELL = 10.0


class Variant(str, enum.Enum):
    local = "local"
    nonlocal_ = "nonlocal"
    nodelay = "nodelay"
    interaction = "interaction"


def history_function(source, grid: Grid):
    """Turn a history source into ``f(t) -> field`` for t <= 0.

    Accepts an expression/Profile/number or a field array (constant in t), or
    a callable ``f(x, t)`` for time-dependent histories.
    """
    if isinstance(source, np.ndarray):
        values = grid.check_field(source, "history").copy()
        return lambda t: values
    if callable(source) and not isinstance(source, Profile):
        return lambda t: np.broadcast_to(np.asarray(source(grid.x, t), dtype=float), (grid.n,)).copy()
    values = sample(as_profile(source), grid)
    return lambda t: values


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    grid: Grid
    dt: float
    t_end: float
    variant: Variant = Variant.local
    u0: object = "1"
    v0: object = "1"
    dtilde1: float = 0.0
    dtilde2: float = 0.0
    kernel_terms: int = KERNEL_TERMS
    snapshot_every: float = 1.0
    #: candidate limits {name: (U, V)} and an optional continuum (Outcome)
    targets: dict = field(default_factory=dict, repr=False)
    family: object = field(default=None, repr=False)
    conv_tol: float = CONV_TOL
    dwell: float = DWELL
    stop_on_convergence: bool = True
    #: also stop once the state changes by less than this over one dwell window
    stationary_tol: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValidationError(f"t_end must be positive, got {self.t_end}")
        if self.dtilde1 < 0 or self.dtilde2 < 0:
            raise ValidationError("immature diffusion rates must be nonnegative")
        if self.snapshot_every <= 0:
            raise ValidationError("snapshot_every must be positive")
        if self.dt > self.dt_max():
            raise ValidationError(f"dt = {self.dt:g} exceeds the stability bound dt_max = {self.dt_max():.4g}")

    @property
    def lags(self) -> tuple[float, float]:
        """Delay applied to the stored U and V histories."""
        if self.variant is Variant.nodelay:
            return 0.0, 0.0
        return self.params.tau1, self.params.tau2

    def dt_max(self) -> float:
        return dt_bound(self.params, self.grid, self.u0, self.v0, self.variant)


def dt_bound(params: ModelParams, grid: Grid, u0="1", v0="1", variant=Variant.local) -> float:
    """Largest admissible step: 0.5 over the reaction scale, and a quarter
    of the shortest active delay."""
    m1, m2 = params.growth(grid)
    a, b = history_function(u0, grid)(0.0), history_function(v0, grid)(0.0)
    scale = max(np.max(m1), np.max(m2), np.max(a), np.max(b), 1e-12) * (2 + max(params.b, params.c))
    bound = 0.5 / scale
    if Variant(variant) is not Variant.nodelay:
        active = [t for t in (params.tau1, params.tau2) if t > 0]
        if active:
            bound = min(bound, min(active) / 4)
    return bound


class HistoryBuffer:
    """Ring of past fields at step resolution covering ``[t - tau, t]``."""

    def __init__(self, grid: Grid, dt: float, tau: float, initial):
        self.dt, self.tau = dt, tau
        s = tau / dt
        self.whole = int(math.floor(s))
        self.frac = s - self.whole
        if self.frac < 1e-12:
            self.frac = 0.0
        self.depth = int(math.ceil(s)) + 2
        self.ring = np.empty((self.depth, grid.n))
        for j in range(-(self.depth - 1), 1):
            f = initial(j * dt)
            if np.min(f) < -EPS_POS:
                raise ValidationError("initial history must be nonnegative")
            self.ring[j % self.depth] = f

    def push(self, k: int, values: np.ndarray) -> None:
        self.ring[k % self.depth] = values

    def current(self, k: int) -> np.ndarray:
        return self.ring[k % self.depth]

    def lagged(self, k: int) -> np.ndarray:
        """Value at ``t_k - tau`` (linear interpolation between stored steps)."""
        a = self.ring[(k - self.whole) % self.depth]
        if self.frac == 0.0:
            return a
        b = self.ring[(k - self.whole - 1) % self.depth]
        return (1.0 - self.frac) * a + self.frac * b


class Integrator:
    """Holds factorized diffusion solves, kernels and histories for one run."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        p, g, dt = cfg.params, cfg.grid, cfg.dt
        m1, m2 = p.growth(g)
        self.m1, self.m2 = m1, m2
        self.inv_dt = 1.0 / dt
        self.S1 = ShiftedSolver(build_laplacian(g, p.d1), self.inv_dt)
        self.S2 = ShiftedSolver(build_laplacian(g, p.d2), self.inv_dt)
        self.r1, self.r2 = p.delta1 * m1, p.delta2 * m2
        tau_u, tau_v = cfg.lags
        self.hist_u = HistoryBuffer(g, dt, tau_u, history_function(cfg.u0, g))
        self.hist_v = HistoryBuffer(g, dt, tau_v, history_function(cfg.v0, g))
        self.k1 = self.k2 = None
        if cfg.variant is Variant.nonlocal_:
            self.k1 = heat_kernel(g, cfg.dtilde1, p.tau1, cfg.kernel_terms, delta_mode=True) if p.tau1 > 0 else None
            self.k2 = heat_kernel(g, cfg.dtilde2, p.tau2, cfg.kernel_terms, delta_mode=True) if p.tau2 > 0 else None
        self.k = 0

    @property
    def state(self):
        return self.hist_u.current(self.k).copy(), self.hist_v.current(self.k).copy()

    @property
    def t(self) -> float:
        return self.k * self.cfg.dt

    def reaction(self, U, V, k):
        p, variant = self.cfg.params, self.cfg.variant
        b, c = p.b, p.c
        if variant is Variant.interaction:
            Vlag = self.hist_v.lagged(k)
            Ulag = self.hist_u.lagged(k)
            return U * (self.m1 - U - c * Vlag), V * (self.m2 - b * Ulag - V)
        if variant is Variant.nodelay:
            Ulag, Vlag = U, V
        else:
            Ulag, Vlag = self.hist_u.lagged(k), self.hist_v.lagged(k)
        if self.k1 is not None:
            rec1 = p.delta1 * self.k1.apply(self.m1 * Ulag)
        else:
            rec1 = self.r1 * Ulag
        if self.k2 is not None:
            rec2 = p.delta2 * self.k2.apply(self.m2 * Vlag)
        else:
            rec2 = self.r2 * Vlag
        return rec1 - U * U - c * U * V, rec2 - b * U * V - V * V

    def step_from(self, U, V, k):
        RU, RV = self.reaction(U, V, k)
        U1 = self.S1.solve(U * self.inv_dt + RU)
        V1 = self.S2.solve(V * self.inv_dt + RV)
        lo = min(U1.min(), V1.min())
        if not (math.isfinite(lo) and math.isfinite(max(U1.max(), V1.max()))):
            raise NumericalError(f"non-finite state at t = {(k + 1) * self.cfg.dt:g}")
        if lo < -100 * EPS_POS:
            raise PositivityBreach(
                f"state dropped to {lo:.3g} at t = {(k + 1) * self.cfg.dt:g}; dt too large?"
            )
        return U1, V1

    def advance(self):
        U, V = self.hist_u.current(self.k), self.hist_v.current(self.k)
        U1, V1 = self.step_from(U, V, self.k)
        self.k += 1
        self.hist_u.push(self.k, U1)
        self.hist_v.push(self.k, V1)
        return U1, V1


def step(state, history, cfg: SimConfig, k: int = 0):
    """One IMEX step from ``t_k``.

    ``history`` is a pair of HistoryBuffers holding the stored past (and the
    current state at index ``k``); convenient for tests, ``simulate`` keeps a
    single Integrator instead.
    """
    integ = Integrator(cfg)
    integ.hist_u, integ.hist_v = history
    U, V = (np.asarray(s, dtype=float) for s in state)
    return integ.step_from(U, V, k)


@dataclass
class Trajectory:
    times: np.ndarray
    U: np.ndarray  # (snapshots, n)
    V: np.ndarray
    check_times: np.ndarray
    distances: dict  # target name -> array over check_times
    reached: str | None
    converged_at: float | None
    stationary_at: float | None
    t_final: float
    steps: int
    wall_time: float
    meta: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.U[-1], self.V[-1]

    @property
    def converged(self) -> bool:
        return self.reached is not None


def _distances(cfg: SimConfig, U, V) -> dict:
    out = {}
    for name, (Ut, Vt) in cfg.targets.items():
        out[name] = float(max(np.max(np.abs(U - Ut)), np.max(np.abs(V - Vt))))
    if cfg.family is not None:
        out["continuum"] = cfg.family.distance_to_family(U, V)[0]
    return out


def simulate(cfg: SimConfig) -> Trajectory:
    """Integrate to ``t_end`` or until a target is held within conv_tol for ``dwell``."""
    start = time.perf_counter()
    integ = Integrator(cfg)
    dt = cfg.dt
    n_steps = int(round(cfg.t_end / dt))
    snap_stride = max(1, int(round(cfg.snapshot_every / dt)))
    check_stride = max(1, int(round(0.1 / dt)))
    U, V = integ.state
    times, Us, Vs = [0.0], [U.copy()], [V.copy()]
    check_t, dists = [], {}
    entered = {}
    reached = converged_at = stationary_at = None
    window = []  # (t, U, V) at check times within the last dwell

    def check(k, U, V):
        nonlocal reached, converged_at, stationary_at
        t = k * dt
        check_t.append(t)
        if cfg.stationary_tol is not None:
            window.append((t, U.copy(), V.copy()))
            while len(window) > 1 and t - window[1][0] >= cfg.dwell - 1e-9:
                window.pop(0)
            t0, U0, V0 = window[0]
            if t - t0 >= cfg.dwell - 1e-9 and stationary_at is None:
                change = max(np.max(np.abs(U - U0)), np.max(np.abs(V - V0)))
                if change < cfg.stationary_tol:
                    stationary_at = t
        for name, dist in _distances(cfg, U, V).items():
            dists.setdefault(name, []).append(dist)
            if dist < cfg.conv_tol:
                entered.setdefault(name, t)
                if reached is None and t - entered[name] >= cfg.dwell - 1e-9:
                    reached, converged_at = name, t
            else:
                entered.pop(name, None)

    check(0, U, V)
    k = 0
    for k in range(1, n_steps + 1):
        U, V = integ.advance()
        if k % snap_stride == 0:
            times.append(k * dt)
            Us.append(U.copy())
            Vs.append(V.copy())
        if k % check_stride == 0 or k == n_steps:
            check(k, U, V)
            if cfg.stop_on_convergence and (reached is not None or stationary_at is not None):
                break
    if times[-1] != k * dt:
        times.append(k * dt)
        Us.append(U.copy())
        Vs.append(V.copy())
    return Trajectory(
        times=np.array(times),
        U=np.array(Us),
        V=np.array(Vs),
        check_times=np.array(check_t),
        distances={name: np.array(v) for name, v in dists.items()},
        reached=reached,
        converged_at=converged_at,
        stationary_at=stationary_at,
        t_final=k * dt,
        steps=k,
        wall_time=time.perf_counter() - start,
        meta={"conv_tol": cfg.conv_tol, "dwell": cfg.dwell, "dt": dt, "variant": cfg.variant.value},
    )


def write_trajectory_csv(traj: Trajectory, grid: Grid, path) -> None:
    """Rows ``t,x,U,V`` per snapshot and node, 17 significant digits."""
    n = grid.n
    rows = np.column_stack([
        np.repeat(traj.times, n),
        np.tile(grid.x, len(traj.times)),
        traj.U.reshape(-1),
        traj.V.reshape(-1),
    ])
    np.savetxt(path, rows, fmt="%.17g", delimiter=",", header="t,x,U,V", comments="")


# -- comparison checks --------------------------------------------------------


@dataclass(frozen=True)
class OrderReport:
    max_violation: float
    t_end: float
    steps: int


def _history_samples(cfg: SimConfig, source, tau):
    f = history_function(source, cfg.grid)
    ts = -np.arange(0, int(math.ceil(tau / cfg.dt)) + 2) * cfg.dt
    return [f(t) for t in ts]


def check_order_preservation(cfg_a: SimConfig, cfg_b: SimConfig, tol: float = 1e-10) -> OrderReport:
    """Integrate both runs in lockstep and verify U_a >= U_b, V_a <= V_b throughout."""
    if (cfg_a.params, cfg_a.grid, cfg_a.dt, cfg_a.variant) != (cfg_b.params, cfg_b.grid, cfg_b.dt, cfg_b.variant):
        raise ValidationError("order check needs runs sharing params, grid, dt and variant")
    tau_u, tau_v = cfg_a.lags
    for ua, ub in zip(_history_samples(cfg_a, cfg_a.u0, tau_u), _history_samples(cfg_b, cfg_b.u0, tau_u)):
        if np.any(ua < ub):
            raise ValidationError("initial U histories are not ordered (need U_a >= U_b)")
    for va, vb in zip(_history_samples(cfg_a, cfg_a.v0, tau_v), _history_samples(cfg_b, cfg_b.v0, tau_v)):
        if np.any(va > vb):
            raise ValidationError("initial V histories are not ordered (need V_a <= V_b)")
    ia, ib = Integrator(cfg_a), Integrator(cfg_b)
    n_steps = int(round(cfg_a.t_end / cfg_a.dt))
    worst = 0.0
    for k in range(1, n_steps + 1):
        Ua, Va = ia.advance()
        Ub, Vb = ib.advance()
        du, dv = Ub - Ua, Va - Vb
        viol = max(float(du.max()), float(dv.max()), 0.0)
        if viol > worst:
            worst = viol
            if viol > tol:
                idx = int(np.argmax(du)) if du.max() >= dv.max() else int(np.argmax(dv))
                t = k * cfg_a.dt
                raise OrderViolation(
                    f"order broken by {viol:.3g} at t = {t:g}, x = {cfg_a.grid.x[idx]:.4g}", t=t, index=idx
                )
    return OrderReport(worst, n_steps * cfg_a.dt, n_steps)


@dataclass(frozen=True)
class HarmlessReport:
    pairs: list
    finals: dict  # pair -> (U, V)
    max_mismatch: float
    trajectories: dict = field(repr=False, default_factory=dict)


def harmless_delay_check(
    params: ModelParams,
    grid: Grid,
    pairs,
    *,
    dt: float = 0.01,
    t_end: float = 300.0,
    u0="1",
    v0="1",
    tol: float = CONV_TOL,
) -> HarmlessReport:
    """Run the delayed-interaction model for each (tau1, tau2) pair and for
    (0, 0); all final states must agree within ``tol``."""
    pairs = [(0.0, 0.0)] + [tuple(map(float, pr)) for pr in pairs if tuple(pr) != (0, 0)]
    finals, trajs = {}, {}
    for t1, t2 in pairs:
        cfg = SimConfig(
            params.replace(tau1=t1, tau2=t2, gamma1=0.0, gamma2=0.0), grid, dt, t_end,
            variant=Variant.interaction, u0=u0, v0=v0, snapshot_every=t_end,
            stop_on_convergence=False,
        )
        traj = simulate(cfg)
        finals[(t1, t2)] = traj.final
        trajs[(t1, t2)] = traj
    worst, bad = 0.0, []
    for a, b in combinations(pairs, 2):
        gap = max(float(np.max(np.abs(finals[a][0] - finals[b][0]))), float(np.max(np.abs(finals[a][1] - finals[b][1]))))
        worst = max(worst, gap)
        if gap > tol:
            bad.append((a, b))
    if bad:
        raise MismatchedOutcome(f"final states differ by up to {worst:.3g} for pairs {bad}", bad)
    return HarmlessReport(pairs, finals, worst, trajs)


def with_targets(cfg: SimConfig, outcome) -> SimConfig:
    """Attach the targets of a predicted Outcome to a config."""
    fam = outcome if outcome.family_theta is not None else None
    return replace(cfg, targets=dict(outcome.targets), family=fam)
