"""SEIRV compartmental model core: state/parameter types and the RK4 integrator.

Compartments are device counts: susceptible S, exposed E, infected I,
recovered R, vaccinated V. New devices join S at rate lam, devices retire
at rate mu, infection moves S -> E -> I with user resets S -> R and E -> R,
treatment I -> R, vaccination S -> V, and relapse/waning R -> S, V -> S.

All types are immutable after construction and every operation is a pure
function, so concurrent evaluation is safe. Time units are abstract; rates
are per time unit.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import IntegrationDivergedError

__all__ = [
    "ModelParams",
    "State",
    "StateDerivative",
    "BetaSchedule",
    "ControlSchedule",
    "IntegratorConfig",
    "Trajectory",
    "DEFAULT_PARAMS",
    "rhs",
    "integrate",
    "total_population",
    "population_bound",
    "population_closed_form",
]


def _require_finite_nonneg(name: str, value: float) -> None:
    if not math.isfinite(value) or value < 0.0:
        raise ValueError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class ModelParams:
    """Rate constants of the SEIRV system plus the two control rates.

    lam    new-device influx (devices per time unit)
    beta   transmission rate (per device per time unit)
    alpha  E -> I progression rate
    eta1   S -> R reset rate
    eta2   E -> R reset rate
    sigma1 R -> S relapse rate
    sigma2 V -> S waning rate
    mu     device retirement rate (must be > 0)
    c1     vaccination rate, in [0, 1]
    c2     treatment rate, in [0, 1]
    """

    lam: float
    beta: float
    alpha: float
    eta1: float
    eta2: float
    sigma1: float
    sigma2: float
    mu: float
    c1: float = 0.0
    c2: float = 0.0

    def __post_init__(self):
        for name in ("lam", "beta", "alpha", "eta1", "eta2", "sigma1", "sigma2", "mu"):
            _require_finite_nonneg(name, getattr(self, name))
        if self.mu <= 0.0:
            raise ValueError(f"mu must be > 0, got {self.mu!r}")
        for name in ("c1", "c2"):
            v = getattr(self, name)
            if not math.isfinite(v) or not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")

    def with_controls(self, c1: float, c2: float) -> "ModelParams":
        return replace(self, c1=c1, c2=c2)


#: Default rate constants used throughout (controls off).
DEFAULT_PARAMS = ModelParams(
    lam=0.2292e6,
    beta=4e-9,
    alpha=0.25,
    eta1=0.10415,
    eta2=0.10415,
    sigma1=0.00417,
    sigma2=0.00417,
    mu=0.0004,
)


@dataclass(frozen=True)
class State:
    """A single (S, E, I, R, V) snapshot of device counts."""

    s: float
    e: float
    i: float
    r: float
    v: float

    def __post_init__(self):
        for name in ("s", "e", "i", "r", "v"):
            _require_finite_nonneg(name, getattr(self, name))

    @property
    def total(self) -> float:
        return self.s + self.e + self.i + self.r + self.v

    def as_tuple(self) -> Tuple[float, float, float, float, float]:
        return (self.s, self.e, self.i, self.r, self.v)


class StateDerivative(NamedTuple):
    ds: float
    de: float
    di: float
    dr: float
    dv: float


@dataclass(frozen=True)
class BetaSchedule:
    """Piecewise-constant transmission rate.

    values[k] is active on the right-open segment [breakpoints[k-1], breakpoints[k]);
    values[0] before the first breakpoint, values[-1] from the last one on.
    """

    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if len(vals) != len(bp) + 1:
            raise ValueError("need exactly len(breakpoints) + 1 beta values")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        for v in vals:
            _require_finite_nonneg("beta segment", v)

    def value_at(self, t: float) -> float:
        return self.values[bisect_right(self.breakpoints, t)]


@dataclass(frozen=True)
class ControlSchedule:
    """Step change of the control pair (c1, c2) at an onset time."""

    onset: float
    before: Tuple[float, float]
    after: Tuple[float, float]

    def __post_init__(self):
        if not math.isfinite(self.onset) or self.onset < 0.0:
            raise ValueError(f"onset must be finite and >= 0, got {self.onset!r}")
        for pair_name in ("before", "after"):
            pair = getattr(self, pair_name)
            if len(pair) != 2 or any(not (0.0 <= c <= 1.0) for c in pair):
                raise ValueError(f"{pair_name} controls must lie in [0, 1]^2")

    def controls_at(self, t: float) -> Tuple[float, float]:
        return self.after if t >= self.onset else self.before


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step RK4 settings.

    tolerance is the acceptable negative undershoot, relative to the initial
    population; undershoots inside (-tolerance * N0, 0) are clamped to zero
    when positivity_clamp is on.
    """

    dt: float = 0.01
    positivity_clamp: bool = True
    tolerance: float = 1e-12

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be > 0, got {self.dt!r}")
        if not (math.isfinite(self.tolerance) and self.tolerance >= 0.0):
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance!r}")


class Trajectory(NamedTuple):
    """Solution on the uniform grid times[k] = k * dt.

    states has one row per grid point, columns (S, E, I, R, V).
    """

    times: np.ndarray
    states: np.ndarray
    dt: float

    @property
    def s(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def e(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def i(self) -> np.ndarray:
        return self.states[:, 2]

    @property
    def r(self) -> np.ndarray:
        return self.states[:, 3]

    @property
    def v(self) -> np.ndarray:
        return self.states[:, 4]

    @property
    def n(self) -> np.ndarray:
        return self.states.sum(axis=1)

    def state_at(self, k: int) -> State:
        s, e, i, r, v = self.states[k]
        return State(s, e, i, r, v)

    def final_state(self) -> State:
        return self.state_at(len(self.times) - 1)


def rhs(state: State, p: ModelParams) -> StateDerivative:
    """Right-hand side of the SEIRV system at one state.

    The five component derivatives always sum to lam - mu * N.
    """
    s, e, i, r, v = state.as_tuple()
    for name, x in zip("seirv", (s, e, i, r, v)):
        if not math.isfinite(x):
            raise ValueError(f"state component {name} is not finite: {x!r}")
    force = p.beta * s * i
    ds = p.lam - force - p.eta1 * s + p.sigma1 * r + p.sigma2 * v - p.c1 * s - p.mu * s
    de = force - p.alpha * e - p.eta2 * e - p.mu * e
    di = p.alpha * e - p.c2 * i - p.mu * i
    dr = p.eta1 * s + p.eta2 * e + p.c2 * i - p.sigma1 * r - p.mu * r
    dv = p.c1 * s - p.sigma2 * v - p.mu * v
    return StateDerivative(ds, de, di, dr, dv)


def total_population(state: State) -> float:
    """N = S + E + I + R + V."""
    return state.total


def population_bound(p: ModelParams, n0: float) -> float:
    """Upper bound max{N(0), lam/mu} on the total population for all t >= 0."""
    return max(float(n0), p.lam / p.mu)


def population_closed_form(p: ModelParams, n0: float, times: np.ndarray) -> np.ndarray:
    """Exact N(t) = lam/mu + (N0 - lam/mu) * exp(-mu t), valid for any controls."""
    ninf = p.lam / p.mu
    return ninf + (float(n0) - ninf) * np.exp(-p.mu * np.asarray(times, dtype=float))


def _plan_segments(
    n_steps: int,
    dt: float,
    p: ModelParams,
    beta_schedule: Optional[BetaSchedule],
    control_schedule: Optional[ControlSchedule],
) -> Sequence[Tuple[int, int, float, float, float]]:
    """Chunks of constant (beta, c1, c2) as (start_step, end_step, ...) tuples.

    Schedule breakpoints are snapped to the nearest grid index so segment
    boundaries are reproducible; the snapped index is also what selects the
    active segment value (right-open segments).
    """
    snap = lambda t: int(round(t / dt))
    beta_cut_idx = (
        [snap(b) for b in beta_schedule.breakpoints] if beta_schedule is not None else []
    )
    onset_idx = snap(control_schedule.onset) if control_schedule is not None else None

    cuts = {0, n_steps}
    cuts.update(k for k in beta_cut_idx if 0 < k < n_steps)
    if onset_idx is not None and 0 < onset_idx < n_steps:
        cuts.add(onset_idx)
    edges = sorted(cuts)

    plan = []
    for k_lo, k_hi in zip(edges, edges[1:]):
        if beta_schedule is not None:
            beta = beta_schedule.values[bisect_right(beta_cut_idx, k_lo)]
        else:
            beta = p.beta
        if onset_idx is not None:
            c1, c2 = (
                control_schedule.after if k_lo >= onset_idx else control_schedule.before
            )
        else:
            c1, c2 = p.c1, p.c2
        plan.append((k_lo, k_hi, beta, c1, c2))
    return plan


def integrate(
    p: ModelParams,
    init: State,
    horizon: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    beta_schedule: Optional[BetaSchedule] = None,
    control_schedule: Optional[ControlSchedule] = None,
) -> Trajectory:
    """Integrate the SEIRV system over [0, horizon] with classical RK4.

    Schedules, when given, override p.beta and (p.c1, p.c2) piecewise in
    time; the active values are sampled at each step's start time and held
    constant across the RK4 substeps. Raises IntegrationDivergedError naming
    the first bad step if the state stops being finite.
    """
    if not (math.isfinite(horizon) and horizon > 0.0):
        raise ValueError(f"horizon must be > 0, got {horizon!r}")
    dt = cfg.dt
    n_steps = int(round(horizon / dt))
    if n_steps < 1:
        raise ValueError(f"horizon {horizon!r} shorter than one step dt={dt!r}")

    s, e, i, r, v = init.as_tuple()
    n0 = s + e + i + r + v
    clamp_floor = -cfg.tolerance * n0 if cfg.positivity_clamp else None

    s_arr = np.empty(n_steps + 1)
    e_arr = np.empty(n_steps + 1)
    i_arr = np.empty(n_steps + 1)
    r_arr = np.empty(n_steps + 1)
    v_arr = np.empty(n_steps + 1)
    s_arr[0], e_arr[0], i_arr[0], r_arr[0], v_arr[0] = s, e, i, r, v

    plan = _plan_segments(n_steps, dt, p, beta_schedule, control_schedule)

    lam, alpha = p.lam, p.alpha
    eta1, eta2, sig1, sig2, mu = p.eta1, p.eta2, p.sigma1, p.sigma2, p.mu
    h2 = dt * 0.5
    h6 = dt / 6.0

    for k_lo, k_hi, beta, c1, c2 in plan:
        drain = eta1 + c1 + mu
        ae = alpha + eta2 + mu
        ci = c2 + mu
        sr = sig1 + mu
        vr = sig2 + mu

        for k in range(k_lo, k_hi):
            f = beta * s * i
            ds1 = lam - f - drain * s + sig1 * r + sig2 * v
            de1 = f - ae * e
            di1 = alpha * e - ci * i
            dr1 = eta1 * s + eta2 * e + c2 * i - sr * r
            dv1 = c1 * s - vr * v
            s2 = s + h2 * ds1; e2 = e + h2 * de1; i2 = i + h2 * di1
            r2 = r + h2 * dr1; v2 = v + h2 * dv1
            f = beta * s2 * i2
            ds2 = lam - f - drain * s2 + sig1 * r2 + sig2 * v2
            de2 = f - ae * e2
            di2 = alpha * e2 - ci * i2
            dr2 = eta1 * s2 + eta2 * e2 + c2 * i2 - sr * r2
            dv2 = c1 * s2 - vr * v2
            s3 = s + h2 * ds2; e3 = e + h2 * de2; i3 = i + h2 * di2
            r3 = r + h2 * dr2; v3 = v + h2 * dv2
            f = beta * s3 * i3
            ds3 = lam - f - drain * s3 + sig1 * r3 + sig2 * v3
            de3 = f - ae * e3
            di3 = alpha * e3 - ci * i3
            dr3 = eta1 * s3 + eta2 * e3 + c2 * i3 - sr * r3
            dv3 = c1 * s3 - vr * v3
            s4 = s + dt * ds3; e4 = e + dt * de3; i4 = i + dt * di3
            r4 = r + dt * dr3; v4 = v + dt * dv3
            f = beta * s4 * i4
            ds4 = lam - f - drain * s4 + sig1 * r4 + sig2 * v4
            de4 = f - ae * e4
            di4 = alpha * e4 - ci * i4
            dr4 = eta1 * s4 + eta2 * e4 + c2 * i4 - sr * r4
            dv4 = c1 * s4 - vr * v4
            s += h6 * (ds1 + 2.0 * ds2 + 2.0 * ds3 + ds4)
            e += h6 * (de1 + 2.0 * de2 + 2.0 * de3 + de4)
            i += h6 * (di1 + 2.0 * di2 + 2.0 * di3 + di4)
            r += h6 * (dr1 + 2.0 * dr2 + 2.0 * dr3 + dr4)
            v += h6 * (dv1 + 2.0 * dv2 + 2.0 * dv3 + dv4)
            if clamp_floor is not None:
                if clamp_floor < s < 0.0: s = 0.0
                if clamp_floor < e < 0.0: e = 0.0
                if clamp_floor < i < 0.0: i = 0.0
                if clamp_floor < r < 0.0: r = 0.0
                if clamp_floor < v < 0.0: v = 0.0
            tot = s + e + i + r + v
            if not (-1e308 < tot < 1e308):  # catches NaN and overflow at once
                raise IntegrationDivergedError(k + 1, (k + 1) * dt)
            idx = k + 1
            s_arr[idx] = s; e_arr[idx] = e; i_arr[idx] = i
            r_arr[idx] = r; v_arr[idx] = v

    times = np.arange(n_steps + 1) * dt
    states = np.column_stack((s_arr, e_arr, i_arr, r_arr, v_arr))
    return Trajectory(times=times, states=states, dt=dt)
