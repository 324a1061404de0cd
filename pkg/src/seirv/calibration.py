"""Data-driven calibration: SSE fitting of piecewise transmission rates with a
Nelder-Mead simplex, goodness-of-fit reporting, and averted-cases analysis.

The fitted observable is cumulative infections alpha * int_0^t E dt (total
entries into the infected compartment), matching count data aggregated from
detections. Daily fits are derived by differencing the cumulative series.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateObjectiveError
from .model import (
    BetaSchedule,
    ControlSchedule,
    IntegratorConfig,
    ModelParams,
    State,
    integrate,
)

__all__ = [
    "ObservationSeries",
    "NelderMeadConfig",
    "FitResult",
    "DailyOverlay",
    "AvertedCurve",
    "BETA_FIT_BOUNDS",
    "load_series",
    "model_cumulative",
    "sse",
    "reflect_point",
    "nelder_mead",
    "fit_beta_segments",
    "goodness",
    "averted_cases",
    "generate_synthetic",
]

#: Box bounds for per-segment transmission rates during fitting.
BETA_FIT_BOUNDS = (1e-12, 1e-6)


@dataclass(frozen=True)
class ObservationSeries:
    """Observed infection counts at strictly increasing times.

    kind is "cumulative" (counts nondecreasing) or "daily" (new counts per
    observation interval).
    """

    times: Tuple[float, ...]
    cumulative: Tuple[float, ...]
    kind: str = "cumulative"

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        counts = tuple(float(y) for y in self.cumulative)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "cumulative", counts)
        if self.kind not in ("cumulative", "daily"):
            raise ValueError(f"kind must be 'cumulative' or 'daily', got {self.kind!r}")
        if len(times) != len(counts) or len(times) == 0:
            raise ValueError("times and counts must be nonempty and equal-length")
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("observation times must be strictly increasing")
        if any(y < 0.0 or not math.isfinite(y) for y in counts):
            raise ValueError("counts must be finite and >= 0")
        if self.kind == "cumulative" and any(
            y2 < y1 for y1, y2 in zip(counts, counts[1:])
        ):
            raise ValueError("cumulative counts must be nondecreasing")

    def as_cumulative(self) -> "ObservationSeries":
        """This series with daily counts prefix-summed into cumulative ones."""
        if self.kind == "cumulative":
            return self
        running = np.cumsum(self.cumulative)
        return ObservationSeries(self.times, tuple(running), kind="cumulative")

    def as_daily(self) -> "ObservationSeries":
        """Differences of a cumulative series (first value kept as-is)."""
        if self.kind == "daily":
            return self
        y = np.asarray(self.cumulative)
        daily = np.concatenate(([y[0]], np.diff(y)))
        return ObservationSeries(self.times, tuple(daily), kind="daily")


@dataclass(frozen=True)
class NelderMeadConfig:
    """Simplex coefficients and stopping rules."""

    alpha: float = 1.0      # reflection
    gamma: float = 2.0      # expansion
    rho: float = 0.5        # contraction
    sigma: float = 0.5      # shrink
    tol_f: float = 1e-8
    tol_x: float = 1e-8
    max_iter: int = 2000
    initial_spread: float = 0.1

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ValueError("reflection alpha must be > 0")
        if not self.gamma > 1.0:
            raise ValueError("expansion gamma must be > 1")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("contraction rho must lie in (0, 1)")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError("shrink sigma must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class FitResult:
    beta_segments: BetaSchedule
    sse: float
    residuals: Tuple[float, ...]
    r_squared: float
    fitted: Tuple[float, ...]
    warnings: Tuple[str, ...] = ()


@dataclass(frozen=True)
class DailyOverlay:
    """Daily-count view of a cumulative fit, with its own R^2."""

    observed: Tuple[float, ...]
    fitted: Tuple[float, ...]
    r_squared: float


@dataclass(frozen=True)
class AvertedCurve:
    """Cases averted as a function of the intervention onset time.

    decay_fit holds (amplitude, rate) of the least-squares fit
    amplitude * exp(-rate * onset); decay_r2 is its coefficient of
    determination on the original scale (NaN when the curve is degenerate).
    """

    onsets: Tuple[float, ...]
    averted: Tuple[float, ...]
    decay_fit: Tuple[float, float]
    decay_r2: float


def load_series(path, kind: str = "cumulative") -> ObservationSeries:
    """Read a `time,count` CSV into an observation series.

    Raises ValueError with the offending line number on malformed rows.
    """
    times: List[float] = []
    counts: List[float] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["time", "count"]:
            raise ValueError(f"{path}: expected header 'time,count', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                times.append(float(row[0]))
                counts.append(float(row[1]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return ObservationSeries(tuple(times), tuple(counts), kind=kind)


def model_cumulative(
    p: ModelParams,
    beta_schedule: Optional[BetaSchedule],
    init: State,
    sample_times: Sequence[float],
    cfg: IntegratorConfig = IntegratorConfig(),
    control_schedule: Optional[ControlSchedule] = None,
) -> np.ndarray:
    """Cumulative infections alpha * int_0^t E dt at the requested times.

    The running integral is trapezoidal on the integration grid and linearly
    interpolated between grid points.
    """
    ts = np.asarray(sample_times, dtype=float)
    if ts.size == 0:
        raise ValueError("sample_times must be nonempty")
    horizon = max(float(ts[-1]), cfg.dt)
    traj = integrate(p, init, horizon, cfg, beta_schedule=beta_schedule,
                     control_schedule=control_schedule)
    e = traj.e
    running = np.concatenate(([0.0], np.cumsum(0.5 * (e[1:] + e[:-1]) * traj.dt)))
    return p.alpha * np.interp(ts, traj.times, running)


def sse(
    series: ObservationSeries,
    p: ModelParams,
    beta_schedule: Optional[BetaSchedule],
    init: State,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> float:
    """Sum of squared errors between observed and model cumulative counts."""
    obs = series.as_cumulative()
    y = np.asarray(obs.cumulative)
    yhat = model_cumulative(p, beta_schedule, init, obs.times, cfg)
    return float(np.sum((y - yhat) ** 2))


def reflect_point(centroid: np.ndarray, worst: np.ndarray, alpha: float) -> np.ndarray:
    """Reflected simplex point: centroid + alpha * (centroid - worst)."""
    return centroid + alpha * (centroid - worst)


def _clip(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.minimum(hi, np.maximum(lo, x))


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    start: Sequence[float],
    bounds: Sequence[Tuple[float, float]],
    cfg: NelderMeadConfig = NelderMeadConfig(),
) -> Tuple[np.ndarray, float, int]:
    """Minimize a scalar function over a box with the Nelder-Mead simplex.

    Candidate points are projected into the box before evaluation, so no
    returned point ever leaves it. Returns (argmin, minimum, iterations).
    """
    x0 = np.asarray(start, dtype=float)
    dim = x0.size
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    if np.any(lo >= hi):
        raise ValueError("each bound must satisfy lo < hi")
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ValueError("start must lie inside the bounds")

    def f(x: np.ndarray) -> float:
        v = objective(x)
        return float(v) if math.isfinite(v) else math.inf

    simplex = [x0]
    for j in range(dim):
        step = cfg.initial_spread * (abs(x0[j]) if x0[j] != 0.0 else 1.0)
        vert = x0.copy()
        vert[j] += step
        if vert[j] > hi[j]:
            vert[j] = x0[j] - step
        simplex.append(_clip(vert, lo, hi))
    values = [f(v) for v in simplex]
    if all(math.isinf(v) for v in values):
        raise DegenerateObjectiveError(
            "objective is non-finite at every initial simplex vertex"
        )

    iters = 0
    while iters < cfg.max_iter:
        order = np.argsort(values, kind="stable")
        simplex = [simplex[k] for k in order]
        values = [values[k] for k in order]
        diam = max(float(np.max(np.abs(v - simplex[0]))) for v in simplex[1:])
        if diam < cfg.tol_x or values[-1] - values[0] < cfg.tol_f:
            break
        iters += 1

        centroid = np.mean(simplex[:-1], axis=0)
        xr = _clip(reflect_point(centroid, simplex[-1], cfg.alpha), lo, hi)
        fr = f(xr)
        if fr < values[0]:
            xe = _clip(centroid + cfg.gamma * (centroid - simplex[-1]), lo, hi)
            fe = f(xe)
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
        elif fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
        else:
            if fr < values[-1]:  # contract outside, toward the reflection
                xc = _clip(centroid + cfg.rho * (xr - centroid), lo, hi)
            else:  # contract inside, toward the worst vertex
                xc = _clip(centroid + cfg.rho * (simplex[-1] - centroid), lo, hi)
            fc = f(xc)
            if fc < min(fr, values[-1]):
                simplex[-1], values[-1] = xc, fc
            else:  # shrink everything toward the best vertex
                simplex = [simplex[0]] + [
                    _clip(simplex[0] + cfg.sigma * (v - simplex[0]), lo, hi)
                    for v in simplex[1:]
                ]
                values = [values[0]] + [f(v) for v in simplex[1:]]

    best = int(np.argmin(values))
    return simplex[best], values[best], iters


def _r_squared(y: np.ndarray, yhat: np.ndarray) -> float:
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        raise ValueError("R^2 undefined: observations have zero variance")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


def fit_beta_segments(
    series: ObservationSeries,
    p: ModelParams,
    segment_length: float = 7.0,
    init: State = State(1e9, 0.0, 1.0, 0.0, 0.0),
    nm: NelderMeadConfig = NelderMeadConfig(),
    cfg: IntegratorConfig = IntegratorConfig(),
) -> FitResult:
    """Estimate a piecewise-constant transmission rate from count data.

    One beta per consecutive segment of the given length, optimized jointly
    in log space over BETA_FIT_BOUNDS by minimizing the total SSE; controls
    are held at zero during fitting. Ties in SSE (within tol_f) resolve
    toward the lower beta bound, the parsimonious no-transmission reading of
    flat data.
    """
    if not segment_length > 0.0:
        raise ValueError("segment_length must be > 0")
    obs = series.as_cumulative()
    t_last = obs.times[-1]
    if t_last <= 0.0:
        raise ValueError("series must extend past t = 0")
    n_seg = max(1, math.ceil(t_last / segment_length - 1e-12))
    breakpoints = tuple(segment_length * k for k in range(1, n_seg))

    warnings = []
    counts_per_seg = np.histogram(
        obs.times, bins=np.concatenate(([0.0], breakpoints, [t_last + segment_length]))
    )[0]
    if np.any(counts_per_seg < 2):
        warnings.append(
            "under-determined: fewer than 2 observations in at least one segment"
        )

    p_fit = p.with_controls(0.0, 0.0)
    log_lo, log_hi = math.log10(BETA_FIT_BOUNDS[0]), math.log10(BETA_FIT_BOUNDS[1])
    start_log = min(max(math.log10(p.beta), log_lo), log_hi) if p.beta > 0 else log_lo

    def objective(log_betas: np.ndarray) -> float:
        sched = BetaSchedule(breakpoints, tuple(10.0**b for b in log_betas))
        return sse(obs, p_fit, sched, init, cfg)

    start = np.full(n_seg, start_log)
    bounds = [(log_lo, log_hi)] * n_seg
    argmin, fmin, _ = nelder_mead(objective, start, bounds, nm)

    floor = np.full(n_seg, log_lo)
    if objective(floor) <= fmin + nm.tol_f:
        argmin = floor

    schedule = BetaSchedule(breakpoints, tuple(10.0**b for b in argmin))
    y = np.asarray(obs.cumulative)
    yhat = model_cumulative(p_fit, schedule, init, obs.times, cfg)
    residuals = y - yhat
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = math.nan if ss_tot == 0.0 else 1.0 - float(np.sum(residuals**2)) / ss_tot
    return FitResult(
        beta_segments=schedule,
        sse=float(np.sum(residuals**2)),
        residuals=tuple(residuals),
        r_squared=r2,
        fitted=tuple(yhat),
        warnings=tuple(warnings),
    )


def goodness(
    fit: FitResult, series: ObservationSeries
) -> Tuple[Tuple[float, ...], float, DailyOverlay]:
    """Residuals and R^2 of a fit, plus the implied daily-count overlay."""
    obs = series.as_cumulative()
    y = np.asarray(obs.cumulative)
    yhat = np.asarray(fit.fitted)
    if y.size != yhat.size:
        raise ValueError("fit is not aligned with the series")
    residuals = tuple(y - yhat)
    r2 = _r_squared(y, yhat)
    dy = np.diff(y)
    dyhat = np.diff(yhat)
    daily = DailyOverlay(
        observed=tuple(dy), fitted=tuple(dyhat), r_squared=_r_squared(dy, dyhat)
    )
    return residuals, r2, daily


def _exponential_fit(
    x: np.ndarray, y: np.ndarray
) -> Tuple[Tuple[float, float], float]:
    """Least-squares fit of amplitude * exp(-rate * x), R^2 on original scale."""
    pos = y > 0.0
    if int(np.sum(pos)) < 2:
        return (0.0, 0.0), math.nan
    # Log-linear start, then a simplex polish of the true squared error.
    coeff = np.polyfit(x[pos], np.log(y[pos]), 1)
    a0 = float(np.exp(coeff[1]))
    b0 = float(-coeff[0])

    def objective(q: np.ndarray) -> float:
        amp, rate = q
        return float(np.sum((y - amp * np.exp(-rate * x)) ** 2))

    span = float(x[-1] - x[0]) if x[-1] > x[0] else 1.0
    ymax = float(np.max(y))
    bounds = [(0.0, 10.0 * ymax + 1.0), (-100.0 / span, 100.0 / span)]
    start = np.array([min(max(a0, 0.0), bounds[0][1]), min(max(b0, bounds[1][0]), bounds[1][1])])
    argmin, _, _ = nelder_mead(
        objective, start, bounds, NelderMeadConfig(tol_f=1e-12, tol_x=1e-12, max_iter=800)
    )
    amp, rate = float(argmin[0]), float(argmin[1])
    yfit = amp * np.exp(-rate * x)
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = math.nan if ss_tot == 0.0 else 1.0 - float(np.sum((y - yfit) ** 2)) / ss_tot
    return (amp, rate), r2


def averted_cases(
    p: ModelParams,
    controls: Tuple[float, float],
    onsets: Sequence[float],
    init: State,
    horizon: float,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> AvertedCurve:
    """Total cases averted by starting the given controls at each onset time.

    averted(t0) = i_tot(never intervened) - i_tot(controls from t0 on), with
    i_tot = alpha * int_0^horizon E dt. The curve is summarized by a
    least-squares exponential-decay fit.
    """
    ts = [float(t) for t in onsets]
    if any(t < 0.0 for t in ts) or any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])):
        raise ValueError("onsets must be nonnegative and strictly increasing")
    p0 = p.with_controls(0.0, 0.0)

    def i_tot(control_schedule: Optional[ControlSchedule]) -> float:
        traj = integrate(p0, init, horizon, cfg, control_schedule=control_schedule)
        e = traj.e
        return p.alpha * traj.dt * (float(np.sum(e)) - 0.5 * (float(e[0]) + float(e[-1])))

    baseline = i_tot(None)
    averted = []
    for t0 in ts:
        sched = ControlSchedule(onset=t0, before=(0.0, 0.0), after=controls)
        averted.append(baseline - i_tot(sched))
    x = np.asarray(ts)
    y = np.asarray(averted)
    decay_fit, decay_r2 = _exponential_fit(x, y)
    return AvertedCurve(
        onsets=tuple(ts), averted=tuple(averted), decay_fit=decay_fit, decay_r2=decay_r2
    )


def generate_synthetic(
    p: ModelParams,
    beta_schedule: Optional[BetaSchedule],
    init: State,
    sample_times: Sequence[float],
    noise_sigma: float,
    seed: int,
    relative: bool = False,
    monotone: bool = True,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> ObservationSeries:
    """Cumulative model output at sample_times plus Gaussian observation noise.

    noise_sigma is an absolute standard deviation, or a fraction of each
    count when relative=True. monotone clamps the noisy series to stay
    nondecreasing and nonnegative. Deterministic per seed.
    """
    if noise_sigma < 0.0:
        raise ValueError("noise_sigma must be >= 0")
    yhat = model_cumulative(p, beta_schedule, init, sample_times, cfg)
    rng = np.random.default_rng(seed)
    scale = noise_sigma * np.abs(yhat) if relative else noise_sigma
    y = yhat + rng.normal(0.0, 1.0, size=yhat.size) * scale
    if monotone:
        y = np.maximum.accumulate(np.maximum(y, 0.0))
    return ObservationSeries(tuple(float(t) for t in sample_times), tuple(y),
                             kind="cumulative")
