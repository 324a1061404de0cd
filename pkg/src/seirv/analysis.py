"""Threshold sensitivity, control-space region maps, and epidemic
characteristics extracted from trajectories.

Sensitivity indices are elasticities of the propagation threshold:
(d rc / d xi) * (xi / rc), evaluated by central finite differences on the
closed-form rc. The index of beta is 0.5 identically (rc grows like
sqrt(beta)), which doubles as a built-in check of the differencing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

import numpy as np

from .equilibria import compute_mfe, compute_rc
from .model import (
    IntegratorConfig,
    ModelParams,
    State,
    Trajectory,
    integrate,
)

__all__ = [
    "SensitivityIndex",
    "RegionMap",
    "EpidemicCharacteristics",
    "ControlSweepTable",
    "SENSITIVITY_PARAMETERS",
    "sensitivity_indices",
    "classify_region",
    "separatrix_c2",
    "region_map",
    "characteristics",
    "sweep_beta",
    "sweep_control",
]

#: Parameters with defined threshold elasticities, in reporting order.
SENSITIVITY_PARAMETERS = ("sigma1", "sigma2", "c1", "c2", "beta", "eta1", "eta2")


@dataclass(frozen=True)
class SensitivityIndex:
    parameter: str
    value: float


@dataclass(frozen=True)
class RegionMap:
    """Extinction/growth labels over a (c1, c2) grid.

    growth[i, j] is True when the threshold exceeds one at
    (c1_grid[i], c2_grid[j]). separatrix[i] is the treatment rate where the
    threshold equals one at c1_grid[i] (may fall outside [0, 1]).
    """

    c1_grid: np.ndarray
    c2_grid: np.ndarray
    growth: np.ndarray
    separatrix: np.ndarray

    @property
    def growth_fraction(self) -> float:
        return float(np.mean(self.growth))


@dataclass(frozen=True)
class EpidemicCharacteristics:
    """Peak infected count, its time, and total infections alpha * int E dt."""

    i_max: float
    t_m: float
    i_tot: float


@dataclass(frozen=True)
class ControlSweepTable:
    """Characteristics over the cross product of beta values and one control."""

    which: str
    beta_values: Tuple[float, ...]
    control_values: Tuple[float, ...]
    cells: Tuple[Tuple[EpidemicCharacteristics, ...], ...]  # [beta][control]


def sensitivity_indices(p: ModelParams, h_rel: float = 1e-6) -> List[SensitivityIndex]:
    """Normalized forward sensitivity indices of rc for all seven parameters.

    Every listed parameter must be positive at the evaluation point; an
    elasticity at zero is undefined.
    """
    if not (0.0 < h_rel < 1.0):
        raise ValueError(f"h_rel must be in (0, 1), got {h_rel!r}")
    zero = [name for name in SENSITIVITY_PARAMETERS if getattr(p, name) == 0.0]
    if zero:
        raise ValueError(
            f"sensitivity index undefined for zero-valued parameter(s): {', '.join(zero)}"
        )
    rc0 = compute_rc(p).rc
    out = []
    for name in SENSITIVITY_PARAMETERS:
        x = getattr(p, name)
        step = h_rel * x
        hi = compute_rc(replace(p, **{name: x + step})).rc
        lo = compute_rc(replace(p, **{name: x - step})).rc
        value = (hi - lo) / (2.0 * step) * (x / rc0)
        out.append(SensitivityIndex(parameter=name, value=value))
    beta_idx = next(ix.value for ix in out if ix.parameter == "beta")
    if abs(beta_idx - 0.5) > 1e-9:
        raise ArithmeticError(
            f"beta elasticity {beta_idx!r} deviates from the analytic value 0.5"
        )
    return out


def classify_region(p: ModelParams, c1: float, c2: float) -> str:
    """"growth" when the threshold exceeds one at (c1, c2), else "extinction".

    Ties within 1e-12 relative go to "extinction".
    """
    if not (0.0 <= c1 <= 1.0 and 0.0 <= c2 <= 1.0):
        raise ValueError(f"controls must lie in [0, 1]^2, got ({c1!r}, {c2!r})")
    pc = p.with_controls(c1, c2)
    s0 = compute_mfe(pc).s0
    lhs = pc.beta * s0 * pc.alpha
    rhs = (pc.c2 + pc.mu) * (pc.alpha + pc.eta2 + pc.mu)
    if lhs - rhs > 1e-12 * max(lhs, rhs):
        return "growth"
    return "extinction"


def separatrix_c2(p: ModelParams, c1: float) -> float:
    """Treatment rate on the rc = 1 curve at vaccination rate c1 (unclipped)."""
    s0 = compute_mfe(p.with_controls(c1, p.c2)).s0
    return p.beta * s0 * p.alpha / (p.alpha + p.eta2 + p.mu) - p.mu


def region_map(p: ModelParams, resolution: int) -> RegionMap:
    """Full extinction/growth grid over [0, 1]^2 plus the separatrix curve."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    c1_grid = np.linspace(0.0, 1.0, resolution)
    c2_grid = np.linspace(0.0, 1.0, resolution)
    growth = np.zeros((resolution, resolution), dtype=bool)
    separatrix = np.empty(resolution)
    w2 = p.alpha + p.eta2 + p.mu
    for i, c1 in enumerate(c1_grid):
        s0 = compute_mfe(p.with_controls(float(c1), 0.0)).s0
        lhs = p.beta * s0 * p.alpha
        separatrix[i] = lhs / w2 - p.mu
        for j, c2 in enumerate(c2_grid):
            rhs = (float(c2) + p.mu) * w2
            growth[i, j] = lhs - rhs > 1e-12 * max(lhs, rhs)
    return RegionMap(c1_grid=c1_grid, c2_grid=c2_grid, growth=growth, separatrix=separatrix)


def characteristics(traj: Trajectory, p: ModelParams) -> EpidemicCharacteristics:
    """Peak infected, time of peak (earliest grid index on ties), and
    total infections alpha * int E dt by trapezoid on the grid."""
    if len(traj.times) == 0:
        raise ValueError("trajectory is empty")
    i = traj.i
    k = int(np.argmax(i))  # argmax returns the first maximal index
    e = traj.e
    int_e = traj.dt * (float(np.sum(e)) - 0.5 * (float(e[0]) + float(e[-1])))
    return EpidemicCharacteristics(
        i_max=float(i[k]), t_m=float(traj.times[k]), i_tot=p.alpha * int_e
    )


def sweep_beta(
    p: ModelParams,
    beta_grid: Sequence[float],
    init: State,
    horizon: float,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> List[EpidemicCharacteristics]:
    """Characteristics per transmission rate over an ascending positive grid."""
    grid = [float(b) for b in beta_grid]
    if any(b <= 0.0 for b in grid) or any(b2 <= b1 for b1, b2 in zip(grid, grid[1:])):
        raise ValueError("beta grid must be ascending and positive")
    out = []
    for beta in grid:
        traj = integrate(replace(p, beta=beta), init, horizon, cfg)
        out.append(characteristics(traj, p))
    return out


def sweep_control(
    p: ModelParams,
    which: str,
    grid: Sequence[float],
    beta_values: Sequence[float],
    init: State,
    horizon: float,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> ControlSweepTable:
    """Characteristics over beta x control-strength, for one control at a time.

    The other control is held at its value in p.
    """
    if which not in ("c1", "c2"):
        raise ValueError(f"which must be 'c1' or 'c2', got {which!r}")
    cvals = [float(c) for c in grid]
    if any(not 0.0 <= c <= 1.0 for c in cvals):
        raise ValueError("control grid must lie in [0, 1]")
    rows = []
    for beta in beta_values:
        row = []
        for c in cvals:
            pb = replace(p, beta=float(beta), **{which: c})
            traj = integrate(pb, init, horizon, cfg)
            row.append(characteristics(traj, pb))
        rows.append(tuple(row))
    return ControlSweepTable(
        which=which,
        beta_values=tuple(float(b) for b in beta_values),
        control_values=tuple(cvals),
        cells=tuple(rows),
    )
