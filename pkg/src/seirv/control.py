"""Optimal control of the SEIRV system.

cost() evaluates J(c1, c2) = k0 * int_0^T I(t) dt + k1 c1 + k2 c2 with
k0 = m0 / (T * n_tilde). gradient() obtains dJ/dc by solving the adjoint
system backward along the forward trajectory, and hybrid_optimize() drives
the projected-gradient + simulated-annealing global search.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from .model import (
    IntegratorConfig,
    ModelParams,
    State,
    Trajectory,
    integrate,
    population_bound,
)

__all__ = [
    "CostParams",
    "AdjointTrajectory",
    "GradientVector",
    "SAConfig",
    "OptimRun",
    "cost",
    "solve_adjoint",
    "gradient",
    "hybrid_optimize",
    "effort_split",
    "temperature_schedule",
]

Controls = Tuple[float, float]


@dataclass(frozen=True)
class CostParams:
    """Weights of the control objective.

    m0 prices the average infected fraction, k1/k2 the two controls;
    k0 = m0 / (horizon * n_tilde) scales the infection integral, where
    n_tilde = max{N(0), lam/mu} bounds the population.
    """

    m0: float
    k1: float
    k2: float
    horizon: float
    n_tilde: float

    def __post_init__(self):
        for name in ("m0", "k1", "k2", "horizon", "n_tilde"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")

    @property
    def k0(self) -> float:
        return self.m0 / (self.horizon * self.n_tilde)

    @classmethod
    def for_run(
        cls, p: ModelParams, init: State, m0: float, k1: float, k2: float, horizon: float
    ) -> "CostParams":
        return cls(m0=m0, k1=k1, k2=k2, horizon=horizon,
                   n_tilde=population_bound(p, init.total))


@dataclass(frozen=True)
class AdjointTrajectory:
    """Adjoint solution on the forward grid; h[-1] is identically zero."""

    times: np.ndarray
    h: np.ndarray  # shape (n_points, 5)


@dataclass(frozen=True)
class GradientVector:
    g1: float
    g2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.g1, self.g2])


@dataclass(frozen=True)
class SAConfig:
    """Hybrid optimizer settings.

    t0/cooling/n_cool/n_perturb drive the annealing phase; eps_k and delta_k
    are the acceptance tolerances of the gradient and annealing phases;
    step_eta is the initial descent step (halved up to 20 times until a step
    improves by more than eps_k). accept_rule "scaled" uses the acceptance
    probability T * exp(-delta/T); "classical" drops the leading T factor.
    """

    t0: float = 0.02
    cooling: float = 0.9
    n_cool: int = 30
    n_perturb: int = 20
    eps_k: float = 1e-6
    delta_k: float = 1e-6
    step_eta: float = 0.05
    rng_seed: int = 0
    max_outer: int = 20
    accept_rule: str = "scaled"
    grad_steps: int = 100

    def __post_init__(self):
        if not self.t0 > 0.0:
            raise ValueError("t0 must be > 0")
        if not 0.0 < self.cooling < 1.0:
            raise ValueError("cooling must lie in (0, 1)")
        for name in ("n_cool", "n_perturb", "max_outer", "grad_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("eps_k", "delta_k"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if not self.step_eta > 0.0:
            raise ValueError("step_eta must be > 0")
        if self.accept_rule not in ("scaled", "classical"):
            raise ValueError("accept_rule must be 'scaled' or 'classical'")


@dataclass(frozen=True)
class OptimRun:
    """Every accepted move of one optimizer run, plus the incumbent optimum."""

    history: Tuple[Tuple[float, float, float], ...]  # (c1, c2, J)
    phase_tags: Tuple[str, ...]
    optimum: Controls
    j_star: float


def temperature_schedule(sa: SAConfig, n: int) -> List[float]:
    """Temperature before each of the first n cooling steps: t0 * cooling**k."""
    return [sa.t0 * sa.cooling**k for k in range(n)]


def _project(c: Controls) -> Controls:
    return (min(1.0, max(0.0, c[0])), min(1.0, max(0.0, c[1])))


def _trapezoid(y: np.ndarray, dt: float) -> float:
    return dt * (float(np.sum(y)) - 0.5 * (float(y[0]) + float(y[-1])))


def cost(
    p: ModelParams,
    cp: CostParams,
    c: Controls,
    init: State,
    cfg: IntegratorConfig,
) -> float:
    """Objective J at constant controls c over [0, cp.horizon]."""
    c1, c2 = c
    if not (0.0 <= c1 <= 1.0 and 0.0 <= c2 <= 1.0):
        raise ValueError(f"controls must lie in [0, 1]^2, got {c!r}")
    traj = integrate(p.with_controls(c1, c2), init, cp.horizon, cfg)
    return cp.k0 * _trapezoid(traj.i, traj.dt) + cp.k1 * c1 + cp.k2 * c2


def solve_adjoint(forward: Trajectory, p: ModelParams, c: Controls) -> AdjointTrajectory:
    """Solve the adjoint system backward from H(T) = 0 along the forward run.

    dH/dt = -A(t)^T H + (0, 0, 1, 0, 0)^T, where A is the system Jacobian;
    its state-dependent entries (beta*I, beta*S) are read off the forward
    trajectory, with linear interpolation at the RK4 half-steps.
    """
    n = len(forward.times) - 1
    if n < 1:
        raise ValueError("forward trajectory must contain at least one step")
    dt = forward.dt
    if abs((forward.times[-1] - forward.times[0]) - n * dt) > 1e-9 * max(1.0, n * dt):
        raise ValueError("forward trajectory grid is not uniform with step dt")
    c1, c2 = c
    s_arr = forward.s
    i_arr = forward.i

    beta, alpha = p.beta, p.alpha
    eta1, eta2, sig1, sig2, mu = p.eta1, p.eta2, p.sigma1, p.sigma2, p.mu
    ae = alpha + eta2 + mu
    ci = c2 + mu
    sr = sig1 + mu
    vr = sig2 + mu

    out = np.empty((n + 1, 5))
    out[n] = 0.0
    h1 = h2 = h3 = h4 = h5 = 0.0
    hneg = -dt
    for k in range(n, 0, -1):
        s_hi, i_hi = s_arr[k], i_arr[k]
        s_lo, i_lo = s_arr[k - 1], i_arr[k - 1]
        s_mid, i_mid = 0.5 * (s_hi + s_lo), 0.5 * (i_hi + i_lo)

        bi = beta * i_hi; bs = beta * s_hi
        a1 = (bi + eta1 + c1 + mu) * h1 - bi * h2 - eta1 * h4 - c1 * h5
        a2 = ae * h2 - alpha * h3 - eta2 * h4
        a3 = bs * (h1 - h2) + ci * h3 - c2 * h4 + 1.0
        a4 = -sig1 * h1 + sr * h4
        a5 = -sig2 * h1 + vr * h5

        u1 = h1 + 0.5 * hneg * a1; u2 = h2 + 0.5 * hneg * a2; u3 = h3 + 0.5 * hneg * a3
        u4 = h4 + 0.5 * hneg * a4; u5 = h5 + 0.5 * hneg * a5
        bi = beta * i_mid; bs = beta * s_mid
        b1 = (bi + eta1 + c1 + mu) * u1 - bi * u2 - eta1 * u4 - c1 * u5
        b2 = ae * u2 - alpha * u3 - eta2 * u4
        b3 = bs * (u1 - u2) + ci * u3 - c2 * u4 + 1.0
        b4 = -sig1 * u1 + sr * u4
        b5 = -sig2 * u1 + vr * u5

        u1 = h1 + 0.5 * hneg * b1; u2 = h2 + 0.5 * hneg * b2; u3 = h3 + 0.5 * hneg * b3
        u4 = h4 + 0.5 * hneg * b4; u5 = h5 + 0.5 * hneg * b5
        c1_ = (bi + eta1 + c1 + mu) * u1 - bi * u2 - eta1 * u4 - c1 * u5
        c2_ = ae * u2 - alpha * u3 - eta2 * u4
        c3_ = bs * (u1 - u2) + ci * u3 - c2 * u4 + 1.0
        c4_ = -sig1 * u1 + sr * u4
        c5_ = -sig2 * u1 + vr * u5

        u1 = h1 + hneg * c1_; u2 = h2 + hneg * c2_; u3 = h3 + hneg * c3_
        u4 = h4 + hneg * c4_; u5 = h5 + hneg * c5_
        bi = beta * i_lo; bs = beta * s_lo
        d1 = (bi + eta1 + c1 + mu) * u1 - bi * u2 - eta1 * u4 - c1 * u5
        d2 = ae * u2 - alpha * u3 - eta2 * u4
        d3 = bs * (u1 - u2) + ci * u3 - c2 * u4 + 1.0
        d4 = -sig1 * u1 + sr * u4
        d5 = -sig2 * u1 + vr * u5

        w = hneg / 6.0
        h1 += w * (a1 + 2.0 * b1 + 2.0 * c1_ + d1)
        h2 += w * (a2 + 2.0 * b2 + 2.0 * c2_ + d2)
        h3 += w * (a3 + 2.0 * b3 + 2.0 * c3_ + d3)
        h4 += w * (a4 + 2.0 * b4 + 2.0 * c4_ + d4)
        h5 += w * (a5 + 2.0 * b5 + 2.0 * c5_ + d5)
        out[k - 1] = (h1, h2, h3, h4, h5)

    return AdjointTrajectory(times=forward.times, h=out)


def gradient(
    p: ModelParams,
    cp: CostParams,
    c: Controls,
    init: State,
    cfg: IntegratorConfig,
) -> GradientVector:
    """Adjoint-based gradient of the objective at constant controls c.

    g1 = k1 - k0 * int (H5 - H1) S dt, g2 = k2 - k0 * int (H4 - H3) I dt,
    with trapezoid quadrature on the shared grid.
    """
    c1, c2 = c
    if not (0.0 <= c1 <= 1.0 and 0.0 <= c2 <= 1.0):
        raise ValueError(f"controls must lie in [0, 1]^2, got {c!r}")
    traj = integrate(p.with_controls(c1, c2), init, cp.horizon, cfg)
    adj = solve_adjoint(traj, p, c)
    h = adj.h
    int_s = _trapezoid((h[:, 4] - h[:, 0]) * traj.s, traj.dt)
    int_i = _trapezoid((h[:, 3] - h[:, 2]) * traj.i, traj.dt)
    return GradientVector(g1=cp.k1 - cp.k0 * int_s, g2=cp.k2 - cp.k0 * int_i)


def _hybrid_minimize(
    cost_fn: Callable[[Controls], float],
    grad_fn: Callable[[Controls], Controls],
    start: Controls,
    sa: SAConfig,
) -> OptimRun:
    """Generic hybrid driver over [0, 1]^2; see hybrid_optimize for the rules."""
    rng = random.Random(sa.rng_seed)
    c = _project(start)
    j = cost_fn(c)
    history: List[Tuple[float, float, float]] = [(c[0], c[1], j)]
    tags: List[str] = ["start"]
    best_c, best_j = c, j

    def record(point: Controls, value: float, tag: str) -> None:
        nonlocal best_c, best_j
        history.append((point[0], point[1], value))
        tags.append(tag)
        if value < best_j:
            best_c, best_j = point, value

    for _ in range(sa.max_outer):
        best_before = best_j

        # Gradient-based local search, restarted from the incumbent.
        c, j = best_c, best_j
        for _ in range(sa.grad_steps):
            g1, g2 = grad_fn(c)
            eta = sa.step_eta
            moved = False
            for _ in range(20):
                cand = _project((c[0] - eta * g1, c[1] - eta * g2))
                if cand == c:
                    eta *= 0.5
                    continue
                jc = cost_fn(cand)
                if j - jc > sa.eps_k:
                    c, j = cand, jc
                    record(c, j, "gradient")
                    moved = True
                    break
                eta *= 0.5
            if not moved:
                break

        # Simulated-annealing phase.
        for cool in range(sa.n_cool):
            temp = sa.t0 * sa.cooling**cool
            for _ in range(sa.n_perturb):
                if rng.random() < 0.5:  # re-randomize a single coordinate
                    if rng.random() < 0.5:
                        cand = (rng.random(), c[1])
                    else:
                        cand = (c[0], rng.random())
                else:  # re-randomize both
                    cand = (rng.random(), rng.random())
                cand = _project(cand)
                jc = cost_fn(cand)
                delta = jc - j
                if delta < -sa.delta_k:
                    accept = True
                else:
                    r = rng.random()
                    if sa.accept_rule == "scaled":
                        accept = r < temp * math.exp(-delta / temp)
                    else:
                        accept = r < math.exp(-delta / temp)
                if accept:
                    c, j = cand, jc
                    record(c, j, "anneal")

        if best_before - best_j <= sa.eps_k:
            break

    return OptimRun(
        history=tuple(history),
        phase_tags=tuple(tags),
        optimum=best_c,
        j_star=best_j,
    )


def hybrid_optimize(
    p: ModelParams,
    cp: CostParams,
    start: Controls,
    sa: SAConfig,
    init: State,
    cfg: IntegratorConfig,
) -> OptimRun:
    """Global search alternating projected-gradient descent and annealing.

    The gradient phase repeats descent steps from the incumbent best point,
    backtracking on the step size, and keeps only moves that lower J by more
    than eps_k. The annealing phase re-randomizes one or both control
    coordinates uniformly in [0, 1] for n_perturb draws per cooling step,
    accepting improvements beyond delta_k and otherwise accepting against a
    uniform draw with the configured temperature rule. The outer loop stops
    when neither phase improves the best J by more than eps_k, or after
    max_outer rounds. Deterministic for a fixed rng_seed.
    """

    def cost_fn(c: Controls) -> float:
        return cost(p, cp, c, init, cfg)

    def grad_fn(c: Controls) -> Controls:
        g = gradient(p, cp, c, init, cfg)
        return (g.g1, g.g2)

    return _hybrid_minimize(cost_fn, grad_fn, start, sa)


def effort_split(opt: Controls) -> Tuple[float, float]:
    """Relative shares of the two controls in the total effort."""
    c1, c2 = opt
    total = c1 + c2
    if total <= 0.0:
        raise ValueError("effort shares undefined: both controls are zero")
    share1 = c1 / total
    # second share as the complement so the pair sums to one exactly
    return (share1, 1.0 - share1)
