"""Time integration, energy monitoring and stroboscopic sampling."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Callable

import numpy as np

from . import kernels
from .model import DomainViolation, OscillatorKind, Params, State, takes_kind

_TWO_PI = Decimal("6.28318530717958647692528676655900576839433879875021")


def split_period(omega: float) -> tuple[float, float]:
    """2*pi/omega as ``hi + lo`` with ``hi`` a float32 value, so k*hi is exact."""
    exact = _TWO_PI / Decimal(omega)
    hi = float(np.float32(float(exact)))
    lo = float(exact - Decimal(hi))
    return hi, lo


FIXED_RK4 = "fixed-rk4"
ADAPTIVE = "adaptive-embedded"


class Termination(str, enum.Enum):
    COMPLETED = "completed"
    DOMAIN_VIOLATION = "domain_violation"
    STEP_LIMIT = "step_limit"


_STATUS = {
    kernels.COMPLETED: Termination.COMPLETED,
    kernels.DOMAIN_VIOLATION: Termination.DOMAIN_VIOLATION,
    kernels.STEP_LIMIT: Termination.STEP_LIMIT,
}


@dataclass(frozen=True)
class SolverConfig:
    method: str = ADAPTIVE
    dt: float = 1e-3
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    t_start: float = 0.0
    t_end: float = 100.0
    max_steps: int = 5_000_000
    h0: float = 0.0

    def __post_init__(self):
        if self.method not in (FIXED_RK4, ADAPTIVE):
            raise ValueError(f"method must be {FIXED_RK4!r} or {ADAPTIVE!r}, got {self.method!r}")
        if self.method == FIXED_RK4 and not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.method == ADAPTIVE and not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("rel_tol and abs_tol must be > 0")
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    termination: Termination

    def __len__(self):
        return len(self.t)

    @property
    def states(self) -> list[State]:
        return [State(float(a), float(b)) for a, b in zip(self.x, self.y)]

    @property
    def final(self) -> State:
        return State(float(self.x[-1]), float(self.y[-1]))


@dataclass
class StroboSeries:
    """Section samples taken at t_start + k * 2*pi/omega."""

    k: np.ndarray
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    n_skipped: int
    period: float
    t_start: float
    termination: Termination = Termination.COMPLETED
    settings: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.k)

    @property
    def complete(self) -> bool:
        return self.termination == Termination.COMPLETED

    @property
    def last(self) -> tuple[float, State]:
        """Time and state of the final sample, for continuing a run."""
        return float(self.t[-1]), State(float(self.x[-1]), float(self.y[-1]))


def step_rk4(rhs: Callable[[State, float], tuple], s: State, t: float, dt: float) -> State:
    """Classical fourth-order Runge-Kutta step for ``rhs(state, t) -> (xdot, ydot)``."""
    k1 = rhs(s, t)
    k2 = rhs(State(s.x + 0.5 * dt * k1[0], s.y + 0.5 * dt * k1[1]), t + 0.5 * dt)
    k3 = rhs(State(s.x + 0.5 * dt * k2[0], s.y + 0.5 * dt * k2[1]), t + 0.5 * dt)
    k4 = rhs(State(s.x + dt * k3[0], s.y + dt * k3[1]), t + dt)
    return State(
        s.x + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        s.y + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    )


@takes_kind
def integrate(kind: OscillatorKind, p: Params, ic: State, cfg: SolverConfig | None = None) -> Trajectory:
    """Integrate the (possibly forced, damped) system; never raises on failure.

    Failures are reported through ``Trajectory.termination``; every recorded
    state passed the domain guard.
    """
    cfg = cfg or SolverConfig()
    prm = p.as_tuple(kind)
    if cfg.method == FIXED_RK4:
        ts, xs, ys, st = kernels.rk4_trajectory(
            int(kind), prm, cfg.t_start, cfg.t_end, float(ic.x), float(ic.y), cfg.dt, cfg.max_steps
        )
    else:
        ts, xs, ys, st = kernels.dp5_trajectory(
            int(kind),
            prm,
            cfg.t_start,
            cfg.t_end,
            float(ic.x),
            float(ic.y),
            cfg.rel_tol,
            cfg.abs_tol,
            cfg.max_steps,
            cfg.h0,
        )
    return Trajectory(ts.copy(), xs.copy(), ys.copy(), _STATUS[st])


@takes_kind
def strobe_sample(
    kind: OscillatorKind,
    p: Params,
    ic: State,
    cfg: SolverConfig | None = None,
    n_skip: int = 500,
    n_keep: int = 2000,
) -> StroboSeries:
    """Sample the flow once per forcing period after discarding ``n_skip`` periods.

    Uses the adaptive solver (``cfg.t_end`` is ignored; the horizon follows
    from the sample counts).  If integration dies early the partial series is
    returned with its termination reason.
    """
    cfg = cfg or SolverConfig()
    if n_keep < 1 or n_skip < 0:
        raise ValueError("need n_keep >= 1 and n_skip >= 0")
    if cfg.method != ADAPTIVE:
        raise ValueError("strobe sampling uses dense output of the adaptive method")
    pa, pb = split_period(p.omega)
    ks, tk, xs, ys, count, st = kernels.dp5_strobe(
        int(kind),
        p.as_tuple(kind),
        cfg.t_start,
        float(ic.x),
        float(ic.y),
        pa,
        pb,
        int(n_skip),
        int(n_keep),
        cfg.rel_tol,
        cfg.abs_tol,
        cfg.max_steps,
        cfg.h0,
    )
    return StroboSeries(
        k=ks[:count].copy(),
        t=tk[:count].copy(),
        x=xs[:count].copy(),
        y=ys[:count].copy(),
        n_skipped=int(n_skip),
        period=pa + pb,
        t_start=cfg.t_start,
        termination=_STATUS[st],
        settings={"n_skip": int(n_skip), "n_keep": int(n_keep), "rel_tol": cfg.rel_tol, "abs_tol": cfg.abs_tol},
    )


@takes_kind
def energy_array(kind: OscillatorKind, p: Params, x, y) -> np.ndarray:
    """Vectorised first integral E = y^2/(2u) + V(x), u = 1 + lam x^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u = 1.0 + p.lam * x * x
    if np.any(~(u > kernels.DOMAIN_EPS)):
        raise DomainViolation("energy evaluated outside 1 + lambda*x^2 > domain guard")
    a2 = p.alpha * p.alpha
    if kind == OscillatorKind.QUESNE_I:
        v = 0.5 * (a2 * x * x - 2.0 * p.beta * x) / u
    elif kind == OscillatorKind.QUESNE_II:
        v = 0.5 * (a2 * x * x - 2.0 * p.beta * x * np.sqrt(u)) / u
    else:
        v = 0.5 * a2 * x * x / u
    return 0.5 * y * y / u + v


@takes_kind
def energy_drift(kind: OscillatorKind, p: Params, traj: Trajectory) -> float:
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    e = energy_array(kind, p, traj.x, traj.y)
    return float(np.max(np.abs(e - e[0])))
