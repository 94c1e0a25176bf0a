"""Experiments on top of the integrators: return maps, regime labels, sweeps."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as spi
from scipy import optimize
from scipy.cluster.hierarchy import fcluster, linkage

from . import kernels
from .integrate import SolverConfig, StroboSeries, Termination, integrate, strobe_sample
from .model import (
    DOMAIN_EPS,
    LinearClass,
    ModelError,
    OscillatorKind,
    Params,
    State,
    energy,
    equilibria,
    potential,
    takes_kind,
)

DEFAULT_IC = State(0.1, 0.1)
EPS_CLUSTER = 1e-3
LAMBDA_THRESHOLD = 0.005
MAX_PERIOD = 32
MIN_SAMPLES = 200
SCALE_FLOOR = 1.0
CONVERGENCE_REL = 0.2
CONVERGENCE_ABS = 1e-3


class AnalysisError(Exception):
    pass


class NonConvergent(AnalysisError):
    pass


class InsufficientData(AnalysisError):
    pass


class Regime(str, enum.Enum):
    PERIODIC = "periodic"
    QUASIPERIODIC = "quasiperiodic"
    CHAOTIC = "chaotic"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class AttractorClass:
    label: Regime
    period: int | None = None
    cluster_count: int | None = None
    lyapunov_estimate: float | None = None

    def __str__(self):
        if self.label == Regime.PERIODIC:
            return f"periodic({self.period})"
        return self.label.value


@dataclass
class LyapunovEstimate:
    lambda_max: float
    n_renorm: int
    d0: float
    tau: float
    convergence_series: np.ndarray
    termination: Termination = Termination.COMPLETED

    @property
    def tail(self) -> np.ndarray:
        s = self.convergence_series
        return s[len(s) // 2 :]

    @property
    def spread(self) -> float:
        tail = self.tail
        return float(tail.max() - tail.min()) if len(tail) else math.nan

    @property
    def sigma(self) -> float:
        tail = self.tail
        return float(tail.std()) if len(tail) else math.nan

    @property
    def converged(self) -> bool:
        if self.termination != Termination.COMPLETED or len(self.tail) == 0:
            return False
        return self.spread <= max(CONVERGENCE_REL * abs(self.lambda_max), CONVERGENCE_ABS)


@dataclass
class BifurcationData:
    grid: np.ndarray
    points: np.ndarray  # (n, 2) rows of (gamma, y), ordered by (gamma, k)
    failures: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)

    def column(self, gamma: float) -> np.ndarray:
        return self.points[self.points[:, 0] == gamma, 1]


@dataclass(frozen=True)
class EquilibriumVerdict:
    x_star: float
    confined: bool
    t_escape: float | None
    max_excursion: float
    energy_local_min: bool

    def __str__(self):
        return "confined" if self.confined else f"escaped({self.t_escape:.6g})"


@takes_kind
def poincare_map(
    kind: OscillatorKind,
    p: Params,
    ic: State = DEFAULT_IC,
    cfg: SolverConfig | None = None,
    n_skip: int = 500,
    n_keep: int = 2000,
) -> StroboSeries:
    return strobe_sample(kind, p, ic, cfg, n_skip, n_keep)


@takes_kind
def lyapunov_max(
    kind: OscillatorKind,
    p: Params,
    ic: State,
    d0: float = 1e-8,
    tau: float | None = None,
    n_renorm: int = 2000,
    *,
    t_start: float = 0.0,
    n_transient: int = 0,
    cfg: SolverConfig | None = None,
    strict: bool = True,
) -> LyapunovEstimate:
    """Largest Lyapunov exponent by two-trajectory renormalisation.

    The companion starts ``d0`` away and is pulled back to that distance every
    ``tau`` time units; the estimate is the mean of the second half of the
    running average of log growth rates.  ``n_transient`` forcing periods are
    integrated first when the IC is not already on the attractor.  With
    ``strict`` a non-converged estimate raises :class:`NonConvergent`.
    """
    if not 0.0 < d0 <= 1e-4:
        raise ValueError(f"d0 must lie in (0, 1e-4], got {d0}")
    if n_renorm < 2:
        raise ValueError("n_renorm must be >= 2")
    cfg = cfg or SolverConfig()
    tau = p.period if tau is None else float(tau)
    if not tau > 0:
        raise ValueError("tau must be positive")
    t0 = t_start
    if n_transient > 0:
        pre = strobe_sample(kind, p, ic, SolverConfig(rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol, t_start=t_start), n_transient, 1)
        if not pre.complete:
            raise ModelError(f"transient integration ended with {pre.termination.value}")
        t0, ic = pre.last
    series, done, st = kernels.dp5_lyapunov(
        int(kind),
        p.as_tuple(kind),
        float(t0),
        float(ic.x),
        float(ic.y),
        float(d0),
        tau,
        int(n_renorm),
        cfg.rel_tol,
        cfg.abs_tol,
        cfg.max_steps * 10,
        cfg.h0,
    )
    series = series[:done].copy()
    tail = series[len(series) // 2 :]
    est = LyapunovEstimate(
        lambda_max=float(tail.mean()) if len(tail) else math.nan,
        n_renorm=done,
        d0=d0,
        tau=tau,
        convergence_series=series,
        termination={0: Termination.COMPLETED, 1: Termination.DOMAIN_VIOLATION, 2: Termination.STEP_LIMIT}[st],
    )
    if strict and est.termination != Termination.COMPLETED:
        raise ModelError(f"Lyapunov run ended with {est.termination.value} after {done} renormalisations")
    if strict and not est.converged:
        raise NonConvergent(
            f"running average spread {est.spread:.3g} exceeds {CONVERGENCE_REL:.0%} of |{est.lambda_max:.3g}|"
        )
    return est


def cluster_points(x, y, eps: float = EPS_CLUSTER, scale_floor: float = SCALE_FLOOR, max_clusters: int = MAX_PERIOD):
    """Single-linkage clusters of section points.

    Coordinates are divided by one scale, max(std x, std y, scale_floor).
    Returns ``(n_clusters, max_radius)`` where the radius of a cluster is the
    largest distance of a member to its centroid, in scaled units.  When the
    linkage yields more than ``max_clusters`` groups the radius is not
    computed and ``inf`` is returned.
    """
    pts = np.column_stack([np.asarray(x, float), np.asarray(y, float)])
    if len(pts) == 1:
        return 1, 0.0
    scale = max(float(pts[:, 0].std()), float(pts[:, 1].std()), scale_floor)
    z = pts / scale
    labels = fcluster(linkage(z, method="single"), t=eps, criterion="distance")
    n = int(labels.max())
    if n > max_clusters:
        return n, math.inf
    radius = 0.0
    for lab in range(1, n + 1):
        members = z[labels == lab]
        c = members.mean(axis=0)
        radius = max(radius, float(np.sqrt(((members - c) ** 2).sum(axis=1)).max()))
    return n, radius


def classify_attractor(
    series: StroboSeries,
    lyap: LyapunovEstimate | None,
    *,
    eps_cluster: float = EPS_CLUSTER,
    lambda_threshold: float = LAMBDA_THRESHOLD,
    max_period: int = MAX_PERIOD,
    min_samples: int = MIN_SAMPLES,
    scale_floor: float = SCALE_FLOOR,
) -> AttractorClass:
    """Label a section cloud as periodic(p), chaotic or quasiperiodic.

    Periodic wins when the points fall into at most ``max_period`` tight
    clusters; otherwise a positive exponent above ``lambda_threshold`` means
    chaotic and anything else is quasiperiodic.  A missing or unconverged
    exponent gives ``undetermined``.
    """
    if len(series) < min_samples:
        raise InsufficientData(f"{len(series)} section samples; need at least {min_samples}")
    n, radius = cluster_points(series.x, series.y, eps_cluster, scale_floor, max_period)
    lam = None if lyap is None else lyap.lambda_max
    if n <= max_period and radius < eps_cluster:
        return AttractorClass(Regime.PERIODIC, period=n, cluster_count=n, lyapunov_estimate=lam)
    if lyap is None or not lyap.converged:
        return AttractorClass(Regime.UNDETERMINED, cluster_count=n, lyapunov_estimate=lam)
    if lam > lambda_threshold:
        return AttractorClass(Regime.CHAOTIC, cluster_count=n, lyapunov_estimate=lam)
    return AttractorClass(Regime.QUASIPERIODIC, cluster_count=n, lyapunov_estimate=lam)


@dataclass
class Diagnosis:
    series: StroboSeries
    lyapunov: LyapunovEstimate | None
    regime: AttractorClass


@takes_kind
def diagnose(
    kind: OscillatorKind,
    p: Params,
    ic: State = DEFAULT_IC,
    cfg: SolverConfig | None = None,
    n_skip: int = 500,
    n_keep: int = 2000,
    d0: float = 1e-8,
    n_renorm: int = 2000,
    **classify_kw,
) -> Diagnosis:
    """Return map, Lyapunov estimate from the end of the map, and the regime."""
    series = poincare_map(kind, p, ic, cfg, n_skip, n_keep)
    lyap = None
    if series.complete:
        t_last, s_last = series.last
        lyap_cfg = cfg or SolverConfig()
        lyap = lyapunov_max(kind, p, s_last, d0, p.period, n_renorm, t_start=t_last, cfg=lyap_cfg, strict=False)
    if len(series) < classify_kw.get("min_samples", MIN_SAMPLES):
        regime = AttractorClass(Regime.UNDETERMINED)
    else:
        regime = classify_attractor(series, lyap, **classify_kw)
    return Diagnosis(series, lyap, regime)


def _sweep_one(args):
    kind, p, ic, cfg, n_skip, n_keep = args
    return strobe_sample(kind, p, ic, cfg, n_skip, n_keep)


@takes_kind
def bifurcation_sweep(
    kind: OscillatorKind,
    p_base: Params,
    gamma_grid,
    ic: State = DEFAULT_IC,
    cfg: SolverConfig | None = None,
    n_skip: int = 500,
    n_keep: int = 200,
    workers: int = 1,
) -> BifurcationData:
    """Kept section y-values for every damping value in ``gamma_grid``.

    Each gamma is an independent run from the same IC, so the output does not
    depend on ``workers``; rows are ordered by (gamma, k).
    """
    grid = np.asarray(gamma_grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("gamma_grid must be a nonempty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("gamma_grid must be strictly ascending")
    cfg = cfg or SolverConfig()
    jobs = [(kind, p_base.with_(gamma=float(g)), ic, cfg, n_skip, n_keep) for g in grid]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    blocks = []
    failures = {}
    for g, res in zip(grid, results):
        if not res.complete:
            failures[float(g)] = res.termination.value
        blocks.append(np.column_stack([np.full(len(res), g), res.y]))
    points = np.vstack(blocks) if blocks else np.empty((0, 2))
    return BifurcationData(
        grid=grid,
        points=points,
        failures=failures,
        settings={"n_skip": n_skip, "n_keep": n_keep, "ic": (ic.x, ic.y), "rel_tol": cfg.rel_tol, "abs_tol": cfg.abs_tol},
    )


@takes_kind
def verify_equilibrium(
    kind: OscillatorKind,
    p: Params,
    eq,
    radius: float | None = None,
    horizon: float = 100.0,
    *,
    n_ring: int = 8,
    seed: int | None = None,
    cfg: SolverConfig | None = None,
) -> EquilibriumVerdict:
    """Nonlinear check of an equilibrium by direct simulation.

    A ring of ``n_ring`` ICs at distance ``radius`` is integrated for
    ``horizon`` time units; the point counts as confined when every orbit
    stays within ``10 * radius``.  Separately reports whether (x*, 0) is a
    strict minimum of E on a 5x5 grid of spacing ``radius / 2``.
    """
    if p.gamma != 0.0 or p.f != 0.0:
        raise ValueError("verify_equilibrium needs the conservative system (gamma = f = 0)")
    x_star = float(eq.x_star)
    if radius is None:
        radius = 1e-2 * max(1.0, abs(x_star))
    phase = 0.0 if seed is None else float(np.random.default_rng(seed).uniform(0.0, 2.0 * math.pi))
    base = cfg or SolverConfig()
    run_cfg = SolverConfig(
        method=base.method,
        dt=base.dt,
        rel_tol=base.rel_tol,
        abs_tol=base.abs_tol,
        t_start=0.0,
        t_end=horizon,
        max_steps=base.max_steps,
    )
    limit = 10.0 * radius
    t_escape = None
    worst = 0.0
    for j in range(n_ring):
        ang = phase + 2.0 * math.pi * j / n_ring
        ic = State(x_star + radius * math.cos(ang), radius * math.sin(ang))
        if not 1.0 + p.lam * ic.x * ic.x > DOMAIN_EPS:
            t_escape = 0.0
            worst = math.inf
            continue
        tr = integrate(kind, p, ic, run_cfg)
        dist = np.hypot(tr.x - x_star, tr.y)
        worst = max(worst, float(dist.max()))
        out = np.nonzero(dist > limit)[0]
        t_hit = None
        if len(out):
            t_hit = float(tr.t[out[0]])
        elif tr.termination != Termination.COMPLETED:
            t_hit = float(tr.t[-1])
            worst = math.inf
        if t_hit is not None and (t_escape is None or t_hit < t_escape):
            t_escape = t_hit
    return EquilibriumVerdict(
        x_star=x_star,
        confined=t_escape is None,
        t_escape=t_escape,
        max_excursion=worst,
        energy_local_min=_energy_local_min(kind, p, x_star, radius / 2.0),
    )


def _energy_local_min(kind, p, x_star, spacing):
    try:
        e0 = energy(kind, p, State(x_star, 0.0))
        for i in range(-2, 3):
            for j in range(-2, 3):
                if i == 0 and j == 0:
                    continue
                if energy(kind, p, State(x_star + i * spacing, j * spacing)) <= e0:
                    return False
    except ModelError:
        return False
    return True


def _centre(kind, p):
    centres = [
        e
        for e in equilibria(kind, p, fixed_points_only=True)
        if e.linear_class == LinearClass.CENTER
    ]
    if not centres:
        raise AnalysisError("no in-domain centre to orbit around")
    return min(centres, key=lambda e: abs(e.x_star))


def _right_limit(p, xc):
    if p.lam < 0:
        return math.sqrt((1.0 - 1e-6) / -p.lam)
    return xc + 10.0 * max(1.0, abs(xc))


@takes_kind
def orbit_period(kind: OscillatorKind, p: Params, x_right: float, method: str = "auto") -> float:
    """Period of the conservative orbit whose right turning point is ``x_right``.

    For ML and Quesne I the period is closed-form,
    T = 2 pi sqrt((1 + lam x_r^2) / (alpha^2 + 2 beta lam x_r)).
    ``method="quad"`` forces the generic quadrature route, which is the only
    route for Quesne II.
    """
    if p.gamma != 0.0 or p.f != 0.0:
        raise ValueError("orbit periods are defined for the conservative system only")
    xc = _centre(kind, p).x_star
    if not x_right > xc:
        raise ValueError("x_right must lie to the right of the centre")
    beta = 0.0 if kind == OscillatorKind.ML else p.beta
    a2 = p.alpha * p.alpha
    if method == "auto" and kind != OscillatorKind.QUESNE_II:
        u_r = 1.0 + p.lam * x_right * x_right
        den = a2 + 2.0 * beta * p.lam * x_right
        x_left = -(a2 * x_right - 2.0 * beta) / den if den > 0 else math.nan
        if not (u_r > DOMAIN_EPS and den > 0 and 1.0 + p.lam * x_left * x_left > DOMAIN_EPS):
            raise AnalysisError(f"no closed orbit through x = {x_right}")
        return 2.0 * math.pi * math.sqrt(u_r / den)
    return _period_quad(kind, p, xc, x_right)


def _period_quad(kind, p, xc, x_right):
    e = potential(kind, p, x_right)

    def gap(x):
        return potential(kind, p, x) - e

    lo_lim = -math.sqrt((1.0 - 1e-6) / -p.lam) if p.lam < 0 else -math.inf
    step = x_right - xc
    lo = xc - step
    while True:
        if lo <= lo_lim:
            lo = lo_lim
            if gap(lo) <= 0:
                raise AnalysisError(f"no closed orbit through x = {x_right}")
            break
        if gap(lo) > 0:
            break
        step *= 2.0
        lo = xc - step
    x_left = optimize.brentq(gap, lo, xc, xtol=1e-15, rtol=1e-15)
    mid = 0.5 * (x_left + x_right)
    half = 0.5 * (x_right - x_left)

    def integrand(th):
        x = mid + half * math.sin(th)
        u = 1.0 + p.lam * x * x
        d = e - potential(kind, p, x)
        if d <= 0:
            return 0.0
        return half * math.cos(th) / math.sqrt(2.0 * u * d)

    val, _ = spi.quad(integrand, -0.5 * math.pi, 0.5 * math.pi, epsabs=1e-13, epsrel=1e-12, limit=400)
    return 2.0 * val


@takes_kind
def commensurate_orbit_ic(kind: OscillatorKind, p: Params, n_grid: int = 400) -> tuple[State, int]:
    """Turning point of the smallest conservative orbit whose period is 2 pi/(m omega).

    Sampled once per forcing period such an orbit shows up as a single
    section point.  Returns the IC ``(x_r, 0)`` and the integer ``m``.
    """
    q = p.with_(gamma=0.0, f=0.0)
    xc = _centre(kind, q).x_star
    hi = _right_limit(q, xc)
    xs = xc + (hi - xc) * np.linspace(1e-6, 1.0, n_grid) ** 2
    freqs = []
    for x in xs:
        try:
            freqs.append(2.0 * math.pi / orbit_period(kind, q, float(x)))
        except (AnalysisError, ValueError, ModelError):
            break
    freqs = np.array(freqs) / q.omega
    for i in range(len(freqs) - 1):
        a, b = sorted((freqs[i], freqs[i + 1]))
        m = math.ceil(a)
        if m >= 1 and m <= b:

            def mismatch(x, m=m):
                return 2.0 * math.pi / orbit_period(kind, q, x) / q.omega - m

            x_r = optimize.brentq(mismatch, float(xs[i]), float(xs[i + 1]), xtol=1e-15, rtol=1e-15)
            return State(x_r, 0.0), m
    raise AnalysisError("no orbit with period commensurate to the forcing period found")
