"""Canonical parameter sets for regenerating every figure panel as data.

A panel is one of three shapes: ``portrait`` (one or more orbits, CSV
``orbit,t,x,y,E``), ``strobe`` (section samples, CSV ``k,x,y``) or
``bifurcation`` (CSV ``gamma,y``).  Initial conditions were not published
with the figures; the ones below are this package's choices and are written
into the manifest next to every panel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import DEFAULT_IC, bifurcation_sweep, commensurate_orbit_ic, diagnose
from .integrate import SolverConfig, energy_array, integrate
from .model import OscillatorKind, Params, State, equilibria

QI = OscillatorKind.QUESNE_I
QII = OscillatorKind.QUESNE_II

FORCED_BASE = Params(lam=-0.5, alpha=2.0, beta=0.1, gamma=0.0, f=5.0, omega=1.0)
# section falls on three closed curves at beta = 0.001
FG4_QUASI_IC = State(-0.4, -2.25)
PORTRAIT_PERIODS = 100


@dataclass
class Panel:
    panel_id: str
    shape: str
    kind: OscillatorKind
    params: Params
    ics: list = field(default_factory=list)
    t_end: float = 40.0
    n_skip: int = 500
    n_keep: int = 2000
    gamma_grid: tuple = ()
    note: str = ""
    ic_rule: str = "fixed"


def _forced(**kw):
    return FORCED_BASE.with_(**kw)


def _portrait(pid, p, ic=DEFAULT_IC, note="", ic_rule="fixed"):
    return Panel(pid, "portrait", QI, p, [ic], t_end=PORTRAIT_PERIODS * p.period, note=note, ic_rule=ic_rule)


def _strobe(pid, p, ic=DEFAULT_IC, note="", ic_rule="fixed"):
    return Panel(pid, "strobe", QI, p, [ic], note=note, ic_rule=ic_rule)


def _ring_ics(centres, offsets):
    return [State(c + d, 0.0) for c in centres for d in offsets]


def _fg1(pid, lam):
    p = Params(lam=lam, alpha=1.0, beta=0.34)
    eqs = [e for e in equilibria(QI, p) if e.in_domain]
    ics = []
    for e in eqs:
        if e.linear_class.value == "center":
            ics += [State(e.x_star + a, 0.0) for a in (0.1, 0.3, 0.6)]
        else:
            ics += [State(e.x_star + a, b) for a, b in ((0.5, 0.0), (-0.5, 0.0), (0.0, 0.2), (0.0, -0.2))]
    return Panel(pid, "portrait", QI, p, ics, t_end=40.0, note="orbits around each in-domain equilibrium")


def _fg3(pid, lam):
    p = Params(lam=lam, alpha=1.0, beta=0.34)
    centres = [e.x_star for e in equilibria(QII, p)]
    return Panel(
        pid,
        "portrait",
        QII,
        p,
        _ring_ics(centres, (0.05, 0.15)),
        t_end=40.0,
        note="orbits launched next to both closed-form roots; only the positive one is a fixed point",
    )


def build_panels() -> dict[str, Panel]:
    fg5_free = _forced(f=0.0)
    panels = [
        _fg1("fg1a", 0.5),
        _fg1("fg1b", -0.5),
        _fg3("fg3a", 0.5),
        _fg3("fg3b", -0.5),
        _portrait("fg4a", _forced(beta=0.001), FG4_QUASI_IC),
        _strobe("fg4b", _forced(beta=0.001), FG4_QUASI_IC),
        _portrait("fg4c", _forced(beta=0.1)),
        _strobe("fg4d", _forced(beta=0.1)),
        _portrait("fg4a_beta0.01", _forced(beta=0.01), FG4_QUASI_IC, note="beta = 0.01 is discussed but not plotted"),
        _strobe("fg4b_beta0.01", _forced(beta=0.01), FG4_QUASI_IC, note="beta = 0.01 is discussed but not plotted"),
        _portrait("fg5a", fg5_free, note="orbit whose period divides 2 pi/omega", ic_rule="commensurate"),
        _strobe("fg5b", fg5_free, note="orbit whose period divides 2 pi/omega", ic_rule="commensurate"),
        _portrait("fg5c", _forced(f=3.0)),
        _strobe("fg5d", _forced(f=3.0)),
        _portrait("fg5e", _forced(f=5.0)),
        _strobe("fg5f", _forced(f=5.0)),
        _portrait("fg6a", _forced(gamma=0.002)),
        _strobe("fg6b", _forced(gamma=0.002)),
        _portrait("fg6c", _forced(gamma=0.02)),
        _strobe("fg6d", _forced(gamma=0.02)),
        _portrait("fg6e", _forced(gamma=0.1)),
        _portrait("fg6f", _forced(gamma=0.1), note="time series of y"),
        Panel(
            "fg7",
            "bifurcation",
            QI,
            _forced(gamma=0.0),
            [DEFAULT_IC],
            n_skip=500,
            n_keep=100,
            gamma_grid=tuple(float(g) for g in np.round(np.linspace(0.001, 0.15, 150), 12)),
        ),
    ]
    return {p.panel_id: p for p in panels}


PANELS = build_panels()


def resolve_ics(panel: Panel) -> list[State]:
    if panel.ic_rule == "commensurate":
        ic, _ = commensurate_orbit_ic(panel.kind, panel.params)
        return [ic]
    return list(panel.ics)


def run_panel(panel: Panel, cfg: SolverConfig | None = None, workers: int = 1):
    """Compute a panel.  Returns ``(header, rows, info)`` ready for CSV output."""
    cfg = cfg or SolverConfig()
    ics = resolve_ics(panel)
    info = {"ics": [[ic.x, ic.y] for ic in ics]}
    if panel.shape == "portrait":
        rows = []
        terms = []
        run_cfg = SolverConfig(rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol, t_start=0.0, t_end=panel.t_end, max_steps=cfg.max_steps)
        for i, ic in enumerate(ics):
            tr = integrate(panel.kind, panel.params, ic, run_cfg)
            e = energy_array(panel.kind, panel.params, tr.x, tr.y)
            rows += [(i, a, b, c, d) for a, b, c, d in zip(tr.t, tr.x, tr.y, e)]
            terms.append(tr.termination.value)
        info["termination"] = terms
        info["t_end"] = panel.t_end
        return ("orbit", "t", "x", "y", "E"), rows, info
    if panel.shape == "strobe":
        d = diagnose(panel.kind, panel.params, ics[0], cfg, panel.n_skip, panel.n_keep)
        info.update(
            n_skip=panel.n_skip,
            n_keep=panel.n_keep,
            regime=str(d.regime),
            lambda_max=None if d.lyapunov is None else d.lyapunov.lambda_max,
            termination=d.series.termination.value,
        )
        rows = list(zip(d.series.k.tolist(), d.series.x, d.series.y))
        return ("k", "x", "y"), rows, info
    data = bifurcation_sweep(
        panel.kind, panel.params, panel.gamma_grid, ics[0], cfg, panel.n_skip, panel.n_keep, workers=workers
    )
    info.update(n_skip=panel.n_skip, n_keep=panel.n_keep, failures=data.failures, gamma_grid=list(panel.gamma_grid))
    return ("gamma", "y"), [tuple(r) for r in data.points], info


def panel_manifest(panel: Panel, info: dict, cfg: SolverConfig) -> dict:
    p = panel.params
    return {
        "panel": panel.panel_id,
        "shape": panel.shape,
        "kind": panel.kind.label,
        "params": {"lambda": p.lam, "alpha": p.alpha, "beta": p.beta, "gamma": p.gamma, "f": p.f, "omega": p.omega},
        "solver": {"method": cfg.method, "rel_tol": cfg.rel_tol, "abs_tol": cfg.abs_tol, "max_steps": cfg.max_steps},
        "ic_rule": panel.ic_rule,
        "note": panel.note,
        "forcing_period": 2.0 * math.pi / p.omega,
        **info,
    }
