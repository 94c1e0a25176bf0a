"""Command-line front end.

Every subcommand takes its settings from flags and/or a flat ``key = value``
file (``--config``); flags win.  Output is plain CSV written with ``repr``
floats so files are locale-independent and byte-stable.

Exit codes: 0 success, 1 usage error, 2 constraint or domain violation,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    AnalysisError,
    bifurcation_sweep,
    diagnose,
    lyapunov_max,
    verify_equilibrium,
)
from .figures import PANELS, panel_manifest, run_panel
from .integrate import ADAPTIVE, FIXED_RK4, SolverConfig, Termination, energy_array, integrate
from .model import (
    ModelError,
    NoEquilibria,
    NotApplicable,
    OscillatorKind,
    ParameterError,
    Params,
    State,
    closed_form_eigs,
    equilibria,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONSTRAINT = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class ConstraintError(Exception):
    pass


class NumericalFailure(Exception):
    pass


@dataclasses.dataclass
class RunConfig:
    kind: str = "QuesneI"
    lam: float = -0.5
    alpha: float = 2.0
    beta: float = 0.1
    gamma: float = 0.0
    f: float = 0.0
    omega: float = 1.0
    x0: float = 0.1
    y0: float = 0.1
    method: str = ADAPTIVE
    dt: float = 1e-3
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    t_start: float = 0.0
    t_end: float = 100.0
    max_steps: int = 5_000_000
    n_skip: int = 500
    n_keep: int = 2000
    gamma_min: float = 0.001
    gamma_max: float = 0.15
    gamma_n: int = 150
    workers: int = 1
    d0: float = 1e-8
    tau: float = 0.0
    n_renorm: int = 2000
    n_transient: int = 0
    radius: float = 0.0
    horizon: float = 100.0
    n_ring: int = 8
    seed: int = 0
    output: str = "-"

    def oscillator(self) -> OscillatorKind:
        return OscillatorKind.parse(self.kind)

    def params(self) -> Params:
        return Params(lam=self.lam, alpha=self.alpha, beta=self.beta, gamma=self.gamma, f=self.f, omega=self.omega)

    def ic(self) -> State:
        return State(self.x0, self.y0)

    def solver(self) -> SolverConfig:
        return SolverConfig(
            method=self.method,
            dt=self.dt,
            rel_tol=self.rel_tol,
            abs_tol=self.abs_tol,
            t_start=self.t_start,
            t_end=self.t_end,
            max_steps=self.max_steps,
        )

    def validate(self):
        """Build every derived object once so bad input fails before any work."""
        self.oscillator()
        self.params()
        try:
            self.solver()
        except ValueError as exc:
            raise ParameterError(str(exc)) from None
        for name in ("n_keep", "gamma_n", "workers", "n_renorm", "n_ring"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1")
        for name in ("n_skip", "n_transient"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")
        if not self.gamma_max > self.gamma_min >= 0.0:
            raise ParameterError("need 0 <= gamma_min < gamma_max")
        if self.tau < 0 or self.radius < 0 or not self.horizon > 0:
            raise ParameterError("tau and radius must be >= 0 (0 = default) and horizon > 0")


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_CASTS = {"float": float, "int": int, "str": str}


def _coerce(name: str, raw):
    cast = _CASTS[_FIELDS[name].type]
    try:
        return cast(raw)
    except (TypeError, ValueError):
        raise UsageError(f"{name}: cannot read {raw!r} as {_FIELDS[name].type}") from None


def read_config_file(path: str | Path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment.  Unknown keys are errors."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def build_config(file_values: dict, flag_values: dict) -> RunConfig:
    merged = {**file_values, **{k: v for k, v in flag_values.items() if v is not None}}
    unknown = set(merged) - set(_FIELDS)
    if unknown:
        raise UsageError(f"unknown keys: {', '.join(sorted(unknown))}")
    cfg = RunConfig(**merged)
    cfg.validate()
    return cfg


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def fmt_eig(pair) -> str:
    z = complex(pair[0])
    if z.imag != 0.0 and z.real == 0.0:
        return f"+/-{abs(z.imag)!r}i"
    return f"+/-{abs(z.real)!r}"


@contextmanager
def _sink(path: str):
    if path in ("-", ""):
        yield sys.stdout
        sys.stdout.flush()
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        yield fh


def write_csv(fh, header, rows, comments_before=(), comments_after=()):
    for c in comments_before:
        fh.write(f"# {c}\n")
    fh.write(",".join(header) + "\n")
    for r in rows:
        fh.write(",".join(fmt(v) for v in r) + "\n")
    for c in comments_after:
        fh.write(f"# {c}\n")


def _eig_agree(a, b, tol=1e-9) -> bool:
    za, zb = complex(a[0]), complex(b[0])
    return abs(abs(za.real) - abs(zb.real)) <= tol * max(1.0, abs(zb)) and abs(
        abs(za.imag) - abs(zb.imag)
    ) <= tol * max(1.0, abs(zb))


def cmd_fixed_points(cfg: RunConfig, out) -> int:
    kind, p = cfg.oscillator(), cfg.params()
    try:
        eqs = equilibria(kind, p)
    except NoEquilibria as exc:
        raise ConstraintError(f"no equilibria: {exc}") from None
    header = (
        "branch",
        "x_star",
        "a21",
        "eig_numeric",
        "eig_closed_form",
        "linear_class",
        "closed_form_agrees",
        "in_domain",
        "is_fixed_point",
    )
    out.write(",".join(header) + "\n")
    for e in eqs:
        try:
            cf = closed_form_eigs(kind, p, e.branch)
            cf_text, agree = fmt_eig(cf), fmt(_eig_agree(e.eigenvalues, cf))
        except (NotApplicable, NoEquilibria):
            cf_text, agree = "n/a", "n/a"
        out.write(
            ",".join(
                [
                    e.branch,
                    fmt(e.x_star),
                    fmt(e.a21),
                    fmt_eig(e.eigenvalues),
                    cf_text,
                    e.linear_class.value,
                    agree,
                    fmt(e.in_domain),
                    fmt(e.is_fixed_point),
                ]
            )
            + "\n"
        )
    return EXIT_OK


def _termination_code(term: Termination) -> int:
    if term == Termination.COMPLETED:
        return EXIT_OK
    if term == Termination.DOMAIN_VIOLATION:
        return EXIT_CONSTRAINT
    return EXIT_NUMERIC


def cmd_simulate(cfg: RunConfig, out) -> int:
    kind, p = cfg.oscillator(), cfg.params()
    if not 1.0 + p.lam * cfg.x0 * cfg.x0 > 0.0:
        raise ConstraintError(f"initial x0 = {cfg.x0} violates 1 + lambda*x^2 > 0")
    tr = integrate(kind, p, cfg.ic(), cfg.solver())
    e = energy_array(kind, p, tr.x, tr.y)
    write_csv(out, ("t", "x", "y", "E"), zip(tr.t, tr.x, tr.y, e), comments_after=[f"termination: {tr.termination.value}"])
    code = _termination_code(tr.termination)
    if code:
        print(f"integration stopped early at t = {fmt(tr.t[-1])}: {tr.termination.value}", file=sys.stderr)
    return code


def cmd_poincare(cfg: RunConfig, out) -> int:
    kind, p = cfg.oscillator(), cfg.params()
    d = diagnose(kind, p, cfg.ic(), cfg.solver(), cfg.n_skip, cfg.n_keep, d0=cfg.d0, n_renorm=cfg.n_renorm)
    lam = "nan" if d.lyapunov is None else fmt(d.lyapunov.lambda_max)
    comments = [
        f"n_skip: {cfg.n_skip}",
        f"n_keep: {cfg.n_keep}",
        f"regime: {d.regime}",
        f"lambda_max: {lam}",
    ]
    after = [] if d.series.complete else [f"termination: {d.series.termination.value}"]
    write_csv(out, ("k", "x", "y"), zip(d.series.k, d.series.x, d.series.y), comments, after)
    return _termination_code(d.series.termination)


def gamma_grid(cfg: RunConfig) -> np.ndarray:
    return np.round(np.linspace(cfg.gamma_min, cfg.gamma_max, cfg.gamma_n), 12)


def cmd_bifurcation(cfg: RunConfig, out) -> int:
    kind, p = cfg.oscillator(), cfg.params()
    data = bifurcation_sweep(kind, p, gamma_grid(cfg), cfg.ic(), cfg.solver(), cfg.n_skip, cfg.n_keep, workers=cfg.workers)
    after = [f"failed gamma {fmt(g)}: {why}" for g, why in data.failures.items()]
    write_csv(out, ("gamma", "y"), data.points, comments_after=after)
    return EXIT_NUMERIC if data.failures else EXIT_OK


def cmd_lyapunov(cfg: RunConfig, out) -> int:
    kind, p = cfg.oscillator(), cfg.params()
    est = lyapunov_max(
        kind,
        p,
        cfg.ic(),
        cfg.d0,
        cfg.tau or None,
        cfg.n_renorm,
        t_start=cfg.t_start,
        n_transient=cfg.n_transient,
        cfg=cfg.solver(),
        strict=False,
    )
    write_csv(out, ("i", "running_average"), enumerate(est.convergence_series))
    report = f"lambda_max = {est.lambda_max!r} +/- {est.spread!r} (last-half spread, {est.n_renorm} renormalisations)"
    print(report, file=sys.stderr if out is sys.stdout else sys.stdout)
    if est.termination != Termination.COMPLETED:
        print(f"run ended with {est.termination.value}", file=sys.stderr)
        return _termination_code(est.termination)
    if not est.converged:
        print("estimate did not converge: last-half spread too large", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_verify_equilibrium(cfg: RunConfig, out) -> int:
    kind, p = cfg.oscillator(), cfg.params()
    if p.gamma != 0.0 or p.f != 0.0:
        raise ConstraintError("verify-equilibrium needs gamma = 0 and f = 0")
    try:
        eqs = equilibria(kind, p, fixed_points_only=True)
    except NoEquilibria as exc:
        raise ConstraintError(f"no equilibria: {exc}") from None
    out.write("x_star,linear_class,verdict,max_excursion,energy_local_min\n")
    for e in eqs:
        v = verify_equilibrium(
            kind, p, e, cfg.radius or None, cfg.horizon, n_ring=cfg.n_ring, seed=cfg.seed, cfg=cfg.solver()
        )
        out.write(
            f"{fmt(e.x_star)},{e.linear_class.value},{v},{fmt(v.max_excursion)},{fmt(v.energy_local_min)}\n"
        )
    return EXIT_OK


def cmd_reproduce(panel_ids: list[str], cfg: RunConfig, out_dir: str) -> int:
    ids = list(PANELS) if panel_ids == ["all"] else panel_ids
    bad = [i for i in ids if i not in PANELS]
    if bad:
        raise UsageError(f"unknown panel(s) {', '.join(bad)}; choose from {', '.join(PANELS)} or 'all'")
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    solver = SolverConfig(rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol, max_steps=cfg.max_steps)
    manifest_path = root / "manifest.json"
    manifest = {}
    if manifest_path.exists():
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            manifest = {}
    code = EXIT_OK
    for pid in ids:
        panel = PANELS[pid]
        header, rows, info = run_panel(panel, solver, workers=cfg.workers)
        csv_path = root / f"{pid}.csv"
        with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
            write_csv(fh, header, rows)
        entry = panel_manifest(panel, info, solver)
        entry["csv"] = csv_path.name
        entry["version"] = __version__
        manifest[pid] = entry
        terms = info.get("termination", [])
        terms = terms if isinstance(terms, list) else [terms]
        if any(t != Termination.COMPLETED.value for t in terms) or info.get("failures"):
            code = EXIT_NUMERIC
        summary = info.get("regime", "")
        print(f"{pid}: {csv_path} {summary}".rstrip())
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_FLAG_HELP = {
    "kind": "ML, QuesneI or QuesneII",
    "lam": "deformation strength lambda (nonzero)",
    "method": f"{ADAPTIVE} or {FIXED_RK4}",
    "tau": "renormalisation interval (0 = one forcing period)",
    "radius": "ring radius for verify-equilibrium (0 = automatic)",
    "output": "output file, '-' for stdout",
}


def _add_run_flags(sp):
    sp.add_argument("--config", help="flat key = value file; flags override it")
    for name, fld in _FIELDS.items():
        sp.add_argument(
            "--" + name.replace("_", "-"),
            dest=name,
            type=_CASTS[fld.type],
            default=None,
            help=_FLAG_HELP.get(name, f"default {fld.default!r}"),
        )


COMMANDS = {
    "fixed-points": cmd_fixed_points,
    "simulate": cmd_simulate,
    "poincare": cmd_poincare,
    "bifurcation": cmd_bifurcation,
    "lyapunov": cmd_lyapunov,
    "verify-equilibrium": cmd_verify_equilibrium,
}


HELP = {
    "fixed-points": "equilibria with A21, eigenvalues and linear class",
    "simulate": "trajectory CSV (t, x, y, E)",
    "poincare": "stroboscopic section with regime label",
    "bifurcation": "(gamma, y) cloud over a damping grid",
    "lyapunov": "largest Lyapunov exponent by renormalisation",
    "verify-equilibrium": "nonlinear stability check on a ring of nearby starts",
}


def make_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qlienard", description="Quadratic Lienard oscillators: equilibria, orbits and chaos diagnostics.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        _add_run_flags(sub.add_parser(name, help=HELP[name]))
    rp = sub.add_parser("reproduce", help="regenerate figure panels as CSV")
    rp.add_argument("panels", nargs="+", help=f"panel ids ({', '.join(PANELS)}) or 'all'")
    rp.add_argument("--out-dir", default="figures", help="directory for CSVs and manifest.json")
    _add_run_flags(rp)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    ns = ap.parse_args(argv)
    flags = {k: getattr(ns, k) for k in _FIELDS}
    try:
        file_values = read_config_file(ns.config) if ns.config else {}
        cfg = build_config(file_values, flags)
        if ns.command == "reproduce":
            return cmd_reproduce(ns.panels, cfg, ns.out_dir)
        with _sink(cfg.output) as out:
            return COMMANDS[ns.command](cfg, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConstraintError, ParameterError, NoEquilibria, ModelError) as exc:
        print(f"constraint violation: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except (NumericalFailure, AnalysisError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"constraint violation: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except BrokenPipeError:
        # reader went away (e.g. piped into head); nothing left to report
        sys.stderr.close()
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
