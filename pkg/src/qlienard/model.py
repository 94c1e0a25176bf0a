"""Closed-form layer: potentials, vector fields, equilibria and linearisation.

Three oscillator families share the quadratic Lienard form

    (1 + lam x^2) x'' - lam x x'^2 + alpha^2 x - B(x) + gamma x' = f cos(omega t)

with B = 0 (Mathews-Lakshmanan), B = beta (1 - lam x^2) (Quesne I) and
B = beta sqrt(1 + lam x^2) (Quesne II).  The effective mass is 1/(1 + lam x^2)
and the first integral of the undamped, unforced motion is

    E(x, y) = y^2 / (2 (1 + lam x^2)) + V(x).
"""

from __future__ import annotations

import cmath
import enum
import functools
import math
from dataclasses import dataclass, replace

from . import kernels

DOMAIN_EPS = kernels.DOMAIN_EPS
CLASSIFY_EPS = 1e-9


class ModelError(Exception):
    """Base class for constraint violations in the closed-form layer."""


class ParameterError(ModelError, ValueError):
    pass


class DomainViolation(ModelError, ValueError):
    """1 + lam x^2 fell below the domain guard."""


class NoEquilibria(ModelError):
    pass


class NotApplicable(ModelError):
    """A closed-form eigenvalue formula was used outside its lam-sign range."""


class OscillatorKind(enum.IntEnum):
    ML = kernels.ML
    QUESNE_I = kernels.QUESNE_I
    QUESNE_II = kernels.QUESNE_II

    @classmethod
    def parse(cls, text: str | OscillatorKind) -> OscillatorKind:
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("-", "").replace("_", "")
        aliases = {
            "ml": cls.ML,
            "0": cls.ML,
            "quesnei": cls.QUESNE_I,
            "i": cls.QUESNE_I,
            "1": cls.QUESNE_I,
            "vi": cls.QUESNE_I,
            "quesneii": cls.QUESNE_II,
            "ii": cls.QUESNE_II,
            "2": cls.QUESNE_II,
            "vii": cls.QUESNE_II,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ParameterError(f"unknown oscillator kind {text!r}; use ML, QuesneI or QuesneII") from None

    @property
    def label(self) -> str:
        return {0: "ML", 1: "QuesneI", 2: "QuesneII"}[int(self)]


def takes_kind(fn):
    """Let ``fn(kind, ...)`` accept a kind name as well as the enum."""

    @functools.wraps(fn)
    def wrapper(kind, *args, **kwargs):
        return fn(OscillatorKind.parse(kind), *args, **kwargs)

    return wrapper


class LinearClass(str, enum.Enum):
    CENTER = "center"
    SADDLE = "saddle"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class Params:
    """Model constants.  ``lam`` stands for the deformation strength lambda."""

    lam: float
    alpha: float
    beta: float = 0.0
    gamma: float = 0.0
    f: float = 0.0
    omega: float = 1.0

    def __post_init__(self):
        for name in ("lam", "alpha", "beta", "gamma", "f", "omega"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ParameterError(f"{name} must be finite, got {v!r}")
        if self.alpha == 0.0:
            raise ParameterError("alpha must be nonzero")
        if self.lam == 0.0:
            raise ParameterError("lambda must be nonzero (use a tiny value such as 1e-12 for the harmonic limit)")
        if self.gamma < 0.0:
            raise ParameterError(f"gamma must be >= 0, got {self.gamma}")
        if self.f < 0.0:
            raise ParameterError(f"f must be >= 0, got {self.f}")
        if self.omega <= 0.0:
            raise ParameterError(f"omega must be > 0, got {self.omega}")

    def with_(self, **changes) -> Params:
        return replace(self, **changes)

    def as_tuple(self, kind: OscillatorKind | None = None) -> tuple:
        beta = 0.0 if kind is not None and OscillatorKind.parse(kind) == OscillatorKind.ML else self.beta
        return (float(self.lam), float(self.alpha), float(beta), float(self.gamma), float(self.f), float(self.omega))

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega


@dataclass(frozen=True)
class State:
    x: float
    y: float


@dataclass(frozen=True)
class Equilibrium:
    """A root of the equilibrium formula together with its linearisation.

    ``in_domain`` is False for roots beyond the singular wall 1 + lam x^2 = 0
    (they exist algebraically for lam < 0 in the Quesne I family).
    ``is_fixed_point`` is False when the closed-form root does not actually
    annihilate the vector field; the second Quesne II root is such a case
    whenever beta != 0.
    """

    x_star: float
    branch: str
    a21: float
    eigenvalues: tuple
    linear_class: LinearClass
    residual: float
    in_domain: bool
    is_fixed_point: bool

    @property
    def state(self) -> State:
        return State(self.x_star, 0.0)


def _mass_factor(p: Params, x: float) -> float:
    u = 1.0 + p.lam * x * x
    if not u > DOMAIN_EPS:
        raise DomainViolation(f"1 + lambda*x^2 = {u:.3e} <= {DOMAIN_EPS:g} at x = {x!r} (lambda = {p.lam})")
    return u


@takes_kind
def potential(kind: OscillatorKind, p: Params, x: float) -> float:
    u = _mass_factor(p, x)
    a2 = p.alpha * p.alpha
    if kind == OscillatorKind.QUESNE_I:
        return 0.5 * (a2 * x * x - 2.0 * p.beta * x) / u
    if kind == OscillatorKind.QUESNE_II:
        return 0.5 * (a2 * x * x - 2.0 * p.beta * x * math.sqrt(u)) / u
    return 0.5 * a2 * x * x / u


@takes_kind
def potential_gradient(kind: OscillatorKind, p: Params, x: float) -> float:
    """Analytic dV/dx."""
    u = _mass_factor(p, x)
    a2 = p.alpha * p.alpha
    if kind == OscillatorKind.QUESNE_I:
        return (a2 * x - p.beta * (1.0 - p.lam * x * x)) / (u * u)
    if kind == OscillatorKind.QUESNE_II:
        return a2 * x / (u * u) - p.beta / (u * math.sqrt(u))
    return a2 * x / (u * u)


@takes_kind
def energy(kind: OscillatorKind, p: Params, s: State) -> float:
    u = _mass_factor(p, s.x)
    return 0.5 * s.y * s.y / u + potential(kind, p, s.x)


def _accel(kind, prm, t, x, y, lam):
    a = kernels.accel(int(kind), prm, t, x, y)
    if math.isnan(a):
        raise DomainViolation(f"1 + lambda*x^2 <= {DOMAIN_EPS:g} at x = {x!r} (lambda = {lam})")
    return a


@takes_kind
def rhs_unforced(kind: OscillatorKind, p: Params, s: State) -> tuple[float, float]:
    """(xdot, ydot) of the conservative system."""
    prm = p.with_(gamma=0.0, f=0.0).as_tuple(kind)
    return s.y, _accel(kind, prm, 0.0, s.x, s.y, p.lam)


@takes_kind
def rhs_forced(kind: OscillatorKind, p: Params, s: State, t: float) -> tuple[float, float]:
    """(xdot, ydot) including damping -gamma*y and forcing f*cos(omega*t)."""
    return s.y, _accel(kind, p.as_tuple(kind), t, s.x, s.y, p.lam)


@takes_kind
def jacobian_a21(kind: OscillatorKind, p: Params, x_c: float) -> float:
    """d(ydot)/dx at (x_c, 0): the only nontrivial Jacobian entry there.

    Evaluated algebraically, so it is also defined beyond the singular wall
    (where 1 + lam x^2 < 0) except for Quesne II, whose square root needs
    1 + lam x^2 > 0.
    """
    lam, a2, beta = p.lam, p.alpha * p.alpha, p.beta
    u = 1.0 + lam * x_c * x_c
    if abs(u) <= DOMAIN_EPS or (kind == OscillatorKind.QUESNE_II and u <= DOMAIN_EPS):
        raise DomainViolation(f"1 + lambda*x^2 = {u:.3e} at x = {x_c!r}; Jacobian undefined")
    if kind == OscillatorKind.QUESNE_I:
        num = -a2 + lam * a2 * x_c * x_c - 4.0 * lam * beta * x_c
    elif kind == OscillatorKind.QUESNE_II:
        num = a2 * (lam * x_c * x_c - 1.0) - lam * beta * x_c * math.sqrt(u)
    else:
        num = a2 * (lam * x_c * x_c - 1.0)
    return num / (u * u)


def eigenvalues(a21: float) -> tuple[complex, complex]:
    """Eigenvalues of [[0, 1], [a21, 0]]: +/- sqrt(a21)."""
    r = cmath.sqrt(a21)
    if a21 < 0:
        r = complex(0.0, r.imag)
    else:
        r = complex(r.real, 0.0)
    return r, -r


def classify_linear(a21: float, eps: float = CLASSIFY_EPS) -> LinearClass:
    if a21 < -eps:
        return LinearClass.CENTER
    if a21 > eps:
        return LinearClass.SADDLE
    return LinearClass.DEGENERATE


def _ydot_residual(kind, p, x):
    # unguarded closed form of ydot at (x, 0)
    u = 1.0 + p.lam * x * x
    a2 = p.alpha * p.alpha
    if kind == OscillatorKind.QUESNE_I:
        b = p.beta * (1.0 - p.lam * x * x)
    elif kind == OscillatorKind.QUESNE_II:
        b = p.beta * math.sqrt(u)
    else:
        b = 0.0
    return abs((-a2 * x + b) / u)


def _make(kind, p, x, branch):
    a21 = jacobian_a21(kind, p, x)
    res = _ydot_residual(kind, p, x)
    return Equilibrium(
        x_star=x,
        branch=branch,
        a21=a21,
        eigenvalues=eigenvalues(a21),
        linear_class=classify_linear(a21),
        residual=res,
        in_domain=1.0 + p.lam * x * x > DOMAIN_EPS,
        is_fixed_point=res <= 1e-9 * max(1.0, p.alpha * p.alpha * abs(x), abs(p.beta)),
    )


@takes_kind
def equilibrium_roots(kind: OscillatorKind, p: Params) -> list[tuple[str, float]]:
    """Closed-form equilibrium candidates as ``(branch, x)`` pairs.

    Quesne I: x = (-alpha^2 +/- sqrt(alpha^4 + 4 lam beta^2)) / (2 lam beta).
    Quesne II: x = +/- beta / sqrt(alpha^4 - lam beta^2).
    ML, or beta = 0: the origin only.
    """
    a2 = p.alpha * p.alpha
    beta = 0.0 if kind == OscillatorKind.ML else p.beta
    if beta == 0.0:
        return [("origin", 0.0)]
    if kind == OscillatorKind.QUESNE_I:
        disc = a2 * a2 + 4.0 * p.lam * beta * beta
        if disc < 0.0:
            raise NoEquilibria(
                f"discriminant alpha^4 + 4*lambda*beta^2 = {disc:.6g} < 0; "
                f"requires lambda > -alpha^4/(4 beta^2) = {-a2 * a2 / (4 * beta * beta):.6g}"
            )
        sq = math.sqrt(disc)
        # plus branch rewritten to avoid cancellation in -alpha^2 + sqrt(disc)
        x_plus = 2.0 * beta / (a2 + sq)
        x_minus = (-a2 - sq) / (2.0 * p.lam * beta)
        if disc == 0.0:
            return [("plus", x_plus)]
        return [("plus", x_plus), ("minus", x_minus)]
    gap = a2 * a2 - p.lam * beta * beta
    if gap <= 0.0:
        raise NoEquilibria(
            f"alpha^4 - lambda*beta^2 = {gap:.6g} <= 0; requires lambda < alpha^4/beta^2 = {a2 * a2 / (beta * beta):.6g}"
        )
    r = beta / math.sqrt(gap)
    return [("plus", r), ("minus", -r)]


@takes_kind
def equilibria(kind: OscillatorKind, p: Params, *, fixed_points_only: bool = False) -> list[Equilibrium]:
    """Equilibria in ascending x_star, each with a21, eigenvalues and class.

    All closed-form roots are returned and flagged (see :class:`Equilibrium`);
    ``fixed_points_only`` keeps the in-domain roots that really are fixed
    points of the flow.
    """
    out = sorted((_make(kind, p, x, br) for br, x in equilibrium_roots(kind, p)), key=lambda e: e.x_star)
    if fixed_points_only:
        out = [e for e in out if e.in_domain and e.is_fixed_point]
    return out


@takes_kind
def closed_form_eigs(kind: OscillatorKind, p: Params, branch: str) -> tuple[complex, complex]:
    """Literature closed forms for the eigenvalue pairs, for cross-checking.

    Quesne I, lam > 0:   +/- i sqrt(2 lam beta^2 / (sqrt(D) - alpha^2)) (plus)
                         +/- sqrt(2 lam beta^2 / (sqrt(D) + alpha^2))   (minus)
    Quesne I, lam < 0:   +/- i sqrt(-2 lam beta^2 / (alpha^2 -/+ sqrt(D)))
    Quesne II:           +/- i (alpha^4 - lam beta^2) / alpha^3 at both roots
    with D = alpha^4 + 4 lam beta^2.
    """
    if branch not in ("plus", "minus"):
        raise NotApplicable(f"branch must be 'plus' or 'minus', got {branch!r}")
    a2 = p.alpha * p.alpha
    lam, beta = p.lam, p.beta
    if kind == OscillatorKind.ML or beta == 0.0:
        raise NotApplicable("closed forms require a Quesne family with beta != 0")
    if kind == OscillatorKind.QUESNE_II:
        gap = a2 * a2 - lam * beta * beta
        if gap <= 0.0:
            raise NoEquilibria(f"alpha^4 - lambda*beta^2 = {gap:.6g} <= 0")
        w = gap / (a2 * abs(p.alpha))
        return complex(0.0, w), complex(0.0, -w)
    disc = a2 * a2 + 4.0 * lam * beta * beta
    if disc < 0.0:
        raise NoEquilibria(f"discriminant alpha^4 + 4*lambda*beta^2 = {disc:.6g} < 0")
    sq = math.sqrt(disc)
    if lam > 0.0:
        if branch == "plus":
            w = math.sqrt(2.0 * lam * beta * beta / (sq - a2))
            return complex(0.0, w), complex(0.0, -w)
        w = math.sqrt(2.0 * lam * beta * beta / (sq + a2))
        return complex(w, 0.0), complex(-w, 0.0)
    if disc == 0.0 and branch == "minus":
        raise NotApplicable("double root: only the plus branch exists")
    den = a2 - sq if branch == "plus" else a2 + sq
    if den <= 0.0:
        raise NotApplicable("closed form undefined at the discriminant boundary")
    w = math.sqrt(-2.0 * lam * beta * beta / den)
    return complex(0.0, w), complex(0.0, -w)
