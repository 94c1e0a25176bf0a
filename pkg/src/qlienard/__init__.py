"""Quadratic Lienard oscillators with position-dependent mass.

Covers the Mathews-Lakshmanan oscillator and the two Quesne rational
extensions: equilibria and their linear types, conservative and forced
integration, return maps, Lyapunov exponents and damping sweeps.
"""

__version__ = "0.1.0"

from .analysis import (
    AttractorClass,
    BifurcationData,
    Diagnosis,
    EquilibriumVerdict,
    LyapunovEstimate,
    NonConvergent,
    Regime,
    bifurcation_sweep,
    classify_attractor,
    diagnose,
    lyapunov_max,
    orbit_period,
    poincare_map,
    verify_equilibrium,
)
from .integrate import SolverConfig, StroboSeries, Termination, Trajectory, energy_drift, integrate, strobe_sample
from ._jit import USE_NUMBA
from .model import (
    DomainViolation,
    Equilibrium,
    LinearClass,
    NoEquilibria,
    OscillatorKind,
    ParameterError,
    Params,
    State,
    classify_linear,
    energy,
    equilibria,
    jacobian_a21,
    potential,
    potential_gradient,
    rhs_forced,
    rhs_unforced,
)

__all__ = [name for name in dir() if not name.startswith("_")]
