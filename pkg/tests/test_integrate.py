import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlienard.integrate import (
    ADAPTIVE,
    FIXED_RK4,
    SolverConfig,
    Termination,
    Trajectory,
    energy_array,
    energy_drift,
    integrate,
    split_period,
    step_rk4,
    strobe_sample,
)
from qlienard.model import OscillatorKind, Params, State, energy, equilibria, rhs_unforced

from oracles import ml_exact

ML = OscillatorKind.ML
QI = OscillatorKind.QUESNE_I
QII = OscillatorKind.QUESNE_II

P1 = Params(lam=0.5, alpha=1.0, beta=0.34)
FORCED = Params(lam=-0.5, alpha=2.0, beta=0.1, f=5.0, omega=1.0)


def non_increasing(e):
    # a settled orbit leaves E flat to a few ulp; rounding can tick it up by that much
    return np.all(np.diff(e) <= 8 * np.finfo(float).eps * np.max(np.abs(e)))


class TestStepRK4:
    def test_zero_field(self):
        s = State(0.3, -1.2)
        assert step_rk4(lambda s, t: (0.0, 0.0), s, 0.0, 0.1) == s

    def test_harmonic_period(self):
        p = Params(lam=1e-12, alpha=1.0)
        dt = 0.01
        n = round(2 * math.pi / dt)
        s = State(1.0, 0.0)
        rhs = lambda s, t: rhs_unforced(ML, p, s)  # noqa: E731
        for i in range(n):
            s = step_rk4(rhs, s, i * dt, dt)
        # n*dt misses 2*pi by 3.2e-3; compare with the exact state at n*dt
        t = n * dt
        assert abs(s.x - math.cos(t)) < 1e-6
        assert abs(s.y + math.sin(t)) < 1e-6

    def test_ml_exact_one_period(self):
        p = Params(lam=0.5, alpha=1.0)
        amp = 1.0
        _, _, w = ml_exact(p, amp, 0.0)
        assert w == pytest.approx(math.sqrt(2.0 / 3.0))
        dt = 1e-3
        s = State(0.0, amp * w)
        rhs = lambda s, t: rhs_unforced(ML, p, s)  # noqa: E731
        worst = 0.0
        for i in range(round(2 * math.pi / w / dt)):
            s = step_rk4(rhs, s, i * dt, dt)
            worst = max(worst, abs(s.x - amp * math.sin(w * (i + 1) * dt)))
        assert worst < 1e-6

    def test_kernel_and_python_steps_agree(self):
        p = FORCED.with_(gamma=0.05)
        cfg = SolverConfig(method=FIXED_RK4, dt=0.01, t_end=1.0)
        tr = integrate(QI, p, State(0.1, 0.1), cfg)
        from qlienard.model import rhs_forced

        s = State(0.1, 0.1)
        for i in range(100):
            s = step_rk4(lambda s, t: rhs_forced(QI, p, s, t), s, i * 0.01, 0.01)
        assert abs(s.x - tr.x[-1]) < 1e-13 and abs(s.y - tr.y[-1]) < 1e-13


class TestExactSolution:
    @pytest.mark.parametrize("lam,amp", [(0.5, 1.0), (-0.5, 1.0), (2.0, 0.3)])
    @pytest.mark.parametrize("method", [ADAPTIVE, FIXED_RK4])
    def test_ml_ten_periods(self, lam, amp, method):
        p = Params(lam=lam, alpha=1.0)
        _, _, w = ml_exact(p, amp, 0.0)
        cfg = SolverConfig(method=method, dt=1e-3, t_end=10 * 2 * math.pi / w)
        tr = integrate(ML, p, State(0.0, amp * w), cfg)
        assert tr.termination == Termination.COMPLETED
        x, y, _ = ml_exact(p, amp, tr.t)
        assert np.max(np.abs(tr.x - x)) < 1e-6
        assert np.max(np.abs(tr.y - y)) < 1e-6

    def test_rk4_order(self):
        p = Params(lam=0.5, alpha=1.0)
        _, _, w = ml_exact(p, 1.0, 0.0)
        dts = [1e-2, 5e-3, 2.5e-3]
        errs = []
        for dt in dts:
            tr = integrate(ML, p, State(0.0, w), SolverConfig(method=FIXED_RK4, dt=dt, t_end=2 * math.pi / w))
            errs.append(np.max(np.abs(tr.x - ml_exact(p, 1.0, tr.t)[0])))
        slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
        assert 3.7 <= slope <= 4.3


class TestConservation:
    def test_quesne_i_drift(self):
        xc = equilibria(QI, P1)[1].x_star
        cfg = SolverConfig(rel_tol=1e-10, t_end=200.0)
        tr = integrate(QI, P1, State(xc + 0.2, 0.0), cfg)
        assert tr.termination == Termination.COMPLETED
        assert energy_drift(QI, P1, tr) < 1e-8

    @pytest.mark.parametrize("kind", [ML, QI, QII])
    def test_drift_all_kinds(self, kind):
        p = Params(lam=-0.5, alpha=2.0, beta=0.1)
        tr = integrate(kind, p, State(0.3, 0.4), SolverConfig(rel_tol=1e-10, t_end=200.0))
        assert energy_drift(kind, p, tr) < 1e-8

    def test_equilibrium_is_constant(self):
        eq = equilibria(QI, P1)[1]
        tr = integrate(QI, P1, eq.state, SolverConfig(t_end=100.0))
        assert np.max(np.abs(tr.x - eq.x_star)) < 1e-10
        assert np.max(np.abs(tr.y)) < 1e-10
        assert energy_drift(QI, P1, tr) < 1e-8

    def test_constant_trajectory_has_zero_drift(self):
        tr = Trajectory(np.array([0.0, 1.0]), np.array([0.2, 0.2]), np.array([0.0, 0.0]), Termination.COMPLETED)
        assert energy_drift(QI, P1, tr) == 0.0

    def test_energy_array_matches_scalar(self):
        xs = np.linspace(-1, 1, 7)
        ys = np.linspace(2, -2, 7)
        for kind in (ML, QI, QII):
            e = energy_array(kind, P1, xs, ys)
            assert e == pytest.approx([energy(kind, P1, State(a, b)) for a, b in zip(xs, ys)], rel=1e-14)

    @pytest.mark.parametrize("kind", [ML, QI, QII])
    @pytest.mark.parametrize("method", [ADAPTIVE, FIXED_RK4])
    def test_dissipation_monotone(self, kind, method):
        p = P1.with_(gamma=0.1)
        tr = integrate(kind, p, State(1.0, 0.5), SolverConfig(method=method, dt=1e-2, t_end=200.0))
        e = energy_array(kind, p, tr.x, tr.y)
        assert non_increasing(e)
        assert energy_drift(kind, p, tr) == pytest.approx(e[0] - e[-1], rel=1e-12)
        assert e[0] - e[-1] > 0

    @settings(max_examples=25, deadline=None)
    @given(
        gamma=st.floats(0.01, 1.0),
        x0=st.floats(-1.0, 1.0),
        y0=st.floats(-1.0, 1.0),
        kind=st.sampled_from([ML, QI, QII]),
    )
    def test_dissipation_property(self, gamma, x0, y0, kind):
        p = Params(lam=-0.5, alpha=2.0, beta=0.1, gamma=gamma)
        tr = integrate(kind, p, State(x0, y0), SolverConfig(t_end=30.0))
        e = energy_array(kind, p, tr.x, tr.y)
        assert non_increasing(e)


class TestAgreement:
    @pytest.mark.parametrize("beta", [0.001, 0.01, 0.1])
    def test_adaptive_vs_fixed(self, beta):
        p = FORCED.with_(beta=beta)
        for t_end in (10.0, 25.0, 50.0):
            a = integrate(QI, p, State(0.1, 0.1), SolverConfig(rel_tol=1e-11, abs_tol=1e-13, t_end=t_end))
            f = integrate(QI, p, State(0.1, 0.1), SolverConfig(method=FIXED_RK4, dt=1e-3, t_end=t_end))
            assert a.t[-1] == f.t[-1] == t_end
            assert abs(a.x[-1] - f.x[-1]) < 1e-6
            assert abs(a.y[-1] - f.y[-1]) < 1e-6


class TestDomain:
    def test_violation_reported(self):
        p = Params(lam=-0.5, alpha=1.0, beta=1.0)
        tr = integrate(QI, p, State(0.0, 0.0), SolverConfig(t_end=50.0))
        assert tr.termination == Termination.DOMAIN_VIOLATION
        assert abs(tr.x[-1]) == pytest.approx(math.sqrt(2.0), abs=1e-3)
        assert np.all(1.0 + p.lam * tr.x**2 > 1e-10)

    def test_fixed_step_violation(self):
        p = Params(lam=-0.5, alpha=1.0, beta=1.0)
        tr = integrate(QI, p, State(0.0, 0.0), SolverConfig(method=FIXED_RK4, dt=1e-2, t_end=50.0))
        assert tr.termination == Termination.DOMAIN_VIOLATION

    def test_step_limit(self):
        tr = integrate(QI, P1, State(0.5, 0.0), SolverConfig(t_end=100.0, max_steps=10))
        assert tr.termination == Termination.STEP_LIMIT
        assert len(tr) <= 11

    def test_times_increasing(self):
        tr = integrate(QI, FORCED, State(0.1, 0.1), SolverConfig(t_end=30.0))
        assert np.all(np.diff(tr.t) > 0)

    @pytest.mark.parametrize(
        "kw",
        [dict(method="euler"), dict(t_end=0.0), dict(method=FIXED_RK4, dt=0.0), dict(rel_tol=0.0), dict(max_steps=0)],
    )
    def test_bad_config(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)


class TestStrobe:
    def test_times_exact(self):
        s = strobe_sample(QI, FORCED, State(0.1, 0.1), n_skip=0, n_keep=2500)
        mpmath.mp.dps = 40
        period = 2 * mpmath.pi / mpmath.mpf(FORCED.omega)
        err = max(abs(mpmath.mpf(float(t)) - int(k) * period) for k, t in zip(s.k, s.t))
        assert err < 1e-12

    def test_times_exact_odd_omega(self):
        p = FORCED.with_(omega=1.37)
        s = strobe_sample(QI, p, State(0.1, 0.1), SolverConfig(t_start=3.0), n_skip=100, n_keep=300)
        period = 2 * mpmath.pi / mpmath.mpf(1.37)
        err = max(abs(mpmath.mpf(float(t)) - 3 - int(k) * period) for k, t in zip(s.k, s.t))
        assert err < 1e-12

    def test_split_period(self):
        hi, lo = split_period(1.0)
        assert float(np.float32(hi)) == hi
        assert abs(mpmath.mpf(hi) + mpmath.mpf(lo) - 2 * mpmath.pi) < 1e-20

    def test_matches_direct_integration(self):
        s = strobe_sample(QI, FORCED, State(0.1, 0.1), SolverConfig(rel_tol=1e-11, abs_tol=1e-13), n_skip=3, n_keep=3)
        for k, x, y in zip(s.k, s.x, s.y):
            tr = integrate(QI, FORCED, State(0.1, 0.1), SolverConfig(rel_tol=1e-11, abs_tol=1e-13, t_end=k * 2 * math.pi))
            assert abs(tr.x[-1] - x) < 1e-7 and abs(tr.y[-1] - y) < 1e-7

    def test_counts_and_order(self):
        s = strobe_sample(QI, FORCED, State(0.1, 0.1), n_skip=7, n_keep=11)
        assert list(s.k) == list(range(7, 18))
        assert s.n_skipped == 7 and s.complete

    def test_k_zero_is_initial_condition(self):
        s = strobe_sample(QI, FORCED, State(0.1, 0.1), n_skip=0, n_keep=2)
        assert (s.x[0], s.y[0]) == (0.1, 0.1)

    def test_partial_series_flagged(self):
        p = Params(lam=-0.5, alpha=1.0, beta=1.0, f=0.1)
        s = strobe_sample(QI, p, State(0.0, 0.0), n_skip=0, n_keep=50)
        assert s.termination == Termination.DOMAIN_VIOLATION
        assert 0 < len(s) < 50

    def test_rejects_fixed_step(self):
        with pytest.raises(ValueError):
            strobe_sample(QI, FORCED, State(0.1, 0.1), SolverConfig(method=FIXED_RK4), n_keep=3)
