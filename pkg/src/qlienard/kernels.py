"""Hot integration loops.

Everything here works on plain floats and preallocated numpy arrays so the
same source compiles under numba or runs as ordinary Python (see ``_jit``).

Parameter tuples are ``(lam, alpha, beta, gamma, f, omega)``; ``kind`` is the
integer code of :class:`qlienard.model.OscillatorKind`.
"""

import math

import numpy as np

from ._jit import njit

DOMAIN_EPS = 1e-10

ML = 0
QUESNE_I = 1
QUESNE_II = 2

COMPLETED = 0
DOMAIN_VIOLATION = 1
STEP_LIMIT = 2

# Dormand-Prince 5(4)
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
PI_BETA = 0.04


@njit
def accel(kind, prm, t, x, y):
    """ydot of the forced, damped system; NaN outside the domain guard."""
    lam, alpha, beta, gamma, f, omega = prm
    u = 1.0 + lam * x * x
    if not u > DOMAIN_EPS:
        return math.nan
    if kind == QUESNE_I:
        b = beta * (1.0 - lam * x * x)
    elif kind == QUESNE_II:
        b = beta * math.sqrt(u)
    else:
        b = 0.0
    num = lam * x * y * y - alpha * alpha * x + b
    if gamma != 0.0:
        num -= gamma * y
    if f != 0.0:
        num += f * math.cos(omega * t)
    return num / u


@njit
def rk4_step(kind, prm, t, x, y, h):
    k1y = accel(kind, prm, t, x, y)
    k1x = y
    k2x = y + 0.5 * h * k1y
    k2y = accel(kind, prm, t + 0.5 * h, x + 0.5 * h * k1x, k2x)
    k3x = y + 0.5 * h * k2y
    k3y = accel(kind, prm, t + 0.5 * h, x + 0.5 * h * k2x, k3x)
    k4x = y + h * k3y
    k4y = accel(kind, prm, t + h, x + h * k3x, k4x)
    xn = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    yn = y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    return xn, yn


@njit
def dp5_step(kind, prm, t, x, y, k1y, h):
    """One Dormand-Prince step from (x, y) with FSAL derivative ``k1y``.

    Returns ``(x5, y5, k7y, err_x, err_y)``; any NaN means a stage left the
    domain.  The x-derivative of every stage is that stage's y.
    """
    k1x = y
    x2 = x + h * A21 * k1x
    k2x = y + h * A21 * k1y
    k2y = accel(kind, prm, t + C2 * h, x2, k2x)

    x3 = x + h * (A31 * k1x + A32 * k2x)
    k3x = y + h * (A31 * k1y + A32 * k2y)
    k3y = accel(kind, prm, t + C3 * h, x3, k3x)

    x4 = x + h * (A41 * k1x + A42 * k2x + A43 * k3x)
    k4x = y + h * (A41 * k1y + A42 * k2y + A43 * k3y)
    k4y = accel(kind, prm, t + C4 * h, x4, k4x)

    x5s = x + h * (A51 * k1x + A52 * k2x + A53 * k3x + A54 * k4x)
    k5x = y + h * (A51 * k1y + A52 * k2y + A53 * k3y + A54 * k4y)
    k5y = accel(kind, prm, t + C5 * h, x5s, k5x)

    x6 = x + h * (A61 * k1x + A62 * k2x + A63 * k3x + A64 * k4x + A65 * k5x)
    k6x = y + h * (A61 * k1y + A62 * k2y + A63 * k3y + A64 * k4y + A65 * k5y)
    k6y = accel(kind, prm, t + h, x6, k6x)

    xn = x + h * (B1 * k1x + B3 * k3x + B4 * k4x + B5 * k5x + B6 * k6x)
    yn = y + h * (B1 * k1y + B3 * k3y + B4 * k4y + B5 * k5y + B6 * k6y)
    k7x = yn
    k7y = accel(kind, prm, t + h, xn, yn)

    ex = h * (E1 * k1x + E3 * k3x + E4 * k4x + E5 * k5x + E6 * k6x + E7 * k7x)
    ey = h * (E1 * k1y + E3 * k3y + E4 * k4y + E5 * k5y + E6 * k6y + E7 * k7y)
    return xn, yn, k7y, ex, ey


@njit
def _sq_err(x0, x1, e, rtol, atol):
    sc = atol + rtol * max(abs(x0), abs(x1))
    r = e / sc
    return r * r


@njit
def _grow(err, err_old):
    # PI controller, Hairer-Wanner dopri5 defaults
    fac11 = err ** (0.2 - PI_BETA * 0.75)
    fac = fac11 / err_old**PI_BETA
    fac = max(1.0 / FAC_MAX, min(1.0 / FAC_MIN, fac / SAFETY))
    return 1.0 / fac


@njit
def _shrink(err):
    fac11 = err ** (0.2 - PI_BETA * 0.75)
    return 1.0 / min(1.0 / FAC_MIN, fac11 / SAFETY)


@njit
def hermite(h, s, x0, v0, x1, v1):
    """Cubic Hermite interpolant on one step at fraction ``s`` in [0, 1]."""
    s2 = s * s
    s3 = s2 * s
    h00 = 2.0 * s3 - 3.0 * s2 + 1.0
    h10 = s3 - 2.0 * s2 + s
    h01 = -2.0 * s3 + 3.0 * s2
    h11 = s3 - s2
    return h00 * x0 + h10 * h * v0 + h01 * x1 + h11 * h * v1


@njit
def _initial_h(t0, t1, h0):
    span = t1 - t0
    if h0 > 0.0:
        return min(h0, span)
    return min(1e-3, span)


@njit
def rk4_trajectory(kind, prm, t0, t1, x0, y0, dt, max_steps):
    n_steps = int(math.ceil((t1 - t0) / dt - 1e-9))
    n_alloc = min(n_steps, max_steps) + 1
    ts = np.empty(n_alloc)
    xs = np.empty(n_alloc)
    ys = np.empty(n_alloc)
    ts[0] = t0
    xs[0] = x0
    ys[0] = y0
    if math.isnan(accel(kind, prm, t0, x0, y0)):
        return ts[:1], xs[:1], ys[:1], DOMAIN_VIOLATION
    x = x0
    y = y0
    for i in range(n_steps):
        if i >= max_steps:
            return ts[: i + 1], xs[: i + 1], ys[: i + 1], STEP_LIMIT
        t = t0 + i * dt
        tn = t0 + (i + 1) * dt
        if i == n_steps - 1:
            tn = t1
        xn, yn = rk4_step(kind, prm, t, x, y, tn - t)
        if math.isnan(xn + yn) or math.isnan(accel(kind, prm, tn, xn, yn)):
            return ts[: i + 1], xs[: i + 1], ys[: i + 1], DOMAIN_VIOLATION
        x = xn
        y = yn
        ts[i + 1] = tn
        xs[i + 1] = x
        ys[i + 1] = y
    return ts, xs, ys, COMPLETED


@njit
def _grow_buffers(ts, xs, ys, cap):
    nts = np.empty(cap)
    nxs = np.empty(cap)
    nys = np.empty(cap)
    m = len(ts)
    nts[:m] = ts
    nxs[:m] = xs
    nys[:m] = ys
    return nts, nxs, nys


@njit
def dp5_trajectory(kind, prm, t0, t1, x0, y0, rtol, atol, max_steps, h0):
    cap = min(max_steps + 1, 4096)
    ts = np.empty(cap)
    xs = np.empty(cap)
    ys = np.empty(cap)
    ts[0] = t0
    xs[0] = x0
    ys[0] = y0
    k1y = accel(kind, prm, t0, x0, y0)
    if math.isnan(k1y):
        return ts[:1], xs[:1], ys[:1], DOMAIN_VIOLATION
    t = t0
    x = x0
    y = y0
    h = _initial_h(t0, t1, h0)
    err_old = 1e-4
    last_reject = False
    n = 0
    while t < t1:
        if n >= max_steps:
            return ts[: n + 1], xs[: n + 1], ys[: n + 1], STEP_LIMIT
        if t + 1.01 * h >= t1:
            h = t1 - t
        hmin = 1e-14 * max(1.0, abs(t))
        if h < hmin:
            return ts[: n + 1], xs[: n + 1], ys[: n + 1], DOMAIN_VIOLATION
        xn, yn, k7y, ex, ey = dp5_step(kind, prm, t, x, y, k1y, h)
        if math.isnan(xn + yn + k7y + ex + ey):
            h *= 0.25
            last_reject = True
            continue
        err = math.sqrt(0.5 * (_sq_err(x, xn, ex, rtol, atol) + _sq_err(y, yn, ey, rtol, atol)))
        if err <= 1.0:
            t = t1 if h == t1 - t else t + h
            x = xn
            y = yn
            k1y = k7y
            n += 1
            if n == len(ts):
                ts, xs, ys = _grow_buffers(ts, xs, ys, min(2 * len(ts), max_steps + 1))
            ts[n] = t
            xs[n] = x
            ys[n] = y
            fac = _grow(err, err_old)
            if last_reject:
                fac = min(fac, 1.0)
            err_old = max(err, 1e-4)
            h *= fac
            last_reject = False
        else:
            h *= _shrink(err)
            last_reject = True
    return ts[: n + 1], xs[: n + 1], ys[: n + 1], COMPLETED


@njit
def dp5_strobe(kind, prm, t0, x0, y0, pa, pb, n_skip, n_keep, rtol, atol, max_steps, h0):
    """Sample (x, y) at t0 + k*period for k = n_skip .. n_skip+n_keep-1.

    The period is passed split as ``pa + pb`` with ``pa`` short enough that
    ``k * pa`` is exact, which keeps section times correctly rounded.
    Samples come from cubic Hermite interpolation inside accepted steps, so
    the step sequence is never bent toward the section times.  Returns the
    sample arrays, the number filled, and a status code.
    """
    period = pa + pb
    ks = np.empty(n_keep, dtype=np.int64)
    tk = np.empty(n_keep)
    xs = np.empty(n_keep)
    ys = np.empty(n_keep)
    count = 0
    k1y = accel(kind, prm, t0, x0, y0)
    if math.isnan(k1y):
        return ks, tk, xs, ys, 0, DOMAIN_VIOLATION
    k = n_skip
    if k == 0:
        ks[0] = 0
        tk[0] = t0
        xs[0] = x0
        ys[0] = y0
        count = 1
        k = 1
    t_end = t0 + (n_skip + n_keep - 1) * period
    t = t0
    x = x0
    y = y0
    h = _initial_h(t0, t_end if t_end > t0 else t0 + period, h0)
    err_old = 1e-4
    last_reject = False
    n = 0
    while count < n_keep:
        if n >= max_steps:
            return ks, tk, xs, ys, count, STEP_LIMIT
        hmin = 1e-14 * max(1.0, abs(t))
        if h < hmin:
            return ks, tk, xs, ys, count, DOMAIN_VIOLATION
        xn, yn, k7y, ex, ey = dp5_step(kind, prm, t, x, y, k1y, h)
        if math.isnan(xn + yn + k7y + ex + ey):
            h *= 0.25
            last_reject = True
            continue
        err = math.sqrt(0.5 * (_sq_err(x, xn, ex, rtol, atol) + _sq_err(y, yn, ey, rtol, atol)))
        if err <= 1.0:
            tn = t + h
            t_k = t0 + (k * pa + k * pb)
            while t_k <= tn and count < n_keep:
                s = (t_k - t) / h
                ks[count] = k
                tk[count] = t_k
                xs[count] = hermite(h, s, x, y, xn, yn)
                ys[count] = hermite(h, s, y, k1y, yn, k7y)
                count += 1
                k += 1
                t_k = t0 + (k * pa + k * pb)
            t = tn
            x = xn
            y = yn
            k1y = k7y
            n += 1
            fac = _grow(err, err_old)
            if last_reject:
                fac = min(fac, 1.0)
            err_old = max(err, 1e-4)
            h *= fac
            last_reject = False
        else:
            h *= _shrink(err)
            last_reject = True
    return ks, tk, xs, ys, count, COMPLETED


@njit
def dp5_lyapunov(kind, prm, t0, x0, y0, d0, tau, n_renorm, rtol, atol, max_steps, h0):
    """Two-trajectory renormalisation estimate of the largest exponent.

    Both copies share one step sequence (error norm over all four
    components).  The companion is pulled back to separation ``d0`` at every
    multiple of ``tau``.  Returns the running average of log growth per unit
    time after each renormalisation, the number completed and a status.
    """
    series = np.empty(n_renorm)
    xa = x0
    ya = y0
    off = d0 / math.sqrt(2.0)
    xb = x0 + off
    yb = y0 + off
    ka = accel(kind, prm, t0, xa, ya)
    kb = accel(kind, prm, t0, xb, yb)
    if math.isnan(ka + kb):
        return series, 0, DOMAIN_VIOLATION
    h = _initial_h(t0, t0 + tau, h0)
    err_old = 1e-4
    last_reject = False
    total = 0.0
    n = 0
    for i in range(n_renorm):
        t = t0 + i * tau
        t_seg = t0 + (i + 1) * tau
        while t < t_seg:
            if n >= max_steps:
                return series, i, STEP_LIMIT
            hmin = 1e-14 * max(1.0, abs(t))
            if h < hmin:
                return series, i, DOMAIN_VIOLATION
            hs = h
            if t + 1.01 * hs >= t_seg:
                hs = t_seg - t
            xan, yan, kan, exa, eya = dp5_step(kind, prm, t, xa, ya, ka, hs)
            xbn, ybn, kbn, exb, eyb = dp5_step(kind, prm, t, xb, yb, kb, hs)
            if math.isnan(xan + yan + kan + exa + eya + xbn + ybn + kbn + exb + eyb):
                h = 0.25 * hs
                last_reject = True
                continue
            err = math.sqrt(
                0.25
                * (
                    _sq_err(xa, xan, exa, rtol, atol)
                    + _sq_err(ya, yan, eya, rtol, atol)
                    + _sq_err(xb, xbn, exb, rtol, atol)
                    + _sq_err(yb, ybn, eyb, rtol, atol)
                )
            )
            if err <= 1.0:
                t = t_seg if hs == t_seg - t else t + hs
                xa, ya, ka = xan, yan, kan
                xb, yb, kb = xbn, ybn, kbn
                n += 1
                fac = _grow(err, err_old)
                if last_reject:
                    fac = min(fac, 1.0)
                err_old = max(err, 1e-4)
                # a clipped step must not shrink the controller's h
                if hs == h:
                    h = hs * fac
                last_reject = False
            else:
                h = hs * _shrink(err)
                last_reject = True
        dx = xb - xa
        dy = yb - ya
        d = math.sqrt(dx * dx + dy * dy)
        total += math.log(d / d0)
        series[i] = total / ((i + 1) * tau)
        xb = xa + dx * (d0 / d)
        yb = ya + dy * (d0 / d)
        kb = accel(kind, prm, t, xb, yb)
        if math.isnan(kb):
            return series, i + 1, DOMAIN_VIOLATION
    return series, n_renorm, COMPLETED
