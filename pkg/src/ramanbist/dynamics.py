"""Reduced slow-fast model of the Stokes field amplitude and the ground-state coherence.

State variables are the real, non-negative Stokes amplitude ``a`` and the
normalised coherence ``q``::

    da/dt = [G / (1 + a^2/a_sat^2) - kappa] * a + s0
    dq/dt = (q_d(p1) - q) / tau_s(p1) - q / t2 - q * (p2/c_read) * a_d^2 / (a^2 + a_d^2)

with G = g0 * D_delta * D_pm(p1) * p1 * q and q_d = q_max * p1 / (p1 + p_q).
The last term drains coherence through the resonant pump only while the
field is off; a generating field shields it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import drive
from .errors import DomainError, IntegrationError, StiffnessError
from .model import NOMINAL_P1, compute_tau_r, spectral_envelope

MIN_ADAPTIVE_STEP = 1e-9  # us


@dataclass(frozen=True)
class SystemState:
    t: float = 0.0
    a: float = 0.0
    q: float = 0.0


@dataclass(frozen=True)
class IntegratorConfig:
    """Integrator settings.

    ``method`` is ``"rk4"`` (fixed step ``dt``) or ``"rk45"`` (embedded
    Dormand-Prince pair with ``rel_tol``/``abs_tol``).  Output is sampled
    every ``sample_interval`` us.
    """

    method: str = "rk4"
    dt: float = 0.02
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    sample_interval: float = 0.2

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise DomainError(f"method must be 'rk4' or 'rk45', got {self.method!r}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise DomainError(f"dt must be > 0, got {self.dt!r}")
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise DomainError(f"{name} must lie in (0, 1), got {v!r}")
        if not (math.isfinite(self.sample_interval) and self.sample_interval > 0):
            raise DomainError(f"sample_interval must be > 0, got {self.sample_interval!r}")


@dataclass
class ClampCounter:
    """Counts how often the post-step guard had to pull the state back into range."""

    a: int = 0
    q: int = 0

    @property
    def total(self):
        return self.a + self.q


@dataclass
class TimeSeries:
    t: np.ndarray
    p1: np.ndarray
    q: np.ndarray
    a: np.ndarray
    intensity: np.ndarray = field(init=False)
    clamps: ClampCounter = field(default_factory=ClampCounter)
    steps: int = 0

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.p1 = np.asarray(self.p1, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        self.intensity = self.a * self.a

    def __len__(self):
        return len(self.t)

    def final_state(self):
        return SystemState(float(self.t[-1]), float(self.a[-1]), float(self.q[-1]))


def make_rhs(params):
    """Return ``rhs(a, q, p1) -> (da/dt, dq/dt)`` with the constants folded in."""
    g0e = params.g0 * spectral_envelope(params, params.delta)
    p_opt, w_pm = params.p_opt, params.w_pm
    kappa, s0 = params.kappa, params.s0
    inv_asat2 = 1.0 / params.a_sat**2
    ad2 = params.a_d**2
    drain = params.drain_rate
    inv_t2 = 1.0 / params.t2
    q_max, p_q = params.q_max, params.p_q
    # 1/tau_s(p1) = p1 / pump_scale, so the pumping term vanishes at p1 = 0
    pump_scale = params.c_s * params.delta**2 / params.gamma

    def rhs(a, q, p1):
        x = (p1 - p_opt) / w_pm
        g = g0e * p1 * q / (1.0 + x * x)
        a2 = a * a
        da = (g / (1.0 + a2 * inv_asat2) - kappa) * a + s0
        dq = -q * inv_t2 - q * drain * ad2 / (a2 + ad2)
        if p1 > 0.0:
            dq += (q_max * p1 / (p1 + p_q) - q) * p1 / pump_scale
        return da, dq

    return rhs


def derivatives(state, params, p1):
    """(da/dt, dq/dt) at ``state`` for pump power ``p1`` (mW)."""
    if p1 < 0:
        raise DomainError(f"pump power must be >= 0, got {p1!r}")
    return make_rhs(params)(state.a, state.q, p1)


def _clamp(a, q, q_max, counter):
    if a < 0.0:
        a = 0.0
        if counter is not None:
            counter.a += 1
    if q < 0.0:
        q = 0.0
        if counter is not None:
            counter.q += 1
    elif q > q_max:
        q = q_max
        if counter is not None:
            counter.q += 1
    return a, q


def _check_finite(a, q, t):
    if not (math.isfinite(a) and math.isfinite(q)):
        raise IntegrationError(f"non-finite state at t = {t:.9g} us", t=t)


def step_rk4(state, params, protocol, dt, counter=None, rhs=None):
    """Advance one classical fourth-order Runge-Kutta step of size ``dt`` (us)."""
    if not (math.isfinite(dt) and dt > 0):
        raise DomainError(f"dt must be > 0, got {dt!r}")
    rhs = make_rhs(params) if rhs is None else rhs
    t, a, q = state.t, state.a, state.q
    h2 = 0.5 * dt
    p0 = drive.evaluate(protocol, t)
    ph = drive.evaluate(protocol, t + h2)
    p1 = drive.evaluate(protocol, t + dt)
    k1a, k1q = rhs(a, q, p0)
    k2a, k2q = rhs(a + h2 * k1a, q + h2 * k1q, ph)
    k3a, k3q = rhs(a + h2 * k2a, q + h2 * k2q, ph)
    k4a, k4q = rhs(a + dt * k3a, q + dt * k3q, p1)
    a = a + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
    q = q + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    _check_finite(a, q, t + dt)
    a, q = _clamp(a, q, params.q_max, counter)
    return SystemState(t + dt, a, q)


def _sample_stride(cfg):
    stride = round(cfg.sample_interval / cfg.dt)
    if stride < 1 or abs(stride * cfg.dt - cfg.sample_interval) > 1e-9 * cfg.sample_interval:
        raise DomainError(
            f"sample_interval {cfg.sample_interval} us is not a multiple of dt {cfg.dt} us")
    return stride


def _integrate_rk4(params, protocol, t_end, init, cfg):
    if cfg.dt > compute_tau_r(params, NOMINAL_P1) / 10:
        raise DomainError("fixed step must not exceed a tenth of the Raman response time")
    stride = _sample_stride(cfg)
    rhs = make_rhs(params)
    power = drive.sampler(protocol)
    q_max = params.q_max
    counter = ClampCounter()
    t0, dt = init.t, cfg.dt
    n = int(math.ceil((t_end - t0) / dt - 1e-9))
    h2 = 0.5 * dt
    a, q = init.a, init.q
    ts, ps, qs, as_ = [t0], [power(t0)], [q], [a]
    for i in range(n):
        t = t0 + i * dt
        h = dt if i < n - 1 else (t_end - t)
        if h != dt:
            h2 = 0.5 * h
        p0 = power(t)
        ph = power(t + h2)
        pe = power(t + h)
        k1a, k1q = rhs(a, q, p0)
        k2a, k2q = rhs(a + h2 * k1a, q + h2 * k1q, ph)
        k3a, k3q = rhs(a + h2 * k2a, q + h2 * k2q, ph)
        k4a, k4q = rhs(a + h * k3a, q + h * k3q, pe)
        a = a + h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        q = q + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        if not (math.isfinite(a) and math.isfinite(q)):
            raise IntegrationError(f"non-finite state at t = {t + h:.9g} us", t=t + h)
        if a < 0.0 or q < 0.0 or q > q_max:
            a, q = _clamp(a, q, q_max, counter)
        if (i + 1) % stride == 0:
            tn = t0 + (i + 1) * dt
            ts.append(tn)
            ps.append(pe)
            qs.append(q)
            as_.append(a)
    return TimeSeries(ts, ps, qs, as_, clamps=counter, steps=n)


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = _A[6] + (0.0,)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _hermite(t, ta, tb, ya, yb, fa, fb):
    h = tb - ta
    s = (t - ta) / h
    s2, s3 = s * s, s * s * s
    return ((2 * s3 - 3 * s2 + 1) * ya + (s3 - 2 * s2 + s) * h * fa
            + (-2 * s3 + 3 * s2) * yb + (s3 - s2) * h * fb)


def _integrate_rk45(params, protocol, t_end, init, cfg):
    rhs = make_rhs(params)
    power = drive.sampler(protocol)
    power_left = drive.sampler(protocol, left=True)
    q_max = params.q_max
    rtol, atol = cfg.rel_tol, cfg.abs_tol
    counter = ClampCounter()
    t0 = init.t
    breaks = drive.breakpoints(protocol, t0, t_end) + [t_end]
    n_out = int(math.floor((t_end - t0) / cfg.sample_interval + 1e-9))
    out_t = [t0 + k * cfg.sample_interval for k in range(n_out + 1)]
    ts, ps, qs, as_ = [t0], [power(t0)], [init.q], [init.a]
    k_out = 1

    t, a, q = t0, init.a, init.q
    fa, fq = rhs(a, q, power(t))
    h = min(cfg.sample_interval, 0.01, t_end - t0)
    ib = 0
    steps = 0
    while t < t_end:
        while breaks[ib] <= t:
            ib += 1
        t_stop = breaks[ib]
        landing = t + h >= t_stop * (1 - 1e-15) - 1e-12
        hh = t_stop - t if landing else h
        ka = [fa]
        kq = [fq]
        for s in range(1, 7):
            ya = a + hh * sum(c * k for c, k in zip(_A[s], ka))
            yq = q + hh * sum(c * k for c, k in zip(_A[s], kq))
            ts_ = t + _C[s] * hh
            p = power_left(ts_) if s >= 5 else power(ts_)
            da, dq = rhs(ya, yq, p)
            ka.append(da)
            kq.append(dq)
        na, nq = ya, yq  # row 6 of the tableau is the 5th-order solution
        ea = hh * sum(c * k for c, k in zip(_E, ka))
        eq = hh * sum(c * k for c, k in zip(_E, kq))
        sa = atol + rtol * max(abs(a), abs(na))
        sq = atol + rtol * max(abs(q), abs(nq))
        err = max(abs(ea) / sa, abs(eq) / sq)
        if not (math.isfinite(na) and math.isfinite(nq)):
            if hh <= MIN_ADAPTIVE_STEP:
                raise IntegrationError(f"non-finite state at t = {t + hh:.9g} us", t=t + hh)
            err = math.inf
        if err <= 1.0:
            tn = t_stop if landing else t + hh
            fan, fqn = ka[6], kq[6]
            while k_out <= n_out and out_t[k_out] <= tn + 1e-12:
                tk = out_t[k_out]
                ts.append(tk)
                ps.append(power(tk))
                qs.append(_hermite(tk, t, tn, q, nq, fq, fqn))
                as_.append(max(_hermite(tk, t, tn, a, na, fa, fan), 0.0))
                k_out += 1
            if na < 0.0 or nq < 0.0 or nq > q_max:
                na, nq = _clamp(na, nq, q_max, counter)
                fan, fqn = rhs(na, nq, power_left(tn))
            t, a, q = tn, na, nq
            steps += 1
            if landing:
                # derivative of P1 may jump here; restart from the right limit
                fa, fq = rhs(a, q, power(t))
            else:
                fa, fq = fan, fqn
            factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = hh * factor if not landing else max(h, hh)
        else:
            h = hh * max(0.2, 0.9 * err ** -0.2)
            if h < MIN_ADAPTIVE_STEP:
                raise StiffnessError(f"step size underflow at t = {t:.9g} us", t=t)
    return TimeSeries(ts, ps, qs, as_, clamps=counter, steps=steps)


def integrate(params, protocol, t_end, init=None, cfg=None):
    """Integrate from ``init`` (default: cold start at t = 0) to ``t_end`` (us)."""
    init = SystemState() if init is None else init
    cfg = IntegratorConfig() if cfg is None else cfg
    if not t_end > init.t:
        raise DomainError(f"t_end ({t_end}) must exceed the initial time ({init.t})")
    if init.a < 0 or not 0 <= init.q <= params.q_max:
        raise DomainError("initial state must satisfy a >= 0 and 0 <= q <= q_max")
    if cfg.method == "rk4":
        return _integrate_rk4(params, protocol, t_end, init, cfg)
    return _integrate_rk45(params, protocol, t_end, init, cfg)
