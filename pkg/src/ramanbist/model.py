"""Physical constants, closed-form timescales and steady-state characteristics.

All powers are in mW, times in microseconds, detunings in GHz and the
excited-state relaxation rate in MHz.  Rabi frequencies never appear
directly: every expression is written in terms of optical power through
``|Omega|**2 ~ P``.

Calibration table
-----------------
The two timescale constants and the gain coefficient are not free: they are
solved so that the nominal operating point reproduces the quoted timescales
and a 1 mW CW threshold.

=============  ===========================  ====================================
constant       value                        origin
=============  ===========================  ====================================
delta          4.0 GHz                      operating detuning
gamma          5.7 MHz                      D1 natural linewidth scale
t2             2000 us                      diffusion-limited coherence lifetime
p2             4.0 mW                       resonant pump power
c_r            0.5*sqrt(2*4)/4              tau_r(2 mW) = 0.5 us
c_s            30*5.7*2/16 = 21.375         tau_s(2 mW) = 30 us
q_max          0.5                          coherence ceiling
p_q            0.2 mW                       coherence saturation power
g0             solved                       static threshold = 1.0 mW
kappa          2.0 /us                      field loss, ~1/tau_r
s0             1e-8 /us                     spontaneous seed
a_sat          1.0                          gain-saturation amplitude
a_d            0.01                         field amplitude that shields q
c_read         25000                        readout drain, rate p2/c_read
p_opt          2.2 mW                       phase-matching optimum
w_pm           1.0 mW                       phase-matching width
gamma_abs      0.8 GHz                      resonant absorption half-width
delta_cut      6.0 GHz                      high-detuning cutoff
m_cut          2                            cutoff sharpness
=============  ===========================  ====================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from functools import lru_cache

import numpy as np
from scipy import optimize

from .errors import DomainError, NoThresholdError

#: nominal operating point used to fix the timescale constants
NOMINAL_P1 = 2.0
NOMINAL_TAU_R = 0.5
NOMINAL_TAU_S = 30.0
NOMINAL_P_TH = 1.0

_BASE = dict(
    delta=4.0,
    gamma=5.7,
    t2=2000.0,
    p2=4.0,
    q_max=0.5,
    p_q=0.2,
    kappa=2.0,
    s0=1e-8,
    a_sat=1.0,
    a_d=0.01,
    c_read=25000.0,
    p_opt=2.2,
    w_pm=1.0,
    gamma_abs=0.8,
    delta_cut=6.0,
    m_cut=2,
)
_BASE["c_r"] = NOMINAL_TAU_R * math.sqrt(NOMINAL_P1 * _BASE["p2"]) / _BASE["delta"]
_BASE["c_s"] = NOMINAL_TAU_S * _BASE["gamma"] * NOMINAL_P1 / _BASE["delta"] ** 2


def _envelope(delta, gamma_abs, delta_cut, m_cut):
    d2 = np.square(delta)
    absorption = d2 / (d2 + gamma_abs**2)
    cutoff = 1.0 / (1.0 + (np.abs(delta) / delta_cut) ** (2 * m_cut))
    return absorption * cutoff


def _solve_g0(c):
    # G(P_th) = kappa with q at its drain-off fixed point
    p = NOMINAL_P_TH
    tau_s = c["c_s"] * c["delta"] ** 2 / (c["gamma"] * p)
    q = c["q_max"] * p / (p + c["p_q"]) / (1.0 + tau_s / c["t2"])
    pm = 1.0 / (1.0 + ((p - c["p_opt"]) / c["w_pm"]) ** 2)
    env = float(_envelope(c["delta"], c["gamma_abs"], c["delta_cut"], c["m_cut"]))
    return c["kappa"] / (env * pm * p * q)


_BASE["g0"] = _solve_g0(_BASE)

#: the documented constants table; every PhysicalParams default comes from here
NOMINAL = dict(_BASE)


@dataclass(frozen=True)
class PhysicalParams:
    """Model constants.  Immutable; use :func:`dataclasses.replace` to vary."""

    delta: float = NOMINAL["delta"]          # GHz
    gamma: float = NOMINAL["gamma"]          # MHz
    t2: float = NOMINAL["t2"]                # us
    p2: float = NOMINAL["p2"]                # mW
    c_r: float = NOMINAL["c_r"]              # us*mW/GHz
    c_s: float = NOMINAL["c_s"]              # us*MHz*mW/GHz^2
    q_max: float = NOMINAL["q_max"]
    p_q: float = NOMINAL["p_q"]              # mW
    g0: float = NOMINAL["g0"]                # 1/(us*mW)
    kappa: float = NOMINAL["kappa"]          # 1/us
    s0: float = NOMINAL["s0"]                # amplitude/us
    a_sat: float = NOMINAL["a_sat"]
    a_d: float = NOMINAL["a_d"]
    c_read: float = NOMINAL["c_read"]        # us*mW
    p_opt: float = NOMINAL["p_opt"]          # mW
    w_pm: float = NOMINAL["w_pm"]            # mW
    gamma_abs: float = NOMINAL["gamma_abs"]  # GHz
    delta_cut: float = NOMINAL["delta_cut"]  # GHz
    m_cut: int = NOMINAL["m_cut"]

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "m_cut":
                if isinstance(v, bool) or int(v) != v or v < 1:
                    raise DomainError(f"m_cut must be an integer >= 1, got {v!r}")
                object.__setattr__(self, "m_cut", int(v))
                continue
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise DomainError(f"{f.name} must be finite and > 0, got {v!r}")
        if self.q_max > 1:
            raise DomainError(f"q_max must be <= 1, got {self.q_max}")

    @property
    def drain_rate(self):
        """Coherence readout rate by the resonant pump when generation is off, 1/us."""
        return self.p2 / self.c_read

    def timescales(self, p1=NOMINAL_P1):
        """(tau_r, tau_s, t2) at pump power ``p1``."""
        return compute_tau_r(self, p1), compute_tau_s(self, p1), self.t2

    def hierarchy_ok(self, p1=NOMINAL_P1, factor=10.0):
        tr, ts, t2 = self.timescales(p1)
        return tr * factor <= ts and ts * factor <= t2


def _check_power(p1):
    if not (math.isfinite(p1) and p1 > 0):
        raise DomainError(f"pump power must be > 0 mW, got {p1!r}")


def compute_tau_r(params, p1):
    """Four-photon Raman response time, us: c_r * delta / sqrt(p1 * p2)."""
    _check_power(p1)
    return params.c_r * params.delta / math.sqrt(p1 * params.p2)


def compute_tau_s(params, p1):
    """Dark-state equilibration time set by off-resonant optical pumping, us."""
    _check_power(p1)
    return params.c_s * params.delta**2 / (params.gamma * p1)


def spectral_envelope(params, delta):
    """Detuning dependence of the Raman gain, in [0, 1].

    Product of a resonant-absorption hole of half-width ``gamma_abs`` centred
    on zero detuning and a high-detuning cutoff of order ``m_cut``.  Accepts
    scalars or arrays; even in ``delta``.
    """
    out = _envelope(np.asarray(delta, dtype=float), params.gamma_abs,
                    params.delta_cut, params.m_cut)
    return float(out) if out.ndim == 0 else out


def phase_matching(params, p1):
    x = (np.asarray(p1, dtype=float) - params.p_opt) / params.w_pm
    out = 1.0 / (1.0 + x * x)
    return float(out) if out.ndim == 0 else out


def coherence_target(params, p1):
    """Coherence the pump drives toward, q_max * p1 / (p1 + p_q)."""
    p1 = np.asarray(p1, dtype=float)
    out = params.q_max * p1 / (p1 + params.p_q)
    return float(out) if out.ndim == 0 else out


def _relaxation_ratio(params, p1, delta):
    # tau_s / t2 with tau_s(0) = inf handled by the caller
    return params.c_s * delta**2 / (params.gamma * p1) / params.t2


def steady_coherence(params, p1, delta=None, drain=False):
    """Fixed point of the coherence equation at constant ``p1``.

    ``drain=False`` is the generating state (dark-state protected, no
    readout); ``drain=True`` is the dark state with the readout fully on.
    Zero pump gives zero coherence.
    """
    delta = params.delta if delta is None else delta
    p1 = np.asarray(p1, dtype=float)
    safe = np.where(p1 > 0, p1, 1.0)
    tau_s = params.c_s * delta**2 / (params.gamma * safe)
    denom = 1.0 + tau_s / params.t2
    if drain:
        denom = denom + tau_s * params.drain_rate
    out = np.where(p1 > 0, coherence_target(params, safe) / denom, 0.0)
    return float(out) if out.ndim == 0 else out


def net_gain(params, p1, q, delta=None):
    """Small-signal field gain G = g0 * D_delta * D_pm(p1) * p1 * q, 1/us."""
    delta = params.delta if delta is None else delta
    return (params.g0 * spectral_envelope(params, delta)
            * phase_matching(params, p1) * np.asarray(p1, dtype=float) * q)


def steady_gain(params, p1, delta=None, drain=False):
    return net_gain(params, p1, steady_coherence(params, p1, delta, drain), delta)


def steady_state_output(params, p1, delta=None):
    """Closed-form CW Stokes intensity a**2 at pump power ``p1``.

    Above threshold the saturated balance G/(1 + I/a_sat**2) = kappa gives
    I = a_sat**2 * (G/kappa - 1).  Below threshold the seed-level floor
    s0/kappa is reported as 0.
    """
    p1 = np.asarray(p1, dtype=float)
    if np.any(p1 < 0) or not np.all(np.isfinite(p1)):
        raise DomainError("pump power must be finite and >= 0")
    g = steady_gain(params, p1, delta)
    out = np.where(g > params.kappa, params.a_sat**2 * (g / params.kappa - 1.0), 0.0)
    return float(out) if out.ndim == 0 else out


def _first_crossing(fn, lo, hi, what):
    if fn(hi) <= 0:
        raise NoThresholdError(f"{what}: gain never exceeds loss on (0, {hi:g}] mW")
    return optimize.bisect(fn, lo, hi, xtol=1e-15, rtol=1e-10, maxiter=500)


@lru_cache(maxsize=256)
def static_threshold(params):
    """CW generation threshold P_th, mW: smallest p1 with G(p1) = kappa.

    The gain uses the drain-off coherence, so this is the power below which
    an established Stokes field cannot be sustained.
    """
    return _first_crossing(lambda p: steady_gain(params, p) - params.kappa,
                           1e-9, params.p_opt, "static threshold")


@lru_cache(maxsize=256)
def cold_start_threshold(params):
    """Smallest p1 at which the field grows from the seed with the drain on, mW."""
    return _first_crossing(lambda p: steady_gain(params, p, drain=True) - params.kappa,
                           1e-9, params.p_opt, "cold-start threshold")


def _coherence_at_amplitude(params, p1, a):
    # q fixed point when the field sits at amplitude a (partial drain)
    tau_s = compute_tau_s(params, p1)
    shield = params.a_d**2 / (a * a + params.a_d**2)
    denom = 1.0 + tau_s / params.t2 + tau_s * params.drain_rate * shield
    return coherence_target(params, p1) / denom


def _on_branch_margin(params, p1):
    # max over a of the saturated net gain minus loss at the coherence fixed point
    def neg(log_a):
        a = math.exp(log_a)
        q = _coherence_at_amplitude(params, p1, a)
        return -(net_gain(params, p1, q) / (1.0 + a * a / params.a_sat**2) - params.kappa)

    grid = np.linspace(math.log(1e-4 * params.a_d), math.log(10 * params.a_sat), 400)
    vals = [neg(x) for x in grid]
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    return -min(res.fun, vals[k])


@lru_cache(maxsize=256)
def sustaining_threshold(params):
    """Lowest p1 at which a generating (dark-state protected) state exists, mW.

    This is the saddle-node of the on-branch once the coherence readout is
    accounted for; it sits slightly above :func:`static_threshold`.
    """
    p_cold = cold_start_threshold(params)
    p_th = static_threshold(params)
    lo = p_th * (1 - 1e-9)
    if _on_branch_margin(params, p_cold) < 0:
        return p_cold
    return optimize.bisect(lambda p: _on_branch_margin(params, p), lo, p_cold,
                           xtol=1e-12, rtol=1e-10)


def bistable_window(params):
    """(sustaining, cold-start) powers bounding static bistability, mW."""
    return sustaining_threshold(params), cold_start_threshold(params)


def predicted_thresholds(params, f_mod, p_th=None):
    """Dynamic on/off thresholds P_th * (1 +/- sqrt(f_mod * tau_s_th) / 2), mW.

    ``f_mod`` in Hz; tau_s is evaluated at the static threshold and converted
    to seconds.
    """
    if not (math.isfinite(f_mod) and f_mod >= 0):
        raise DomainError(f"f_mod must be >= 0 Hz, got {f_mod!r}")
    p_th = static_threshold(params) if p_th is None else p_th
    shift = p_th * 0.5 * math.sqrt(f_mod * compute_tau_s(params, p_th) * 1e-6)
    return p_th + shift, p_th - shift


def with_delta(params, delta):
    """Copy of ``params`` at another operating detuning."""
    return replace(params, delta=delta)
