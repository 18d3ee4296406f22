"""Hysteresis loops, threshold extraction, scaling fits, spectra and switch metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import integrate, optimize

from . import drive, dynamics
from .errors import (ConfigError, DomainError, FitError, InsufficientDataError,
                     NoGenerationError, RamanError)
from .model import compute_tau_s, steady_state_output, with_delta

#: fraction of the peak intensity that counts as "generating"
DEFAULT_DETECTION_LEVEL = 1e-6
DEFAULT_BINS = 500
DEFAULT_PERIODS = 3
SAMPLES_PER_PERIOD = 8000
#: below this modulation frequency the adaptive integrator is used
ADAPTIVE_BELOW_HZ = 100.0


@dataclass(frozen=True)
class HysteresisLoop:
    """Cycle-averaged intensity against pump power, split by sweep direction.

    ``up_p``/``up_i`` are sorted by increasing power, ``down_p``/``down_i``
    by decreasing power, matching the order in which the sweep visits them.
    """

    f_mod: float
    up_p: np.ndarray
    up_i: np.ndarray
    down_p: np.ndarray
    down_i: np.ndarray

    def __post_init__(self):
        for name in ("up_p", "up_i", "down_p", "down_i"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if len(self.up_p) == 0 or len(self.down_p) == 0:
            raise InsufficientDataError("both loop branches must be nonempty")
        if len(self.up_p) != len(self.up_i) or len(self.down_p) != len(self.down_i):
            raise DomainError("branch power and intensity arrays differ in length")
        if np.any(np.diff(self.up_p) < 0) or np.any(np.diff(self.down_p) > 0):
            raise DomainError("up branch must increase and down branch decrease in power")

    @property
    def up_branch(self):
        return np.column_stack([self.up_p, self.up_i])

    @property
    def down_branch(self):
        return np.column_stack([self.down_p, self.down_i])

    @property
    def peak_intensity(self):
        return float(max(self.up_i.max(), self.down_i.max()))


@dataclass(frozen=True)
class ThresholdResult:
    f_mod: float
    p_on: float
    p_off: float
    detection_level: float
    peak_intensity: float
    area: Optional[float] = None

    @property
    def width(self):
        return self.p_on - self.p_off


@dataclass(frozen=True)
class FitResult:
    """Two independent straight-line fits in sqrt(f_mod).

    ``p_on = p_th_on + coeff_on * sqrt(f)`` and
    ``p_off = p_th_off - coeff_off * sqrt(f)``.
    """

    p_th_on: float
    p_th_off: float
    coeff_on: float
    coeff_off: float
    r2_on: float
    r2_off: float
    exponent_on: Optional[float] = None
    exponent_off: Optional[float] = None

    @property
    def p_th_est(self):
        return 0.5 * (self.p_th_on + self.p_th_off)

    @property
    def intercept_gap(self):
        return self.p_th_on - self.p_th_off


@dataclass(frozen=True)
class Spectrum:
    delta: np.ndarray
    intensity: np.ndarray


@dataclass(frozen=True)
class PulseRecord:
    index: int
    kind: str
    state_before: str
    state_after: str
    transition_time: Optional[float]

    @property
    def latched(self):
        return self.state_after == self.kind


@dataclass(frozen=True)
class SwitchReport:
    pulses: tuple
    contrast: Optional[float]
    on_reference: float

    @property
    def all_latched(self):
        return all(p.latched for p in self.pulses)


def extract_loop(ts, protocol, nbins=DEFAULT_BINS):
    """Cycle-averaged loop from a trajectory under periodic modulation.

    The first period is treated as transient and dropped; the remaining whole
    periods are split by sweep direction and averaged into ``nbins`` power
    bins.  Each bin reports the mean power and mean intensity of its samples.
    """
    if not isinstance(protocol, (drive.Triangle, drive.Sine)):
        raise DomainError("loop extraction needs a Triangle or Sine protocol")
    period = protocol.period
    t = ts.t
    n_periods = math.floor((t[-1] - t[0]) / period + 1e-9)
    if n_periods < 2:
        raise InsufficientDataError(
            f"trajectory spans {(t[-1] - t[0]) / period:.3g} periods, need >= 2")
    t_lo = t[0] + period
    t_hi = t[0] + n_periods * period
    keep = (t >= t_lo - 1e-9) & (t < t_hi - 1e-9)
    t, p, intensity = t[keep], ts.p1[keep], ts.intensity[keep]
    rising = np.array([drive.is_rising(protocol, x) for x in t], dtype=bool)
    edges = np.linspace(protocol.p_min, protocol.p_max, nbins + 1)

    def branch(sel):
        idx = np.clip(np.searchsorted(edges, p[sel], side="right") - 1, 0, nbins - 1)
        count = np.bincount(idx, minlength=nbins)
        ok = count > 0
        mean_p = np.bincount(idx, p[sel], nbins)[ok] / count[ok]
        mean_i = np.bincount(idx, intensity[sel], nbins)[ok] / count[ok]
        return mean_p, mean_i

    up_p, up_i = branch(rising)
    dn_p, dn_i = branch(~rising)
    return HysteresisLoop(protocol.f_mod, up_p, up_i, dn_p[::-1], dn_i[::-1])


def loop_area(loop):
    """|closed integral of I dP| over the power range both branches cover."""
    up_p, up_i = loop.up_p, loop.up_i
    dn_p, dn_i = loop.down_p[::-1], loop.down_i[::-1]
    lo = max(up_p[0], dn_p[0])
    hi = min(up_p[-1], dn_p[-1])
    if not hi > lo:
        raise DomainError("loop branches do not overlap in power")
    grid = np.union1d(up_p, dn_p)
    grid = grid[(grid >= lo) & (grid <= hi)]
    diff = np.interp(grid, dn_p, dn_i) - np.interp(grid, up_p, up_i)
    return float(abs(integrate.trapezoid(diff, grid)))


def detect_thresholds(loop, detection_level=DEFAULT_DETECTION_LEVEL):
    """Onset and cessation powers at ``detection_level`` times the loop peak."""
    if not 0 < detection_level < 1:
        raise DomainError(f"detection_level must lie in (0, 1), got {detection_level!r}")
    peak = loop.peak_intensity
    if not peak > 0:
        raise NoGenerationError("loop has zero peak intensity", f_mod=loop.f_mod)
    level = detection_level * peak

    p, i = loop.up_p, loop.up_i
    above = np.nonzero(i > level)[0]
    if len(above) == 0:
        raise NoGenerationError("up branch never crosses the detection level", f_mod=loop.f_mod)
    k = above[0]
    p_on = p[k] if k == 0 else p[k - 1] + (level - i[k - 1]) / (i[k] - i[k - 1]) * (p[k] - p[k - 1])

    p, i = loop.down_p, loop.down_i
    above = np.nonzero(i > level)[0]
    if len(above) == 0:
        raise NoGenerationError("down branch never crosses the detection level", f_mod=loop.f_mod)
    k = above[-1]
    if k == len(p) - 1:
        p_off = p[k]
    else:
        p_off = p[k] + (i[k] - level) / (i[k] - i[k + 1]) * (p[k + 1] - p[k])
    return ThresholdResult(loop.f_mod, float(p_on), float(p_off), detection_level, peak)


def loop_integrator(f_mod, base=None, samples_per_period=SAMPLES_PER_PERIOD):
    """Integrator settings for one modulation period class.

    Fixed-step RK4 from ``ADAPTIVE_BELOW_HZ`` upward, adaptive below it.  The
    output interval is the largest multiple of ``dt`` giving at least
    ``samples_per_period`` samples per period.
    """
    base = dynamics.IntegratorConfig() if base is None else base
    period = drive.US_PER_S / f_mod
    method = "rk45" if f_mod < ADAPTIVE_BELOW_HZ else "rk4"
    stride = max(1, int(period / base.dt / samples_per_period))
    return replace(base, method=method, sample_interval=stride * base.dt)


def run_loop(params, protocol, periods=DEFAULT_PERIODS, cfg=None, nbins=DEFAULT_BINS):
    """Integrate ``periods`` modulation periods from a cold start and extract the loop."""
    cfg = loop_integrator(protocol.f_mod, cfg)
    ts = dynamics.integrate(params, protocol, periods * protocol.period, cfg=cfg)
    return ts, extract_loop(ts, protocol, nbins)


def threshold_sweep(params, protocol, f_list, detection_level=DEFAULT_DETECTION_LEVEL,
                    periods=DEFAULT_PERIODS, cfg=None, nbins=DEFAULT_BINS, keep_loops=False):
    """Thresholds at each modulation frequency in ``f_list``, in input order.

    With ``keep_loops=True`` returns ``(results, loops)``.  Per-frequency
    failures are re-raised with the frequency attached.
    """
    f_list = list(f_list)
    if not f_list:
        raise DomainError("f_list must not be empty")
    results, loops = [], []
    for f in f_list:
        if not f > 0:
            raise DomainError(f"modulation frequency must be > 0 Hz, got {f!r}")
        try:
            _, lp = run_loop(params, drive.with_frequency(protocol, f), periods, cfg, nbins)
            res = detect_thresholds(lp, detection_level)
            res = replace(res, area=loop_area(lp))
        except RamanError as exc:
            exc.f_mod = f
            exc.args = (f"{exc} (f_mod = {f:g} Hz)",)
            raise
        results.append(res)
        loops.append(lp)
    return (results, loops) if keep_loops else results


def _line_fit(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if not sxx > 0:
        raise FitError("design matrix is rank deficient (all abscissae equal)")
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    ss_res = np.sum((y - intercept - slope * x) ** 2)
    ss_tot = np.sum((y - ym) ** 2)
    if ss_tot > 0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res == 0 else -math.inf
    return float(intercept), float(slope), float(r2)


def _loglog_slope(f, excess):
    excess = np.asarray(excess, dtype=float)
    if np.any(excess <= 0):
        return None
    return _line_fit(np.log(f), np.log(excess))[1]


def fit_sqrt_scaling(results):
    """Independent least-squares fits of p_on and p_off against sqrt(f_mod)."""
    results = list(results)
    f = np.array([r.f_mod for r in results], dtype=float)
    if len(np.unique(f)) < 4:
        raise FitError(f"need >= 4 distinct frequencies, got {len(np.unique(f))}")
    s = np.sqrt(f)
    p_on = np.array([r.p_on for r in results])
    p_off = np.array([r.p_off for r in results])
    c_on, k_on, r2_on = _line_fit(s, p_on)
    c_off, k_off, r2_off = _line_fit(s, p_off)
    return FitResult(c_on, c_off, k_on, -k_off, r2_on, r2_off,
                     _loglog_slope(f, p_on - c_on), _loglog_slope(f, c_off - p_off))


def static_detection_threshold(params, p_min, p_max, detection_level=DEFAULT_DETECTION_LEVEL):
    """Lowest power in [p_min, p_max] whose CW output reaches the detection level.

    The level is relative to the largest CW output over the same range, so
    this is the static counterpart of what :func:`detect_thresholds` measures.
    """
    grid = np.linspace(p_min, p_max, 20001)
    out = steady_state_output(params, grid)
    peak = float(out.max())
    if not peak > 0:
        raise NoGenerationError("no CW generation anywhere in the range")
    level = detection_level * peak
    k = int(np.argmax(out >= level))
    if k == 0:
        return float(grid[0])
    return optimize.bisect(lambda p: steady_state_output(params, p) - level,
                           grid[k - 1], grid[k], xtol=1e-14, rtol=1e-12)


def scan_spectrum(params, p1, delta_list):
    """CW output at pump power ``p1`` for each detuning in ``delta_list``."""
    if not (math.isfinite(p1) and p1 > 0):
        raise DomainError(f"pump power must be > 0 mW, got {p1!r}")
    deltas = np.asarray(list(delta_list), dtype=float)
    if len(deltas) == 0 or np.any(np.diff(deltas) <= 0):
        raise DomainError("delta_list must be nonempty and strictly increasing")
    out = np.array([steady_state_output(with_delta(params, d), p1) if d != 0 else 0.0
                    for d in deltas])
    return Spectrum(deltas, out)


def _window_state(ts, t0, t1, level):
    sel = (ts.t >= t0) & (ts.t <= t1)
    if not np.any(sel):
        raise ConfigError(f"no samples between {t0:.6g} and {t1:.6g} us")
    mean = float(ts.intensity[sel].mean())
    return ("on" if mean > level else "off"), mean


def switch_metrics(ts, protocol, params, detection_level=0.05):
    """Classify generation between pulses and measure latching.

    A window runs from ``5 * tau_s(baseline)`` after a pulse (or after the
    start of the record) to the next pulse.  The on/off decision compares the
    window mean with ``detection_level`` times the CW output at the baseline
    power, or times the CW peak when the baseline is below threshold.  ``transition_time`` is measured from the pulse end and is
    negative when the crossing already happens during the pulse.
    """
    if not isinstance(protocol, drive.PulseTrain):
        raise DomainError("switch metrics need a PulseTrain protocol")
    base = protocol.baseline
    settle = 5.0 * compute_tau_s(params, base)
    on_ref = float(steady_state_output(params, base))
    if not on_ref > 0:
        # below threshold there is no on-state at the baseline; fall back to the CW peak
        on_ref = float(steady_state_output(params, np.linspace(0.0, 2 * params.p_opt, 4001)).max())
        if not on_ref > 0:
            raise NoGenerationError("the model never generates at any pump power")
    level = detection_level * on_ref

    starts = [ts.t[0]] + [p.t_end for p in protocol.pulses]
    stops = [p.t_start for p in protocol.pulses] + [ts.t[-1]]
    windows = []
    for a, b in zip(starts, stops):
        if b - a <= settle:
            raise ConfigError(
                f"window {a:.6g}-{b:.6g} us is shorter than the {settle:.6g} us settling time")
        windows.append(_window_state(ts, a + settle, b, level))

    records, on_means, off_means = [], [], []
    for state, mean in windows:
        (on_means if state == "on" else off_means).append(mean)
    for k, pulse in enumerate(protocol.pulses):
        kind = "on" if pulse.level > base else "off"
        before, after = windows[k][0], windows[k + 1][0]
        tt = None
        if before != after:
            sel = ts.t >= pulse.t_start
            crossed = ts.intensity[sel] > level if after == "on" else ts.intensity[sel] <= level
            hits = np.nonzero(crossed)[0]
            if len(hits):
                tt = float(ts.t[sel][hits[0]] - pulse.t_end)
        records.append(PulseRecord(k, kind, before, after, tt))

    contrast = None
    if on_means and off_means:
        off = float(np.mean(off_means))
        contrast = math.inf if off == 0 else float(np.mean(on_means)) / off
    return SwitchReport(tuple(records), contrast, on_ref)
