"""Pump-power waveforms P1(t).

Times are in microseconds, modulation frequencies in Hz, powers in mW.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

from .errors import DomainError

US_PER_S = 1e6


def _nonneg(name, v):
    if not (math.isfinite(v) and v >= 0):
        raise DomainError(f"{name} must be finite and >= 0, got {v!r}")


@dataclass(frozen=True)
class Constant:
    p: float

    def __post_init__(self):
        _nonneg("p", self.p)


@dataclass(frozen=True)
class _Periodic:
    p_min: float = 0.2
    p_max: float = 3.0
    f_mod: float = 1200.0
    phase: float = 0.0

    def __post_init__(self):
        _nonneg("p_min", self.p_min)
        _nonneg("p_max", self.p_max)
        if not self.p_min < self.p_max:
            raise DomainError(f"p_min ({self.p_min}) must be < p_max ({self.p_max})")
        if not (math.isfinite(self.f_mod) and self.f_mod > 0):
            raise DomainError(f"f_mod must be > 0 Hz, got {self.f_mod!r}")
        if not 0 <= self.phase < 1:
            raise DomainError(f"phase must lie in [0, 1), got {self.phase!r}")

    @property
    def period(self):
        """Modulation period in us."""
        return US_PER_S / self.f_mod

    def cycle_fraction(self, t):
        return (t * self.f_mod / US_PER_S + self.phase) % 1.0


@dataclass(frozen=True)
class Triangle(_Periodic):
    """Linear ramp p_min -> p_max over the first half period, back down over the second."""


@dataclass(frozen=True)
class Sine(_Periodic):
    """Raised cosine between p_min and p_max, starting at p_min for phase 0."""


@dataclass(frozen=True)
class Pulse:
    t_start: float
    duration: float
    level: float

    def __post_init__(self):
        _nonneg("t_start", self.t_start)
        _nonneg("level", self.level)
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise DomainError(f"pulse duration must be > 0 us, got {self.duration!r}")

    @property
    def t_end(self):
        return self.t_start + self.duration


@dataclass(frozen=True)
class PulseTrain:
    baseline: float
    pulses: tuple = field(default_factory=tuple)

    def __post_init__(self):
        _nonneg("baseline", self.baseline)
        pulses = tuple(self.pulses)
        object.__setattr__(self, "pulses", pulses)
        for prev, nxt in zip(pulses, pulses[1:]):
            if nxt.t_start < prev.t_end:
                raise DomainError("pulses must be sorted by t_start and non-overlapping")


DriveProtocol = Union[Constant, Triangle, Sine, PulseTrain]


def _active_pulse(protocol, t):
    for pulse in protocol.pulses:
        if pulse.t_start <= t < pulse.t_end:
            return pulse
        if pulse.t_start > t:
            break
    return None


def evaluate(protocol, t):
    """Pump power at time ``t`` (us)."""
    if isinstance(protocol, Constant):
        return protocol.p
    if isinstance(protocol, Triangle):
        x = protocol.cycle_fraction(t)
        ramp = 2.0 * x if x < 0.5 else 2.0 - 2.0 * x
        return protocol.p_min + (protocol.p_max - protocol.p_min) * ramp
    if isinstance(protocol, Sine):
        x = protocol.cycle_fraction(t)
        return protocol.p_min + (protocol.p_max - protocol.p_min) * (1.0 - math.cos(2 * math.pi * x)) / 2
    if isinstance(protocol, PulseTrain):
        pulse = _active_pulse(protocol, t)
        return protocol.baseline if pulse is None else pulse.level
    raise TypeError(f"unknown drive protocol {type(protocol).__name__}")


def sampler(protocol, left=False):
    """Fast ``t -> P1(t)`` closure for the integrators.

    With ``left=True`` pulse edges return the limit from below, which the
    adaptive integrator uses for stages that land exactly on an edge.
    """
    if isinstance(protocol, Constant):
        p = protocol.p
        return lambda t: p
    if isinstance(protocol, Triangle):
        lo, depth = protocol.p_min, protocol.p_max - protocol.p_min
        f, ph = protocol.f_mod, protocol.phase

        def tri(t):
            # same arithmetic as cycle_fraction so both paths agree bitwise
            x = (t * f / US_PER_S + ph) % 1.0
            return lo + depth * (2.0 * x if x < 0.5 else 2.0 - 2.0 * x)
        return tri
    if isinstance(protocol, PulseTrain) and left:
        base = protocol.baseline
        edges = [(p.t_start, p.t_end, p.level) for p in protocol.pulses]

        def pulses_left(t):
            for t0, t1, level in edges:
                if t0 < t <= t1:
                    return level
                if t0 >= t:
                    break
            return base
        return pulses_left
    return lambda t: evaluate(protocol, t)


def sweep_rate(protocol, t):
    """dP1/dt at ``t`` in mW/us; right-hand derivative at corners and pulse edges."""
    if isinstance(protocol, (Constant, PulseTrain)):
        return 0.0
    depth = protocol.p_max - protocol.p_min
    f = protocol.f_mod / US_PER_S
    x = protocol.cycle_fraction(t)
    if isinstance(protocol, Triangle):
        return 2.0 * depth * f if x < 0.5 else -2.0 * depth * f
    if isinstance(protocol, Sine):
        return depth * math.pi * f * math.sin(2 * math.pi * x)
    raise TypeError(f"unknown drive protocol {type(protocol).__name__}")


def is_rising(protocol, t):
    """Branch assignment for loop extraction: sign of the sweep rate, phase as tiebreak."""
    r = sweep_rate(protocol, t)
    if r != 0.0:
        return r > 0
    return protocol.cycle_fraction(t) < 0.5


def breakpoints(protocol, t0, t1):
    """Times in (t0, t1) where P1(t) or its derivative is discontinuous."""
    out = []
    if isinstance(protocol, PulseTrain):
        for p in protocol.pulses:
            out.extend(x for x in (p.t_start, p.t_end) if t0 < x < t1)
    elif isinstance(protocol, Triangle):
        # corners sit where the cycle fraction is 0 or 1/2
        k = math.floor((t0 / protocol.period + protocol.phase) * 2)
        while True:
            t = (k / 2 - protocol.phase) * protocol.period
            if t >= t1:
                break
            if t > t0:
                out.append(t)
            k += 1
    return sorted(out)


def power_range(protocol):
    """(lowest, highest) power the protocol visits."""
    if isinstance(protocol, Constant):
        return protocol.p, protocol.p
    if isinstance(protocol, PulseTrain):
        levels = [protocol.baseline] + [p.level for p in protocol.pulses]
        return min(levels), max(levels)
    return protocol.p_min, protocol.p_max


def with_frequency(protocol, f_mod):
    """Copy of a periodic protocol at another modulation frequency."""
    if not isinstance(protocol, _Periodic):
        raise TypeError("only Triangle and Sine protocols have a modulation frequency")
    return type(protocol)(protocol.p_min, protocol.p_max, f_mod, protocol.phase)
