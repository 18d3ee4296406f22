"""Run configuration: a small sectioned ``key = value`` format.

configparser is not used because errors must name the offending line, and
because values may carry a unit suffix that has to match the documented unit.

Example::

    [params]
    delta = 4.0 GHz

    [drive]
    type = triangle
    f_mod = 4000 Hz

    [analysis]
    f_list = 100, 1000, 4000
    delta_list = 0:20:81      # start:stop:count
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import drive
from .analysis import DEFAULT_BINS, DEFAULT_DETECTION_LEVEL, DEFAULT_PERIODS
from .dynamics import IntegratorConfig, SystemState
from .errors import ConfigError, RamanError
from .model import PhysicalParams, bistable_window

DEFAULT_F_LIST = tuple(float(f) for f in np.geomspace(100.0, 4000.0, 8))
DEFAULT_DELTA_LIST = tuple(float(d) for d in np.linspace(0.0, 30.0, 121))
DEFAULT_PULSES = "600:40:2.5, 1140:40:0.2, 1680:40:2.5, 2220:40:0.2"

_PARAM_UNITS = {
    "delta": "GHz", "gamma": "MHz", "t2": "us", "p2": "mW", "p_q": "mW",
    "kappa": "1/us", "s0": "1/us", "p_opt": "mW", "w_pm": "mW",
    "gamma_abs": "GHz", "delta_cut": "GHz",
}
_PARAM_KEYS = tuple(f.name for f in fields(PhysicalParams))

_DRIVE_KEYS = {
    "type": None, "p_min": "mW", "p_max": "mW", "f_mod": "Hz", "phase": "",
    "p": "mW", "baseline": "mW", "pulses": None,
}
_INTEGRATOR_KEYS = {
    "method": None, "dt": "us", "rel_tol": "", "abs_tol": "", "sample_interval": "us",
    "t_end": "us", "a0": "", "q0": "",
}
_ANALYSIS_KEYS = {
    "detection_level": "", "switch_level": "", "f_list": "Hz", "delta_list": "GHz",
    "spectrum_p1": "mW", "nbins": "", "periods": "",
}
_OUTPUT_KEYS = {"dir": None, "plots": None}
_SECTIONS = ("params", "drive", "integrator", "analysis", "output")
_DRIVE_TYPES = ("triangle", "sine", "constant", "pulses")


@dataclass(frozen=True)
class AnalysisOptions:
    detection_level: float = DEFAULT_DETECTION_LEVEL
    switch_level: float = 0.05
    f_list: tuple = DEFAULT_F_LIST
    delta_list: tuple = DEFAULT_DELTA_LIST
    spectrum_p1: float = 2.0
    nbins: int = DEFAULT_BINS
    periods: int = DEFAULT_PERIODS


@dataclass(frozen=True)
class RunConfig:
    params: PhysicalParams = field(default_factory=PhysicalParams)
    drive: drive.DriveProtocol = field(default_factory=drive.Triangle)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    t_end: float | None = None
    init: SystemState = field(default_factory=SystemState)
    analysis: AnalysisOptions = field(default_factory=AnalysisOptions)
    out_dir: str = "out"
    emit_plots: bool = False


_DEFAULT_TRIANGLE = drive.Triangle(p_min=0.75, p_max=1.65, f_mod=1200.0)

_NUM = re.compile(r"^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)$")


def _number(text, unit, line, key):
    m = _NUM.match(text.strip())
    if not m:
        raise ConfigError(f"malformed number {text.strip()!r}", line, key)
    suffix = m.group(2)
    if suffix:
        expected = (unit or "").replace("us", "µs")
        if not unit or suffix.lower() not in (unit.lower(), expected.lower()):
            raise ConfigError(
                f"unit {suffix!r} does not match the documented unit {unit or 'none'!r}", line, key)
    v = float(m.group(1))
    if not math.isfinite(v):
        raise ConfigError("value must be finite", line, key)
    return v


def _integer(text, line, key):
    v = _number(text, "", line, key)
    if v != int(v):
        raise ConfigError(f"expected an integer, got {text.strip()!r}", line, key)
    return int(v)


def _number_list(text, unit, line, key):
    text = text.strip()
    if text.count(":") == 2 and "," not in text:
        a, b, n = text.split(":")
        lo, hi = _number(a, unit, line, key), _number(b, unit, line, key)
        count = _integer(n, line, key)
        if count < 1:
            raise ConfigError("range count must be >= 1", line, key)
        return tuple(float(x) for x in np.linspace(lo, hi, count))
    items = [x for x in text.split(",") if x.strip()]
    if not items:
        raise ConfigError("empty list", line, key)
    return tuple(_number(x, unit, line, key) for x in items)


def _pulses(text, line, key):
    out = []
    for item in (x.strip() for x in text.split(",")):
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 3:
            raise ConfigError(f"pulse {item!r} is not start:duration:level", line, key)
        t0, dur, lvl = (_number(x, "", line, key) for x in parts)
        try:
            out.append(drive.Pulse(t0, dur, lvl))
        except RamanError as exc:
            raise ConfigError(str(exc), line, key) from None
    return tuple(out)


def _boolean(text, line, key):
    v = text.strip().lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"expected true or false, got {text.strip()!r}", line, key)


def _tokenize(text):
    """Yield (line_no, section, key, value) for every assignment."""
    section = None
    seen = set()
    for n, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]"):
                raise ConfigError(f"malformed section header {body!r}", n)
            section = body[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}]", n)
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", n)
        key, value = (x.strip() for x in body.split("=", 1))
        if section is None:
            raise ConfigError("assignment outside any section", n, key)
        if (section, key) in seen:
            raise ConfigError("duplicate key", n, key)
        seen.add((section, key))
        yield n, section, key, value


def _build(kind, kwargs, lines, section_line, factory):
    """Call ``factory(**kwargs)`` and map invariant failures back to a line."""
    try:
        return factory(**kwargs)
    except RamanError as exc:
        msg = str(exc)
        for key in sorted(kwargs, key=len, reverse=True):
            if re.search(rf"\b{re.escape(key)}\b", msg):
                raise ConfigError(msg, lines.get(key, section_line), key) from None
        raise ConfigError(f"invalid {kind}: {msg}", section_line) from None


def parse_config(text):
    """Parse a configuration document into a :class:`RunConfig`."""
    raw = {s: {} for s in _SECTIONS}
    lines = {s: {} for s in _SECTIONS}
    for n, section, key, value in _tokenize(text):
        raw[section][key] = value
        lines[section][key] = n

    def line_of(section, key):
        return lines[section].get(key)

    # params
    pk = {}
    for key, value in raw["params"].items():
        n = line_of("params", key)
        if key not in _PARAM_KEYS:
            raise ConfigError("unknown key in [params]", n, key)
        v = _integer(value, n, key) if key == "m_cut" else _number(value, _PARAM_UNITS.get(key, ""), n, key)
        if not v > 0:
            raise ConfigError(f"must be > 0, got {v!r}", n, key)
        pk[key] = v
    params = _build("params", pk, lines["params"], None, PhysicalParams)

    # integrator and initial state
    ik, extra = {}, {}
    for key, value in raw["integrator"].items():
        n = line_of("integrator", key)
        if key not in _INTEGRATOR_KEYS:
            raise ConfigError("unknown key in [integrator]", n, key)
        if key == "method":
            ik[key] = value.lower()
        elif key in ("t_end", "a0", "q0"):
            extra[key] = _number(value, _INTEGRATOR_KEYS[key], n, key)
        else:
            ik[key] = _number(value, _INTEGRATOR_KEYS[key], n, key)
    integrator = _build("integrator", ik, lines["integrator"], None, IntegratorConfig)
    t_end = extra.get("t_end")
    if t_end is not None and not t_end > 0:
        raise ConfigError("must be > 0", line_of("integrator", "t_end"), "t_end")
    a0, q0 = extra.get("a0", 0.0), extra.get("q0", 0.0)
    if a0 < 0:
        raise ConfigError("must be >= 0", line_of("integrator", "a0"), "a0")
    if not 0 <= q0 <= params.q_max:
        raise ConfigError(f"must lie in [0, q_max = {params.q_max}]", line_of("integrator", "q0"), "q0")

    # drive
    dk = raw["drive"]
    for key in dk:
        if key not in _DRIVE_KEYS:
            raise ConfigError("unknown key in [drive]", line_of("drive", key), key)
    kind = dk.get("type", "triangle").lower()
    if kind not in _DRIVE_TYPES:
        raise ConfigError(f"type must be one of {', '.join(_DRIVE_TYPES)}", line_of("drive", "type"), "type")
    allowed = {
        "triangle": ("p_min", "p_max", "f_mod", "phase"),
        "sine": ("p_min", "p_max", "f_mod", "phase"),
        "constant": ("p",),
        "pulses": ("baseline", "pulses"),
    }[kind]
    for key in dk:
        if key != "type" and key not in allowed:
            raise ConfigError(f"not valid for drive type {kind!r}", line_of("drive", key), key)
    vals = {}
    for key in allowed:
        if key in dk and key != "pulses":
            vals[key] = _number(dk[key], _DRIVE_KEYS[key], line_of("drive", key), key)
    if kind in ("triangle", "sine"):
        base = {f.name: getattr(_DEFAULT_TRIANGLE, f.name) for f in fields(_DEFAULT_TRIANGLE)}
        base.update(vals)
        cls = drive.Triangle if kind == "triangle" else drive.Sine
        protocol = _build("drive", base, lines["drive"], None, cls)
    elif kind == "constant":
        protocol = _build("drive", {"p": vals.get("p", 2.0)}, lines["drive"], None, drive.Constant)
    else:
        pulses = _pulses(dk.get("pulses", DEFAULT_PULSES), line_of("drive", "pulses"), "pulses")
        if "baseline" in vals:
            baseline = vals["baseline"]
        else:
            try:
                baseline = float(np.mean(bistable_window(params)))
            except RamanError as exc:
                raise ConfigError(f"cannot derive a default baseline: {exc}", None, "baseline") from None
        protocol = _build("drive", {"baseline": baseline, "pulses": pulses},
                          lines["drive"], None, drive.PulseTrain)

    # analysis
    ak = {}
    for key, value in raw["analysis"].items():
        n = line_of("analysis", key)
        if key not in _ANALYSIS_KEYS:
            raise ConfigError("unknown key in [analysis]", n, key)
        if key in ("f_list", "delta_list"):
            ak[key] = _number_list(value, _ANALYSIS_KEYS[key], n, key)
        elif key in ("nbins", "periods"):
            ak[key] = _integer(value, n, key)
        else:
            ak[key] = _number(value, _ANALYSIS_KEYS[key], n, key)
    for key in ("detection_level", "switch_level"):
        if key in ak and not 0 < ak[key] < 1:
            raise ConfigError("must lie in (0, 1)", line_of("analysis", key), key)
    if "f_list" in ak and any(f <= 0 for f in ak["f_list"]):
        raise ConfigError("frequencies must be > 0", line_of("analysis", "f_list"), "f_list")
    if "delta_list" in ak and np.any(np.diff(ak["delta_list"]) <= 0):
        raise ConfigError("detunings must be strictly increasing", line_of("analysis", "delta_list"), "delta_list")
    if "spectrum_p1" in ak and not ak["spectrum_p1"] > 0:
        raise ConfigError("must be > 0", line_of("analysis", "spectrum_p1"), "spectrum_p1")
    if "nbins" in ak and ak["nbins"] < 2:
        raise ConfigError("must be >= 2", line_of("analysis", "nbins"), "nbins")
    if "periods" in ak and ak["periods"] < 2:
        raise ConfigError("must be >= 2", line_of("analysis", "periods"), "periods")
    analysis = AnalysisOptions(**ak)

    # output
    out_dir, plots = "out", False
    for key, value in raw["output"].items():
        n = line_of("output", key)
        if key not in _OUTPUT_KEYS:
            raise ConfigError("unknown key in [output]", n, key)
        if key == "dir":
            if not value:
                raise ConfigError("empty directory name", n, key)
            out_dir = value
        else:
            plots = _boolean(value, n, key)

    return RunConfig(params, protocol, integrator, t_end, SystemState(0.0, a0, q0),
                     analysis, out_dir, plots)


def _fmt(v):
    return repr(float(v)) if not isinstance(v, int) or isinstance(v, bool) else str(v)


def render(cfg):
    """Canonical document for ``cfg``; ``parse_config(render(cfg)) == cfg``."""
    out = ["[params]"]
    for key in _PARAM_KEYS:
        out.append(f"{key} = {_fmt(getattr(cfg.params, key))}")

    out += ["", "[drive]"]
    d = cfg.drive
    if isinstance(d, (drive.Triangle, drive.Sine)):
        out.append(f"type = {'triangle' if isinstance(d, drive.Triangle) else 'sine'}")
        out += [f"{k} = {_fmt(getattr(d, k))}" for k in ("p_min", "p_max", "f_mod", "phase")]
    elif isinstance(d, drive.Constant):
        out += ["type = constant", f"p = {_fmt(d.p)}"]
    else:
        out += ["type = pulses", f"baseline = {_fmt(d.baseline)}"]
        pulses = ", ".join(f"{p.t_start!r}:{p.duration!r}:{p.level!r}" for p in d.pulses)
        if pulses:
            out.append(f"pulses = {pulses}")

    out += ["", "[integrator]"]
    ic = cfg.integrator
    out.append(f"method = {ic.method}")
    out += [f"{k} = {_fmt(getattr(ic, k))}" for k in ("dt", "rel_tol", "abs_tol", "sample_interval")]
    if cfg.t_end is not None:
        out.append(f"t_end = {_fmt(cfg.t_end)}")
    out += [f"a0 = {_fmt(cfg.init.a)}", f"q0 = {_fmt(cfg.init.q)}"]

    out += ["", "[analysis]"]
    an = cfg.analysis
    out += [f"detection_level = {_fmt(an.detection_level)}",
            f"switch_level = {_fmt(an.switch_level)}",
            "f_list = " + ", ".join(_fmt(f) for f in an.f_list),
            "delta_list = " + ", ".join(_fmt(x) for x in an.delta_list),
            f"spectrum_p1 = {_fmt(an.spectrum_p1)}",
            f"nbins = {an.nbins}",
            f"periods = {an.periods}"]

    out += ["", "[output]", f"dir = {cfg.out_dir}", f"plots = {'true' if cfg.emit_plots else 'false'}"]
    return "\n".join(out) + "\n"


def with_output(cfg, out_dir=None, emit_plots=None):
    """Apply command-line overrides for the output section."""
    return replace(cfg,
                   out_dir=cfg.out_dir if out_dir is None else out_dir,
                   emit_plots=cfg.emit_plots if emit_plots is None else emit_plots)
