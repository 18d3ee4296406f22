"""Command-line front end: ``ramanbist <command> --config PATH [--out DIR] [--plots]``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, drive, dynamics
from .config import parse_config, render, with_output
from .errors import ConfigError, RamanError
from .model import compute_tau_s

COMMANDS = ("simulate", "hysteresis", "spectrum", "switch", "fit")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    return format(float(v), ".9g")


class _Run:
    """Collects written files so the index can be emitted last."""

    def __init__(self, cfg, command):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.summary = {}

    def csv(self, name, header, rows):
        path = self.out / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
        self.files.append(name)

    def plot(self, name, fn, *args):
        if self.cfg.emit_plots:
            from . import plotting
            getattr(plotting, fn)(*args, path=self.out / name)
            self.files.append(name)

    def finish(self):
        (self.out / "config.txt").write_text(render(self.cfg), encoding="utf-8")
        index = {"command": self.command, "files": self.files + ["config.txt"],
                 "summary": self.summary}
        (self.out / "index.json").write_text(
            json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def default_t_end(cfg):
    """Record length when the config leaves ``t_end`` unset, us."""
    if cfg.t_end is not None:
        return cfg.t_end
    d, p = cfg.drive, cfg.params
    if isinstance(d, (drive.Triangle, drive.Sine)):
        return cfg.analysis.periods * d.period
    if isinstance(d, drive.Constant):
        return 10 * compute_tau_s(p, d.p) if d.p > 0 else 3 * p.t2
    tail = 10 * compute_tau_s(p, d.baseline) if d.baseline > 0 else 3 * p.t2
    last = d.pulses[-1].t_end if d.pulses else 0.0
    return last + tail


def _trace_rows(ts):
    return zip(ts.t, ts.p1, ts.q, ts.a, ts.intensity)


TRACE_HEADER = ("t_us", "p1_mW", "q", "a", "intensity")


def cmd_simulate(run):
    cfg = run.cfg
    ts = dynamics.integrate(cfg.params, cfg.drive, default_t_end(cfg), cfg.init, cfg.integrator)
    run.csv("trace.csv", TRACE_HEADER, _trace_rows(ts))
    run.plot("trace.svg", "trace", ts)
    run.summary.update(samples=len(ts), steps=ts.steps, clamps=ts.clamps.total)


def _periodic_drive(cfg):
    if not isinstance(cfg.drive, (drive.Triangle, drive.Sine)):
        raise ConfigError("this command needs a triangle or sine drive", key="type")
    return cfg.drive


def _sweep(run):
    cfg = run.cfg
    protocol = _periodic_drive(cfg)
    an = cfg.analysis
    ok, rows, failures = [], [], 0
    for f in an.f_list:
        try:
            (res,), (lp,) = analysis.threshold_sweep(
                cfg.params, protocol, [f], an.detection_level, an.periods,
                cfg.integrator, an.nbins, keep_loops=True)
        except RamanError as exc:
            failures += 1
            rows.append((f, None, None, None, None, str(exc)))
            continue
        ok.append((res, lp))
        rows.append((f, res.p_on, res.p_off, res.width, res.area, None))
    if not ok:
        raise RamanError("every modulation frequency failed")
    header = ["f_mod_Hz", "p_on_mW", "p_off_mW", "width_mW", "area"]
    if failures:
        header.append("error")
    else:
        rows = [r[:5] for r in rows]
    run.csv("thresholds.csv", header, rows)
    run.summary["failed_frequencies"] = failures
    return ok


def _freq_tag(f):
    return format(f, ".6g")


def _write_fit(run, ok):
    try:
        fit = analysis.fit_sqrt_scaling([r for r, _ in ok])
    except RamanError:
        if run.command == "fit":
            raise
        return None
    run.summary["fit"] = {"p_th_on": fit.p_th_on, "p_th_off": fit.p_th_off,
                          "intercept_gap": fit.intercept_gap,
                          "coeff_on": fit.coeff_on, "coeff_off": fit.coeff_off,
                          "r2_on": fit.r2_on, "r2_off": fit.r2_off,
                          "exponent_on": fit.exponent_on, "exponent_off": fit.exponent_off}
    return fit


def cmd_hysteresis(run):
    ok = _sweep(run)
    for res, lp in ok:
        tag = _freq_tag(res.f_mod)
        run.csv(f"loops_{tag}.csv", ("p1_mW", "intensity_up", "intensity_down"),
                _loop_rows(lp))
        run.plot(f"loop_{tag}.svg", "loop", lp, res)
    fit = _write_fit(run, ok) if len(ok) >= 4 else None
    run.plot("thresholds.svg", "thresholds", [r for r, _ in ok], fit)


def _loop_rows(lp):
    # both branches on their merged ascending power grid, linearly interpolated;
    # blank outside the range a branch covers
    up_p, up_i = lp.up_p, lp.up_i
    dn_p, dn_i = lp.down_p[::-1], lp.down_i[::-1]
    for p in np.union1d(up_p, dn_p):
        up = np.interp(p, up_p, up_i) if up_p[0] <= p <= up_p[-1] else None
        down = np.interp(p, dn_p, dn_i) if dn_p[0] <= p <= dn_p[-1] else None
        yield p, up, down


def cmd_fit(run):
    ok = _sweep(run)
    fit = _write_fit(run, ok)
    run.csv("fit.csv", ("branch", "p_th_mW", "coeff", "r2"),
            [("on", fit.p_th_on, fit.coeff_on, fit.r2_on),
             ("off", fit.p_th_off, fit.coeff_off, fit.r2_off)])
    run.plot("thresholds.svg", "thresholds", [r for r, _ in ok], fit)


def cmd_spectrum(run):
    cfg = run.cfg
    spectrum_ = analysis.scan_spectrum(cfg.params, cfg.analysis.spectrum_p1, cfg.analysis.delta_list)
    run.csv("spectrum.csv", ("delta_GHz", "intensity"), zip(spectrum_.delta, spectrum_.intensity))
    run.plot("spectrum.svg", "spectrum", spectrum_)


def cmd_switch(run):
    cfg = run.cfg
    if not isinstance(cfg.drive, drive.PulseTrain):
        raise ConfigError("switch needs a pulses drive", key="type")
    ts = dynamics.integrate(cfg.params, cfg.drive, default_t_end(cfg), cfg.init, cfg.integrator)
    rep = analysis.switch_metrics(ts, cfg.drive, cfg.params, cfg.analysis.switch_level)
    run.csv("switch.csv", ("pulse", "kind", "state_before", "state_after", "transition_us"),
            [(p.index, p.kind, p.state_before, p.state_after, p.transition_time)
             for p in rep.pulses])
    run.csv("trace.csv", TRACE_HEADER, _trace_rows(ts))
    run.plot("switch.svg", "trace", ts, "Pulsed switching")
    contrast = rep.contrast
    run.summary.update(contrast=None if contrast is None or math.isinf(contrast) else contrast,
                       all_latched=rep.all_latched, baseline_mW=cfg.drive.baseline)


_HANDLERS = {"simulate": cmd_simulate, "hysteresis": cmd_hysteresis,
             "spectrum": cmd_spectrum, "switch": cmd_switch, "fit": cmd_fit}


def build_parser():
    ap = argparse.ArgumentParser(prog="ramanbist",
                                 description="Dynamic Raman bistability simulator")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="configuration file (UTF-8)")
    ap.add_argument("--out", help="output directory (overrides [output] dir)")
    ap.add_argument("--plots", action="store_true", help="also write SVG figures")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = with_output(parse_config(text), args.out, True if args.plots else None)
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return 2
    try:
        run = _Run(cfg, args.command)
        _HANDLERS[args.command](run)
        run.finish()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RamanError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
