"""Static SVG figures.  Plots are derived artifacts; the CSVs are the data of record."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# 800 x 600 px canvas at 72 dpi
FIGSIZE = (800 / 72, 600 / 72)
DPI = 72

plt.rcParams["svg.hashsalt"] = "ramanbist"
plt.rcParams["svg.fonttype"] = "none"


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", dpi=DPI, metadata={"Date": None})
    plt.close(fig)


def trace(ts, title="Trajectory", *, path):
    fig, (ax_p, ax_i) = plt.subplots(2, 1, sharex=True, figsize=FIGSIZE)
    ax_p.plot(ts.t, ts.p1, color="tab:blue")
    ax_p.set_ylabel("pump power P1 (mW)")
    ax_p.set_title(title)
    ax_i.plot(ts.t, ts.intensity, color="tab:red")
    ax_i.set_ylabel("Stokes intensity")
    ax_i.set_xlabel("time (us)")
    _save(fig, path)


def loop(lp, result, path):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(lp.up_p, lp.up_i, color="tab:red", label="rising pump")
    ax.plot(lp.down_p, lp.down_i, color="tab:blue", label="falling pump")
    if result is not None:
        ax.axvline(result.p_on, color="tab:red", ls=":", lw=1)
        ax.axvline(result.p_off, color="tab:blue", ls=":", lw=1)
    ax.set_xlabel("pump power P1 (mW)")
    ax.set_ylabel("Stokes intensity")
    ax.set_title(f"Hysteresis loop at f_mod = {lp.f_mod:g} Hz")
    ax.legend()
    _save(fig, path)


def thresholds(results, fit, path):
    f = np.array([r.f_mod for r in results])
    s = np.sqrt(f)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(s, [r.p_on for r in results], "o", color="tab:red", label="P_on")
    ax.plot(s, [r.p_off for r in results], "s", color="tab:blue", label="P_off")
    if fit is not None:
        x = np.linspace(0.0, s.max() * 1.05, 100)
        ax.plot(x, fit.p_th_on + fit.coeff_on * x, "--", color="tab:red")
        ax.plot(x, fit.p_th_off - fit.coeff_off * x, "--", color="tab:blue")
    ax.set_xlabel("sqrt(f_mod) (sqrt(Hz))")
    ax.set_ylabel("threshold power (mW)")
    ax.legend()
    _save(fig, path)


def spectrum(scan, path):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(scan.delta, scan.intensity, color="tab:purple")
    ax.set_xlabel("detuning (GHz)")
    ax.set_ylabel("CW Stokes intensity")
    _save(fig, path)
