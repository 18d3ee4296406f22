import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ramanbist import analysis, drive, dynamics, model
from ramanbist.analysis import HysteresisLoop, ThresholdResult
from ramanbist.errors import (ConfigError, DomainError, FitError, InsufficientDataError,
                              NoGenerationError)
from sweeps import FIT_GRID, LEVEL, PARAMS, TRIANGLE, WIDE_GRID, single, sweep

P = PARAMS


def _synthetic_ts(protocol, periods, intensity_fn, n_per_period=2000):
    t = np.linspace(0.0, periods * protocol.period, periods * n_per_period + 1)
    p = np.array([drive.evaluate(protocol, x) for x in t])
    a = np.sqrt(intensity_fn(p))
    return dynamics.TimeSeries(t, p, np.zeros_like(t), a)


def _loop(up, down, f=1.0):
    up = np.asarray(up, dtype=float)
    down = np.asarray(down, dtype=float)
    return HysteresisLoop(f, up[:, 0], up[:, 1], down[:, 0], down[:, 1])


# loop extraction

def test_identity_loop():
    tri = drive.Triangle(0.2, 3.0, 1000.0)
    ts = _synthetic_ts(tri, 3, lambda p: p)
    lp = analysis.extract_loop(ts, tri)
    assert np.allclose(lp.up_i, lp.up_p, rtol=0, atol=1e-12)
    assert np.allclose(lp.down_i, lp.down_p, rtol=0, atol=1e-12)
    assert np.all(np.diff(lp.up_p) > 0) and np.all(np.diff(lp.down_p) < 0)
    assert analysis.loop_area(lp) == pytest.approx(0.0, abs=1e-12)


def test_extract_loop_needs_two_periods():
    tri = drive.Triangle(0.2, 3.0, 1000.0)
    ts = _synthetic_ts(tri, 1, lambda p: p)
    with pytest.raises(InsufficientDataError):
        analysis.extract_loop(ts, tri)
    with pytest.raises(DomainError):
        analysis.extract_loop(ts, drive.Constant(1.0))


def test_bin_count_respects_setting():
    tri = drive.Triangle(0.2, 3.0, 1000.0)
    ts = _synthetic_ts(tri, 3, lambda p: p)
    assert len(analysis.extract_loop(ts, tri, nbins=50).up_p) == 50


# loop area

def test_area_rectangle_and_coinciding():
    rect = _loop([(0.0, 0.0), (1.0, 0.0)], [(1.0, 1.0), (0.0, 1.0)])
    assert analysis.loop_area(rect) == pytest.approx(1.0, abs=1e-15)
    same = _loop([(0.0, 0.0), (1.0, 2.0)], [(1.0, 2.0), (0.0, 0.0)])
    assert analysis.loop_area(same) == 0.0
    with pytest.raises(DomainError):
        analysis.loop_area(_loop([(0.0, 0.0), (1.0, 1.0)], [(3.0, 1.0), (2.0, 0.0)]))


# threshold detection

def test_constructed_step_crossings():
    # up-branch edge crosses 5 % of peak at 1.3 mW, down-branch edge at 0.8 mW
    up = [(1.0, 0.0), (1.2, 0.0), (1.4, 0.1), (2.0, 1.0)]
    down = [(2.0, 1.0), (1.0, 0.5), (0.9, 0.1), (0.7, 0.0), (0.5, 0.0)]
    res = analysis.detect_thresholds(_loop(up, down), 0.05)
    assert res.p_on == pytest.approx(1.3, abs=1e-12)
    assert res.p_off == pytest.approx(0.8, abs=1e-12)
    assert res.peak_intensity == 1.0 and res.width == pytest.approx(0.5)


def test_exact_grid_crossings():
    up = [(1.0, 0.0), (1.3, 0.05), (1.31, 1.0)]
    down = [(1.31, 1.0), (0.8, 0.05), (0.79, 0.0)]
    res = analysis.detect_thresholds(_loop(up, down), 0.05)
    assert (res.p_on, res.p_off) == (1.3, 0.8)


def test_detection_errors():
    flat = _loop([(1.0, 0.0), (2.0, 0.0)], [(2.0, 0.0), (1.0, 0.0)])
    with pytest.raises(NoGenerationError):
        analysis.detect_thresholds(flat, 0.05)
    with pytest.raises(DomainError):
        analysis.detect_thresholds(flat, 1.5)


# scaling fit

def _eq3_results(freqs, p_th=1.0, tau_s=30e-6):
    k = 0.5 * math.sqrt(tau_s) * p_th
    return [ThresholdResult(f, p_th + k * math.sqrt(f), p_th - k * math.sqrt(f), 0.05, 1.0)
            for f in freqs]


def test_fit_recovers_synthetic_scaling():
    fit = analysis.fit_sqrt_scaling(_eq3_results(FIT_GRID))
    k = 0.5 * math.sqrt(30e-6)
    assert abs(fit.coeff_on - k) <= 1e-10 and abs(fit.coeff_off - k) <= 1e-10
    assert abs(fit.p_th_on - 1.0) <= 1e-10 and abs(fit.p_th_off - 1.0) <= 1e-10
    assert fit.r2_on == pytest.approx(1.0, abs=1e-12) and fit.r2_off == pytest.approx(1.0, abs=1e-12)
    assert fit.exponent_on == pytest.approx(0.5, abs=1e-6)
    assert fit.intercept_gap == pytest.approx(0.0, abs=1e-10)


def test_fit_constant_on_branch():
    res = [ThresholdResult(f, 1.25, 1.0 - 0.01 * math.sqrt(f), 0.05, 1.0) for f in FIT_GRID]
    fit = analysis.fit_sqrt_scaling(res)
    assert fit.coeff_on == pytest.approx(0.0, abs=1e-14)
    assert fit.r2_on == 1.0


def test_fit_needs_distinct_frequencies():
    with pytest.raises(FitError):
        analysis.fit_sqrt_scaling(_eq3_results([100.0] * 8))
    with pytest.raises(FitError):
        analysis.fit_sqrt_scaling(_eq3_results([100.0, 200.0, 300.0]))


@given(p_th=st.floats(0.5, 2.0), tau=st.floats(1e-6, 1e-4))
def test_fit_recovery_property(p_th, tau):
    fit = analysis.fit_sqrt_scaling(_eq3_results(FIT_GRID, p_th, tau))
    k = 0.5 * math.sqrt(tau) * p_th
    assert fit.coeff_on == pytest.approx(k, rel=1e-8, abs=1e-12)
    assert fit.p_th_off == pytest.approx(p_th, rel=1e-10)


# spectrum

def test_spectrum_shape():
    spectrum_ = analysis.scan_spectrum(P, 2.0, [0.0, 1.0, 4.0, 5 * P.delta_cut, 50.0])
    assert spectrum_.intensity[0] == 0.0
    assert spectrum_.intensity[2] > 0
    assert spectrum_.intensity[3] == 0.0 and spectrum_.intensity[4] == 0.0
    with pytest.raises(DomainError):
        analysis.scan_spectrum(P, 2.0, [1.0, 1.0])
    with pytest.raises(DomainError):
        analysis.scan_spectrum(P, 0.0, [1.0])


# switch metrics

def test_switch_synthetic_contrast():
    base = 1.0025
    train = drive.PulseTrain(base, (drive.Pulse(1000.0, 40.0, 2.5),))
    t = np.arange(0.0, 2500.0, 1.0)
    on_ref = model.steady_state_output(P, base)
    intensity = np.where(t < 1020.0, 1e-6 * on_ref, 0.8 * on_ref)
    ts = dynamics.TimeSeries(t, np.full_like(t, base), np.zeros_like(t), np.sqrt(intensity))
    rep = analysis.switch_metrics(ts, train, P, 0.05)
    assert rep.contrast == pytest.approx(0.8 / 1e-6, rel=1e-9)
    (rec,) = rep.pulses
    assert (rec.kind, rec.state_before, rec.state_after) == ("on", "off", "on")
    assert rec.transition_time == pytest.approx(-20.0)
    assert rep.all_latched


def test_switch_no_pulses_stays_off():
    base = 0.9
    train = drive.PulseTrain(base, ())
    ts = dynamics.integrate(P, train, 2000.0)
    rep = analysis.switch_metrics(ts, train, P, 0.05)
    assert rep.pulses == () and rep.contrast is None
    state, _ = analysis._window_state(ts, 0.0, 2000.0, 0.05 * rep.on_reference)
    assert state == "off"
    assert np.all(ts.intensity < 1e-6 * rep.on_reference)


def test_switch_window_too_short():
    base = 1.0025
    train = drive.PulseTrain(base, (drive.Pulse(100.0, 40.0, 2.5),))
    ts = dynamics.integrate(P, train, 1000.0)
    with pytest.raises(ConfigError):
        analysis.switch_metrics(ts, train, P, 0.05)


# simulation-backed properties

def test_singleton_sweep_matches_manual_pipeline():
    res, lp = single(4000.0)
    _, manual = analysis.run_loop(P, drive.with_frequency(TRIANGLE, 4000.0))
    m = analysis.detect_thresholds(manual, LEVEL)
    assert (m.p_on, m.p_off) == (res.p_on, res.p_off)
    again = analysis.threshold_sweep(P, TRIANGLE, [4000.0, 4000.0], LEVEL)
    assert again[0] == again[1] == res


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="onset lag at 10 Hz leaves a 1.1 % of peak gap at threshold")
def test_quasi_static_branches_coincide():
    _, lp = single(WIDE_GRID[0])
    grid = np.linspace(TRIANGLE.p_min, TRIANGLE.p_max, 2001)
    up = np.interp(grid, lp.up_p, lp.up_i)
    down = np.interp(grid, lp.down_p[::-1], lp.down_i[::-1])
    assert np.max(np.abs(up - down)) <= 0.01 * lp.peak_intensity


@pytest.mark.slow
def test_fast_loop_encloses_area():
    r150, _ = single(150.0)
    r4k, _ = single(4000.0)
    assert r4k.area > r150.area > 0


def test_ordering_at_1200_hz():
    res, _ = single(1200.0)
    assert res.p_on > model.static_threshold(P) > res.p_off


@pytest.mark.slow
def test_invariants_over_wide_grid():
    results, loops = sweep(WIDE_GRID)
    p_th = model.static_threshold(P)
    bin_width = (TRIANGLE.p_max - TRIANGLE.p_min) / analysis.DEFAULT_BINS
    widths = np.array([r.width for r in results])
    for r in results:
        assert r.p_off <= p_th <= r.p_on
        assert 0.5 <= (r.p_on - p_th) / (p_th - r.p_off) <= 2.0
    assert np.all(np.diff(widths) >= -bin_width)
    fit = analysis.fit_sqrt_scaling(results)
    assert fit.r2_on >= 0.98 and fit.r2_off >= 0.98


@pytest.mark.slow
def test_scaling_exponent_against_static_threshold():
    results, _ = sweep(FIT_GRID)
    f = np.array([r.f_mod for r in results])
    excess = np.array([r.p_on for r in results]) - model.static_threshold(P)
    slope = np.polyfit(np.log(f), np.log(excess), 1)[0]
    assert 0.4 <= slope <= 0.6


def test_static_detection_threshold_close_to_static():
    pd = analysis.static_detection_threshold(P, TRIANGLE.p_min, TRIANGLE.p_max, LEVEL)
    assert 0 <= pd - model.static_threshold(P) < 1e-4


def test_loop_integrator_selection():
    assert analysis.loop_integrator(10.0).method == "rk45"
    cfg = analysis.loop_integrator(4000.0)
    assert cfg.method == "rk4" and cfg.sample_interval == pytest.approx(0.02)
    assert analysis.loop_integrator(100.0).sample_interval == pytest.approx(1.24, abs=1e-12)


@pytest.mark.slow
def test_quasi_static_branches_agree_above_onset():
    _, lp = single(WIDE_GRID[0])
    grid = np.linspace(TRIANGLE.p_min, TRIANGLE.p_max, 2001)
    up = np.interp(grid, lp.up_p, lp.up_i)
    down = np.interp(grid, lp.down_p[::-1], lp.down_i[::-1])
    lit = np.minimum(up, down) > 0.05 * lp.peak_intensity
    assert np.max(np.abs(up - down)[lit] / down[lit]) <= 0.01
