"""ECSD estimator: analytic tone oracle, symmetries, mean agreement, I/O.

Oracles: a deterministic pure-tone pair has the closed-form ECSD
(a^2/4) e^{-i theta} psi_hat(T' (omega - omega0)); synthesized free-space
records must average to the band-quadrature mean prediction.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from ambientlink.media import Background
from ambientlink.scene import Scene, ReceiverPair, make_shell
from ambientlink.kernel import NoiseSpectrum, WindowSpec, mean_general
from ambientlink.link import SlotSchedule
from ambientlink import ecsd, synth

BG = Background(1.0)
OMEGA0 = 2.0 * math.pi
B = 0.05 * OMEGA0


def _spec():
    return NoiseSpectrum(omega0=OMEGA0, B=B)


def _win(bt=50.0):
    return WindowSpec(T=bt / B, Tprime=1.0 / B)


def _free_scene():
    rx = ReceiverPair(xr=[0.0, 0.0, 0.25], xrp=[0.0, 0.0, -0.25])
    return Scene(bg=BG, shell=make_shell(20.0, 400), receivers=rx)


_BATCH = []


def _batch(n_reals=100):
    if not _BATCH:
        scene, spec, win = _free_scene(), _spec(), _win()
        _BATCH.extend(
            synth.synth_realization(scene, spec, None, win, synth.RealizationSeed(606, i))
            for i in range(n_reals)
        )
    return _BATCH[:n_reals]


def _tone_record(a=1.3, theta=0.7, n=4000, dt=0.19):
    t = dt * np.arange(n)
    u0 = a * np.cos(OMEGA0 * t)
    u1 = a * np.cos(OMEGA0 * t + theta)
    return synth.FieldRecord(
        np.stack([u0, u1]), dt=dt, t0=0.0, slot_bounds=np.array([0.0, n * dt])
    )


# ---------------------------------------------------------------------------
# exact and analytic cases
# ---------------------------------------------------------------------------


def test_zero_field_gives_zero():
    rec = synth.FieldRecord(
        np.zeros((2, 3000)), dt=0.19, t0=0.0, slot_bounds=np.array([0.0, 570.0])
    )
    win = WindowSpec(T=100.0, Tprime=3.0)
    assert ecsd.ecsd_at(rec, OMEGA0, 285.0, win) == 0.0


def test_pure_tone_matches_closed_form():
    a, theta = 1.3, 0.7
    rec = _tone_record(a, theta)
    win = WindowSpec(T=100.0, Tprime=3.0)
    tc = rec.n_samples * rec.dt / 2.0
    got = ecsd.ecsd_at(rec, OMEGA0, tc, win)
    want = a**2 / 4.0 * np.exp(-1j * theta)
    assert got == pytest.approx(want, rel=5e-4)


def test_pure_tone_detuned_frequency():
    a, theta = 1.3, 0.7
    rec = _tone_record(a, theta)
    win = WindowSpec(T=100.0, Tprime=3.0)
    tc = rec.n_samples * rec.dt / 2.0
    delta = 0.5 / win.Tprime
    got = ecsd.ecsd_at(rec, OMEGA0 + delta, tc, win)
    want = a**2 / 4.0 * np.exp(-1j * theta) * math.exp(-((win.Tprime * delta) ** 2) / 4.0)
    assert got == pytest.approx(want, rel=5e-4)


def test_bilinear_scaling():
    rec = _batch()[0]
    win = _win(30.0)
    tc = 2.0 * _win().T
    base = ecsd.ecsd_at(rec, OMEGA0, tc, win)
    scaled = ecsd.ecsd_at(replace(rec, samples=2.0 * rec.samples), OMEGA0, tc, win)
    assert scaled == pytest.approx(4.0 * base, rel=1e-13)


def test_receiver_swap_conjugates():
    rec = _batch()[0]
    win = _win(30.0)
    tc = 2.0 * _win().T
    fwd = ecsd.ecsd_at(rec, OMEGA0, tc, win)
    rev = ecsd.ecsd_at(replace(rec, samples=rec.samples[::-1].copy()), OMEGA0, tc, win)
    assert rev == pytest.approx(np.conj(fwd), rel=1e-12)


def test_psd_difference_equals_real_part():
    rec = _batch()[0]
    win = _win(30.0)
    tc = 2.0 * _win().T
    got = ecsd.ecsd_psd_diff(rec, OMEGA0, tc, win)
    assert got == pytest.approx(ecsd.ecsd_at(rec, OMEGA0, tc, win).real, rel=1e-9)


def test_coincident_receivers_give_real_positive_mean():
    win = _win(30.0)
    tc = 2.0 * _win().T
    vals = np.array([
        ecsd.ecsd_at(replace(rec, samples=np.stack([rec.samples[0]] * 2)), OMEGA0, tc, win)
        for rec in _batch(60)
    ])
    se_re = vals.real.std(ddof=1) / math.sqrt(vals.size)
    se_im = vals.imag.std(ddof=1) / math.sqrt(vals.size)
    assert vals.real.mean() > 3.0 * se_re
    assert abs(vals.imag.mean()) <= 3.0 * se_im


# ---------------------------------------------------------------------------
# agreement with the mean prediction; window-scale independence
# ---------------------------------------------------------------------------


def test_mean_matches_band_quadrature_and_is_t_independent():
    scene, spec = _free_scene(), _spec()
    win_a, win_b = _win(30.0), _win(60.0)
    tc = 2.0 * _win().T
    rx = scene.receivers
    want = mean_general(OMEGA0, rx.xr, rx.xrp, scene, spec, win_a)
    assert mean_general(OMEGA0, rx.xr, rx.xrp, scene, spec, win_b) == pytest.approx(
        want, rel=1e-12
    )
    va = np.array([ecsd.ecsd_at(r, OMEGA0, tc, win_a) for r in _batch()])
    vb = np.array([ecsd.ecsd_at(r, OMEGA0, tc, win_b) for r in _batch()])
    for part in (np.real, np.imag):
        pa = part(va)
        se = pa.std(ddof=1) / math.sqrt(pa.size)
        assert abs(pa.mean() - part(want)) <= 3.0 * se
        diff = pa - part(vb)
        se_d = diff.std(ddof=1) / math.sqrt(diff.size)
        assert abs(diff.mean()) <= 3.0 * se_d + 1e-12


# ---------------------------------------------------------------------------
# slot series and refusals
# ---------------------------------------------------------------------------


def test_series_follows_schedule_centers():
    scene, spec, win = _free_scene(), _spec(), _win()
    sched = SlotSchedule(bits=(1, 0), T=win.T, rho1=0.0)
    rec = synth.synth_realization(scene, spec, sched, win, 42)
    series = ecsd.ecsd_series(rec, sched, win, OMEGA0)
    assert len(series) == 4
    assert np.array_equal(series.centers, win.T * np.array([1.0, 3.0, 5.0, 7.0]))
    for k, tc in enumerate(series.centers):
        assert series.values[k] == ecsd.ecsd_at(rec, OMEGA0, tc, win)
    assert series.omega == OMEGA0


def test_refusal_reports_padding():
    rec = _batch()[0]
    win = _win()
    with pytest.raises(ValueError, match="pad .* at the start"):
        ecsd.ecsd_at(rec, OMEGA0, 0.0, win)
    with pytest.raises(ValueError, match="at the end"):
        ecsd.ecsd_at(rec, OMEGA0, rec.t_end, win)


def test_series_validation():
    with pytest.raises(ValueError, match="equal-length"):
        ecsd.EcsdSeries(values=np.zeros(3, complex), centers=np.zeros(2), omega=1.0)


# ---------------------------------------------------------------------------
# file round trip
# ---------------------------------------------------------------------------


def test_csv_round_trip_exact(tmp_path):
    rng = np.random.default_rng(3)
    series = ecsd.EcsdSeries(
        values=rng.normal(size=5) + 1j * rng.normal(size=5),
        centers=np.arange(5) * 7.5,
        omega=OMEGA0,
    )
    path = tmp_path / "s.csv"
    series.save_csv(path, comment="units: s, field^2 s^2")
    back = ecsd.load_ecsd_csv(path)
    assert np.array_equal(back.values, series.values)
    assert np.array_equal(back.centers, series.centers)
    assert math.isnan(back.omega)
    header = path.read_text().splitlines()
    assert header[0].startswith("#") and header[1] == "k,t_center_s,re_S,im_S"
