"""Scenario parsing: defaults, collected refusals, named warnings, builders."""

import json
import math
import warnings

import numpy as np
import pytest

from ambientlink.kernel import NoiseSpectrum, RegimeWarning, WindowSpec
from ambientlink import config as C

B_DEFAULT = 0.1 * math.pi


def _quiet(raw=None, **over):
    raw = dict(raw or {})
    raw.update(over)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        return C.config_from_mapping(raw)


def test_empty_mapping_fills_defaults():
    cfg = _quiet()
    assert cfg.c0 == 1.0
    assert cfg.omega0 == 2.0 * math.pi
    assert cfg.B == B_DEFAULT
    assert cfg.lam0 == pytest.approx(1.0)
    assert cfg.n_side == 8 and cfg.D == 4.0
    assert cfg.xr == (-5.0, 0.0, 0.25) and cfg.xrp == (-5.0, 0.0, -0.25)
    assert cfg.resolved_T() == pytest.approx(200.0 / B_DEFAULT)
    assert cfg.resolved_Tprime() == pytest.approx(1.0 / B_DEFAULT)
    assert cfg.resolved_t_meas() == pytest.approx(1.0 / (50.0 * B_DEFAULT))
    assert cfg.T is None and cfg.Tprime is None and cfg.t_meas is None


def test_explicit_windows_override_derived_ones():
    cfg = _quiet(T=500.0, Tprime=2.5, t_meas=0.04)
    assert cfg.resolved_T() == 500.0
    assert cfg.resolved_Tprime() == 2.5
    assert cfg.resolved_t_meas() == 0.04


# ---------------------------------------------------------------------------
# hard refusals
# ---------------------------------------------------------------------------


def test_wideband_is_refused():
    with pytest.raises(C.ConfigError, match="narrowband premise"):
        _quiet(B=math.pi)


def test_receiver_spacing_must_be_half_wavelength():
    with pytest.raises(C.ConfigError, match="override_spacing"):
        _quiet(xr=[-5, 0, 0.35], xrp=[-5, 0, -0.35])
    cfg = _quiet(xr=[-5, 0, 0.35], xrp=[-5, 0, -0.35], override_spacing=True)
    assert math.dist(cfg.xr, cfg.xrp) == pytest.approx(0.7)


def test_all_violations_reported_at_once():
    with pytest.raises(C.ConfigError) as info:
        _quiet(B=-1.0, rho1=-2.0, n_nodes=10)
    assert len(info.value.problems) == 3
    text = str(info.value)
    for frag in ("B must be positive", "rho1 must be >= 0", "n_nodes must be >= 100"):
        assert frag in text


def test_short_window_refused():
    with pytest.raises(C.ConfigError, match="under 10"):
        _quiet(T=5.0 / B_DEFAULT)


def test_wide_noise_correlation_refused():
    with pytest.raises(C.ConfigError, match="window-local"):
        _quiet(t_meas=1.0 / (5.0 * B_DEFAULT))


def test_bad_bits_and_sweep_axis_refused():
    with pytest.raises(C.ConfigError, match="bits must be 0 or 1"):
        _quiet(bits=[0, 2])
    with pytest.raises(C.ConfigError, match="sweep axis"):
        _quiet(sweep_axis="banana")
    cfg = _quiet(sweep_axis="T", sweep_values=[100.0, 200.0])
    assert cfg.sweep_values == (100.0, 200.0)


def test_unknown_keys_refused():
    with pytest.raises(C.ConfigError, match="unknown keys: bandwidth, rho"):
        _quiet(rho=1.0, bandwidth=2.0)


# ---------------------------------------------------------------------------
# named regime warnings
# ---------------------------------------------------------------------------


def test_default_scene_warns_by_name():
    with pytest.warns(RegimeWarning) as caught:
        C.config_from_mapping({})
    msgs = [str(w.message) for w in caught]
    assert any(m.startswith("aperture:") for m in msgs)
    assert any(m.startswith("range:") for m in msgs)


def test_quiet_scene_emits_no_warnings():
    raw = {"D": 8.0, "center": [45.0, 0.0, 0.0], "xr": [-5.0, 0.0, 0.25],
           "L_src": 80.0, "n_nodes": 24000}
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        C.config_from_mapping(raw)


def test_named_warnings_fire_individually():
    for raw, name in [
        ({"B": 0.12 * math.pi}, "narrowband:"),
        ({"T": 50.0 / B_DEFAULT}, "stability:"),
        ({"t_meas": 1.0 / (20.0 * B_DEFAULT)}, "noise correlation:"),
    ]:
        with pytest.warns(RegimeWarning) as caught:
            C.config_from_mapping(raw)
        assert any(str(w.message).startswith(name) for w in caught)


# ---------------------------------------------------------------------------
# files, echo, hash
# ---------------------------------------------------------------------------


def test_parse_file_round_trip(tmp_path):
    raw = {"rho1": 0.5, "T": 2000.0, "n_bits": 4}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(raw))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        cfg = C.parse_config(path)
    assert cfg == _quiet(raw)


def test_parse_reports_json_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "rho1": 0.5,\n  "T": ,\n}\n')
    with pytest.raises(C.ConfigError, match="line 3"):
        C.parse_config(path)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(C.ConfigError, match="top level"):
        C.parse_config(arr)


def test_echo_preserves_hash(tmp_path):
    cfg = _quiet(rho1=0.25, T=1500.0)
    path = tmp_path / "echo.json"
    C.echo_config(cfg, path)
    back = _quiet(json.loads(path.read_text()))
    assert back == cfg
    assert C.config_hash(back) == C.config_hash(cfg)


def test_hash_is_stable_and_sensitive():
    a = C.config_hash(_quiet())
    b = C.config_hash(_quiet())
    c = C.config_hash(_quiet(rho1=0.9999))
    assert a == b
    assert a != c
    assert len(a) == 12 and set(a) <= set("0123456789abcdef")


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def test_build_spectrum_and_windows():
    cfg = _quiet(spectrum_shape="truncated_gaussian", T=3000.0, Tprime=4.0)
    spec = C.build_spectrum(cfg)
    assert isinstance(spec, NoiseSpectrum)
    assert spec.shape == "truncated_gaussian"
    assert spec.omega0 == cfg.omega0 and spec.B == cfg.B
    win = C.build_windows(cfg)
    assert isinstance(win, WindowSpec)
    assert win.T == 3000.0 and win.Tprime == 4.0
    assert win.phi_shape == "triangle" and win.psi_shape == "gaussian"


def test_build_scene_wires_geometry():
    cfg = _quiet(n_side=4, D=2.0, rho1=0.7, re_rho=0.1, L_src=40.0, n_nodes=500)
    scene = C.build_scene(cfg)
    assert scene.surface.J == 16
    assert scene.surface.D == 2.0
    assert scene.surface.tunable.rho1 == 0.7
    assert scene.surface.tunable.re_rho == 0.1
    assert scene.surface.tunable.level == 0
    assert scene.shell.n_nodes == 500
    assert scene.shell.L_src == 40.0
    assert np.array_equal(scene.receivers.xr, [-5.0, 0.0, 0.25])
    assert scene.bg.c0 == 1.0


def test_build_bits_deterministic():
    cfg = _quiet(n_bits=32, bit_seed=9)
    a = C.build_bits(cfg)
    b = C.build_bits(cfg)
    assert a == b
    assert len(a) == 32
    assert set(a) <= {0, 1}
    assert C.build_bits(_quiet(n_bits=32, bit_seed=10)) != a
    assert C.build_bits(_quiet(bits=[1, 0, 1])) == (1, 0, 1)
