"""Scenario configuration: a flat JSON document validated in one pass.

Default table (dimensionless desk scene unless overridden):

  c0 1.0                 omega0 2*pi            B 0.05*omega0
  spectrum_shape boxcar  L_src 60.0             n_nodes 24000
  n_side 8               D 4.0                  center [5,0,0]
  normal [1,0,0]         rho1 1.0               re_rho 0.0
  xr [-5,0,0.25]         xrp [-5,0,-0.25]       T 200/B
  Tprime 1/B             phi_shape triangle     psi_shape gaussian
  n_bits 16              bit_seed 1             preamble 8
  n_realizations 100     master_seed 12345      sigma_meas 0.0
  t_meas Tprime/50       out_dir runs/out       override_spacing false
  workers 1              sweep_axis null        sweep_values []

Every violated hard rule is collected and reported in a single error; strained
but legal regimes warn by name.
"""

import hashlib
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

from .kernel import NoiseSpectrum, RegimeError, RegimeWarning, WindowSpec
from .media import Background, Metasurface, Tunable
from .scene import ReceiverPair, Scene, make_shell


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.problems))


@dataclass(frozen=True)
class ScenarioConfig:
    c0: float = 1.0
    omega0: float = 2.0 * math.pi
    B: float = 0.1 * math.pi
    spectrum_shape: str = "boxcar"
    L_src: float = 60.0
    n_nodes: int = 24000
    n_side: int = 8
    D: float = 4.0
    center: Tuple[float, float, float] = (5.0, 0.0, 0.0)
    normal: Tuple[float, float, float] = (1.0, 0.0, 0.0)
    rho1: float = 1.0
    re_rho: float = 0.0
    xr: Tuple[float, float, float] = (-5.0, 0.0, 0.25)
    xrp: Tuple[float, float, float] = (-5.0, 0.0, -0.25)
    T: Optional[float] = None
    Tprime: Optional[float] = None
    phi_shape: str = "triangle"
    psi_shape: str = "gaussian"
    bits: Optional[Tuple[int, ...]] = None
    n_bits: int = 16
    bit_seed: int = 1
    preamble: int = 8
    n_realizations: int = 100
    master_seed: int = 12345
    sigma_meas: float = 0.0
    t_meas: Optional[float] = None
    out_dir: str = "runs/out"
    override_spacing: bool = False
    workers: int = 1
    sweep_axis: Optional[str] = None
    sweep_values: Tuple[float, ...] = ()

    @property
    def lam0(self) -> float:
        return 2.0 * math.pi * self.c0 / self.omega0

    def resolved_T(self) -> float:
        return self.T if self.T is not None else 200.0 / self.B

    def resolved_Tprime(self) -> float:
        return self.Tprime if self.Tprime is not None else 1.0 / self.B

    def resolved_t_meas(self) -> float:
        return self.t_meas if self.t_meas is not None else self.resolved_Tprime() / 50.0


_KNOWN_SWEEPS = ("T", "n_side", "L", "sigma_meas")


def _validate(cfg: ScenarioConfig):
    problems = []
    if cfg.c0 <= 0:
        problems.append("c0 must be positive (was %g)" % cfg.c0)
    if cfg.omega0 <= 0:
        problems.append("omega0 must be positive (was %g)" % cfg.omega0)
    if cfg.B <= 0:
        problems.append("B must be positive (was %g)" % cfg.B)
    elif cfg.omega0 > 0 and cfg.B / cfg.omega0 > 0.2:
        problems.append(
            "fractional bandwidth B/omega0 = %g breaks the narrowband premise "
            "(limit 0.2)" % (cfg.B / cfg.omega0)
        )
    if cfg.spectrum_shape not in ("boxcar", "raised_cosine", "truncated_gaussian"):
        problems.append("unknown spectrum shape %r" % cfg.spectrum_shape)
    if cfg.n_side < 1:
        problems.append("n_side must be >= 1")
    if cfg.D <= 0:
        problems.append("D must be positive (was %g)" % cfg.D)
    if cfg.rho1 < 0:
        problems.append("rho1 must be >= 0 (was %g)" % cfg.rho1)
    if cfg.n_nodes < 100:
        problems.append("n_nodes must be >= 100 (was %d)" % cfg.n_nodes)

    lam0 = 2.0 * math.pi * cfg.c0 / cfg.omega0 if cfg.omega0 > 0 and cfg.c0 > 0 else None
    sep = math.dist(cfg.xr, cfg.xrp)
    if sep == 0:
        problems.append("receivers are coincident")
    elif lam0 is not None and not cfg.override_spacing:
        if abs(sep - lam0 / 2.0) > 1e-6 * (lam0 / 2.0):
            problems.append(
                "receiver spacing %g differs from the half-wavelength placement "
                "%g; set override_spacing to accept it" % (sep, lam0 / 2.0)
            )

    if cfg.B > 0:
        T = cfg.T if cfg.T is not None else 200.0 / cfg.B
        Tp = cfg.Tprime if cfg.Tprime is not None else 1.0 / cfg.B
        if T <= 0:
            problems.append("T must be positive (was %g)" % T)
        elif cfg.B * T < 10.0:
            problems.append("BT = %g is under 10; the estimator is unstable" % (cfg.B * T))
        if Tp <= 0:
            problems.append("Tprime must be positive (was %g)" % Tp)
        tm = cfg.t_meas if cfg.t_meas is not None else Tp / 50.0
        if tm < 0:
            problems.append("t_meas must be >= 0 (was %g)" % tm)
        elif Tp > 0 and tm > Tp / 10.0:
            problems.append(
                "t_meas = %g exceeds Tprime/10 = %g; noise would not be "
                "window-local" % (tm, Tp / 10.0)
            )

    if cfg.bits is not None and any(int(b) not in (0, 1) for b in cfg.bits):
        problems.append("bits must be 0 or 1")
    if cfg.preamble < 0:
        problems.append("preamble must be >= 0")
    if cfg.n_realizations < 1:
        problems.append("n_realizations must be >= 1")
    if cfg.sweep_axis is not None and cfg.sweep_axis not in _KNOWN_SWEEPS:
        problems.append("sweep axis %r not in %s" % (cfg.sweep_axis, list(_KNOWN_SWEEPS)))
    if problems:
        raise ConfigError(problems)


def _warn_regimes(cfg: ScenarioConfig):
    lam0 = cfg.lam0
    L = math.dist(cfg.xr, cfg.center)
    checks = [
        (cfg.B / cfg.omega0 > 0.05, "narrowband: B/omega0 = %g > 0.05" % (cfg.B / cfg.omega0)),
        (cfg.D < 5.0 * lam0, "aperture: D = %g is under 5 wavelengths" % cfg.D),
        (L < 5.0 * cfg.D, "range: L = %g is under 5 array sides" % L),
        (cfg.B * cfg.resolved_T() < 100.0, "stability: BT = %g is under 100" % (cfg.B * cfg.resolved_T())),
        (
            cfg.resolved_t_meas() > cfg.resolved_Tprime() / 50.0 * (1 + 1e-12),
            "noise correlation: t_meas = %g is over Tprime/50" % cfg.resolved_t_meas(),
        ),
    ]
    for bad, msg in checks:
        if bad:
            warnings.warn(msg, RegimeWarning, stacklevel=3)


def config_from_mapping(raw) -> ScenarioConfig:
    """Default-fill and validate a scenario given as a plain dict."""
    known = set(ScenarioConfig.__dataclass_fields__)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(["unknown keys: %s" % ", ".join(unknown)])
    raw = dict(raw)
    for key in ("center", "normal", "xr", "xrp", "sweep_values"):
        if key in raw and raw[key] is not None:
            raw[key] = tuple(float(v) for v in raw[key])
    if raw.get("bits") is not None:
        raw["bits"] = tuple(int(b) for b in raw["bits"])
    cfg = ScenarioConfig(**raw)
    _validate(cfg)
    _warn_regimes(cfg)
    return cfg


def parse_config(path) -> ScenarioConfig:
    """Read, default-fill, and validate a JSON scenario file."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(["%s: line %d: %s" % (path, err.lineno, err.msg)]) from err
    if not isinstance(raw, dict):
        raise ConfigError(["top level of %s must be an object" % path])
    return config_from_mapping(raw)


def config_hash(cfg: ScenarioConfig) -> str:
    blob = json.dumps(asdict(cfg), sort_keys=True, default=list)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def echo_config(cfg: ScenarioConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(asdict(cfg), fh, indent=2, sort_keys=True, default=list)
        fh.write("\n")


# ---------------------------------------------------------------------------
# object builders
# ---------------------------------------------------------------------------


def build_spectrum(cfg: ScenarioConfig) -> NoiseSpectrum:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        return NoiseSpectrum(omega0=cfg.omega0, B=cfg.B, shape=cfg.spectrum_shape)


def build_windows(cfg: ScenarioConfig) -> WindowSpec:
    return WindowSpec(
        T=cfg.resolved_T(),
        Tprime=cfg.resolved_Tprime(),
        phi_shape=cfg.phi_shape,
        psi_shape=cfg.psi_shape,
    )


def build_scene(cfg: ScenarioConfig) -> Scene:
    tun = Tunable(rho1=cfg.rho1, re_rho=cfg.re_rho, level=0)
    surf = Metasurface.square_grid(
        cfg.n_side, cfg.D, center=cfg.center, normal=cfg.normal, tunable=tun
    )
    return Scene(
        bg=Background(cfg.c0),
        shell=make_shell(cfg.L_src, cfg.n_nodes),
        receivers=ReceiverPair(xr=cfg.xr, xrp=cfg.xrp),
        surface=surf,
    )


def build_bits(cfg: ScenarioConfig):
    import numpy as np

    if cfg.bits is not None:
        return tuple(cfg.bits)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.bit_seed, 0xB17])))
    return tuple(int(b) for b in rng.integers(0, 2, size=cfg.n_bits))
