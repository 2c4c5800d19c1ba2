"""Stochastic synthesis of the ambient field at the receiver pair.

Each modulation slot is an independent stationary Gaussian segment: shell
sources get i.i.d. circular complex amplitudes per frequency bin, propagate
through the scattering-corrected Green's function at that slot's tunable
level, and are inverse-transformed to a real time series.  Slots are
concatenated hard at their boundaries; switching transients are not modeled.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional, TYPE_CHECKING

import numpy as np
from scipy.fft import next_fast_len

from .media import Background, green0, grad_green0, rho_of
from .scene import Scene
from .kernel import NoiseSpectrum, RegimeError, WindowSpec

if TYPE_CHECKING:
    from .link import SlotSchedule

_FOUR_PI = 4.0 * math.pi
_FLD_MAGIC = b"FLD1"


@dataclass(frozen=True)
class RealizationSeed:
    """Keys one independent realization of the source noise."""

    master: int
    index: int = 0

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("realization index must be >= 0 (was %d)" % self.index)


def _seed_pair(seed) -> RealizationSeed:
    if isinstance(seed, RealizationSeed):
        return seed
    return RealizationSeed(master=int(seed), index=0)


@dataclass(frozen=True)
class FieldRecord:
    """Sampled wave field at the two receivers.

    samples has shape (2, n): row 0 is the field at xr, row 1 at xrp, on the
    uniform grid t0 + i*dt.  slot_bounds are the exact modulation boundary
    times; the sample grid starts one lag guard before the first boundary.
    """

    samples: np.ndarray
    dt: float
    t0: float
    slot_bounds: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[0] != 2:
            raise ValueError("samples must have shape (2, n)")
        bounds = np.asarray(self.slot_bounds, dtype=float)
        if bounds.size >= 2 and np.any(np.diff(bounds) <= 0):
            raise ValueError("slot boundaries must increase")
        if self.dt <= 0:
            raise ValueError("dt must be positive (was %g)" % self.dt)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "slot_bounds", bounds)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def t_end(self) -> float:
        return self.t0 + (self.n_samples - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_samples)


def save_fld(record: FieldRecord, path) -> None:
    """Write a FieldRecord to a .fld file.

    Byte layout, all little-endian:
      0:4    magic "FLD1"
      4:8    uint32  receiver count R
      8:16   uint64  sample count N
      16:24  float64 dt
      24:32  float64 t0
      32:36  uint32  slot boundary count M
      then   M float64 slot boundaries, R*N float64 samples receiver-major
    """
    with open(path, "wb") as fh:
        fh.write(_FLD_MAGIC)
        r, n = record.samples.shape
        np.array([r], dtype="<u4").tofile(fh)
        np.array([n], dtype="<u8").tofile(fh)
        np.array([record.dt, record.t0], dtype="<f8").tofile(fh)
        np.array([record.slot_bounds.size], dtype="<u4").tofile(fh)
        record.slot_bounds.astype("<f8").tofile(fh)
        record.samples.astype("<f8").tofile(fh)


def load_fld(path) -> FieldRecord:
    with open(path, "rb") as fh:
        if fh.read(4) != _FLD_MAGIC:
            raise ValueError("%s is not a .fld file" % path)
        r = int(np.fromfile(fh, dtype="<u4", count=1)[0])
        n = int(np.fromfile(fh, dtype="<u8", count=1)[0])
        dt, t0 = np.fromfile(fh, dtype="<f8", count=2)
        m = int(np.fromfile(fh, dtype="<u4", count=1)[0])
        bounds = np.fromfile(fh, dtype="<f8", count=m)
        samples = np.fromfile(fh, dtype="<f8", count=r * n).reshape(r, n)
    return FieldRecord(samples=samples, dt=float(dt), t0=float(t0), slot_bounds=bounds)


# ---------------------------------------------------------------------------
# transfer matrices
# ---------------------------------------------------------------------------

# keyed by (id(scene), level, bin signature); entries hold a strong reference
# to the scene so ids cannot be recycled while cached
_TRANSFER_CACHE: dict = {}
_TRANSFER_CACHE_CAP = 8


def _transfer_key(scene, level, omegas):
    return (id(scene), level, omegas.size, float(omegas[0]), float(omegas[-1]))


def _build_transfer(scene: Scene, level: int, omegas: np.ndarray) -> np.ndarray:
    """Green's function from every shell node to both receivers, per bin.

    Returns complex (2, n_bins, n_nodes).  Monopole scatterers vectorize to
    one exp + one small matmul per bin; dipole polarization falls back to the
    per-inclusion loop.
    """
    bg = scene.bg
    nodes = scene.shell.nodes
    rx = (np.asarray(scene.receivers.xr, float), np.asarray(scene.receivers.xrp, float))
    incs = scene.inclusions(level)
    k = omegas / bg.c0
    H = np.empty((2, omegas.size, nodes.shape[0]), dtype=complex)

    r0 = np.stack([np.linalg.norm(nodes - x, axis=1) for x in rx])  # (2, N)
    for r in range(2):
        H[r] = np.exp(1j * np.outer(k, r0[r])) / (_FOUR_PI * r0[r])

    if not incs:
        return H
    if any(inc.polarization_at(float(omegas[0])) is not None for inc in incs):
        # dipole terms present: accurate but slow path
        for m, w in enumerate(omegas):
            for r, x in enumerate(rx):
                H[r, m] = _full_field(float(w), x, nodes, incs, bg)
        return H

    zpos = np.stack([np.asarray(inc.position, float) for inc in incs])  # (J, 3)
    rz = np.stack([np.linalg.norm(zpos - x, axis=1) for x in rx])       # (2, J)
    rn = np.linalg.norm(zpos[:, None, :] - nodes[None, :, :], axis=2)   # (J, N)
    inv_rn = 1.0 / (_FOUR_PI * rn)
    for m, w in enumerate(omegas):
        rho = np.array([rho_of(inc.reflectivity, float(w)) for inc in incs])
        scat = np.exp(1j * k[m] * rn) * inv_rn                          # (J, N)
        coef = rho * np.exp(1j * k[m] * rz) / (_FOUR_PI * rz)           # (2, J)
        H[:, m, :] += coef @ scat
    return H


def _full_field(omega, x, nodes, incs, bg):
    vals = green0(omega, x, nodes, bg).astype(complex)
    for inc in incs:
        z = inc.position
        rho = rho_of(inc.reflectivity, omega)
        vals += rho * complex(green0(omega, x, z, bg)) * green0(omega, z, nodes, bg)
        M = inc.polarization_at(omega)
        if M is not None:
            a = grad_green0(omega, x, z, bg) @ M
            vals += grad_green0(omega, nodes, z, bg) @ a
    return vals


def _transfer_matrices(scene: Scene, level: int, omegas: np.ndarray) -> np.ndarray:
    key = _transfer_key(scene, level, omegas)
    hit = _TRANSFER_CACHE.get(key)
    if hit is not None:
        return hit[1]
    H = _build_transfer(scene, level, omegas)
    if len(_TRANSFER_CACHE) >= _TRANSFER_CACHE_CAP:
        _TRANSFER_CACHE.pop(next(iter(_TRANSFER_CACHE)))
    _TRANSFER_CACHE[key] = (scene, H)
    return H


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------


def default_dt(spectrum: NoiseSpectrum) -> float:
    """Sample step with a 2.5x margin over the band-edge Nyquist rate."""
    return 2.0 * math.pi / (5.0 * (spectrum.omega0 + spectrum.B))


def synth_realization(
    scene: Scene,
    spectrum: NoiseSpectrum,
    schedule: "Optional[SlotSchedule]",
    windows: WindowSpec,
    seed,
    n_slots: int = 2,
    dt: Optional[float] = None,
) -> FieldRecord:
    """One realization of the noise-driven field under the modulation schedule.

    With schedule None the surface stays at level 0 for n_slots slots of
    duration 2*windows.T; the slot tiling, guards, and draws are identical to
    an all-zero schedule, so the outputs coincide for equal seeds.
    """
    seed = _seed_pair(seed)
    if schedule is not None:
        T = schedule.T
        levels = schedule.slot_levels()
        if scene.surface is not None and schedule.rho1 != scene.surface.tunable.rho1:
            raise ValueError(
                "schedule modulation depth %g does not match the scene surface %g"
                % (schedule.rho1, scene.surface.tunable.rho1)
            )
    else:
        T = windows.T
        levels = [0] * n_slots
    if T < 10.0 / spectrum.B:
        raise RegimeError(
            "slot half-duration T = %g is under 10/B = %g; windows cannot "
            "resolve the band" % (T, 10.0 / spectrum.B)
        )

    if dt is None:
        dt = default_dt(spectrum)
    nyq_rate = 2.5 * (spectrum.omega0 + spectrum.B / 2.0) / math.pi
    if 1.0 / dt < nyq_rate:
        raise RegimeError("dt = %g undersamples the band (need <= %g)" % (dt, 1.0 / nyq_rate))

    n_slot_total = len(levels)
    n_guard = int(math.ceil(4.0 * windows.Tprime / dt)) + 1
    idx = [int(round(2.0 * k * T / dt)) for k in range(n_slot_total)]
    idx.append(int(math.ceil(2.0 * n_slot_total * T / dt)))
    n_total = n_guard + idx[-1] + n_guard

    # common FFT length for every slot so the frequency bins (and hence the
    # cached transfer matrices) are shared
    seg_lens = [idx[k + 1] - idx[k] for k in range(n_slot_total)]
    seg_lens[0] += n_guard
    seg_lens[-1] += n_guard
    n_fft = next_fast_len(max(seg_lens) + n_guard)
    domega = 2.0 * math.pi / (n_fft * dt)
    if domega > 2.0 * math.pi / (2.0 * T):
        raise RegimeError("frequency grid coarser than the slot length")

    half = 0.5 * domega
    m_lo = int(math.ceil((spectrum.omega0 - spectrum.B * spectrum.s_max - half) / domega))
    m_hi = int(math.floor((spectrum.omega0 + spectrum.B * spectrum.s_max + half) / domega))
    m_lo = max(m_lo, 1)
    omegas = domega * np.arange(m_lo, m_hi + 1)
    # exact spectral mass per bin cell, not point samples: with only O(BT)
    # bins the band-edge quantization would otherwise bias the total power
    p = spectrum.band_mass(omegas - half, omegas + half)

    # per-(bin, node) source amplitude variance
    weights = scene.shell.weights
    var = p[:, None] * weights[None, :] / (2.0 * math.pi)
    amp = np.sqrt(var / 2.0)

    samples = np.empty((2, n_total), dtype=float)
    start = 0
    for k, level in enumerate(levels):
        H = _transfer_matrices(scene, level, omegas)
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence([seed.master & (2**64 - 1), seed.index, k]))
        )
        z = rng.standard_normal((2, omegas.size, weights.size))
        b = amp * (z[0] + 1j * z[1])
        A = (H * b[None, :, :]).sum(axis=2)                       # (2, n_bins)
        spec_line = np.zeros((2, n_fft // 2 + 1), dtype=complex)
        spec_line[:, m_lo : m_hi + 1] = n_fft * np.conj(A)
        u = np.fft.irfft(spec_line, n=n_fft, axis=1)
        n_seg = seg_lens[k]
        samples[:, start : start + n_seg] = u[:, :n_seg]
        start += n_seg

    bounds = 2.0 * T * np.arange(n_slot_total + 1)
    return FieldRecord(samples=samples, dt=float(dt), t0=-n_guard * dt, slot_bounds=bounds)


def add_measurement_noise(record: FieldRecord, sigma_meas: float, t_meas: float, seed) -> FieldRecord:
    """Add stationary Gaussian sensor noise with covariance sigma^2 e^{-pi (tau/t)^2}.

    The covariance shape has unit integral, so the lag-0 noise variance is
    sigma_meas^2.  Generated spectrally, independently per receiver.
    """
    if sigma_meas < 0:
        raise ValueError("sigma_meas must be >= 0 (was %g)" % sigma_meas)
    if sigma_meas == 0.0:
        return record
    if t_meas < 2.0 * record.dt:
        raise RegimeError(
            "noise correlation time t_meas = %g is under 2 dt = %g; the grid "
            "cannot carry its spectrum" % (t_meas, 2.0 * record.dt)
        )
    n = record.n_samples
    n_f = n // 2 + 1
    omega = 2.0 * math.pi * np.arange(n_f) / (n * record.dt)
    # spectrum of the Gaussian covariance bump under the e^{i w t} transform
    c_hat = sigma_meas**2 * t_meas * np.exp(-((omega * t_meas) ** 2) / (4.0 * math.pi))
    seed = _seed_pair(seed)
    noise = np.empty((2, n), dtype=float)
    for r in range(2):
        rng = np.random.Generator(
            np.random.Philox(
                np.random.SeedSequence([seed.master & (2**64 - 1), seed.index, 0x6E6F, r])
            )
        )
        z = rng.standard_normal((2, n_f))
        coef = np.sqrt(n * c_hat / (2.0 * record.dt)) * (z[0] + 1j * z[1])
        coef[0] = math.sqrt(n * c_hat[0] / record.dt) * z[0, 0]
        if n % 2 == 0:
            coef[-1] = math.sqrt(n * c_hat[-1] / record.dt) * z[0, -1]
        noise[r] = np.fft.irfft(coef, n=n)
    return replace(record, samples=record.samples + noise)
