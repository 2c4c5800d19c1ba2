"""Binary messaging over the tunable surface: schedules, decoding, BER runs.

A bit k occupies two slots of duration 2T: the first at level 0 (reference),
the second at level delta_k.  The decoder differences consecutive slot ECSDs,
estimates the per-one-bit signature from the known preamble, projects, and
thresholds at 1/2.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .kernel import RegimeWarning, snr_budget
from .ecsd import EcsdSeries, ecsd_series
from .synth import RealizationSeed, add_measurement_noise, default_dt, synth_realization

DEFAULT_PREAMBLE: Tuple[int, ...] = (1,) * 8


class UnreliableSignatureError(RuntimeError):
    """Raised when the estimated signature is within 5x of the noise floor."""

    def __init__(self, snr: float):
        super().__init__(
            "signature magnitude is only %.2f times the estimated noise floor "
            "(need >= 5)" % snr
        )
        self.snr = snr


@dataclass(frozen=True)
class SlotSchedule:
    """Step-wise modulation of the surface's imaginary reflectivity.

    bits includes the preamble: the first `preamble` entries are known to the
    receiver.  Slot 2k runs [4kT, (4k+2)T] at level 0, slot 2k+1 runs
    [(4k+2)T, (4k+4)T] at level bits[k].
    """

    bits: Tuple[int, ...]
    T: float
    rho1: float
    preamble: int = 0

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if len(bits) < 1:
            raise ValueError("schedule needs at least one bit")
        if any(b not in (0, 1) for b in bits):
            raise ValueError("bits must be 0 or 1")
        if self.T <= 0:
            raise ValueError("T must be positive (was %g)" % self.T)
        if self.rho1 < 0:
            raise ValueError("rho1 must be >= 0 (was %g)" % self.rho1)
        if not 0 <= self.preamble <= len(bits):
            raise ValueError("preamble length %d out of range" % self.preamble)
        object.__setattr__(self, "bits", bits)

    @property
    def K(self) -> int:
        return len(self.bits)

    @property
    def duration(self) -> float:
        return 4.0 * self.K * self.T

    @property
    def rate(self) -> float:
        return 1.0 / (4.0 * self.T)

    @property
    def payload(self) -> Tuple[int, ...]:
        return self.bits[self.preamble :]

    def slot_levels(self) -> list:
        levels = []
        for b in self.bits:
            levels.extend((0, b))
        return levels

    def slot_bounds(self) -> np.ndarray:
        return 2.0 * self.T * np.arange(2 * self.K + 1)

    def slot_centers(self) -> np.ndarray:
        return (2.0 * np.arange(2 * self.K) + 1.0) * self.T

    def im_rho(self, t):
        """Imaginary reflectivity as a function of time; 0 outside the schedule."""
        t = np.asarray(t, dtype=float)
        slot = np.floor(t / (2.0 * self.T)).astype(int)
        inside = (t >= 0) & (slot < 2 * self.K)
        odd = inside & (slot % 2 == 1)
        out = np.zeros(t.shape)
        bit_idx = np.clip(slot // 2, 0, self.K - 1)
        out[odd] = self.rho1 * np.asarray(self.bits)[bit_idx[odd]]
        return out if out.ndim else float(out)


def encode(bits: Sequence[int], rho1: float, T: float, preamble: int = 8) -> SlotSchedule:
    """Prefix `preamble` known one-bits and lay the message onto slot pairs."""
    payload = tuple(int(b) for b in bits)
    if len(payload) < 1:
        raise ValueError("message must contain at least one bit")
    if preamble < 0:
        raise ValueError("preamble length must be >= 0")
    return SlotSchedule(bits=(1,) * preamble + payload, T=T, rho1=rho1, preamble=preamble)


def delta_series(series: EcsdSeries) -> np.ndarray:
    """Difference of each modulated-slot ECSD against its reference slot."""
    n = len(series)
    if n % 2 != 0:
        raise ValueError("series length %d is odd; slots must come in pairs" % n)
    return series.values[1::2] - series.values[0::2]


@dataclass(frozen=True)
class DecodeResult:
    bits: Tuple[int, ...]
    deltas: np.ndarray
    signature: complex
    margins: np.ndarray
    preamble: int
    preamble_errors: int
    snr: float

    @property
    def payload(self) -> Tuple[int, ...]:
        return self.bits[self.preamble :]

    def save_csv(self, path, comment: str = "") -> None:
        with open(path, "w") as fh:
            if comment:
                fh.write("# %s\n" % comment)
            fh.write("k,re_delta,im_delta,margin,bit\n")
            for k in range(len(self.bits)):
                fh.write(
                    "%d,%.17g,%.17g,%.17g,%d\n"
                    % (k, self.deltas[k].real, self.deltas[k].imag, self.margins[k], self.bits[k])
                )


def decode(
    series: EcsdSeries,
    mode: str = "complex",
    preamble_bits: Optional[Sequence[int]] = None,
    enforce_floor: bool = True,
) -> DecodeResult:
    """Signature-projection decoding of a slot-paired ECSD series.

    The noise floor comes from the sample variance of the reference-slot
    values inside the preamble.  enforce_floor=False skips the reliability
    gate (used by BER experiments that deliberately run weak links).
    """
    if mode not in ("complex", "psd_diff"):
        raise ValueError("mode must be 'complex' or 'psd_diff' (was %r)" % mode)
    if preamble_bits is None:
        preamble_bits = DEFAULT_PREAMBLE
    preamble_bits = tuple(int(b) for b in preamble_bits)
    values = series.values.real.astype(complex) if mode == "psd_diff" else series.values
    deltas = delta_series(EcsdSeries(values=values, centers=series.centers, omega=series.omega))
    K = deltas.size
    P = len(preamble_bits)
    if P > K:
        raise ValueError("preamble of %d bits exceeds the %d-bit series" % (P, K))
    ones = [k for k in range(P) if preamble_bits[k] == 1]
    if not ones:
        raise ValueError("preamble must contain at least one 1-bit")

    g = complex(np.mean(deltas[ones]))
    ref = values[0 : 2 * P : 2]
    if ref.size >= 2:
        var_ref = float(np.mean(np.abs(ref - np.mean(ref)) ** 2) * ref.size / (ref.size - 1))
    else:
        var_ref = 0.0
    floor = math.sqrt(2.0 * var_ref / len(ones))
    snr = abs(g) / floor if floor > 0 else math.inf
    if g == 0:
        raise UnreliableSignatureError(0.0)
    if enforce_floor and snr < 5.0:
        raise UnreliableSignatureError(snr)

    margins = np.real(deltas * np.conj(g)) / abs(g) ** 2
    bits = tuple(int(m > 0.5) for m in margins)
    preamble_errors = sum(1 for k in range(P) if bits[k] != preamble_bits[k])
    return DecodeResult(
        bits=bits,
        deltas=deltas,
        signature=g,
        margins=margins,
        preamble=P,
        preamble_errors=preamble_errors,
        snr=snr,
    )


def angle_of(scene) -> float:
    """Angle between the receiver axis and the sight line to the array center."""
    return scene.alpha()


def wilson_interval(errors: int, n: int, z: float = 1.96) -> Tuple[float, float]:
    """95% score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need n > 0")
    p = errors / n
    denom = 1.0 + z**2 / n
    center = (p + z**2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class BerStats:
    n_trials: int
    n_payload_bits: int
    n_errors: int
    ber: float
    wilson_low: float
    wilson_high: float
    snr_predicted: float
    margins: np.ndarray = field(repr=False, default=None)


def _ber_trial(config, n_bits: int, master: int, trial: int):
    from .config import build_scene, build_spectrum, build_windows

    scene = build_scene(config)
    spectrum = build_spectrum(config)
    win = build_windows(config)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([master, 0xB175, trial])))
    payload = rng.integers(0, 2, size=n_bits)
    schedule = encode(payload, rho1=config.rho1, T=win.T, preamble=config.preamble)
    dt = None
    if config.sigma_meas > 0:
        # the record grid must resolve the noise correlation time
        dt = min(default_dt(spectrum), config.resolved_t_meas() / 2.0)
    record = synth_realization(
        scene, spectrum, schedule, win, RealizationSeed(master=master, index=trial), dt=dt
    )
    if config.sigma_meas > 0:
        record = add_measurement_noise(
            record, config.sigma_meas, config.resolved_t_meas(),
            RealizationSeed(master=master ^ 0x5EED, index=trial),
        )
    series = ecsd_series(record, schedule, win, spectrum.omega0)
    result = decode(
        series, mode="complex", preamble_bits=schedule.bits[: schedule.preamble],
        enforce_floor=False,
    )
    errors = sum(1 for a, b in zip(result.payload, payload) if a != b)
    return errors, n_bits, result.margins[schedule.preamble :]


def run_ber(config, n_bits: int, n_trials: int, seed: int, workers: int = 1) -> BerStats:
    """Monte Carlo bit error rate of the end-to-end link.

    Feasibility (predicted ECSD signal over noise >= 3) is advisory: the run
    proceeds under a warning so that null and weak-link experiments remain
    possible, and the reliability gate inside decode is bypassed for the same
    reason.  Deterministic for fixed (config, seed) and any worker count.
    """
    from .config import build_scene, build_spectrum, build_windows

    if n_bits < 1 or n_trials < 1:
        raise ValueError("need n_bits >= 1 and n_trials >= 1")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        try:
            budget = snr_budget(
                build_scene(config), build_spectrum(config), build_windows(config), config.rho1
            )
            snr = budget.snr_ratio
        except ValueError:
            snr = 0.0
    if snr < 3.0:
        warnings.warn(
            "predicted signal-to-fluctuation ratio %.2f is under 3; BER will be poor" % snr,
            RegimeWarning,
            stacklevel=2,
        )

    master = int(seed) & (2**64 - 1)
    results = []
    if workers > 1:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_ber_trial, config, n_bits, master, t) for t in range(n_trials)]
            results = [f.result() for f in futs]
    else:
        results = [_ber_trial(config, n_bits, master, t) for t in range(n_trials)]

    errors = sum(r[0] for r in results)
    total = sum(r[1] for r in results)
    lo, hi = wilson_interval(errors, total)
    margins = np.concatenate([r[2] for r in results])
    return BerStats(
        n_trials=n_trials,
        n_payload_bits=total,
        n_errors=errors,
        ber=errors / total,
        wilson_low=lo,
        wilson_high=hi,
        snr_predicted=snr,
        margins=margins,
    )
