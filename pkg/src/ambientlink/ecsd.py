"""Empirical cross spectral density of a two-receiver record.

The estimator integrates u(t - tau/2, xr) u(t + tau/2, xrp) e^{i omega tau}
against a sliding time window and a lag window.  Discretely: the lag runs over
grid multiples of dt, the time sum is a plain grid sum (the time window
vanishes at its support ends), and the time window is evaluated analytically
at the half-lag-shifted positions so no sample interpolation occurs.
"""

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from .kernel import WindowSpec
from .synth import FieldRecord

if TYPE_CHECKING:
    from .link import SlotSchedule


@dataclass(frozen=True)
class EcsdSeries:
    """Slot-sequenced ECSD values at the slot centers of a schedule."""

    values: np.ndarray
    centers: np.ndarray
    omega: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        centers = np.asarray(self.centers, dtype=float)
        if values.shape != centers.shape or values.ndim != 1:
            raise ValueError("values and centers must be equal-length vectors")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "centers", centers)

    def __len__(self) -> int:
        return self.values.size

    def save_csv(self, path, comment: str = "") -> None:
        """CSV columns: slot index, center time in s, Re and Im of the ECSD."""
        with open(path, "w") as fh:
            if comment:
                fh.write("# %s\n" % comment)
            fh.write("k,t_center_s,re_S,im_S\n")
            for k in range(len(self)):
                fh.write(
                    "%d,%.17g,%.17g,%.17g\n"
                    % (k, self.centers[k], self.values[k].real, self.values[k].imag)
                )


def load_ecsd_csv(path) -> EcsdSeries:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    # omega is not stored in the CSV; carried as nan until a caller supplies it
    return EcsdSeries(values=rows[:, 2] + 1j * rows[:, 3], centers=rows[:, 1], omega=math.nan)


def _span_check(record: FieldRecord, t_center, T, half_lag):
    need_lo = t_center - T - half_lag
    need_hi = t_center + T + half_lag
    eps = 1e-9 * record.dt
    if need_lo < record.t0 - eps or need_hi > record.t_end + eps:
        pad_lo = max(0.0, record.t0 - need_lo)
        pad_hi = max(0.0, need_hi - record.t_end)
        raise ValueError(
            "window at t_center = %g s needs [%g, %g] but the record covers "
            "[%g, %g]; pad %g s at the start and %g s at the end"
            % (t_center, need_lo, need_hi, record.t0, record.t_end, pad_lo, pad_hi)
        )


def ecsd_at(record: FieldRecord, omega: float, t_center: float, windows: WindowSpec) -> complex:
    """ECSD of the record at one frequency and window position.

    The lag window is truncated at |tau| = 4 Tprime (Gaussian tail < 1.2e-7).
    Refuses when the window plus lag guard leaves the record.
    """
    dt = record.dt
    T, Tp = windows.T, windows.Tprime
    n_lag = int(math.floor(4.0 * Tp / dt))
    _span_check(record, t_center, T, n_lag * dt / 2.0)

    u0, u1 = record.samples
    # union of time-window supports over all lags, in sample indices
    i_lo = max(0, int(math.floor((t_center - T - n_lag * dt / 2.0 - record.t0) / dt)))
    i_hi = min(record.n_samples - 1, int(math.ceil((t_center + T + n_lag * dt / 2.0 - record.t0) / dt)))
    t_rel = record.t0 + dt * np.arange(i_lo, i_hi + 1) - t_center

    total = 0.0 + 0.0j
    for ell in range(-n_lag, n_lag + 1):
        tau = ell * dt
        # clip so both u0[i] and u1[i + ell] stay in range
        lo = max(i_lo, -ell)
        hi = min(i_hi, record.n_samples - 1 - ell)
        if hi < lo:
            continue
        seg = slice(lo, hi + 1)
        w = windows.phi((t_rel[lo - i_lo : hi - i_lo + 1] + tau / 2.0) / T) / T
        corr = np.dot(u0[seg] * w, u1[lo + ell : hi + ell + 1])
        total += corr * windows.psi(tau / Tp) / Tp * np.exp(1j * omega * tau)
    return total * dt * dt


def ecsd_series(record: FieldRecord, schedule: "SlotSchedule", windows: WindowSpec, omega0: float) -> EcsdSeries:
    """ECSD at every slot center of the schedule (centers come from the
    schedule object, not re-derived, so encoder and estimator cannot drift)."""
    centers = schedule.slot_centers()
    values = np.array([ecsd_at(record, omega0, tc, windows) for tc in centers])
    return EcsdSeries(values=values, centers=centers, omega=float(omega0))


def ecsd_psd_diff(record: FieldRecord, omega: float, t_center: float, windows: WindowSpec) -> float:
    """Quarter difference of the sum- and difference-channel auto spectra.

    By polarization this equals Re of the cross ECSD; both sides are computed
    and their agreement is asserted to 1e-10 relative.
    """
    s = record.samples[0] + record.samples[1]
    d = record.samples[0] - record.samples[1]
    s_sum = ecsd_at(replace(record, samples=np.stack([s, s])), omega, t_center, windows)
    s_diff = ecsd_at(replace(record, samples=np.stack([d, d])), omega, t_center, windows)
    value = 0.25 * (s_sum.real - s_diff.real)
    direct = ecsd_at(record, omega, t_center, windows).real
    scale = max(abs(direct), abs(value), 1e-300)
    if abs(value - direct) > 1e-10 * scale:
        raise AssertionError(
            "polarization identity violated: psd_diff = %g vs Re ecsd = %g" % (value, direct)
        )
    return value
